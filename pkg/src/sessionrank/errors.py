"""Exception hierarchy shared by all sessionrank modules.

Every error raised on bad data or misuse derives from SessionRankError so
the CLI can map them to a single "data error" exit code.
"""


class SessionRankError(Exception):
    """Base class for all sessionrank errors."""


class MalformedLine(SessionRankError):
    """A line of an input file does not follow the expected grammar."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class DuplicateSessionId(SessionRankError):
    pass


class DuplicateDocId(SessionRankError):
    pass


class UnreadableSource(SessionRankError):
    pass


class EmptyCorpus(SessionRankError):
    pass


class EmptyCandidateSet(SessionRankError):
    pass


class UnparseableDocId(SessionRankError):
    pass


class MalformedFeatureLine(SessionRankError):
    def __init__(self, line_no: int, reason: str = "malformed feature line"):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class LengthMismatch(SessionRankError):
    pass


class SchemaMismatch(SessionRankError):
    pass


class NoTrainablePairs(SessionRankError):
    pass


class DegenerateInput(SessionRankError):
    pass


class UnsupportedVersion(SessionRankError):
    pass


class CorruptModel(SessionRankError):
    pass


class EmptyRun(SessionRankError):
    pass


class IndexOutOfRange(SessionRankError):
    pass
