/** Typed failures shared across the harness. */

export class ParseError extends Error {
  constructor(
    readonly lineNo: number,
    reason: string,
  ) {
    super(`line ${lineNo}: ${reason}`);
    this.name = 'ParseError';
  }
}

export class MissingAsqRowError extends Error {
  constructor(readonly groupKey: string) {
    super(`no ASQ row for group ${groupKey}`);
    this.name = 'MissingAsqRowError';
  }
}

export class NoHeldOutGroupsError extends Error {
  constructor() {
    super('checkpoint selection needs at least one held-out group');
    this.name = 'NoHeldOutGroupsError';
  }
}
