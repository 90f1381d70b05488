"""Session-search learning-to-rank toolkit.

Filters a web-page corpus, scores query-document pairs with BM25 / TF-IDF /
F1EXP, extracts feature vectors, trains a LambdaMART ensemble on NDCG@k
lambda gradients, and reranks session queries into TREC run files.
"""

__version__ = "0.1.0"
