"""Retrieval classifier: majority vote over the k nearest training rows."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataset import DecisionVector
from ..embed import EmbeddingMatrix
from ..errors import AlignmentError, DimensionMismatchError, SizeError
from ..simindex import search_queries


@dataclass
class KnnClassifier:
    """k-NN over a fixed reference embedding matrix with binary labels."""

    k: int = 5
    metric: str = "cosine"
    reference: np.ndarray | None = field(default=None, repr=False)
    labels: np.ndarray | None = field(default=None, repr=False)
    reference_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")

    def fit(self, matrix: EmbeddingMatrix, decisions: DecisionVector) -> "KnnClassifier":
        if matrix.index_order != decisions.index_order:
            raise AlignmentError("reference matrix and labels are not aligned on the same ids")
        self.reference = matrix.data
        self.labels = decisions.values
        self.reference_ids = matrix.index_order
        return self


def knn_predict(clf: KnnClassifier, queries: EmbeddingMatrix) -> DecisionVector:
    """Majority vote among the k nearest training rows for each query.

    A tied vote (possible only for even k) is broken by the single nearest
    neighbor's label. A query identical to a training row retrieves that row
    itself, so with k=1 it returns the row's own label.
    """
    if clf.reference is None or clf.labels is None:
        raise SizeError("classifier has no reference data; call fit first")
    if queries.dim != clf.reference.shape[1]:
        raise DimensionMismatchError(clf.reference.shape[1], queries.dim, "embedding width")
    if clf.reference.shape[0] < clf.k:
        raise SizeError(
            f"need at least k={clf.k} training rows, have {clf.reference.shape[0]}"
        )
    neighbors, _ = search_queries(queries.data, clf.reference, clf.k, clf.metric)
    votes = clf.labels[neighbors]
    ones = votes.sum(axis=1)
    predictions = np.where(
        ones * 2 == clf.k, votes[:, 0], (ones * 2 > clf.k).astype(np.int64)
    )
    return DecisionVector("model:knn", predictions, queries.index_order)
