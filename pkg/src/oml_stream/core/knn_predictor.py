"""
Neighbor memory D and k-nearest-neighbor prediction.

The store keeps raw features, labels and the label-space projections
w = P^T x (P is frozen, so these never go stale). Embeddings V^T w are
cached per metric version and extended incrementally as rows are appended.
"""

import logging
from collections.abc import Sequence
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from oml_stream.core.projection import ProjectionP, project_instance
from oml_stream.exceptions import QueryError, ShapeError, StoreStateError
from oml_stream.models.schemas import TrainNNMetric

if TYPE_CHECKING:
    from oml_stream.core.metric_learner import MetricV

logger = logging.getLogger(__name__)

_INITIAL_CAPACITY = 64


class Neighbor(NamedTuple):
    """One query result."""

    labels: np.ndarray
    distance: float
    index: int


class NearestEntry(NamedTuple):
    """Training-time nearest neighbor (x, y) and its position in D."""

    features: np.ndarray
    labels: np.ndarray
    index: int


class NeighborStore:
    """Append-only (optionally FIFO-capped) example memory with cached projections."""

    def __init__(
        self,
        p: int,
        q: int,
        projection: ProjectionP | None = None,
        max_size: int | None = None,
    ) -> None:
        if projection is not None and (projection.p, projection.q) != (p, q):
            raise ShapeError(
                "projection shape does not match store dims",
                expected=[p, q],
                actual=[projection.p, projection.q],
            )
        if max_size is not None and max_size < 1:
            raise StoreStateError(f"max_size must be >= 1, got {max_size}")
        self.p = p
        self.q = q
        self.projection = projection
        self.max_size = max_size
        self._size = 0
        self._X = np.empty((_INITIAL_CAPACITY, p), dtype=np.float64)
        self._Y = np.empty((_INITIAL_CAPACITY, q), dtype=np.int8)
        self._W = np.empty((_INITIAL_CAPACITY, q), dtype=np.float64)
        self._embed: np.ndarray | None = None
        self._embed_token: int | None = None
        self._embed_rows = 0
        self.evicted = 0

    def __len__(self) -> int:
        return self._size

    @property
    def features(self) -> np.ndarray:
        return self._X[: self._size]

    @property
    def labels(self) -> np.ndarray:
        return self._Y[: self._size]

    @property
    def projections(self) -> np.ndarray:
        """Cached w = P^T x per entry."""
        if self.projection is None:
            raise StoreStateError("store has no projection; raw-feature store")
        return self._W[: self._size]

    def _grow(self) -> None:
        capacity = 2 * self._X.shape[0]
        for name in ("_X", "_Y", "_W"):
            old = getattr(self, name)
            new = np.empty((capacity, old.shape[1]), dtype=old.dtype)
            new[: self._size] = old[: self._size]
            setattr(self, name, new)
        if self._embed is not None:
            new_embed = np.empty((capacity, self._embed.shape[1]), dtype=np.float64)
            new_embed[: self._embed_rows] = self._embed[: self._embed_rows]
            self._embed = new_embed

    def _evict_oldest(self) -> None:
        n = self._size
        self._X[: n - 1] = self._X[1:n]
        self._Y[: n - 1] = self._Y[1:n]
        self._W[: n - 1] = self._W[1:n]
        if self._embed is not None and self._embed_rows > 0:
            self._embed[: self._embed_rows - 1] = self._embed[1 : self._embed_rows]
            self._embed_rows -= 1
        self._size -= 1
        self.evicted += 1

    def append(self, x: np.ndarray, y: np.ndarray) -> None:
        """Append one example, evicting the oldest entry when at max_size."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y)
        if x.shape != (self.p,) or y.shape != (self.q,):
            raise ShapeError(
                "example does not match store dims",
                expected=[self.p, self.q],
                actual=[list(x.shape), list(y.shape)],
            )
        if self.max_size is not None and self._size >= self.max_size:
            self._evict_oldest()
        if self._size == self._X.shape[0]:
            self._grow()
        i = self._size
        self._X[i] = x
        self._Y[i] = y
        if self.projection is not None:
            self._W[i] = project_instance(self.projection, x)
        self._size += 1

    def extend(self, X: np.ndarray, Y: np.ndarray) -> None:
        """Append rows in order."""
        for x, y in zip(X, Y, strict=True):
            self.append(x, y)

    def embeddings(self, V: "MetricV") -> np.ndarray:
        """V^T w for every entry, cached for V's version."""
        if self.projection is None:
            raise StoreStateError("learned-metric queries need a projection")
        if V.matrix.shape[0] != self.q:
            raise ShapeError(
                "metric V does not match label dimension",
                expected=self.q,
                actual=list(V.matrix.shape),
            )
        d = V.matrix.shape[1]
        if self._embed_token != V.version or self._embed is None or self._embed.shape[1] != d:
            self._embed = np.empty((self._X.shape[0], d), dtype=np.float64)
            self._embed_rows = 0
            self._embed_token = V.version
        if self._embed_rows < self._size:
            start = self._embed_rows
            self._embed[start : self._size] = self._W[start : self._size] @ V.matrix
            self._embed_rows = self._size
        return self._embed[: self._size]

    def copy(self) -> "NeighborStore":
        """Independent snapshot for read-only querying."""
        clone = NeighborStore(self.p, self.q, self.projection, self.max_size)
        clone._X = self._X.copy()
        clone._Y = self._Y.copy()
        clone._W = self._W.copy()
        clone._size = self._size
        clone.evicted = self.evicted
        return clone


def _squared_row_norms(diff: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", diff, diff)


def learned_distance(V: "MetricV", w_i: np.ndarray, w_j: np.ndarray) -> float:
    """(w_i - w_j)^T V V^T (w_i - w_j), computed as ||V^T (w_i - w_j)||^2."""
    w_i = np.asarray(w_i, dtype=np.float64)
    w_j = np.asarray(w_j, dtype=np.float64)
    q = V.matrix.shape[0]
    if w_i.shape != (q,) or w_j.shape != (q,):
        raise ShapeError(
            "codewords must have length q", expected=q, actual=[w_i.shape, w_j.shape]
        )
    z = V.matrix.T @ (w_i - w_j)
    return float(z @ z)


def _learned_distances(store: NeighborStore, V: "MetricV", x: np.ndarray) -> np.ndarray:
    embedded = store.embeddings(V)
    e = V.matrix.T @ project_instance(store.projection, x)  # type: ignore[arg-type]
    return _squared_row_norms(embedded - e)


def _raw_distances(store: NeighborStore, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (store.p,):
        raise ShapeError("query length does not match p", expected=store.p, actual=list(x.shape))
    return _squared_row_norms(store.features - x)


def nearest_neighbor_train(
    store: NeighborStore,
    x_t: np.ndarray,
    mode: TrainNNMetric,
    V: "MetricV | None" = None,
) -> NearestEntry:
    """Nearest entry to x_t; ties resolve to the lowest index."""
    if len(store) == 0:
        raise StoreStateError("nearest neighbor requested from an empty store")
    if mode == TrainNNMetric.EUCLIDEAN_RAW:
        distances = _raw_distances(store, x_t)
    else:
        if V is None:
            raise StoreStateError("learned nearest neighbor needs the current V")
        distances = _learned_distances(store, V, x_t)
    index = int(np.argmin(distances))
    return NearestEntry(store.features[index], store.labels[index], index)


def knn_query(
    store: NeighborStore, V: "MetricV | None", x: np.ndarray, k: int
) -> list[Neighbor]:
    """
    The k entries closest to x, ascending by distance, ties by index.

    With ``V=None`` distances are squared Euclidean on raw features (the
    baseline); otherwise the learned distance on cached embeddings.
    """
    if k < 1 or k > len(store):
        raise QueryError(
            f"k={k} outside [1, {len(store)}] for the current store",
            details={"k": k, "store_size": len(store)},
        )
    distances = _raw_distances(store, x) if V is None else _learned_distances(store, V, x)
    order = np.argsort(distances, kind="stable")[:k]
    labels = store.labels
    return [Neighbor(labels[i], float(distances[i]), int(i)) for i in order]


def aggregate_labels(
    neighbors: Sequence[np.ndarray] | np.ndarray, threshold: float = 0.5
) -> np.ndarray:
    """Label j is predicted iff the mean neighbor vote at j is >= threshold."""
    votes = np.asarray(neighbors)
    if votes.size == 0 or votes.ndim != 2 or votes.shape[0] == 0:
        raise QueryError("cannot aggregate an empty neighbor list")
    return (votes.mean(axis=0) >= threshold).astype(np.int8)


def predict(
    store: NeighborStore,
    V: "MetricV | None",
    x: np.ndarray,
    k: int,
    threshold: float = 0.5,
) -> np.ndarray:
    """knn_query followed by majority-style aggregation."""
    neighbors = knn_query(store, V, x, k)
    return aggregate_labels([nb.labels for nb in neighbors], threshold)
