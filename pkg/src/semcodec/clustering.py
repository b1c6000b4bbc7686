"""Deterministic k-means over class embedding vectors, plus balance stats.

Seeding follows the D^2-weighted scheme: the first centroid is a
uniformly drawn point, each later one is drawn with probability
proportional to its squared distance to the nearest centroid chosen so
far.  All randomness comes from the portable generator in `rng`, so an
(embeddings, k, seed) triple always yields the same clustering on a
given platform.  Lloyd iterations stop at an assignment fixpoint or
after 300 rounds; distance ties resolve to the lower cluster index, and
a cluster that loses all members seizes the point farthest from its own
centroid, which never increases the total squared error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import KExceedsN, ZeroVector
from .rng import SplitMix64
from .taxonomy import Clustering

MAX_ITER = 300


@dataclass(frozen=True)
class EmbeddingSet:
    """N labelled embedding vectors as an (N, D) float matrix."""

    labels: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != len(self.labels):
            raise ValueError("vectors must be (N, D) with one row per label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be unique")
        object.__setattr__(self, "vectors", v)


@dataclass(frozen=True)
class BalanceReport:
    sizes: tuple[int, ...]
    normalized_entropy: float
    max_share: float


def normalize(e: EmbeddingSet) -> EmbeddingSet:
    """Scale every row to unit Euclidean norm."""
    norms = np.sqrt((e.vectors * e.vectors).sum(axis=1))
    for i, n in enumerate(norms):
        if n == 0.0:
            raise ZeroVector(f"row {i} ('{e.labels[i]}') has zero norm")
    return EmbeddingSet(labels=e.labels, vectors=e.vectors / norms[:, None])


def kmeans(e: EmbeddingSet, k: int, seed: int, max_iter: int = MAX_ITER) -> Clustering:
    """Cluster the embedding rows into k groups.

    Cluster indices are densely relabelled by each cluster's smallest
    member label, so the result does not depend on internal centroid
    numbering.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = e.vectors.shape[0]
    if k > n:
        raise KExceedsN(f"k={k} exceeds {n} points")
    points = e.vectors

    gen = SplitMix64(seed)
    centroids = _seed_centroids(points, k, gen)
    assign = _assign(points, centroids)
    prev_sse = math.inf
    for _ in range(max_iter):
        centroids, assign = _recompute(points, assign, centroids, k)
        cur_sse = float(((points - centroids[assign]) ** 2).sum())
        assert cur_sse <= prev_sse + 1e-9, "squared error increased"
        prev_sse = cur_sse
        new_assign = _assign(points, centroids)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign

    return _relabel(e.labels, assign)


def balance(c: Clustering) -> BalanceReport:
    """Cluster sizes, normalized entropy and largest-cluster share.

    Normalized entropy is H(sizes/N) / log k, defined as 1.0 for k = 1.
    """
    sizes = tuple(c.sizes())
    n = sum(sizes)
    max_share = max(sizes) / n
    if c.k == 1:
        return BalanceReport(sizes=sizes, normalized_entropy=1.0, max_share=max_share)
    h = -sum((s / n) * math.log(s / n) for s in sizes if s > 0)
    return BalanceReport(
        sizes=sizes,
        normalized_entropy=h / math.log(c.k),
        max_share=max_share,
    )


def sse(e: EmbeddingSet, c: Clustering) -> float:
    """Total squared distance of each point to its cluster mean."""
    index = {label: i for i, label in enumerate(e.labels)}
    total = 0.0
    for members in c.members():
        pts = e.vectors[[index[m] for m in members]]
        mean = pts.mean(axis=0)
        total += float(((pts - mean) ** 2).sum())
    return total


def _seed_centroids(points: np.ndarray, k: int, gen: SplitMix64) -> np.ndarray:
    n = points.shape[0]
    first = gen.next_below(n)
    centroids = [points[first]]
    d2 = ((points - points[first]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = gen.next_below(n)
        else:
            # cumulative walk over D^2 weights; u*total lands in one slot
            target = gen.next_double() * total
            cum = np.cumsum(d2)
            idx = int(np.searchsorted(cum, target, side="right"))
            if idx >= n:
                idx = n - 1
        centroids.append(points[idx])
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return np.stack(centroids)


def _assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # ||p-c||^2 expanded; argmin takes the lowest index on ties
    d2 = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * points @ centroids.T
        + (centroids * centroids).sum(axis=1)[None, :]
    )
    return np.argmin(d2, axis=1)


def _recompute(
    points: np.ndarray, assign: np.ndarray, old: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray]:
    centroids = old.copy()
    counts = np.bincount(assign, minlength=k)
    for c in range(k):
        if counts[c] > 0:
            centroids[c] = points[assign == c].mean(axis=0)
    # an emptied cluster seizes the point farthest from its own centroid
    for c in range(k):
        if counts[c] == 0:
            dist = ((points - centroids[assign]) ** 2).sum(axis=1)
            victim = int(np.argmax(dist))
            centroids[c] = points[victim]
            assign = assign.copy()
            assign[victim] = c
            counts = np.bincount(assign, minlength=k)
    return centroids, assign


def _relabel(labels: tuple[str, ...], assign: np.ndarray) -> Clustering:
    by_cluster: dict[int, list[str]] = {}
    for label, c in zip(labels, assign):
        by_cluster.setdefault(int(c), []).append(label)
    ordered = sorted(by_cluster.values(), key=min)
    assignment = {
        label: idx for idx, members in enumerate(ordered) for label in members
    }
    return Clustering(assignment=assignment, k=len(ordered))
