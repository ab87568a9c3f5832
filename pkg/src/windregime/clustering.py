"""K-means weather-pattern discovery and cluster diagnostics.

Implements Lloyd's algorithm from scratch with k-means++ seeding and
restarts (kept deliberately dependency-free: clustering is the core of the
workflow, not plumbing). Also provides the three elbow heuristics used to
pick the cluster count (mean distance to centroid, mean within-cluster
Pearson correlation, silhouette score) and day-to-day transition-matrix
diagnostics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .datamodel import WeatherDataset, dataset_features
from .errors import ValidationError

DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-6
DEFAULT_N_INIT = 10


@dataclass(frozen=True, eq=False)
class ClusterModel:
    """A fitted k-means partition.

    ``representative_idx[i]`` is the index of the real datapoint nearest
    (squared Euclidean) to centroid i among that cluster's members; this is
    the condition that gets simulated for the cluster. ``inertia_history``
    records inertia after each assignment step of the winning restart and
    is non-increasing.
    """

    k: int
    centroids: np.ndarray  # (k, d) float64
    labels: np.ndarray  # (n,) int64
    counts: np.ndarray  # (k,) int64
    representative_idx: np.ndarray  # (k,) int64
    inertia: float
    iterations_run: int
    seed: int
    channels: tuple[str, ...]
    inertia_history: tuple[float, ...]

    def __post_init__(self) -> None:
        centroids = np.ascontiguousarray(self.centroids, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        rep = np.ascontiguousarray(self.representative_idx, dtype=np.int64)
        for a in (centroids, labels, counts, rep):
            a.setflags(write=False)
        if centroids.shape[0] != self.k or counts.shape != (self.k,) or rep.shape != (self.k,):
            raise ValidationError("centroids/counts/representative_idx must have k rows")
        if labels.min(initial=0) < 0 or labels.max(initial=0) >= self.k:
            raise ValidationError("labels must be in [0, k)")
        if counts.sum() != labels.size:
            raise ValidationError("cluster counts must sum to the number of datapoints")
        object.__setattr__(self, "centroids", centroids)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "representative_idx", rep)


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = X[first]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            idx = int(rng.integers(n))
        centers[c] = X[idx]
        closest = np.minimum(closest, ((X - centers[c]) ** 2).sum(axis=1))
    return centers


def _assign(X: np.ndarray, centers: np.ndarray, x_norms: np.ndarray):
    # ||x - c||^2 = ||x||^2 - 2 x.c + ||c||^2, argmin ties -> lowest index
    d2 = x_norms[:, None] - 2.0 * (X @ centers.T) + (centers**2).sum(axis=1)[None, :]
    np.maximum(d2, 0.0, out=d2)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(X.shape[0]), labels].sum())
    return labels, inertia


def _fix_empty_clusters(X: np.ndarray, centers: np.ndarray, labels: np.ndarray, k: int) -> None:
    # Keep k clusters populated: hand the point currently farthest from its
    # centroid to each empty cluster (never draining a cluster to zero).
    counts = np.bincount(labels, minlength=k)
    empties = np.nonzero(counts == 0)[0]
    if empties.size == 0:
        return
    d2 = ((X - centers[labels]) ** 2).sum(axis=1)
    for e in empties:
        order = np.argsort(-d2, kind="stable")
        for idx in order:
            src = labels[idx]
            if counts[src] >= 2:
                labels[idx] = e
                counts[src] -= 1
                counts[e] += 1
                d2[idx] = -np.inf  # taken
                break


def _means(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    onehot = np.zeros((X.shape[0], k), dtype=np.float64)
    onehot[np.arange(X.shape[0]), labels] = 1.0
    return (onehot.T @ X) / onehot.sum(axis=0)[:, None]


def _lloyd(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int, tol: float):
    """One k-means run. Returns (labels, centers, inertia, history, iters).

    ``history`` records the cost of each pure assignment step and is
    non-increasing. At termination labels are the nearest-centroid
    assignment against the returned centers (up to rare empty-cluster
    repairs, which keep every cluster populated).
    """
    x_norms = (X**2).sum(axis=1)
    centers = _kmeanspp_init(X, k, rng)
    labels, inertia = _assign(X, centers, x_norms)
    history = [inertia]
    _fix_empty_clusters(X, centers, labels, k)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        centers = _means(X, labels, k)
        new_labels, new_inertia = _assign(X, centers, x_norms)
        history.append(new_inertia)
        _fix_empty_clusters(X, centers, new_labels, k)
        converged = (new_labels == labels).all() or inertia - new_inertia <= tol * inertia
        labels, inertia = new_labels, new_inertia
        if converged:
            break
    # cost of the configuration actually returned (differs from the last
    # recorded assignment cost only if an empty-cluster repair fired)
    final_inertia = float(((X - centers[labels]) ** 2).sum())
    return labels.astype(np.int64), centers, final_inertia, tuple(history), iterations


def kmeans_features(
    X: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    n_init: int = DEFAULT_N_INIT,
):
    """Best-of-``n_init`` k-means on a raw feature matrix.

    Returns (labels, centroids, inertia, inertia_history, iterations).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ValidationError("cannot cluster an empty dataset")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValidationError(f"k={k} exceeds the number of datapoints n={n}")
    if max_iter < 1:
        raise ValidationError(f"max_iter must be >= 1, got {max_iter}")
    if tol < 0:
        raise ValidationError(f"tol must be >= 0, got {tol}")
    best = None
    for ss in np.random.SeedSequence(seed).spawn(n_init):
        rng = np.random.default_rng(ss)
        result = _lloyd(X, k, rng, max_iter, tol)
        if best is None or result[2] < best[2]:
            best = result
    return best


def kmeans_fit(
    ds: WeatherDataset,
    channels,
    k: int,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    n_init: int = DEFAULT_N_INIT,
) -> ClusterModel:
    """Cluster the dataset's daily fields on the given channels.

    Features are the raw concatenated channel values (no scaling); the
    partition is the best of ``n_init`` k-means++ restarts derived
    deterministically from ``seed``.
    """
    channels = tuple(channels)
    X = dataset_features(ds, channels)
    labels, centroids, inertia, history, iterations = kmeans_features(
        X, k, seed=seed, max_iter=max_iter, tol=tol, n_init=n_init
    )
    counts = np.bincount(labels, minlength=k)
    rep = _nearest_per_cluster(X, labels, centroids, k)
    return ClusterModel(
        k=k,
        centroids=centroids,
        labels=labels,
        counts=counts,
        representative_idx=rep,
        inertia=inertia,
        iterations_run=iterations,
        seed=seed,
        channels=channels,
        inertia_history=history,
    )


def _nearest_per_cluster(X, labels, centroids, k) -> np.ndarray:
    rep = np.empty(k, dtype=np.int64)
    for i in range(k):
        members = np.nonzero(labels == i)[0]
        if members.size == 0:
            raise ValidationError(f"cluster {i} has no members")
        d2 = ((X[members] - centroids[i]) ** 2).sum(axis=1)
        rep[i] = members[int(np.argmin(d2))]  # argmin keeps the earliest on ties
    return rep


def nearest_datapoint(model: ClusterModel, ds: WeatherDataset) -> np.ndarray:
    """Per cluster, the member datapoint index closest to the centroid.

    Ties are broken by the lowest time index.
    """
    X = dataset_features(ds, model.channels)
    if X.shape[0] != model.labels.size:
        raise ValidationError("model was not fit on this dataset (size mismatch)")
    return _nearest_per_cluster(X, model.labels, model.centroids, model.k)


def assign_labels(model: ClusterModel, ds: WeatherDataset) -> np.ndarray:
    """Nearest-centroid labels for (possibly new) datapoints."""
    X = dataset_features(ds, model.channels)
    labels, _ = _assign(X, model.centroids, (X**2).sum(axis=1))
    return labels.astype(np.int64)


@dataclass(frozen=True)
class ElbowReport:
    """Per-k cluster-quality heuristics over a scanned k range.

    ``silhouette`` entries are None for k = 1, where the score is
    undefined.
    """

    k_values: tuple[int, ...]
    avg_distance: tuple[float, ...]
    avg_correlation: tuple[float, ...]
    silhouette: tuple[float | None, ...]

    def __post_init__(self) -> None:
        for s in self.silhouette:
            if s is not None and not -1.0 - 1e-12 <= s <= 1.0 + 1e-12:
                raise ValidationError(f"silhouette {s} outside [-1, 1]")
        for c in self.avg_correlation:
            if not -1.0 - 1e-12 <= c <= 1.0 + 1e-12:
                raise ValidationError(f"avg_correlation {c} outside [-1, 1]")
        if any(d < 0 for d in self.avg_distance):
            raise ValidationError("avg_distance must be >= 0")


def average_distance(X: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    """Mean Euclidean distance of each datapoint to its own centroid."""
    d = np.sqrt(((X - centroids[labels]) ** 2).sum(axis=1))
    return float(d.mean())


def average_correlation(X: np.ndarray, labels: np.ndarray, k: int) -> float:
    """Mean over clusters of the mean pairwise Pearson correlation between
    member feature vectors (each vector mean-centered first).

    Singleton clusters count as perfectly correlated (1.0); zero-variance
    vectors correlate 0 with everything.
    """
    Xc = X - X.mean(axis=1, keepdims=True)
    norms = np.sqrt((Xc**2).sum(axis=1))
    safe = np.where(norms > 0.0, norms, 1.0)
    U = Xc / safe[:, None]
    U[norms == 0.0] = 0.0
    per_cluster = np.empty(k, dtype=np.float64)
    for i in range(k):
        members = np.nonzero(labels == i)[0]
        m = members.size
        if m < 2:
            per_cluster[i] = 1.0
            continue
        G = U[members] @ U[members].T
        per_cluster[i] = (G.sum() - np.trace(G)) / (m * (m - 1))
    return float(np.clip(per_cluster.mean(), -1.0, 1.0))


def silhouette_score(X: np.ndarray, labels: np.ndarray, k: int, dist: np.ndarray | None = None) -> float:
    """Mean silhouette (b - a) / max(a, b) over all datapoints.

    a = mean distance to the other members of the point's own cluster,
    b = mean distance to the members of the nearest other cluster.
    Points in singleton clusters score 0 by convention.
    """
    if k < 2:
        raise ValidationError("silhouette requires k >= 2")
    n = X.shape[0]
    if dist is None:
        dist = pairwise_distances(X)
    counts = np.bincount(labels, minlength=k)
    # mean distance from every point to every cluster
    onehot = np.zeros((n, k), dtype=np.float64)
    onehot[np.arange(n), labels] = 1.0
    sums = dist @ onehot  # (n, k)
    scores = np.zeros(n, dtype=np.float64)
    for p in range(n):
        c = labels[p]
        if counts[c] < 2:
            continue
        a = sums[p, c] / (counts[c] - 1)
        other = [sums[p, j] / counts[j] for j in range(k) if j != c and counts[j] > 0]
        b = min(other)
        denom = max(a, b)
        scores[p] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())


def pairwise_distances(X: np.ndarray) -> np.ndarray:
    norms = (X**2).sum(axis=1)
    d2 = norms[:, None] + norms[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def elbow_scan(ds: WeatherDataset, channels, k_range, seed: int = 0, n_init: int = DEFAULT_N_INIT) -> ElbowReport:
    """Fit k-means for each k and collect the three elbow heuristics."""
    channels = tuple(channels)
    k_values = tuple(int(k) for k in k_range)
    if not k_values:
        raise ValidationError("k_range must be non-empty")
    X = dataset_features(ds, channels)
    dist = pairwise_distances(X)
    avg_d, avg_c, sil = [], [], []
    for k in k_values:
        labels, centroids, _, _, _ = kmeans_features(X, k, seed=seed, n_init=n_init)
        avg_d.append(average_distance(X, labels, centroids))
        avg_c.append(average_correlation(X, labels, k))
        sil.append(silhouette_score(X, labels, k, dist=dist) if k >= 2 else None)
    return ElbowReport(
        k_values=k_values,
        avg_distance=tuple(avg_d),
        avg_correlation=tuple(avg_c),
        silhouette=tuple(sil),
    )


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic day-to-day cluster transition probabilities.

    Only label pairs exactly one calendar day apart are counted. Rows with
    no outgoing observations are uniform.
    """

    probabilities: np.ndarray  # (k, k) float64, rows sum to 1
    counts: np.ndarray  # (k, k) int64 raw transition counts

    def __post_init__(self) -> None:
        p = np.ascontiguousarray(self.probabilities, dtype=np.float64)
        c = np.ascontiguousarray(self.counts, dtype=np.int64)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape != c.shape:
            raise ValidationError("transition matrices must be square and congruent")
        if (p < 0).any() or (p > 1).any():
            raise ValidationError("transition probabilities must lie in [0, 1]")
        if np.abs(p.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValidationError("transition rows must sum to 1")
        p.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "counts", c)

    @property
    def k(self) -> int:
        return self.probabilities.shape[0]


def transition_matrix(labels, times, k: int | None = None) -> TransitionMatrix:
    """Count consecutive-calendar-day transitions and row-normalize."""
    labels = np.asarray(labels, dtype=np.int64)
    times = tuple(times)
    if labels.size != len(times) or labels.size < 2:
        raise ValidationError("need matching labels/times with at least 2 entries")
    if k is None:
        k = int(labels.max()) + 1
    if labels.min() < 0 or labels.max() >= k:
        raise ValidationError(f"labels must be in [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    one_day = timedelta(days=1)
    for t in range(labels.size - 1):
        if times[t + 1].date() - times[t].date() == one_day:
            counts[labels[t], labels[t + 1]] += 1
    row_sums = counts.sum(axis=1)
    probs = np.full((k, k), 1.0 / k, dtype=np.float64)
    observed = row_sums > 0
    probs[observed] = counts[observed] / row_sums[observed, None]
    return TransitionMatrix(probabilities=probs, counts=counts)


def model_to_json(model: ClusterModel) -> str:
    doc = {
        "k": model.k,
        "seed": model.seed,
        "channels": list(model.channels),
        "inertia": model.inertia,
        "iterations_run": model.iterations_run,
        "inertia_history": list(model.inertia_history),
        "counts": model.counts.tolist(),
        "representative_idx": model.representative_idx.tolist(),
        "labels": model.labels.tolist(),
        "centroids": model.centroids.tolist(),
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def model_from_json(text_or_path) -> ClusterModel:
    if isinstance(text_or_path, Path):
        text = text_or_path.read_text()
    else:
        text = text_or_path
    doc = json.loads(text)
    return ClusterModel(
        k=int(doc["k"]),
        centroids=np.array(doc["centroids"], dtype=np.float64),
        labels=np.array(doc["labels"], dtype=np.int64),
        counts=np.array(doc["counts"], dtype=np.int64),
        representative_idx=np.array(doc["representative_idx"], dtype=np.int64),
        inertia=float(doc["inertia"]),
        iterations_run=int(doc["iterations_run"]),
        seed=int(doc["seed"]),
        channels=tuple(doc["channels"]),
        inertia_history=tuple(float(x) for x in doc["inertia_history"]),
    )
