"""Streetscape clustering and survey-sample selection.

k-means is Lloyd's algorithm with k-means++ seeding and a documented
empty-cluster repair (re-seed at the farthest point). Coverage metrics are
defined on a principal-component occupancy grid; distribution similarity
is histogram intersection. Both definitions are echoed in the report
header because there is no single standard formula.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import stats
from .errors import (
    ConfigError,
    DataError,
    EmptySampleError,
    InsufficientClassError,
    NumericError,
)

COVERAGE_DEFINITION = (
    "coverage = |grid cells (PC space) containing >=1 sample point| / "
    "|cells containing >=1 population point|; similarity = sum of "
    "elementwise minima of the normalized 2-D population and sample "
    "histograms on (PC1, PC2)"
)


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray          # (k, d)
    labels: np.ndarray             # (n,)
    inertia: float
    n_iter: int
    repairs: int = 0               # empty-cluster re-seeds performed


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = np.sum((X - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total == 0.0:
            centroids[j] = X[rng.integers(n)]
            continue
        probs = d2 / total
        centroids[j] = X[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((X - centroids[j]) ** 2, axis=1))
    return centroids


def _lloyd(X: np.ndarray, centroids: np.ndarray, max_iter: int, tol: float):
    k = centroids.shape[0]
    prev_inertia = np.inf
    repairs = 0
    labels = np.zeros(X.shape[0], dtype=int)
    for it in range(1, max_iter + 1):
        d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        # repair empty clusters: re-seed at the point farthest from its centroid
        for j in range(k):
            if not np.any(labels == j):
                far = int(d2[np.arange(X.shape[0]), labels].argmax())
                centroids[j] = X[far]
                labels[far] = j
                repairs += 1
        new_centroids = np.vstack([X[labels == j].mean(axis=0) for j in range(k)])
        d2_new = ((X[:, None, :] - new_centroids[None, :, :]) ** 2).sum(axis=2)
        inertia = float(d2_new[np.arange(X.shape[0]), d2_new.argmin(axis=1)].sum())
        if inertia > prev_inertia + 1e-9 * max(1.0, prev_inertia):
            raise NumericError(f"k-means inertia increased at iteration {it}")
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        prev_inertia = inertia
        if shift < tol:
            break
    d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(X.shape[0]), labels].sum())
    return centroids, labels, inertia, it, repairs


def kmeans(
    X,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-7,
    restarts: int = 10,
) -> ClusterModel:
    """Best-of-``restarts`` Lloyd's runs with k-means++ seeding."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"need n >= k >= 1, got n={n}, k={k}")
    best: ClusterModel | None = None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        init = _kmeans_pp_init(X, k, rng)
        centroids, labels, inertia, n_iter, repairs = _lloyd(X, init.copy(), max_iter, tol)
        if best is None or inertia < best.inertia:
            best = ClusterModel(k, centroids, labels, inertia, n_iter, repairs)
    assert best is not None
    if len(np.unique(best.labels)) != k:
        raise NumericError("k-means finished with an empty cluster")
    return best


def stratified_sample(
    labels: Mapping[str, int], n_per_class: int, seed: int = 0
) -> list[str]:
    """Exactly ``n_per_class`` ids per class, uniform without replacement."""
    classes: dict[int, list[str]] = {}
    for image_id in sorted(labels):
        classes.setdefault(int(labels[image_id]), []).append(image_id)
    out: list[str] = []
    for cls in sorted(classes):
        members = classes[cls]
        if len(members) < n_per_class:
            raise InsufficientClassError(cls, len(members), n_per_class)
        rng = np.random.default_rng([seed, cls])
        picked = rng.choice(len(members), size=n_per_class, replace=False)
        out.extend(members[i] for i in sorted(picked))
    return out


@dataclass
class CoverageReport:
    coverage: float
    similarity: float
    grid_bins: int
    n_components: int
    population_cells: int
    sample_cells: int
    definition: str = COVERAGE_DEFINITION

    def to_dict(self) -> dict:
        return {
            "coverage": self.coverage,
            "similarity": self.similarity,
            "grid_bins": self.grid_bins,
            "n_components": self.n_components,
            "population_cells": self.population_cells,
            "sample_cells": self.sample_cells,
            "definition": self.definition,
        }


def _grid_cells(P: np.ndarray, lows: np.ndarray, spans: np.ndarray, bins: int) -> np.ndarray:
    idx = np.floor((P - lows) / spans * bins).astype(int)
    return np.clip(idx, 0, bins - 1)


def coverage_report(
    ids: Sequence[str],
    X,
    sample_ids: Sequence[str],
    grid_bins: int = 20,
    n_components: int = 2,
) -> CoverageReport:
    """Feature-space coverage and distribution similarity of a sample."""
    if not sample_ids:
        raise EmptySampleError("sample is empty")
    X = np.asarray(X, dtype=float)
    pos = {image_id: i for i, image_id in enumerate(ids)}
    missing = [s for s in sample_ids if s not in pos]
    if missing:
        raise DataError(f"sample id {missing[0]!r} not in population")
    model = stats.pca(X, n_components)
    P = model.transform(X)
    S = P[[pos[s] for s in sample_ids]]
    lows = P.min(axis=0)
    spans = P.max(axis=0) - lows
    spans[spans == 0.0] = 1.0
    pop_cells = _grid_cells(P, lows, spans, grid_bins)
    smp_cells = _grid_cells(S, lows, spans, grid_bins)
    pop_set = set(map(tuple, pop_cells))
    smp_set = set(map(tuple, smp_cells))
    coverage = len(smp_set & pop_set) / len(pop_set)

    # histogram intersection on the first two components
    pop2 = pop_cells[:, :2]
    smp2 = smp_cells[:, :2]
    hp = np.zeros((grid_bins, grid_bins))
    hs = np.zeros((grid_bins, grid_bins))
    np.add.at(hp, (pop2[:, 0], pop2[:, 1]), 1.0)
    np.add.at(hs, (smp2[:, 0], smp2[:, 1]), 1.0)
    hp /= hp.sum()
    hs /= hs.sum()
    similarity = float(np.minimum(hp, hs).sum())
    return CoverageReport(
        coverage=float(coverage),
        similarity=similarity,
        grid_bins=grid_bins,
        n_components=n_components,
        population_cells=len(pop_set),
        sample_cells=len(smp_set),
    )


def convergence_report(
    scores_by_size: Mapping[int, Sequence[float]], gate: float = 0.05
) -> dict:
    """K-S distance of each sample size's score distribution against the
    largest size; flags whether each passes the convergence gate."""
    sizes = sorted(scores_by_size)
    if not sizes:
        raise ConfigError("no sizes given")
    reference = np.asarray(scores_by_size[sizes[-1]], dtype=float)
    rows = []
    for size in sizes:
        ks = stats.ks_statistic(scores_by_size[size], reference)
        rows.append({"size": size, "ks_vs_max": ks, "below_gate": bool(ks < gate)})
    return {"gate": gate, "reference_size": sizes[-1], "rows": rows}
