"""From coefficients to a segmentation.

Coefficient normalization, the symmetric similarity graph, the normalized
graph Laplacian, a bottom-eigenvector embedding, and seeded k-means with
restarts. Also the eigengap heuristic for estimating the number of
subspaces.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .core import ClusteringResult, CoefficientMatrix


class EmptyGraphError(ValueError):
    """All similarity weights are zero; there is nothing to cluster."""


KMEANS_MAX_ITER = 300
KMEANS_REL_TOL = 1e-9
EMBEDDING_ROW_EPS = 1e-12


@dataclass(frozen=True)
class SimilarityGraph:
    """Symmetric nonnegative weights with zero diagonal, plus degrees."""

    weights: np.ndarray
    degree: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("weights must be a square matrix")
        if not np.array_equal(W, W.T):
            raise ValueError("weights must be exactly symmetric")
        if np.any(W < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(np.diagonal(W) != 0):
            raise ValueError("weights must have zero diagonal")
        deg = np.asarray(self.degree, dtype=np.float64)
        if deg.shape != (W.shape[0],) or not np.allclose(deg, W.sum(axis=1)):
            raise ValueError("degree vector does not match the weights")
        W.setflags(write=False)
        deg.setflags(write=False)
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "degree", deg)

    @property
    def n_points(self) -> int:
        return self.weights.shape[0]


def normalize_coefficients(C: CoefficientMatrix) -> CoefficientMatrix:
    """Rescale every column by its max-abs entry; zero columns stay zero."""
    values = C.values.copy()
    peaks = np.abs(values).max(axis=0)
    nz = peaks > 0
    values[:, nz] /= peaks[nz]
    return CoefficientMatrix(values)


def build_graph(C: CoefficientMatrix) -> SimilarityGraph:
    """Symmetrize coefficients into weights ``|C| + |C|^T``."""
    W = np.abs(C.values) + np.abs(C.values).T
    return SimilarityGraph(W, W.sum(axis=1))


def _sym_laplacian(graph: SimilarityGraph) -> np.ndarray:
    deg = graph.degree
    inv_sqrt = np.zeros_like(deg)
    pos = deg > 0
    inv_sqrt[pos] = 1.0 / np.sqrt(deg[pos])
    if not pos.all():
        warnings.warn(
            f"{int(np.sum(~pos))} isolated vertices in the similarity graph",
            stacklevel=3,
        )
    L = -graph.weights * np.outer(inv_sqrt, inv_sqrt)
    np.fill_diagonal(L, 1.0)
    # Isolated vertices carry no edges; their Laplacian row is that of an
    # isolated unit-degree vertex (eigenvalue 0 for its own component).
    return (L + L.T) / 2.0


def _kmeans_single(X: np.ndarray, k: int, rng: np.random.Generator):
    """One k-means run: greedy-free k-means++ seeding then Lloyd."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    dist2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = dist2.sum()
        if total <= 0:
            centers[j] = X[int(rng.integers(n))]
        else:
            r = rng.random() * total
            centers[j] = X[min(int(np.searchsorted(np.cumsum(dist2), r)), n - 1)]
        dist2 = np.minimum(dist2, np.sum((X - centers[j]) ** 2, axis=1))

    prev_inertia = np.inf
    labels = np.zeros(n, dtype=np.intp)
    for _ in range(KMEANS_MAX_ITER):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        inertia = float(d2[np.arange(n), labels].sum())
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = X[members].mean(axis=0)
            else:
                # Re-seed an emptied cluster at the worst-fit point.
                far = int(d2[np.arange(n), labels].argmax())
                centers[j] = X[far]
                labels[far] = j
        if prev_inertia - inertia <= KMEANS_REL_TOL * max(prev_inertia, 1e-300):
            break
        prev_inertia = inertia
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    own = d2[np.arange(n), labels].copy()
    # Guarantee k nonempty clusters by stealing worst-fit points.
    for j in range(k):
        if not np.any(labels == j):
            for far in np.argsort(-own):
                if np.sum(labels == labels[far]) > 1:
                    labels[far] = j
                    own[far] = 0.0
                    break
    inertia = 0.0
    for j in range(k):
        members = X[labels == j]
        inertia += float(((members - members.mean(axis=0)) ** 2).sum())
    return labels, inertia


def spectral_cluster(
    graph: SimilarityGraph,
    n: int,
    seed: int = 0,
    restarts: int = 20,
) -> ClusteringResult:
    """Segment the graph into ``n`` groups.

    Embeds each vertex in the row-normalized bottom-``n`` eigenvector
    matrix of the symmetric normalized Laplacian and runs k-means with
    ``restarts`` seeded restarts, keeping the lowest-inertia labeling.
    Near-zero embedding rows are left as zero vectors (flagged with a
    warning) and end up with the nearest centroid.

    Raises
    ------
    EmptyGraphError
        If every weight is zero and ``n > 1``.
    """
    N = graph.n_points
    if not 1 <= n <= N:
        raise ValueError(f"n must be in [1, {N}], got {n}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if n > 1 and not np.any(graph.weights):
        raise EmptyGraphError("similarity graph has no edges")

    L = _sym_laplacian(graph)
    eigenvalues, eigenvectors = eigh(L)
    spectrum = eigenvalues[: min(n + 1, N)]
    embedding = eigenvectors[:, :n].copy()
    row_norms = np.linalg.norm(embedding, axis=1)
    small = row_norms < EMBEDDING_ROW_EPS
    if small.any():
        warnings.warn(
            f"{int(small.sum())} near-zero embedding rows left unnormalized",
            stacklevel=2,
        )
    embedding[~small] /= row_norms[~small, None]
    embedding[small] = 0.0

    best_labels, best_inertia = None, np.inf
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence([_as_seed(seed), r]))
        labels, inertia = _kmeans_single(embedding, n, rng)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return ClusteringResult(
        labels=best_labels,
        n_clusters=n,
        eigengap_spectrum=spectrum,
        kmeans_inertia=best_inertia,
    )


def estimate_num_subspaces(graph: SimilarityGraph, n_max: int) -> int:
    """Largest-eigengap estimate of the number of connected groups.

    Returns the ``k`` in ``1..n_max-1`` maximizing the gap between the
    ``k``-th and ``(k+1)``-th smallest Laplacian eigenvalues (first such
    ``k`` on ties).
    """
    N = graph.n_points
    if not 2 <= n_max <= N:
        raise ValueError(f"n_max must be in [2, {N}], got {n_max}")
    if not np.any(graph.weights):
        raise EmptyGraphError("similarity graph has no edges")
    eigenvalues = eigh(_sym_laplacian(graph), eigvals_only=True)
    gaps = np.diff(eigenvalues[:n_max])
    return int(np.argmax(gaps)) + 1


def _as_seed(seed: int) -> int:
    return int(seed) & 0xFFFFFFFFFFFFFFFF
