"""Geometric quantities and mechanical recovery-condition checks.

Principal angles between subspaces, independence/disjointness
classification of an arrangement, the sufficient recovery condition
comparing best-submatrix singular values against subspace angles, and a
sampled check of the intersection l1-margin condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core import (
    DataMatrix,
    NotOrthonormalError,
    ORTHONORMALITY_TOL,
    SubspaceArrangement,
    validate,
)
from .solver import AdmmConfig, solve_l1_dictionary

RANK_REL_TOL = 1e-10
RESTRICTED_FEASIBILITY_TOL = 1e-6


class RankDeficientError(ValueError):
    """A subspace's data does not span the subspace."""


class RestrictedInfeasibleError(ValueError):
    """A target vector is not representable in the restricted dictionary."""


@dataclass(frozen=True)
class AngleReport:
    """Pairwise smallest principal angles of an arrangement.

    ``pairwise_cos[i, j]`` is the cosine of the smallest principal angle
    between subspaces i and j (1 on the diagonal); ``smallest_angle_deg``
    the same in degrees.
    """

    pairwise_cos: np.ndarray
    smallest_angle_deg: np.ndarray


@dataclass(frozen=True)
class SubmatrixConditionReport:
    """Per-subspace outcome of the singular-value recovery condition.

    ``lhs[i]`` is the best d_i-th singular value found over full-rank
    ``D x d_i`` submatrices of subspace i's data; ``rhs[i]`` is
    ``sqrt(d_i) * max column l2 norm of the other data * max_j cos(angle_ij)``.
    ``holds[i]`` is ``lhs[i] > rhs[i]``. When ``exhaustive[i]`` is False
    the submatrix search was sampled, so ``lhs`` is a lower bound: a True
    ``holds`` remains a valid certificate, a False one is inconclusive.
    """

    lhs: np.ndarray
    rhs: np.ndarray
    holds: np.ndarray
    exhaustive: np.ndarray


def _check_orthonormal(U: np.ndarray, name: str) -> np.ndarray:
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2:
        raise NotOrthonormalError(f"{name} must be a 2-D basis matrix")
    err = np.max(np.abs(U.T @ U - np.eye(U.shape[1])))
    if err > ORTHONORMALITY_TOL:
        raise NotOrthonormalError(f"{name} is not orthonormal (Gram error {err:.2e})")
    return U


def principal_angles(U: np.ndarray, V: np.ndarray) -> tuple[float, float]:
    """Cosine and degrees of the smallest principal angle between two
    subspaces given by orthonormal bases.

    The cosine is the largest singular value of ``U^T V``, clamped to
    [0, 1].
    """
    U = _check_orthonormal(U, "U")
    V = _check_orthonormal(V, "V")
    s = np.linalg.svd(U.T @ V, compute_uv=False)
    cos = float(np.clip(s[0] if s.size else 0.0, 0.0, 1.0))
    return cos, math.degrees(math.acos(cos))


def angle_report(arr: SubspaceArrangement) -> AngleReport:
    """Pairwise smallest principal angles for a whole arrangement."""
    n = arr.n_subspaces
    cos = np.eye(n)
    deg = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            c, a = principal_angles(arr.bases[i], arr.bases[j])
            cos[i, j] = cos[j, i] = c
            deg[i, j] = deg[j, i] = a
    return AngleReport(pairwise_cos=cos, smallest_angle_deg=deg)


def _rank(M: np.ndarray, rel_tol: float) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


def classify_arrangement(
    arr: SubspaceArrangement, rank_rel_tol: float = RANK_REL_TOL
) -> str:
    """'independent', 'disjoint_not_independent', or 'not_disjoint'.

    Independent: the stacked bases have rank equal to the sum of the
    dimensions. Disjoint: every pair of subspaces meets only at the
    origin.
    """
    dims = arr.dims
    stacked = np.hstack(arr.bases)
    if _rank(stacked, rank_rel_tol) == sum(dims):
        return "independent"
    n = arr.n_subspaces
    for i in range(n):
        for j in range(i + 1, n):
            pair = np.hstack([arr.bases[i], arr.bases[j]])
            if _rank(pair, rank_rel_tol) < dims[i] + dims[j]:
                return "not_disjoint"
    return "disjoint_not_independent"


def _columns_of(data: DataMatrix, arr: SubspaceArrangement, i: int) -> np.ndarray:
    if arr.labels is None:
        raise ValueError("arrangement carries no point labels")
    return data.values[:, arr.labels == i]


def check_submatrix_condition(
    data: DataMatrix,
    arr: SubspaceArrangement,
    submatrix_budget: int = 2000,
    seed: int = 0,
) -> SubmatrixConditionReport:
    """Check, per subspace, the sufficient condition for subspace-sparse
    recovery that compares singular values of in-subspace submatrices
    against the largest cross-subspace angle cosine.

    All ``C(N_i, d_i)`` column subsets are enumerated (lexicographically)
    when their count fits in ``submatrix_budget``; otherwise that many
    distinct subsets are sampled with the given seed, which makes the
    reported ``lhs`` a lower bound on the true maximum.

    Raises
    ------
    RankDeficientError
        If some subspace's data has rank below the subspace dimension.
    """
    validate(data)
    n = arr.n_subspaces
    report = angle_report(arr)
    lhs = np.zeros(n)
    rhs = np.zeros(n)
    holds = np.zeros(n, dtype=bool)
    exhaustive = np.zeros(n, dtype=bool)
    for i in range(n):
        Yi = _columns_of(data, arr, i)
        d = arr.dims[i]
        Ni = Yi.shape[1]
        if _rank(Yi, RANK_REL_TOL) < d:
            raise RankDeficientError(f"data of subspace {i} has rank below {d}")
        others = np.ones(n, dtype=bool)
        others[i] = False
        max_cos = float(report.pairwise_cos[i, others].max()) if n > 1 else 0.0
        Y_rest = data.values[:, arr.labels != i]
        col_norm = float(np.linalg.norm(Y_rest, axis=0).max()) if Y_rest.size else 0.0
        rhs[i] = math.sqrt(d) * col_norm * max_cos

        total = math.comb(Ni, d)
        best = 0.0
        if total <= submatrix_budget:
            exhaustive[i] = True
            subsets = combinations(range(Ni), d)
        else:
            rng = np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), i]))
            seen = set()
            while len(seen) < submatrix_budget:
                seen.add(tuple(sorted(rng.choice(Ni, size=d, replace=False).tolist())))
            subsets = sorted(seen)
        for cols in subsets:
            s = np.linalg.svd(Yi[:, list(cols)], compute_uv=False)
            # Rank-deficient subsets have s[d-1] ~ 0 and never attain the max.
            best = max(best, float(s[d - 1]))
        lhs[i] = best
        holds[i] = lhs[i] > rhs[i]
    return SubmatrixConditionReport(lhs=lhs, rhs=rhs, holds=holds, exhaustive=exhaustive)


def _orthonormal_range(M: np.ndarray, rel_tol: float = RANK_REL_TOL) -> np.ndarray:
    if M.size == 0:
        return M.reshape(M.shape[0], 0)
    Q, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return M[:, :0]
    return Q[:, s > rel_tol * s[0]]


def intersection_basis(
    arr: SubspaceArrangement, subspace_index: int, rel_tol: float = RANK_REL_TOL
) -> np.ndarray:
    """Orthonormal basis of subspace i's intersection with the span of all
    other subspaces (possibly zero columns)."""
    U = np.asarray(arr.bases[subspace_index])
    rest = [arr.bases[j] for j in range(arr.n_subspaces) if j != subspace_index]
    V = _orthonormal_range(np.hstack(rest)) if rest else U[:, :0]
    if V.shape[1] == 0:
        return U[:, :0]
    stacked = np.hstack([U, -V])
    _, s, Vt = np.linalg.svd(stacked, full_matrices=True)
    null_mask = np.zeros(Vt.shape[0], dtype=bool)
    null_mask[s.size:] = True
    null_mask[: s.size] = s <= rel_tol * (s[0] if s.size else 1.0)
    null_vectors = Vt[null_mask].T
    if null_vectors.shape[1] == 0:
        return U[:, :0]
    return _orthonormal_range(U @ null_vectors[: U.shape[1]])


def check_intersection_margin(
    data: DataMatrix,
    arr: SubspaceArrangement,
    subspace_index: int,
    num_samples: int = 100,
    seed: int = 0,
    cfg: AdmmConfig | None = None,
) -> tuple[float, int]:
    """Sampled l1-margin between restricted representations.

    For unit vectors ``x`` sampled in the intersection of subspace i with
    the span of the others, solves the minimum-l1 representation of ``x``
    once over subspace i's own data points and once over all other data
    points, and returns ``(min margin, samples tested)`` with margin
    ``||a_other||_1 - ||a_own||_1``. ``+inf`` with 0 samples when the
    intersection is trivial. A positive minimum is evidence (not proof)
    that recovery holds on this subspace; a negative one is a certified
    counterexample direction.

    Raises
    ------
    RestrictedInfeasibleError
        If a sampled vector is not representable in one of the restricted
        dictionaries (data rank deficiency).
    """
    validate(data)
    cfg = cfg or AdmmConfig(rho=50.0, epsilon=1e-5, max_iter=50000)
    W = intersection_basis(arr, subspace_index)
    if W.shape[1] == 0:
        return math.inf, 0
    own = _columns_of(data, arr, subspace_index)
    rest = data.values[:, arr.labels != subspace_index]
    min_margin = math.inf
    for s_idx in range(num_samples):
        rng = np.random.default_rng(
            np.random.SeedSequence([seed & (2**64 - 1), subspace_index, s_idx])
        )
        g = rng.standard_normal(W.shape[1])
        x = W @ g
        nrm = np.linalg.norm(x)
        if nrm == 0.0:
            continue
        x /= nrm
        a_own = _restricted_l1(own, x, cfg)
        a_rest = _restricted_l1(rest, x, cfg)
        min_margin = min(min_margin, float(np.abs(a_rest).sum() - np.abs(a_own).sum()))
    return min_margin, num_samples


def _restricted_l1(B: np.ndarray, x: np.ndarray, cfg: AdmmConfig) -> np.ndarray:
    ls_sol = np.linalg.lstsq(B, x, rcond=None)[0]
    ls_res = float(np.linalg.norm(x - B @ ls_sol))
    if ls_res > RESTRICTED_FEASIBILITY_TOL:
        raise RestrictedInfeasibleError(
            f"target not representable (residual {ls_res:.2e})"
        )
    return solve_l1_dictionary(B, x, cfg)
