"""ADMM solver for every variant of the self-expressive sparse program.

The solved program, in its most general form, is

    min  ||C||_1 + lambda_r ||C||_{r,1} + lambda_e ||E||_1
         + (lambda_z / 2) ||Y - Y C - E||_F^2
    s.t. diag(C) = 0           (always)
         1^T C = 1^T           (affine variant only)

with ``||C||_{r,1}`` the sum of row l2 norms. The ``EXACT`` variant keeps
the same quadratic term with a stiff weight in place of its equality
constraint; the sparse-error variant enforces ``Y = YC + E`` exactly
through an extra Lagrange multiplier, with the quadratic weight acting as
that constraint's penalty. One factorization-and-shrinkage loop covers
every case.

The augmented-Lagrangian iteration alternates: a linear solve for the
consensus iterate ``A`` (system matrix factored once per call), an
elementwise / per-row proximal step for ``C`` with an exactly zero
diagonal, a shrinkage step for ``E``, and gradient-ascent multiplier
updates. It stops when the max-norm residuals fall below ``epsilon``.

The program is separable across columns (the row-sparsity term is the one
exception), so columns whose residuals are already below tolerance are
frozen while the rest keep iterating; every returned column satisfies the
same stopping rule it would meet on its own.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from threadpoolctl import threadpool_limits

from .core import (
    CoefficientMatrix,
    DataMatrix,
    ProblemSpec,
    Variant,
    normalize_unit_columns,
    validate,
)

# Quadratic weight used to emulate an equality constraint with one ADMM
# code path, and the floor that keeps the system matrix well conditioned
# when some column is near-orthogonal to all others.
EQUALITY_SURROGATE_MULTIPLIER = 1e6
_SCALE_FLOOR = 1e-4


class DegenerateScaleError(ValueError):
    """A data-dependent scale (mu_z or mu_e) is zero where it is needed."""


@dataclass(frozen=True)
class AdmmConfig:
    """Solver knobs.

    ``rho`` is the augmented-Lagrangian penalty; ``None`` picks the
    variant-dependent default (the active dimensionless multiplier, or 800
    when no data-scaled term is active). ``rho_equality`` is the penalty
    on the hard self-expression constraint of the sparse-error variant
    (default ``30 * lambda_e``). ``seed`` is unused by the solver itself
    and reserved for reproducibility plumbing.
    """

    rho: float | None = None
    epsilon: float = 1e-4
    max_iter: int = 10000
    seed: int | None = None
    rho_equality: float | None = None

    def __post_init__(self):
        if self.rho is not None and self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.rho_equality is not None and self.rho_equality <= 0:
            raise ValueError("rho_equality must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class SolveDiagnostics:
    """Residuals and bookkeeping at the iterate that was returned.

    ``primal_residual_affine`` is ``||A^T 1 - 1||_inf`` (0.0 when the
    affine constraint is off), ``primal_residual_consensus`` is
    ``||A - C||_inf``, and ``dual_residuals`` is the pair
    ``(||A - A_prev||_inf, ||E - E_prev||_inf)`` recorded per column at
    the iteration where that column stopped.
    ``primal_residual_equality`` is ``||Y - Y A - E||_inf`` for the
    hard-constrained sparse-error variant (0.0 elsewhere).
    """

    iterations: int
    primal_residual_affine: float
    primal_residual_consensus: float
    dual_residuals: tuple[float, float]
    converged: bool
    objective: float
    primal_residual_equality: float = 0.0
    residual_fro: float = 0.0


@dataclass
class SolveResult:
    """Coefficients, optional sparse error matrix, and diagnostics.

    ``consensus`` is the final auxiliary iterate ``A``; kept so that the
    reported primal residuals can be recomputed from returned state.
    """

    coefficients: CoefficientMatrix
    outliers: np.ndarray | None
    diagnostics: SolveDiagnostics
    consensus: np.ndarray | None = None


def shrink(v, eta):
    """Elementwise shrinkage-thresholding: magnitude reduced by ``eta``,
    sign kept, small values mapped to exactly zero."""
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - eta, 0.0)


def prox_l1_plus_group(row, a, b):
    """Exact proximal step of ``a * ||.||_1 + b * ||.||_2`` on one row.

    Soft-threshold every entry by ``a``, then shrink the whole row toward
    zero by ``b`` in l2 norm (to exactly zero when its norm is below
    ``b``).
    """
    u = shrink(row, a)
    if b > 0:
        nrm = np.linalg.norm(u)
        u = u * max(1.0 - b / nrm, 0.0) if nrm > 0 else u
    return u


def row_sparsity_norm(C) -> float:
    """Sum of l2 norms of the rows (the row-sparsity regularizer value)."""
    values = C.values if isinstance(C, CoefficientMatrix) else np.asarray(C)
    return float(np.linalg.norm(values, axis=1).sum())


def _mu_z_value(Y: np.ndarray) -> float:
    G = np.abs(Y.T @ Y)
    np.fill_diagonal(G, -np.inf)
    return float(np.min(np.max(G, axis=1)))


def _mu_e_value(Y: np.ndarray) -> float:
    l1 = np.abs(Y).sum(axis=0)
    N = l1.size
    best = np.full(N, -np.inf)
    for i in range(N):
        others = np.delete(l1, i)
        best[i] = others.max()
    return float(best.min())


def mu_z(data: DataMatrix) -> float:
    """min over points i of max over j != i of ``|y_i . y_j|``.

    Raises :class:`DegenerateScaleError` when the value is zero (some
    point is orthogonal to every other point).
    """
    validate(data)
    val = _mu_z_value(data.values)
    if val <= 0.0:
        raise DegenerateScaleError("mu_z is zero: a point is orthogonal to all others")
    return val


def mu_e(data: DataMatrix) -> float:
    """min over points i of max over j != i of ``||y_j||_1``.

    Raises :class:`DegenerateScaleError` when the value is zero.
    """
    validate(data)
    val = _mu_e_value(data.values)
    if val <= 0.0:
        raise DegenerateScaleError("mu_e is zero: all but one column vanish")
    return val


def lasso_zero_threshold(data: DataMatrix, point_index: int) -> float:
    """``||Y_{-i}^T y_i||_inf`` for point ``i``.

    For unit-norm data, running the quadratic-penalty variant with a
    weight below this value leaves column ``i`` identically zero.
    """
    validate(data)
    Y = data.values
    y = Y[:, point_index]
    inner = np.abs(Y.T @ y)
    inner[point_index] = 0.0
    return float(inner.max())


def _default_rho(spec: ProblemSpec) -> float:
    if spec.variant in (Variant.NOISE, Variant.NOISE_AND_OUTLIER):
        return spec.alpha_z
    if spec.variant is Variant.OUTLIER:
        return spec.alpha_e
    return 800.0


def _system_solver(Y: np.ndarray, lambda_z: float, rho: float, affine: bool):
    """Factor ``lambda_z Y^T Y + rho I (+ rho 1 1^T)`` once.

    Returns a callable applying the inverse to a block of columns. When
    the stacked dictionary is thinner than N, the inverse is applied
    through the matrix-inversion lemma with a small Cholesky factor;
    otherwise a dense Cholesky of the full system is used. Both paths
    solve the identical system.
    """
    D, N = Y.shape
    B = np.sqrt(lambda_z) * Y
    if affine:
        B = np.vstack([B, np.sqrt(rho) * np.ones((1, N))])
    k = B.shape[0]
    if k < N:
        S = rho * np.eye(k) + B @ B.T
        Sf = cho_factor(S, check_finite=False)

        def apply_inverse(X):
            return (X - B.T @ cho_solve(Sf, B @ X, check_finite=False)) / rho

    else:
        M = rho * np.eye(N) + B.T @ B
        Mf = cho_factor(M, check_finite=False)

        def apply_inverse(X):
            return cho_solve(Mf, X, check_finite=False)

    return apply_inverse


def solve(data: DataMatrix, spec: ProblemSpec, cfg: AdmmConfig | None = None) -> SolveResult:
    """Solve the self-expressive sparse program for every data point.

    Parameters
    ----------
    data : DataMatrix
        Column data points; validated (and column-normalized when
        ``spec.normalize_columns`` is set) before solving.
    spec : ProblemSpec
        Program variant and regularization multipliers.
    cfg : AdmmConfig, optional
        Solver tolerances; defaults are ``epsilon=1e-4``,
        ``max_iter=10000``.

    Returns
    -------
    SolveResult
        Coefficient matrix with exactly zero diagonal, the sparse error
        matrix ``E`` (``None`` unless the variant models outlying
        entries), and convergence diagnostics. Non-convergence is
        reported through ``diagnostics.converged``; the best iterate is
        still returned.

    Raises
    ------
    DegenerateScaleError
        When a required data scale (mu_z, mu_e) vanishes.
    """
    cfg = cfg or AdmmConfig()
    data = validate(data)
    if spec.normalize_columns:
        data = normalize_unit_columns(data)
    Y = data.values
    D, N = Y.shape

    with_e = spec.variant in (Variant.OUTLIER, Variant.NOISE_AND_OUTLIER)
    hard_equality = spec.variant is Variant.OUTLIER
    noise_scaled = spec.variant in (Variant.NOISE, Variant.NOISE_AND_OUTLIER)
    muz = _mu_z_value(Y)
    lambda_e = None
    if with_e:
        mue = _mu_e_value(Y)
        if mue <= 0.0:
            raise DegenerateScaleError("mu_e is zero; cannot scale the outlier weight")
        lambda_e = spec.alpha_e / mue
    if noise_scaled:
        if muz <= 0.0:
            raise DegenerateScaleError("mu_z is zero; cannot scale the noise weight")
        quad_weight = spec.alpha_z / muz
    elif hard_equality:
        # Penalty on the hard constraint Y = YA + E; the dual carries the
        # optimality pressure so this only needs to match the lambda_e scale.
        quad_weight = (
            cfg.rho_equality if cfg.rho_equality is not None else 30.0 * lambda_e
        )
    else:
        quad_weight = EQUALITY_SURROGATE_MULTIPLIER / max(muz, _SCALE_FLOOR)
    rho = cfg.rho if cfg.rho is not None else _default_rho(spec)

    with threadpool_limits(limits=1):
        return _admm(Y, spec, cfg, quad_weight, lambda_e, rho, hard_equality)


def _admm(Y, spec, cfg, quad_weight, lambda_e, rho, hard_equality):
    D, N = Y.shape
    eps = cfg.epsilon
    affine = spec.affine
    with_e = lambda_e is not None
    # Row-coupled regularizer forces lockstep iteration over all columns.
    freeze_ok = spec.lambda_r == 0.0

    apply_inverse = _system_solver(Y, quad_weight, rho, affine)
    qYtY = quad_weight * (Y.T @ Y)

    A = np.zeros((N, N))
    C = np.zeros((N, N))
    E = np.zeros((D, N)) if with_e else None
    Delta = np.zeros((N, N))
    delta = np.zeros(N) if affine else None
    Lam = np.zeros((D, N)) if hard_equality else None
    ones_col = np.ones(N)

    active = np.arange(N)
    res_cons = np.full(N, np.inf)
    res_dual_a = np.full(N, np.inf)
    res_dual_e = np.zeros(N) if not with_e else np.full(N, np.inf)
    res_aff = np.zeros(N) if not affine else np.full(N, np.inf)
    res_eq = np.zeros(N) if not hard_equality else np.full(N, np.inf)
    iterations = 0

    for k in range(1, cfg.max_iter + 1):
        iterations = k
        idx = active
        # While no column is frozen yet, whole-array views avoid the
        # per-iteration column-gather copies; both branches compute the
        # same numbers.
        full = idx.size == N
        cols = slice(None) if full else idx
        rhs = qYtY[:, cols] + rho * C[:, cols] - Delta[:, cols]
        if with_e:
            rhs -= quad_weight * (Y.T @ E[:, cols])
        if hard_equality:
            rhs += Y.T @ Lam[:, cols]
        if affine:
            rhs += rho
            rhs -= np.outer(ones_col, delta[cols])
        A_new = apply_inverse(rhs)

        J = A_new + Delta[:, cols] / rho
        J[idx, np.arange(idx.size)] = 0.0
        if spec.lambda_r > 0.0:
            C_new = np.empty_like(J)
            for r in range(N):
                C_new[r, :] = prox_l1_plus_group(J[r, :], 1.0 / rho, spec.lambda_r / rho)
            C_new[idx, np.arange(idx.size)] = 0.0
        else:
            C_new = shrink(J, 1.0 / rho)

        if with_e:
            resid = Y[:, cols] - Y @ A_new
            if hard_equality:
                E_new = shrink(resid + Lam[:, cols] / quad_weight, lambda_e / quad_weight)
            else:
                E_new = shrink(resid, lambda_e / quad_weight)
            dual_e = np.abs(E_new - E[:, cols]).max(axis=0)
            E[:, cols] = E_new
        else:
            dual_e = None

        if affine:
            aff = A_new.T @ ones_col - 1.0
            delta[cols] += rho * aff
            res_aff[cols] = np.abs(aff)

        if hard_equality:
            eq = resid - E_new
            Lam[:, cols] += quad_weight * eq
            res_eq[cols] = np.abs(eq).max(axis=0)

        dual_a = np.abs(A_new - A[:, cols]).max(axis=0)
        A[:, cols] = A_new
        Delta[:, cols] += rho * (A_new - C_new)
        cons = np.abs(A_new - C_new).max(axis=0)
        C[:, cols] = C_new

        res_cons[cols] = cons
        res_dual_a[cols] = dual_a
        if with_e:
            res_dual_e[cols] = dual_e

        ok = (cons <= eps) & (dual_a <= eps)
        if with_e:
            ok &= dual_e <= eps
        if affine:
            ok &= res_aff[idx] <= eps
        if hard_equality:
            ok &= res_eq[idx] <= eps
        if freeze_ok:
            if ok.all():
                active = idx[:0]
                break
            active = idx[~ok]
        elif ok.all():
            active = idx[:0]
            break

    converged = active.size == 0
    np.fill_diagonal(C, 0.0)

    # Model objective: the quadratic term belongs to it only when the
    # variant actually penalizes a dense-noise component; for the
    # equality-style variants feasibility is reported via residual_fro.
    objective = float(np.abs(C).sum())
    if spec.lambda_r > 0.0:
        objective += spec.lambda_r * row_sparsity_norm(C)
    residual = Y - Y @ C
    if with_e:
        objective += lambda_e * float(np.abs(E).sum())
        residual = residual - E
    residual_fro = float(np.linalg.norm(residual))
    if spec.variant in (Variant.NOISE, Variant.NOISE_AND_OUTLIER):
        objective += 0.5 * quad_weight * residual_fro**2

    diagnostics = SolveDiagnostics(
        iterations=iterations,
        primal_residual_affine=float(res_aff.max()),
        primal_residual_consensus=float(res_cons.max()),
        dual_residuals=(float(res_dual_a.max()), float(res_dual_e.max())),
        converged=bool(converged),
        objective=objective,
        primal_residual_equality=float(res_eq.max()),
        residual_fro=residual_fro,
    )
    outliers = E if with_e else None
    return SolveResult(CoefficientMatrix(C), outliers, diagnostics, consensus=A)


def solve_l1_dictionary(
    dictionary: np.ndarray,
    target: np.ndarray,
    cfg: AdmmConfig | None = None,
) -> np.ndarray:
    """Minimum-l1 coefficients expressing ``target`` in ``dictionary``.

    Same equality-through-stiff-penalty scheme as the ``EXACT`` variant of
    :func:`solve`, for a single free vector and without the zero-diagonal
    constraint. Used by the recovery-condition checkers.
    """
    cfg = cfg or AdmmConfig()
    B = np.asarray(dictionary, dtype=np.float64)
    x = np.asarray(target, dtype=np.float64).ravel()
    if B.ndim != 2 or B.shape[0] != x.size:
        raise ValueError("dictionary and target dimensions disagree")
    scale = float(np.abs(B.T @ x).max())
    if scale == 0.0:
        return np.zeros(B.shape[1])
    lam = EQUALITY_SURROGATE_MULTIPLIER / max(scale, _SCALE_FLOOR)
    rho = cfg.rho if cfg.rho is not None else 800.0
    m, n = B.shape

    with threadpool_limits(limits=1):
        Bs = np.sqrt(lam) * B
        if m < n:
            Sf = cho_factor(rho * np.eye(m) + Bs @ Bs.T, check_finite=False)

            def apply_inverse(v):
                return (v - Bs.T @ cho_solve(Sf, Bs @ v, check_finite=False)) / rho

        else:
            Mf = cho_factor(rho * np.eye(n) + Bs.T @ Bs, check_finite=False)

            def apply_inverse(v):
                return cho_solve(Mf, v, check_finite=False)

        lamBtx = lam * (B.T @ x)
        a = np.zeros(n)
        c = np.zeros(n)
        w = np.zeros(n)
        for _ in range(cfg.max_iter):
            a_new = apply_inverse(lamBtx + rho * c - w)
            c = shrink(a_new + w / rho, 1.0 / rho)
            w += rho * (a_new - c)
            done = (
                np.abs(a_new - c).max() <= cfg.epsilon
                and np.abs(a_new - a).max() <= cfg.epsilon
            )
            a = a_new
            if done:
                break
        else:
            warnings.warn("dictionary l1 solve hit the iteration cap", stacklevel=2)
    return c
