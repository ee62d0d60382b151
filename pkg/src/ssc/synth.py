"""Controlled subspace arrangements, corrupted samples, error metrics,
and the angle/density sweep harness.

The generator draws a random orthonormal ``D x 2d`` frame ``[A B]`` and
rotates: subspace k gets basis ``A cos((k-1) t) + B sin((k-1) t)`` for
angle ``t``. For three subspaces this makes the two neighboring smallest
principal angles equal to ``t`` and places every subspace inside the
direct sum of the other two (stacked rank ``2d``), which is the hard
regime the benchmark sweeps.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import CoefficientMatrix, DataMatrix, ProblemSpec, SubspaceArrangement
from .solver import AdmmConfig, solve
from .spectral import build_graph, normalize_coefficients, spectral_cluster


class DimensionTooSmallError(ValueError):
    """Ambient dimension cannot hold the rotated frame."""


class LengthMismatchError(ValueError):
    """Label vectors of different lengths cannot be compared."""


class AllZeroColumnsError(ValueError):
    """Every coefficient column is zero; the recovery error is undefined."""


EXHAUSTIVE_MATCH_LIMIT = 8


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic instance.

    ``theta_deg`` is the smallest principal angle between neighboring
    subspaces; ``ng`` the number of points per subspace; ``noise_sigma``
    the per-entry Gaussian noise level; ``outlier_fraction`` the fraction
    of entries per point receiving a uniform corruption of magnitude up
    to ``outlier_magnitude``.
    """

    theta_deg: float
    ng: int
    ambient_dim: int = 50
    subspace_dim: int = 4
    n_subspaces: int = 3
    seed: int = 0
    noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    outlier_magnitude: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.theta_deg <= 90.0:
            raise ValueError("theta_deg must be in (0, 90]")
        if self.ng < self.subspace_dim + 1:
            raise ValueError("ng must be at least subspace_dim + 1")
        if self.ambient_dim < 2 * self.subspace_dim:
            raise DimensionTooSmallError(
                "ambient_dim must be at least twice subspace_dim"
            )
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ValueError("outlier_fraction must be in [0, 1)")
        if self.noise_sigma < 0 or self.outlier_magnitude <= 0:
            raise ValueError("invalid corruption parameters")


@dataclass
class SweepResult:
    """Flat per-trial records of one sweep."""

    rows: list[tuple[float, int, int, float, float, bool]] = field(default_factory=list)

    CSV_HEADER = "theta_deg,ng,trial,ssr_error,clustering_error,converged"

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.CSV_HEADER + "\n")
            for theta, ng, trial, ssr, cerr, conv in self.rows:
                fh.write(
                    f"{_fmt(theta)},{ng},{trial},{_fmt(ssr)},{_fmt(cerr)},"
                    f"{'true' if conv else 'false'}\n"
                )

    def cell_means(self) -> list[tuple[float, int, float, float, float]]:
        """Per-(theta, ng) means: (theta, ng, mean ssr, mean clustering,
        converged fraction), ordered as first encountered."""
        order: list[tuple[float, int]] = []
        acc: dict[tuple[float, int], list[tuple[float, float, bool]]] = {}
        for theta, ng, _trial, ssr, cerr, conv in self.rows:
            key = (theta, ng)
            if key not in acc:
                acc[key] = []
                order.append(key)
            acc[key].append((ssr, cerr, conv))
        out = []
        for key in order:
            vals = acc[key]
            out.append(
                (
                    key[0],
                    key[1],
                    float(np.mean([v[0] for v in vals])),
                    float(np.mean([v[1] for v in vals])),
                    float(np.mean([v[2] for v in vals])),
                )
            )
        return out


def _fmt(x: float) -> str:
    return repr(float(x))


def _seed_sequence(*keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(k) & (2**64 - 1) for k in keys])


def generate_arrangement(spec: SynthSpec) -> SubspaceArrangement:
    """Rotated-frame arrangement with neighboring angles ``theta_deg``."""
    rng = np.random.default_rng(_seed_sequence(spec.seed, 0xA1))
    D, d = spec.ambient_dim, spec.subspace_dim
    frame = np.linalg.qr(rng.standard_normal((D, 2 * d)))[0]
    base_a, base_b = frame[:, :d], frame[:, d:]
    t = math.radians(spec.theta_deg)
    bases = [
        base_a * math.cos(k * t) + base_b * math.sin(k * t)
        for k in range(spec.n_subspaces)
    ]
    return SubspaceArrangement(tuple(bases))


def sample_points(
    arr: SubspaceArrangement, ng: int, seed: int
) -> tuple[DataMatrix, SubspaceArrangement]:
    """Draw ``ng`` unit-norm points per subspace (Gaussian coefficients,
    then l2 normalization) and attach the label vector to the
    arrangement."""
    if ng < 1:
        raise ValueError("ng must be >= 1")
    rng = np.random.default_rng(_seed_sequence(seed, 0xB2))
    cols, labels = [], []
    for k, U in enumerate(arr.bases):
        X = U @ rng.standard_normal((U.shape[1], ng))
        X /= np.linalg.norm(X, axis=0, keepdims=True)
        cols.append(X)
        labels.extend([k] * ng)
    data = DataMatrix(np.hstack(cols))
    return data, SubspaceArrangement(arr.bases, labels=np.asarray(labels))


def corrupt(data: DataMatrix, spec: SynthSpec) -> DataMatrix:
    """Additive Gaussian noise plus sparse uniform corruptions.

    Every entry gets Gaussian noise of standard deviation
    ``noise_sigma``; independently per point,
    ``floor(outlier_fraction * D)`` uniformly chosen entries receive an
    additional uniform perturbation from
    ``[-outlier_magnitude, outlier_magnitude]``.
    """
    rng = np.random.default_rng(_seed_sequence(spec.seed, 0xC3))
    values = data.values.copy()
    D, N = values.shape
    if spec.noise_sigma > 0:
        values += spec.noise_sigma * rng.standard_normal((D, N))
    k = int(spec.outlier_fraction * D)
    if k > 0:
        for i in range(N):
            rows = rng.choice(D, size=k, replace=False)
            values[rows, i] += rng.uniform(
                -spec.outlier_magnitude, spec.outlier_magnitude, size=k
            )
    return DataMatrix(values, masks=data.masks)


def ssr_error(C: CoefficientMatrix, labels: np.ndarray) -> float:
    """Mean fraction of each column's l1 mass spent outside its own
    subspace, in [0, 1]. Zero-l1 columns are excluded with a warning."""
    labels = np.asarray(labels).ravel()
    values = C.values
    if labels.size != values.shape[1]:
        raise LengthMismatchError("labels length does not match coefficients")
    absC = np.abs(values)
    totals = absC.sum(axis=0)
    own = np.zeros_like(totals)
    for k in np.unique(labels):
        mask = labels == k
        own[mask] = absC[np.ix_(mask, mask)].sum(axis=0)
    valid = totals > 0
    if not valid.any():
        raise AllZeroColumnsError("every coefficient column is zero")
    if not valid.all():
        warnings.warn(
            f"{int(np.sum(~valid))} zero coefficient columns excluded from "
            "the recovery error",
            stacklevel=2,
        )
    frac = 1.0 - own[valid] / totals[valid]
    return float(np.clip(frac.mean(), 0.0, 1.0))


def clustering_error(pred: np.ndarray, truth: np.ndarray) -> float:
    """Misclassification fraction minimized over cluster relabelings.

    Exhaustive permutation search up to 8 clusters, optimal assignment
    beyond.
    """
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.size != truth.size:
        raise LengthMismatchError("label vectors differ in length")
    if pred.size == 0:
        raise LengthMismatchError("empty label vectors")
    pred_ids = np.unique(pred)
    truth_ids = np.unique(truth)
    confusion = np.zeros((pred_ids.size, truth_ids.size), dtype=np.int64)
    for a, p in enumerate(pred_ids):
        sel = pred == p
        for b, t in enumerate(truth_ids):
            confusion[a, b] = int(np.sum(truth[sel] == t))
    k = max(pred_ids.size, truth_ids.size)
    if k <= EXHAUSTIVE_MATCH_LIMIT:
        from itertools import permutations

        square = np.zeros((k, k), dtype=np.int64)
        square[: pred_ids.size, : truth_ids.size] = confusion
        best = max(
            sum(square[a, perm[a]] for a in range(k))
            for perm in permutations(range(k))
        )
    else:
        row, col = linear_sum_assignment(-confusion)
        best = int(confusion[row, col].sum())
    return float(1.0 - best / pred.size)


def run_sweep(
    grid: list[tuple[float, int]],
    trials: int,
    base_spec: SynthSpec,
    spec: ProblemSpec,
    cfg: AdmmConfig | None = None,
    jobs: int = 1,
) -> SweepResult:
    """Run the angle/density benchmark over ``grid`` cells.

    Each (theta, ng, trial) gets a seed derived from the base seed and
    its own coordinates, so results are reproducible in any execution
    order. Rows are ordered by grid position then trial. Non-converged
    solves are recorded with ``converged=False`` rather than raised.
    """
    if not grid:
        raise ValueError("grid must be nonempty")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    tasks = [
        (theta, ng, trial, base_spec, spec, cfg)
        for theta, ng in grid
        for trial in range(trials)
    ]
    if jobs > 1:
        from multiprocessing import get_context

        with get_context("spawn").Pool(jobs) as pool:
            rows = pool.map(_sweep_trial, tasks)
    else:
        rows = [_sweep_trial(t) for t in tasks]
    return SweepResult(rows=rows)


def _sweep_trial(task) -> tuple[float, int, int, float, float, bool]:
    theta, ng, trial, base_spec, prob_spec, cfg = task
    cell_seed = int(
        _seed_sequence(
            base_spec.seed, int(round(theta * 1000)), ng, trial
        ).generate_state(1)[0]
    )
    spec = replace(base_spec, theta_deg=theta, ng=ng, seed=cell_seed)
    arr = generate_arrangement(spec)
    data, arr = sample_points(arr, ng, cell_seed)
    if spec.noise_sigma > 0 or spec.outlier_fraction > 0:
        data = corrupt(data, spec)
    result = solve(data, prob_spec, cfg)
    ssr = ssr_error(result.coefficients, arr.labels)
    graph = build_graph(normalize_coefficients(result.coefficients))
    clustering = spectral_cluster(
        graph, n=spec.n_subspaces, seed=cell_seed, restarts=20
    )
    cerr = clustering_error(clustering.labels, arr.labels)
    return (theta, ng, trial, ssr, cerr, result.diagnostics.converged)
