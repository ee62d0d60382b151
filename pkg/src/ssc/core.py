"""Shared data containers and validation used by every other module.

Conventions fixed here and relied on everywhere else:

* data points are the *columns* of a ``D x N`` matrix (ambient dimension
  times number of points),
* labels are 0-based in memory; 1-based only in files (see ``dataio``),
* all containers are immutable after construction and safe to share
  across workers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np


class NonFiniteError(ValueError):
    """A matrix entry is NaN or infinite."""


class EmptyMaskError(ValueError):
    """A per-point known-entry index set is empty."""


class TooFewPointsError(ValueError):
    """Self-expression needs at least two data points."""


class ZeroColumnError(ValueError):
    """A column with zero norm has no direction (or no coefficient mass)."""


class NotOrthonormalError(ValueError):
    """A matrix expected to have orthonormal columns does not."""


ORTHONORMALITY_TOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _as_matrix(values) -> np.ndarray:
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class DataMatrix:
    """A ``D x N`` matrix of column data points.

    Parameters
    ----------
    values : array_like, shape (D, N)
        One data point per column.
    masks : sequence of index arrays, optional
        For incomplete data: per point, the 0-based row indices whose
        entries are known. ``None`` means every entry is known.
    """

    values: np.ndarray
    masks: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(_as_matrix(self.values)))
        if self.masks is not None:
            if len(self.masks) != self.n_points:
                raise ValueError(
                    f"expected {self.n_points} masks, got {len(self.masks)}"
                )
            masks = tuple(
                _readonly(np.unique(np.asarray(m, dtype=np.intp).ravel()))
                for m in self.masks
            )
            for m in masks:
                if m.size and (m[0] < 0 or m[-1] >= self.ambient_dim):
                    raise ValueError("mask index out of range")
            object.__setattr__(self, "masks", masks)

    @property
    def ambient_dim(self) -> int:
        return self.values.shape[0]

    @property
    def n_points(self) -> int:
        return self.values.shape[1]


def validate(data: DataMatrix) -> DataMatrix:
    """Check the DataMatrix invariants and return the input unchanged.

    Raises
    ------
    NonFiniteError
        If any entry is NaN or infinite.
    TooFewPointsError
        If there are fewer than two columns.
    EmptyMaskError
        If a known-entry index set is empty.
    """
    if data.n_points < 2:
        raise TooFewPointsError(
            f"need at least 2 points, got {data.n_points}"
        )
    if not np.isfinite(data.values).all():
        raise NonFiniteError("data matrix contains NaN or infinite entries")
    if data.masks is not None:
        for i, m in enumerate(data.masks):
            if m.size == 0:
                raise EmptyMaskError(f"known-entry set of point {i} is empty")
    return data


def normalize_unit_columns(data: DataMatrix) -> DataMatrix:
    """Rescale every column to unit Euclidean norm, keeping its direction.

    Raises
    ------
    ZeroColumnError
        If some column is identically zero.
    """
    norms = np.linalg.norm(data.values, axis=0)
    if np.any(norms == 0.0):
        bad = int(np.flatnonzero(norms == 0.0)[0])
        raise ZeroColumnError(f"column {bad} has zero norm")
    return DataMatrix(data.values / norms, masks=data.masks)


class Variant(Enum):
    """Which self-expressive program the solver runs.

    ``EXACT``
        Equality-constrained l1 program (solved through a stiff
        quadratic penalty, see ``solver.solve``).
    ``NOISE``
        l1 + quadratic residual penalty (dense noise).
    ``OUTLIER``
        l1 + l1-penalized sparse error matrix.
    ``NOISE_AND_OUTLIER``
        Both penalties.
    """

    EXACT = "exact"
    NOISE = "noise"
    OUTLIER = "outlier"
    NOISE_AND_OUTLIER = "both"


@dataclass(frozen=True)
class ProblemSpec:
    """Program variant plus its regularization multipliers.

    ``alpha_z`` and ``alpha_e`` are the dimensionless multipliers that are
    divided by the data-dependent scales ``mu_z`` / ``mu_e`` to obtain the
    actual weights. ``lambda_r`` is the absolute weight of the row-sparsity
    regularizer (0 disables it). ``normalize_columns`` applies unit-l2
    column normalization before solving.
    """

    variant: Variant = Variant.NOISE
    affine: bool = False
    alpha_z: float = 800.0
    alpha_e: float = 20.0
    lambda_r: float = 0.0
    normalize_columns: bool = True

    def __post_init__(self):
        if isinstance(self.variant, str):
            object.__setattr__(self, "variant", Variant(self.variant))
        if self.alpha_z <= 0 or self.alpha_e <= 0:
            raise ValueError("alpha_z and alpha_e must be positive")
        if self.lambda_r < 0:
            raise ValueError("lambda_r must be nonnegative")
        noise_active = self.variant in (Variant.NOISE, Variant.NOISE_AND_OUTLIER)
        outlier_active = self.variant in (Variant.OUTLIER, Variant.NOISE_AND_OUTLIER)
        # Multipliers <= 1 put the program in the collapse regime where at
        # least one column is driven to zero; allowed, but worth flagging.
        if noise_active and self.alpha_z <= 1.0:
            warnings.warn(
                f"alpha_z = {self.alpha_z} <= 1 can zero out whole columns",
                stacklevel=2,
            )
        if outlier_active and self.alpha_e <= 1.0:
            warnings.warn(
                f"alpha_e = {self.alpha_e} <= 1 can zero out whole columns",
                stacklevel=2,
            )


@dataclass(frozen=True)
class CoefficientMatrix:
    """An ``N x N`` self-expressive coefficient matrix with zero diagonal."""

    values: np.ndarray

    def __post_init__(self):
        a = _as_matrix(self.values)
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"coefficient matrix must be square, got {a.shape}")
        if not np.isfinite(a).all():
            raise NonFiniteError("coefficient matrix contains NaN or Inf")
        if np.any(np.diagonal(a) != 0.0):
            raise ValueError("coefficient matrix diagonal must be exactly zero")
        object.__setattr__(self, "values", _readonly(a))

    @property
    def n_points(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SubspaceArrangement:
    """Orthonormal bases of n subspaces plus optional per-point labels.

    ``bases[i]`` is ``D x d_i`` with orthonormal columns. ``labels`` (when
    data is attached) assigns each data column a 0-based subspace index.
    """

    bases: tuple[np.ndarray, ...]
    labels: np.ndarray | None = None

    def __post_init__(self):
        bases = tuple(_readonly(_as_matrix(U)) for U in self.bases)
        if not bases:
            raise ValueError("arrangement needs at least one subspace")
        D = bases[0].shape[0]
        for i, U in enumerate(bases):
            if U.shape[0] != D:
                raise ValueError("all bases must share the ambient dimension")
            gram_err = np.max(np.abs(U.T @ U - np.eye(U.shape[1])))
            if gram_err > ORTHONORMALITY_TOL:
                raise NotOrthonormalError(
                    f"basis {i} is not orthonormal (max Gram error {gram_err:.2e})"
                )
        object.__setattr__(self, "bases", bases)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.intp).ravel()
            if lab.size and (lab.min() < 0 or lab.max() >= len(bases)):
                raise ValueError("labels out of range for this arrangement")
            counts = np.bincount(lab, minlength=len(bases))
            if lab.size and np.any(counts == 0):
                raise ValueError("every subspace needs at least one point")
            object.__setattr__(self, "labels", _readonly(lab))

    @property
    def n_subspaces(self) -> int:
        return len(self.bases)

    @property
    def ambient_dim(self) -> int:
        return self.bases[0].shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(U.shape[1] for U in self.bases)


@dataclass(frozen=True)
class ClusteringResult:
    """Predicted segmentation plus spectral/k-means diagnostics."""

    labels: np.ndarray
    n_clusters: int
    eigengap_spectrum: np.ndarray
    kmeans_inertia: float

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.intp).ravel()
        distinct = np.unique(lab).size
        if distinct != self.n_clusters:
            raise ValueError(
                f"labels take {distinct} distinct values, expected {self.n_clusters}"
            )
        object.__setattr__(self, "labels", _readonly(lab))
        object.__setattr__(
            self,
            "eigengap_spectrum",
            _readonly(np.asarray(self.eigengap_spectrum, dtype=np.float64)),
        )
        if self.kmeans_inertia < 0:
            raise ValueError("k-means inertia must be nonnegative")
