"""File formats, missing-entry handling, PCA projection, and trajectory
stacking.

Formats (all plain text, locale-independent '.' decimals):

* matrix file: one CSV row per ambient dimension, one column per point;
  optional leading comment lines starting with '#'; values printed in
  shortest round-trip form so read(write(M)) is exact,
* mask file: one line per point with space-separated 1-based known-row
  indices,
* labels file: one 1-based integer per line.
"""

from __future__ import annotations

import numpy as np

from .core import DataMatrix


class ParseError(ValueError):
    """Malformed input file; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyCommonSupportError(ValueError):
    """No row is known for every point."""


class ShapeMismatchError(ValueError):
    """Input array has the wrong shape."""


def write_matrix(data: DataMatrix | np.ndarray, path, header: str | None = None) -> None:
    values = data.values if isinstance(data, DataMatrix) else np.asarray(data, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(f"# {header}\n")
        for row in values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix(path) -> DataMatrix:
    rows: list[list[float]] = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split(",")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise ParseError(
                    f"expected {width} columns, found {len(parts)}", lineno
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
    if not rows:
        raise ParseError("no data rows", 1)
    return DataMatrix(np.asarray(rows))


def write_labels(labels: np.ndarray, path) -> None:
    """Write 0-based internal labels as 1-based lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in np.asarray(labels).ravel():
            fh.write(f"{int(v) + 1}\n")


def read_labels(path) -> np.ndarray:
    """Read 1-based labels into the 0-based internal convention."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                value = int(stripped)
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if value < 1:
                raise ParseError("labels are 1-based", lineno)
            out.append(value - 1)
    return np.asarray(out, dtype=np.intp)


def write_masks(masks, path) -> None:
    """Write 0-based internal known-row index sets as 1-based lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for m in masks:
            fh.write(" ".join(str(int(i) + 1) for i in np.asarray(m).ravel()) + "\n")


def read_masks(path, n_points: int | None = None) -> tuple[np.ndarray, ...]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if stripped.startswith("#"):
                continue
            try:
                idx = [int(tok) - 1 for tok in stripped.split()] if stripped else []
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if any(i < 0 for i in idx):
                raise ParseError("mask indices are 1-based", lineno)
            out.append(np.asarray(sorted(set(idx)), dtype=np.intp))
    if n_points is not None and len(out) != n_points:
        raise ParseError(f"expected {n_points} mask lines, found {len(out)}", 1)
    return tuple(out)


def project_common_rows(data: DataMatrix) -> tuple[DataMatrix, np.ndarray]:
    """Keep only the rows known for every point.

    Returns the reduced (mask-free) matrix and the sorted 0-based indices
    of the retained rows. Without masks this is the identity.

    Raises
    ------
    EmptyCommonSupportError
        If no row is known for all points.
    """
    if data.masks is None:
        return data, np.arange(data.ambient_dim)
    common = set(range(data.ambient_dim))
    for m in data.masks:
        common &= set(int(i) for i in m)
        if not common:
            raise EmptyCommonSupportError("no row is known for every point")
    rows = np.asarray(sorted(common), dtype=np.intp)
    return DataMatrix(data.values[rows, :]), rows


def fill_missing_random(
    data: DataMatrix, magnitude: float | None = None, seed: int = 0
) -> DataMatrix:
    """Replace unknown entries with uniform draws in [-magnitude, magnitude].

    The default magnitude is the largest absolute known entry, so the
    fills look like sparse outlying entries at the data's own scale. The
    result carries no masks and is intended for the sparse-error solver
    variant.
    """
    if data.masks is None:
        return data
    values = data.values.copy()
    known = np.zeros(values.shape, dtype=bool)
    for i, m in enumerate(data.masks):
        known[m, i] = True
    if magnitude is None:
        magnitude = float(np.abs(values[known]).max()) if known.any() else 1.0
    if magnitude <= 0:
        raise ValueError("magnitude must be positive")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), 0xF1]))
    missing = ~known
    values[missing] = rng.uniform(-magnitude, magnitude, size=int(missing.sum()))
    return DataMatrix(values)


def pca_project(data: DataMatrix, k: int, center: bool = False) -> DataMatrix:
    """Project columns onto the top-k left singular subspace.

    No mean subtraction by default: the subspaces being recovered pass
    through the origin, and affine structure is handled by the solver's
    affine constraint instead. ``center=True`` subtracts the column mean
    first (for experimentation).
    """
    if not 1 <= k <= min(data.ambient_dim, data.n_points):
        raise ValueError(f"k must be in [1, {min(data.ambient_dim, data.n_points)}]")
    values = data.values
    if center:
        values = values - values.mean(axis=1, keepdims=True)
    U, _, _ = np.linalg.svd(values, full_matrices=False)
    return DataMatrix(U[:, :k].T @ values)


def stack_trajectories(points: np.ndarray) -> DataMatrix:
    """Stack per-frame 2-D image coordinates into one column per point.

    ``points`` has shape (frames, points, 2); column i of the result is
    the frame-major stack of point i's coordinates, of length
    ``2 * frames``.
    """
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ShapeMismatchError(f"expected shape (F, N, 2), got {arr.shape}")
    F, N, _ = arr.shape
    if F == 0 or N == 0:
        raise ShapeMismatchError("need at least one frame and one point")
    return DataMatrix(arr.transpose(0, 2, 1).reshape(2 * F, N))
