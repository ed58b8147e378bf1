"""Linear mixing model: observation container, forward model and constraint checks.

Conventions used throughout the package:

* ``X`` is ``L x N`` (bands x pixels), ``A`` is ``L x P`` and ``S`` is ``P x N``.
* Pixels are ordered row-major over the spatial grid, i.e. pixel index
  ``row * cols + col``.
* Values are unit-agnostic. Graph bandwidths and absolute stopping thresholds
  scale with data magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_ASC_TOL = 0.05


class ShapeError(ValueError):
    """Raised when matrix dimensions do not conform."""


@dataclass(frozen=True)
class ObservationMatrix:
    """Nonnegative ``L x N`` matrix of pixel spectra (columns are pixels).

    Negative entries are clamped to zero on construction; the number of clamped
    entries is kept in ``n_clamped``. Behaves like an ndarray under
    ``np.asarray``.
    """

    data: np.ndarray
    spatial_dims: tuple[int, int] | None = None
    n_clamped: int = field(default=0, compare=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim != 2 or min(data.shape) < 1:
            raise ShapeError(f"observation must be a non-empty 2-D matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("observation contains non-finite values")
        neg = data < 0
        n_neg = int(neg.sum())
        if n_neg:
            data[neg] = 0.0
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "n_clamped", self.n_clamped + n_neg)
        if self.spatial_dims is not None:
            rows, cols = (int(v) for v in self.spatial_dims)
            if rows * cols != data.shape[1]:
                raise ShapeError(
                    f"spatial_dims {rows}x{cols} does not match {data.shape[1]} pixels")
            object.__setattr__(self, "spatial_dims", (rows, cols))

    @property
    def num_bands(self) -> int:
        return self.data.shape[0]

    @property
    def num_pixels(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)


@dataclass
class ConstraintReport:
    """Result of :func:`validate_abundances`.

    ``anc_violations`` is a list of ``(endmember, pixel)`` indices of negative
    entries; ``asc_violations`` lists pixels whose column sum is off by more
    than the tolerance.
    """

    anc_violations: list[tuple[int, int]]
    asc_violations: list[int]
    asc_tol: float
    mean_asc_deviation: float

    @property
    def ok(self) -> bool:
        return not self.anc_violations and not self.asc_violations


def _as2d(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {M.shape}")
    return M


def synthesize_lmm(A, S, E=None, spatial_dims=None) -> ObservationMatrix:
    """Forward linear mixing model ``X = A S + E``.

    Negative entries produced by noise are clamped to zero; the count is
    available as ``X.n_clamped``.
    """
    A = _as2d(A, "A")
    S = _as2d(S, "S")
    if A.shape[1] != S.shape[0]:
        raise ShapeError(f"A is {A.shape[0]}x{A.shape[1]} but S is {S.shape[0]}x{S.shape[1]}")
    X = A @ S
    if E is not None:
        E = _as2d(E, "E")
        if E.shape != X.shape:
            raise ShapeError(f"noise shape {E.shape} does not match A S shape {X.shape}")
        X = X + E
    return ObservationMatrix(X, spatial_dims=spatial_dims)


def validate_abundances(S, asc_tol: float = DEFAULT_ASC_TOL) -> ConstraintReport:
    """Report ANC (negativity) and ASC (sum-to-one) violations of ``S``."""
    if asc_tol < 0:
        raise ValueError("asc_tol must be >= 0")
    S = _as2d(S, "S")
    neg = np.argwhere(S < 0)
    dev = np.abs(S.sum(axis=0) - 1.0)
    return ConstraintReport(
        anc_violations=[(int(p), int(i)) for p, i in neg],
        asc_violations=[int(i) for i in np.flatnonzero(dev > asc_tol)],
        asc_tol=asc_tol,
        mean_asc_deviation=float(dev.mean()),
    )


def residual_fro(X, A, S) -> float:
    """Frobenius norm ``||X - A S||_F`` (not squared)."""
    X = _as2d(X, "X")
    A = _as2d(A, "A")
    S = _as2d(S, "S")
    if A.shape[1] != S.shape[0] or X.shape != (A.shape[0], S.shape[1]):
        raise ShapeError(
            f"cannot compare X {X.shape} with A {A.shape} @ S {S.shape}")
    return float(np.linalg.norm(X - A @ S))
