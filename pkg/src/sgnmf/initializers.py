"""Starting points for the solvers: random factors, VCA endmembers, FCLS abundances."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.optimize import nnls

from .solver import EPS, augment_asc


class DegenerateDataError(ValueError):
    """Data do not span enough directions to pick the requested endmembers."""


def init_random(L: int, P: int, N: int, seed=None):
    """Uniform random ``A0`` in (0, 1] and column-normalised uniform ``S0``."""
    if min(L, P, N) < 1:
        raise ValueError("L, P and N must all be >= 1")
    rng = np.random.default_rng(seed)
    A0 = 1.0 - rng.random((L, P))
    S0 = 1.0 - rng.random((P, N))
    S0 /= S0.sum(axis=0, keepdims=True)
    return A0, S0


def vca_indices(X, P: int, seed=None) -> np.ndarray:
    """Indices of the pixels picked by projection-based vertex component analysis.

    At step ``i`` a seeded Gaussian direction is projected onto the orthogonal
    complement of the endmembers chosen so far, and the pixel with the largest
    absolute projection onto it is selected.
    """
    X = np.asarray(X, dtype=float)
    L, N = X.shape
    if not 1 <= P <= min(L, N):
        raise ValueError(f"P must be in [1, min(L, N)] = [1, {min(L, N)}], got {P}")
    rng = np.random.default_rng(seed)
    idx = np.empty(P, dtype=np.intp)
    E = np.zeros((L, 0))
    for i in range(P):
        w = rng.standard_normal(L)
        if i:
            # f = (I - E E^+) w
            f = w - E @ np.linalg.lstsq(E, w, rcond=None)[0]
        else:
            f = w
        f /= np.linalg.norm(f)
        proj = np.abs(f @ X)
        j = int(np.argmax(proj))
        if proj[j] <= EPS * max(1.0, float(np.abs(X).max())):
            raise DegenerateDataError(
                f"no pixel has a nonzero projection at step {i + 1}; data rank is below P={P}")
        idx[i] = j
        E = X[:, idx[: i + 1]]
    return idx


def init_vca(X, P: int, seed=None) -> np.ndarray:
    """``L x P`` endmember matrix made of the pixels picked by :func:`vca_indices`."""
    X = np.asarray(X, dtype=float)
    return X[:, vca_indices(X, P, seed)].copy()


def init_fcls(X, A, delta: float = 15.0, maxiter: int | None = None) -> np.ndarray:
    """Fully constrained abundances via per-pixel NNLS on the delta-augmented system.

    Nonnegativity is exact; sum-to-one holds approximately, more tightly as
    ``delta`` grows.
    """
    if not delta > 0:
        raise ValueError("delta must be > 0 for FCLS")
    X_aug, A_aug = augment_asc(X, A, delta)
    P, N = A_aug.shape[1], X_aug.shape[1]
    S = np.empty((P, N))
    failed = 0
    for i in range(N):
        try:
            S[:, i], _ = nnls(A_aug, X_aug[:, i], maxiter=maxiter)
        except RuntimeError:
            failed += 1
            S[:, i] = np.clip(np.linalg.lstsq(A_aug, X_aug[:, i], rcond=None)[0], 0.0, None)
    if failed:
        warnings.warn(f"NNLS did not converge for {failed} pixel(s); clipped least squares used",
                      RuntimeWarning, stacklevel=2)
    return S


def initialize(X, P: int, method: str = "vca", seed=None, delta: float = 15.0):
    """Return ``(A0, S0)`` using ``method`` in ``{"random", "vca"}``.

    ``"vca"`` pairs VCA endmembers with FCLS abundances.
    """
    X = np.asarray(X, dtype=float)
    if method == "random":
        return init_random(X.shape[0], P, X.shape[1], seed)
    if method in ("vca", "vca_fcls"):
        A0 = init_vca(X, P, seed)
        return A0, init_fcls(X, A0, delta)
    raise ValueError(f"unknown init method {method!r}")
