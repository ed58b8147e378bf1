"""Spectral and abundance angle distances, endmember matching and rms scores.

All angles are in radians.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


class UndefinedAngleError(ValueError):
    """Angle requested for a zero-norm vector."""


def _angle(u, v) -> float:
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.size} vs {v.size}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise UndefinedAngleError("angle undefined for a zero vector")
    return float(np.arccos(np.clip(u @ v / (nu * nv), -1.0, 1.0)))


def sad(m, m_hat) -> float:
    """Spectral angle distance between two signatures."""
    return _angle(m, m_hat)


def aad(a, a_hat) -> float:
    """Abundance angle distance between two abundance vectors."""
    return _angle(a, a_hat)


def _column_angles(U, V) -> np.ndarray:
    """Angle between matching columns of ``U`` and ``V``; NaN where a column is zero."""
    nu = np.linalg.norm(U, axis=0)
    nv = np.linalg.norm(V, axis=0)
    denom = nu * nv
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.einsum("ij,ij->j", U, V) / denom
    out = np.arccos(np.clip(cos, -1.0, 1.0))
    out[denom == 0] = np.nan
    return out


def sad_matrix(A_true, A_est) -> np.ndarray:
    """``P_true x P_est`` matrix of pairwise spectral angles."""
    A_true = np.asarray(A_true, dtype=float)
    A_est = np.asarray(A_est, dtype=float)
    nt = np.linalg.norm(A_true, axis=0)
    ne = np.linalg.norm(A_est, axis=0)
    if (nt == 0).any() or (ne == 0).any():
        raise UndefinedAngleError("zero endmember signature")
    cos = (A_true.T @ A_est) / np.outer(nt, ne)
    return np.arccos(np.clip(cos, -1.0, 1.0))


def match_endmembers(A_true, A_est) -> np.ndarray:
    """Assignment of estimated to true endmembers minimising total SAD.

    Returns ``perm`` such that ``A_est[:, perm[p]]`` is matched to ``A_true[:, p]``.
    """
    A_true = np.asarray(A_true, dtype=float)
    A_est = np.asarray(A_est, dtype=float)
    if A_true.shape != A_est.shape:
        raise ValueError(f"endmember shapes differ: {A_true.shape} vs {A_est.shape}")
    rows, cols = linear_sum_assignment(sad_matrix(A_true, A_est))
    perm = np.empty(A_true.shape[1], dtype=np.intp)
    perm[rows] = cols
    return perm


def rms(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.sqrt(np.mean(values ** 2)))


@dataclass
class EvaluationReport:
    """Matched per-item angles and their rms aggregates.

    ``permutation[p]`` is the estimated endmember matched to true endmember
    ``p``. ``per_pixel_aad`` is NaN for pixels whose true abundance column is
    all zero; those are excluded from ``rms_aad`` and counted in
    ``n_excluded_pixels``.
    """

    permutation: np.ndarray
    per_endmember_sad: np.ndarray
    per_pixel_aad: np.ndarray
    rms_sad: float
    rms_aad: float
    n_excluded_pixels: int = 0

    def as_dict(self) -> dict:
        return {
            "rms_sad": self.rms_sad,
            "rms_aad": self.rms_aad,
            "n_excluded_pixels": self.n_excluded_pixels,
            "permutation": " ".join(str(int(p)) for p in self.permutation),
            "per_endmember_sad": " ".join(repr(float(v)) for v in self.per_endmember_sad),
        }

    def to_text(self) -> str:
        """Flat ``key=value`` text, one pair per line."""
        lines = []
        for key, val in self.as_dict().items():
            lines.append(f"{key}={val!r}" if isinstance(val, float) else f"{key}={val}")
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def read(cls, path) -> dict:
        """Parse a report file back into a dict of strings/floats."""
        out = {}
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                key, _, val = line.partition("=")
                try:
                    out[key] = float(val)
                except ValueError:
                    out[key] = val
        return out


def score(A_true, A_est, S_true=None, S_est=None) -> EvaluationReport:
    """Match endmembers by SAD, then compute per-item angles and rms values.

    Abundances are optional; without them ``rms_aad`` is NaN.
    """
    A_true = np.asarray(A_true, dtype=float)
    A_est = np.asarray(A_est, dtype=float)
    perm = match_endmembers(A_true, A_est)
    sads = _column_angles(A_true, A_est[:, perm])

    if S_true is None or S_est is None:
        return EvaluationReport(perm, sads, np.array([]), rms(sads), float("nan"), 0)

    S_true = np.asarray(S_true, dtype=float)
    S_est = np.asarray(S_est, dtype=float)
    if S_true.shape != S_est.shape or S_true.shape[0] != A_true.shape[1]:
        raise ValueError(
            f"abundance shapes {S_true.shape} vs {S_est.shape} do not fit P={A_true.shape[1]}")
    aads = _column_angles(S_true, S_est[perm])
    # a zero estimate against a nonzero truth is maximally wrong, not undefined
    true_zero = np.linalg.norm(S_true, axis=0) == 0
    aads[np.isnan(aads) & ~true_zero] = np.pi / 2
    valid = ~true_zero
    rms_aad = rms(aads[valid]) if valid.any() else float("nan")
    return EvaluationReport(perm, sads, aads, rms(sads), rms_aad, int(true_zero.sum()))
