"""Multiplicative-update solvers for NMF, sparse NMF, GNMF and sparse GNMF.

All four variants minimise

    ||X - A S||_F^2 + lam * sum(S ** 0.5) + mu * Tr(S Lap S^T)

with ``lam`` annealed as ``lambda0 * exp(-t / tau)`` and the abundance update
run on the delta-augmented system that softly enforces sum-to-one.
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

from .core import ShapeError
from .graph import DEFAULT_K, MEDIAN, AffinityGraph, build_knn_graph, graph_quadratic

logger = logging.getLogger(__name__)

EPS = 1e-12

TRACE_COLUMNS = ("t", "lambda", "residual_fro", "fit", "sparsity", "graph_term")


class Variant(str, enum.Enum):
    NMF = "nmf"
    SPARSE_NMF = "sparse-nmf"
    GNMF = "gnmf"
    SPARSE_GNMF = "sparse-gnmf"

    @property
    def sparse(self) -> bool:
        return self in (Variant.SPARSE_NMF, Variant.SPARSE_GNMF)

    @property
    def graph(self) -> bool:
        return self in (Variant.GNMF, Variant.SPARSE_GNMF)


class NumericalDivergenceError(RuntimeError):
    """Non-finite values appeared in A or S; ``trace`` holds the records so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SolverConfig:
    """Solver hyperparameters. Defaults follow the published synthetic setup."""

    variant: Variant = Variant.SPARSE_GNMF
    lambda0: float = 0.05
    tau: float = 25.0
    mu: float = 0.1
    delta: float = 15.0
    threshold: float = 0.5e-3
    max_iter: int = 3000
    knn_k: int = DEFAULT_K
    sigma: float | str = MEDIAN
    epsilon: float = EPS
    seed: int = 0
    residual_mode: str = "absolute"

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.lambda0 < 0:
            raise ValueError("lambda0 must be >= 0")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.knn_k < 1:
            raise ValueError("knn_k must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.residual_mode not in ("absolute", "relative"):
            raise ValueError("residual_mode must be 'absolute' or 'relative'")
        if isinstance(self.sigma, str):
            if self.sigma != MEDIAN:
                raise ValueError(f"unknown sigma policy {self.sigma!r}")
        elif not self.sigma > 0:
            raise ValueError("sigma must be > 0")

    @property
    def effective_lambda0(self) -> float:
        return self.lambda0 if self.variant.sparse else 0.0

    @property
    def effective_mu(self) -> float:
        return self.mu if self.variant.graph else 0.0

    def replace(self, **changes) -> "SolverConfig":
        return SolverConfig(**{**asdict(self), **changes})

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["variant"] = self.variant.value
        return d


@dataclass(frozen=True)
class TraceRecord:
    t: int
    lam: float
    residual_fro: float
    fit: float
    sparsity: float
    graph_term: float

    def row(self):
        return (self.t, self.lam, self.residual_fro, self.fit, self.sparsity, self.graph_term)


@dataclass
class UnmixResult:
    A: np.ndarray
    S: np.ndarray
    trace: list[TraceRecord]
    stop_reason: str
    config: SolverConfig | None = None
    graph: AffinityGraph | None = field(default=None, repr=False)

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r.residual_fro for r in self.trace])

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([r.lam for r in self.trace])

    def write_trace(self, path) -> None:
        write_trace_csv(self.trace, path)


def write_trace_csv(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(TRACE_COLUMNS)
        for rec in trace:
            t, *vals = rec.row()
            out.writerow([t, *(repr(float(v)) for v in vals)])


def lambda_schedule(t, lambda0: float, tau: float) -> float:
    """Annealed sparsity weight ``lambda0 * exp(-t / tau)``."""
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return lambda0 * np.exp(-t / tau)


def objective(X, A, S, lam: float = 0.0, mu: float = 0.0, G: AffinityGraph | None = None):
    """Return ``(total, fit, sparsity, graph_term)`` of the sparse GNMF cost."""
    X, A, S = (np.asarray(M, dtype=float) for M in (X, A, S))
    _check_shapes(X, A, S)
    if mu > 0 and G is None:
        raise ValueError("mu > 0 requires an affinity graph")
    R = X - A @ S
    fit = float(np.einsum("ij,ij->", R, R))
    sparsity = lam * float(np.sqrt(np.maximum(S, 0.0)).sum()) if lam else 0.0
    graph_term = mu * graph_quadratic(S, G) if mu > 0 else 0.0
    return fit + sparsity + graph_term, fit, sparsity, graph_term


def update_endmembers(A, X, S, epsilon: float = EPS) -> np.ndarray:
    """``A <- A * (X S^T) / (A S S^T + eps)``."""
    return A * (X @ S.T) / (A @ (S @ S.T) + epsilon)


def update_abundances(S, A, X, lam: float = 0.0, mu: float = 0.0,
                      G: AffinityGraph | None = None, epsilon: float = EPS) -> np.ndarray:
    """One multiplicative step on ``S``.

    ``S <- S * (A^T X + mu S W) / (A^T A S + lam/2 S^-1/2 + mu S D + eps)``.
    Pass the augmented ``A`` and ``X`` to include the sum-to-one row.
    """
    numer = A.T @ X
    denom = (A.T @ A) @ S
    if lam:
        denom = denom + (0.5 * lam) / np.sqrt(np.maximum(S, epsilon))
    if mu > 0:
        if G is None:
            raise ValueError("mu > 0 requires an affinity graph")
        # W is symmetric, so S W = (W S^T)^T
        numer = numer + mu * (G.weights @ S.T).T
        denom = denom + mu * (S * G.degrees)
    return S * numer / (denom + epsilon)


def augment_asc(X, A, delta: float):
    """Append a row of ``delta`` to both ``X`` and ``A``."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    X = np.asarray(X, dtype=float)
    A = np.asarray(A, dtype=float)
    X_aug = np.vstack([X, np.full((1, X.shape[1]), float(delta))])
    A_aug = np.vstack([A, np.full((1, A.shape[1]), float(delta))])
    return X_aug, A_aug


def _check_shapes(X, A, S):
    if X.ndim != 2 or A.ndim != 2 or S.ndim != 2:
        raise ShapeError("X, A and S must be 2-D")
    if A.shape[1] != S.shape[0] or X.shape != (A.shape[0], S.shape[1]):
        raise ShapeError(f"X {X.shape} does not factor as A {A.shape} @ S {S.shape}")


def run_unmix(X, cfg: SolverConfig, init, graph: AffinityGraph | None = None,
              callback: Callable[[int, np.ndarray, np.ndarray], None] | None = None) -> UnmixResult:
    """Alternate endmember and abundance updates until the residual drops below
    ``cfg.threshold`` or ``cfg.max_iter`` iterations have run.

    Args:
        X: ``L x N`` nonnegative observations.
        cfg: solver configuration.
        init: ``(A0, S0)`` starting point.
        graph: optional prebuilt affinity graph; built from ``X`` when the
            variant needs one and none is given.
        callback: called as ``callback(t, A, S)`` after every iteration.
    """
    X = np.asarray(X, dtype=float)
    A = np.array(init[0], dtype=float)
    S = np.array(init[1], dtype=float)
    _check_shapes(X, A, S)
    if (X < 0).any() or (A < 0).any() or (S < 0).any():
        raise ValueError("X, A0 and S0 must be nonnegative")

    lambda0 = cfg.effective_lambda0
    mu = cfg.effective_mu
    eps = cfg.epsilon
    if mu > 0 and graph is None:
        graph = build_knn_graph(X, cfg.knn_k, cfg.sigma)
    X_aug, _ = augment_asc(X, A, cfg.delta)
    scale = float(np.linalg.norm(X)) if cfg.residual_mode == "relative" else 1.0
    scale = scale or 1.0

    trace: list[TraceRecord] = []
    stop_reason = "max_iter"
    for t in range(1, cfg.max_iter + 1):
        lam = lambda_schedule(t, lambda0, cfg.tau) if lambda0 else 0.0
        A = update_endmembers(A, X, S, eps)
        A_aug = np.vstack([A, np.full((1, A.shape[1]), cfg.delta)])
        S = update_abundances(S, A_aug, X_aug, lam, mu, graph, eps)

        if not (np.isfinite(A).all() and np.isfinite(S).all()):
            raise NumericalDivergenceError(f"non-finite iterate at t={t}", trace)
        _, fit, sparsity, graph_term = objective(X, A, S, lam, mu, graph)
        residual = float(np.sqrt(fit))
        trace.append(TraceRecord(t, float(lam), residual, fit, sparsity, graph_term))
        if callback is not None:
            callback(t, A, S)
        if residual / scale < cfg.threshold:
            stop_reason = "threshold"
            break

    logger.debug("%s stopped after %d iterations (%s), residual %.6g",
                 cfg.variant.value, len(trace), stop_reason, trace[-1].residual_fro)
    return UnmixResult(A=A, S=S, trace=trace, stop_reason=stop_reason, config=cfg, graph=graph)
