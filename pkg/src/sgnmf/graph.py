"""KNN heat-kernel affinity graph over pixels and its Laplacian quadratic form."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

DEFAULT_K = 5
MEDIAN = "median"

# rows of the distance matrix computed at once
_BLOCK = 1024


@dataclass(frozen=True)
class AffinityGraph:
    """Sparse symmetric weight matrix ``W`` with degrees ``D = W 1``.

    ``sigma`` is the heat-kernel bandwidth in squared-distance units.
    """

    weights: sp.csr_matrix
    degrees: np.ndarray
    k: int
    sigma: float

    @property
    def num_nodes(self) -> int:
        return self.weights.shape[0]

    def edges(self):
        """Return ``(j, l, w)`` arrays for every stored entry (both directions)."""
        coo = self.weights.tocoo()
        return coo.row, coo.col, coo.data

    def laplacian(self) -> sp.csr_matrix:
        return (sp.diags(self.degrees) - self.weights).tocsr()

    def to_csv(self, path) -> None:
        """Dump the edge list as ``j,l,weight`` rows (0-based)."""
        j, l, w = self.edges()
        order = np.lexsort((l, j))
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["j", "l", "weight"])
            for idx in order:
                out.writerow([int(j[idx]), int(l[idx]), repr(float(w[idx]))])


def knn_indices(X, k: int) -> np.ndarray:
    """Exact k nearest neighbours of every column of ``X`` (self excluded).

    Ties are broken by ascending pixel index, so the result is deterministic.
    Returns an ``N x k`` integer array sorted by distance.
    """
    X = np.asarray(X, dtype=float)
    N = X.shape[1]
    if not 1 <= k < N:
        raise ValueError(f"k must satisfy 1 <= k < N (k={k}, N={N})")
    pts = X.T
    sq = np.einsum("ij,ij->i", pts, pts)
    out = np.empty((N, k), dtype=np.intp)
    for start in range(0, N, _BLOCK):
        stop = min(start + _BLOCK, N)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (pts[start:stop] @ pts.T)
        np.maximum(d2, 0.0, out=d2)
        rows = np.arange(start, stop)
        d2[rows - start, rows] = np.inf
        kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
        for r in range(stop - start):
            cand = np.flatnonzero(d2[r] <= kth[r])
            order = np.lexsort((cand, d2[r, cand]))[:k]
            out[start + r] = cand[order]
    return out


def build_knn_graph(X, k: int = DEFAULT_K, sigma: float | str = MEDIAN) -> AffinityGraph:
    """Build the symmetrised KNN graph with weights ``exp(-||x_j - x_l||^2 / sigma)``.

    Args:
        X: ``L x N`` observation matrix.
        k: number of neighbours per pixel.
        sigma: a positive bandwidth, or ``"median"`` to use the median squared
            distance over all selected (pixel, neighbour) pairs.
    """
    X = np.asarray(X, dtype=float)
    N = X.shape[1]
    if not isinstance(k, (int, np.integer)) or k < 1 or k >= N:
        raise ValueError(f"k must satisfy 1 <= k < N (k={k}, N={N})")
    nbrs = knn_indices(X, int(k))
    rows = np.repeat(np.arange(N), k)
    cols = nbrs.ravel()
    diff = X[:, rows] - X[:, cols]
    d2 = np.einsum("ij,ij->j", diff, diff)

    if isinstance(sigma, str):
        if sigma != MEDIAN:
            raise ValueError(f"unknown sigma policy {sigma!r}")
        sig = float(np.median(d2))
        if sig <= 0:
            warnings.warn("median squared neighbour distance is 0; falling back to sigma = 1",
                          RuntimeWarning, stacklevel=2)
            sig = 1.0
    else:
        sig = float(sigma)
        if not sig > 0:
            raise ValueError(f"sigma must be > 0, got {sigma}")

    W = sp.csr_matrix((np.exp(-d2 / sig), (rows, cols)), shape=(N, N))
    W = W.maximum(W.T).tocsr()
    W.sort_indices()
    degrees = np.asarray(W.sum(axis=1)).ravel()
    return AffinityGraph(weights=W, degrees=degrees, k=int(k), sigma=sig)


def graph_quadratic(S, G: AffinityGraph) -> float:
    """``Tr(S Lap S^T) = 1/2 sum_jl W_jl ||s_j - s_l||^2`` over the edge list."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[1] != G.num_nodes:
        raise ValueError(f"S has shape {S.shape}, graph has {G.num_nodes} nodes")
    j, l, w = G.edges()
    diff = S[:, j] - S[:, l]
    return 0.5 * float(w @ np.einsum("ij,ij->j", diff, diff))
