"""Synthetic mixed scenes: block layout, spatial low-pass mixing and calibrated noise."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import ObservationMatrix, synthesize_lmm
from .io import load_matrix_csv, read_manifest, save_matrix_csv, write_manifest
from .library import EXPERIMENT_1

_MAX_REDRAWS = 10_000


@dataclass(frozen=True)
class SceneSpec:
    """Layout and noise parameters of a synthetic scene.

    ``kernel`` is ``"uniform"`` (box filter) or ``"gaussian"`` (sigma =
    lpf / 6, truncated to the lpf x lpf window).
    """

    endmember_ids: tuple[str, ...] = EXPERIMENT_1
    grid: tuple[int, int] = (64, 64)
    block: int = 8
    lpf: int = 9
    snr_db: float | None = None
    purity_cap: float = 0.8
    seed: int = 0
    kernel: str = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "endmember_ids", tuple(self.endmember_ids))
        object.__setattr__(self, "grid", tuple(int(v) for v in self.grid))
        rows, cols = self.grid
        if self.block < 1 or rows % self.block or cols % self.block:
            raise ValueError(f"block {self.block} must divide the {rows}x{cols} grid")
        if self.lpf < 1 or self.lpf % 2 == 0:
            raise ValueError(f"lpf must be odd and >= 1, got {self.lpf}")
        P = len(self.endmember_ids)
        if P < 2:
            raise ValueError("need at least two endmembers")
        if self.num_blocks < P:
            raise ValueError(f"{self.num_blocks} blocks cannot hold all {P} endmembers")
        if not 0 < self.purity_cap <= 1:
            raise ValueError("purity_cap must lie in (0, 1]")
        if self.purity_cap < 1.0 / P:
            raise ValueError("purity_cap below 1/P cannot be satisfied")
        if self.snr_db is not None and not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite or None")
        if self.kernel not in ("uniform", "gaussian"):
            raise ValueError(f"unknown kernel {self.kernel!r}")

    @property
    def num_endmembers(self) -> int:
        return len(self.endmember_ids)

    @property
    def num_pixels(self) -> int:
        return self.grid[0] * self.grid[1]

    @property
    def num_blocks(self) -> int:
        return (self.grid[0] // self.block) * (self.grid[1] // self.block)

    def replace(self, **changes) -> "SceneSpec":
        return SceneSpec(**{**asdict(self), **changes})


@dataclass
class SyntheticScene:
    X: ObservationMatrix
    A_true: np.ndarray
    S_true: np.ndarray
    spec: SceneSpec
    achieved_snr_db: float = field(default=float("inf"))


def _rngs(seed):
    assign, noise = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(assign), np.random.default_rng(noise)


def block_labels(spec: SceneSpec, rng=None) -> np.ndarray:
    """Endmember index of every block (``rows/block x cols/block``).

    Drawn uniformly with replacement and redrawn until every endmember is used.
    """
    if rng is None:
        rng = _rngs(spec.seed)[0]
    br, bc = spec.grid[0] // spec.block, spec.grid[1] // spec.block
    P = spec.num_endmembers
    for _ in range(_MAX_REDRAWS):
        labels = rng.integers(0, P, size=(br, bc))
        if np.unique(labels).size == P:
            return labels
    raise RuntimeError("could not draw a block layout using every endmember")


def generate_block_abundances(spec: SceneSpec, rng=None) -> np.ndarray:
    """One-hot ``P x N`` abundances with every block filled by a single endmember."""
    labels = block_labels(spec, rng)
    pix = np.kron(labels, np.ones((spec.block, spec.block), dtype=labels.dtype)).ravel()
    S = np.zeros((spec.num_endmembers, spec.num_pixels))
    S[pix, np.arange(spec.num_pixels)] = 1.0
    return S


def _kernel(spec: SceneSpec) -> np.ndarray:
    n = spec.lpf
    if spec.kernel == "uniform":
        return np.full((n, n), 1.0 / n**2)
    r = np.arange(n) - n // 2
    g = np.exp(-0.5 * (r / (n / 6.0)) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


def apply_lowpass(S, spec: SceneSpec) -> np.ndarray:
    """Filter every abundance plane, then replace too-pure pixels by the uniform mixture.

    Boundaries use symmetric padding, so column sums stay 1.
    """
    S = np.asarray(S, dtype=float)
    rows, cols = spec.grid
    P = S.shape[0]
    kern = _kernel(spec)
    out = np.empty_like(S)
    for p in range(P):
        plane = S[p].reshape(rows, cols)
        out[p] = ndimage.correlate(plane, kern, mode="reflect").ravel()
    np.clip(out, 0.0, None, out=out)
    out /= out.sum(axis=0, keepdims=True)
    too_pure = out.max(axis=0) > spec.purity_cap
    out[:, too_pure] = 1.0 / P
    return out


def add_noise_snr(X, snr_db: float | None, seed=None):
    """Add white Gaussian noise at ``snr_db`` (power = mean square over all entries).

    Negative results are clamped to zero. Returns ``(noisy, achieved_snr_db)``
    where the achieved value is measured on the noise actually present after
    clamping.
    """
    dims = getattr(X, "spatial_dims", None)
    clean = np.asarray(X, dtype=float)
    if snr_db is None:
        return ObservationMatrix(clean, spatial_dims=dims), float("inf")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    signal_power = float(np.mean(clean**2))
    sigma = np.sqrt(signal_power * 10.0 ** (-snr_db / 10.0))
    noisy = ObservationMatrix(clean + sigma * rng.standard_normal(clean.shape), spatial_dims=dims)
    noise = noisy.data - clean
    achieved = 10.0 * np.log10(signal_power / float(np.mean(noise**2)))
    return noisy, float(achieved)


def generate_scene(library, spec: SceneSpec) -> SyntheticScene:
    """Block abundances -> low-pass mixing -> linear mixing -> noise."""
    A = library.matrix(spec.endmember_ids)
    assign_rng, noise_rng = _rngs(spec.seed)
    S = apply_lowpass(generate_block_abundances(spec, assign_rng), spec)
    clean = synthesize_lmm(A, S, spatial_dims=spec.grid)
    X, snr = add_noise_snr(clean, spec.snr_db, noise_rng)
    return SyntheticScene(X=X, A_true=A, S_true=S, spec=spec, achieved_snr_db=snr)


def save_scene(scene: SyntheticScene, out_dir) -> Path:
    """Write ``X.csv``, ``A_true.csv``, ``S_true.csv`` and ``scene.txt``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix_csv(scene.X, out / "X.csv")
    save_matrix_csv(scene.A_true, out / "A_true.csv")
    save_matrix_csv(scene.S_true, out / "S_true.csv")
    spec = scene.spec
    write_manifest(out / "scene.txt", {
        "endmember_ids": ",".join(spec.endmember_ids),
        "grid": f"{spec.grid[0]}x{spec.grid[1]}",
        "block": spec.block,
        "lpf": spec.lpf,
        "kernel": spec.kernel,
        "snr_db": "none" if spec.snr_db is None else repr(float(spec.snr_db)),
        "purity_cap": repr(float(spec.purity_cap)),
        "seed": spec.seed,
        "achieved_snr_db": repr(float(scene.achieved_snr_db)),
    })
    return out / "scene.txt"


def load_scene(in_dir) -> SyntheticScene:
    d = Path(in_dir)
    meta = read_manifest(d / "scene.txt")
    rows, cols = (int(v) for v in meta["grid"].split("x"))
    spec = SceneSpec(
        endmember_ids=tuple(meta["endmember_ids"].split(",")),
        grid=(rows, cols),
        block=int(meta["block"]),
        lpf=int(meta["lpf"]),
        kernel=meta.get("kernel", "uniform"),
        snr_db=None if meta["snr_db"] == "none" else float(meta["snr_db"]),
        purity_cap=float(meta["purity_cap"]),
        seed=int(meta["seed"]),
    )
    X = ObservationMatrix(load_matrix_csv(d / "X.csv"), spatial_dims=(rows, cols))
    return SyntheticScene(X=X, A_true=load_matrix_csv(d / "A_true.csv"),
                          S_true=load_matrix_csv(d / "S_true.csv"), spec=spec,
                          achieved_snr_db=float(meta["achieved_snr_db"]))
