"""Monte Carlo SNR sweeps: scene generation, unmixing and scoring over seeded runs."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .initializers import initialize
from .metrics import score
from .solver import SolverConfig, run_unmix
from .synthgen import SceneSpec, generate_scene

logger = logging.getLogger(__name__)

BASELINE = "vca-fcls"
VARIANTS = (BASELINE, "nmf", "sparse-nmf", "gnmf", "sparse-gnmf")
DEFAULT_SNRS = (15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
DEFAULT_RUNS = 20

ROW_COLUMNS = ("snr_db", "variant", "run", "rms_sad", "rms_aad", "iterations", "seconds",
               "asc_deviation", "error")
SUMMARY_COLUMNS = ("snr_db", "variant", "runs", "failed", "mean_rms_sad", "std_rms_sad",
                   "mean_rms_aad", "std_rms_aad", "mean_iterations")


@dataclass(frozen=True)
class SweepSpec:
    snr_list: tuple[float, ...] = DEFAULT_SNRS
    runs: int = DEFAULT_RUNS
    variants: tuple[str, ...] = (BASELINE, "sparse-nmf", "sparse-gnmf")
    solver: SolverConfig = field(default_factory=SolverConfig)
    scene: SceneSpec = field(default_factory=SceneSpec)
    master_seed: int = 0
    init: str = "vca"

    def __post_init__(self):
        object.__setattr__(self, "snr_list", tuple(float(s) for s in self.snr_list))
        object.__setattr__(self, "variants", tuple(self.variants))
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        unknown = set(self.variants) - set(VARIANTS)
        if unknown:
            raise ValueError(f"unknown variants {sorted(unknown)}; choose from {VARIANTS}")
        if not self.snr_list:
            raise ValueError("snr_list is empty")


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    variant: str
    run: int
    rms_sad: float
    rms_aad: float
    iterations: int
    seconds: float
    asc_deviation: float = float("nan")
    error: str = ""


def run_seeds(master_seed: int, snr_index: int, run: int) -> tuple[int, int]:
    """Scene and init seeds for one (snr, run) cell; shared by every variant in the cell."""
    scene_seed, init_seed = np.random.SeedSequence([master_seed, snr_index, run]).generate_state(2)
    return int(scene_seed), int(init_seed)


def _asc_deviation(S) -> float:
    """Mean absolute deviation of abundance column sums from one."""
    return float(np.mean(np.abs(np.asarray(S).sum(axis=0) - 1.0)))


def _run_cell(args) -> list[SweepRow]:
    spec, library, snr_index, run = args
    snr = spec.snr_list[snr_index]
    scene_seed, init_seed = run_seeds(spec.master_seed, snr_index, run)
    rows = []
    try:
        scene = generate_scene(library, spec.scene.replace(snr_db=snr, seed=scene_seed))
        X = np.asarray(scene.X)
        P = scene.A_true.shape[1]
        t0 = time.perf_counter()
        init = initialize(X, P, spec.init, init_seed, spec.solver.delta or 15.0)
        init_seconds = time.perf_counter() - t0
    except Exception as exc:  # noqa: BLE001 - record and keep sweeping
        logger.warning("snr=%s run=%d: scene/init failed: %s", snr, run, exc)
        return [SweepRow(snr, v, run, float("nan"), float("nan"), 0, 0.0,
                         error=f"{type(exc).__name__}: {exc}")
                for v in spec.variants]

    for variant in spec.variants:
        try:
            if variant == BASELINE:
                rep = score(scene.A_true, init[0], scene.S_true, init[1])
                rows.append(SweepRow(snr, variant, run, rep.rms_sad, rep.rms_aad, 0, init_seconds,
                                     _asc_deviation(init[1])))
                continue
            t0 = time.perf_counter()
            res = run_unmix(X, spec.solver.replace(variant=variant, seed=init_seed), init)
            seconds = time.perf_counter() - t0 + init_seconds
            rep = score(scene.A_true, res.A, scene.S_true, res.S)
            rows.append(SweepRow(snr, variant, run, rep.rms_sad, rep.rms_aad, res.iterations, seconds,
                                 _asc_deviation(res.S)))
        except Exception as exc:  # noqa: BLE001
            logger.warning("snr=%s run=%d variant=%s failed: %s", snr, run, variant, exc)
            rows.append(SweepRow(snr, variant, run, float("nan"), float("nan"), 0, 0.0,
                                 error=f"{type(exc).__name__}: {exc}"))
    return rows


def _sort_key(row: SweepRow):
    return (row.snr_db, VARIANTS.index(row.variant), row.run)


def run_sweep(spec: SweepSpec, library, workers: int = 1, progress=None) -> list[SweepRow]:
    """Run every (snr, run) cell and return rows sorted by (snr, variant, run)."""
    cells = [(spec, library, i, r) for i in range(len(spec.snr_list)) for r in range(spec.runs)]
    rows: list[SweepRow] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for cell_rows in pool.map(_run_cell, cells):
                rows.extend(cell_rows)
                if progress:
                    progress(cell_rows)
    else:
        for cell in cells:
            cell_rows = _run_cell(cell)
            rows.extend(cell_rows)
            if progress:
                progress(cell_rows)
    return sorted(rows, key=_sort_key)


def summarize(rows) -> list[dict]:
    """Mean and sample standard deviation per (snr, variant), failed runs excluded."""
    groups: dict[tuple, list[SweepRow]] = {}
    for row in rows:
        groups.setdefault((row.snr_db, row.variant), []).append(row)
    out = []
    for (snr, variant), grp in sorted(groups.items(), key=lambda kv: (kv[0][0], VARIANTS.index(kv[0][1]))):
        ok = [r for r in grp if not r.error]
        sads = np.array([r.rms_sad for r in ok])
        aads = np.array([r.rms_aad for r in ok])
        ddof = 1 if len(ok) > 1 else 0
        out.append({
            "snr_db": snr,
            "variant": variant,
            "runs": len(grp),
            "failed": len(grp) - len(ok),
            "mean_rms_sad": float(sads.mean()) if ok else float("nan"),
            "std_rms_sad": float(sads.std(ddof=ddof)) if ok else float("nan"),
            "mean_rms_aad": float(aads.mean()) if ok else float("nan"),
            "std_rms_aad": float(aads.std(ddof=ddof)) if ok else float("nan"),
            "mean_iterations": float(np.mean([r.iterations for r in ok])) if ok else float("nan"),
        })
    return out


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_rows(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(ROW_COLUMNS)
        for r in rows:
            out.writerow([_fmt(r.snr_db), r.variant, r.run, _fmt(r.rms_sad), _fmt(r.rms_aad),
                          r.iterations, f"{r.seconds:.3f}", _fmt(r.asc_deviation), r.error])


def write_summary(summary, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SUMMARY_COLUMNS)
        for s in summary:
            out.writerow([_fmt(s[c]) for c in SUMMARY_COLUMNS])
