"""Command-line driver: ``sgnmf synth | unmix | eval | sweep``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .graph import MEDIAN
from .initializers import initialize
from .library import EXPERIMENT_1, load_builtin_library
from .metrics import score
from .solver import NumericalDivergenceError, SolverConfig, Variant, run_unmix, write_trace_csv
from .sweep import BASELINE, DEFAULT_RUNS, DEFAULT_SNRS, VARIANTS, SweepSpec, run_sweep, summarize, write_rows, write_summary
from .synthgen import SceneSpec, generate_scene, save_scene

log = logging.getLogger("sgnmf")

EXIT_USAGE = 2
EXIT_DIVERGED = 3


def _snr(text: str):
    return None if text.lower() in ("none", "inf") else float(text)


def _sigma(text: str):
    return MEDIAN if text == MEDIAN else float(text)


def _grid(text: str):
    rows, _, cols = text.lower().partition("x")
    return int(rows), int(cols or rows)


def _csv_list(text: str):
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--variant", choices=[v.value for v in Variant], default=Variant.SPARSE_GNMF.value)
    g.add_argument("--lambda0", type=float, default=0.05, help="initial sparsity weight (default 0.05)")
    g.add_argument("--tau", type=float, default=25.0, help="sparsity decay constant in iterations (default 25)")
    g.add_argument("--mu", type=float, default=0.1, help="graph regularisation weight (default 0.1)")
    g.add_argument("--delta", type=float, default=15.0, help="sum-to-one row weight (default 15)")
    g.add_argument("--threshold", type=float, default=0.5e-3, help="residual stopping value (default 5e-4)")
    g.add_argument("--residual-mode", choices=("absolute", "relative"), default="absolute")
    g.add_argument("--max-iter", type=int, default=3000, help="iteration cap (default 3000)")
    g.add_argument("--knn-k", type=int, default=5, help="graph neighbours per pixel (default 5)")
    g.add_argument("--sigma", type=_sigma, default=MEDIAN,
                   help="heat-kernel bandwidth, or 'median' (default)")
    g.add_argument("--init", choices=("random", "vca"), default="vca")
    g.add_argument("--seed", type=int, default=0)


def _add_scene_flags(p, snr_default="none"):
    g = p.add_argument_group("scene")
    g.add_argument("--library", type=Path, help="library CSV or USGS ASCII directory (default: built-in analogs)")
    g.add_argument("--library-format", choices=("csv", "usgs_ascii"), default="csv")
    g.add_argument("--endmembers", type=_csv_list, default=list(EXPERIMENT_1),
                   help="comma-separated signature names (default: %(default)s)")
    g.add_argument("--grid", type=_grid, default=(64, 64), help="ROWSxCOLS (default 64x64)")
    g.add_argument("--block", type=int, default=8)
    g.add_argument("--lpf", type=int, default=9)
    g.add_argument("--kernel", choices=("uniform", "gaussian"), default="uniform")
    g.add_argument("--purity-cap", type=float, default=0.8)
    if snr_default is not None:
        g.add_argument("--snr", type=_snr, default=_snr(snr_default), help="dB, or 'none' for no noise")


def _config(args) -> SolverConfig:
    return SolverConfig(variant=args.variant, lambda0=args.lambda0, tau=args.tau, mu=args.mu,
                        delta=args.delta, threshold=args.threshold, max_iter=args.max_iter,
                        knn_k=args.knn_k, sigma=args.sigma, seed=args.seed,
                        residual_mode=args.residual_mode)


def _library(args):
    if args.library is None:
        return load_builtin_library()
    return sio.load_spectral_library(args.library, args.library_format)


def _scene_spec(args, snr, seed) -> SceneSpec:
    return SceneSpec(endmember_ids=tuple(args.endmembers), grid=args.grid, block=args.block,
                     lpf=args.lpf, kernel=args.kernel, purity_cap=args.purity_cap,
                     snr_db=snr, seed=seed)


def _load_observations(args):
    path = args.input
    mask = None
    if args.band_mask:
        mask = sio.cuprite_band_mask() if args.band_mask == "cuprite" else sio.load_band_mask(args.band_mask)
    if path.is_dir():
        path = path / "X.csv"
    if path.suffix.lower() == ".hdr":
        return np.asarray(sio.load_cube(path, band_mask=mask, scale=args.scale))
    X = sio.load_matrix_csv(path)
    if mask:
        keep = np.setdiff1d(np.arange(X.shape[0]), mask)
        X = X[keep]
    return X


# --------------------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    lib = _library(args)
    scene = generate_scene(lib, _scene_spec(args, args.snr, args.seed))
    save_scene(scene, args.out_dir)
    print(f"wrote {args.out_dir}: X {scene.X.shape[0]}x{scene.X.shape[1]}, "
          f"P={scene.A_true.shape[1]}, achieved SNR {scene.achieved_snr_db:.3f} dB")
    return 0


def cmd_unmix(args) -> int:
    X = _load_observations(args)
    cfg = _config(args)
    init = initialize(X, args.p, args.init, args.seed, cfg.delta if cfg.delta > 0 else 15.0)
    out = Path(args.out_dir)
    extra = {"init": args.init, "seed": args.seed, "input_path": str(args.input)}
    try:
        result = run_unmix(X, cfg, init)
    except NumericalDivergenceError as exc:
        out.mkdir(parents=True, exist_ok=True)
        write_trace_csv(exc.trace, out / "trace.csv")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    report = None
    if args.truth_dir:
        A_true = sio.load_matrix_csv(args.truth_dir / "A_true.csv")
        S_true = sio.load_matrix_csv(args.truth_dir / "S_true.csv")
        report = score(A_true, result.A, S_true, result.S)
    sio.save_result(result, report, out, inputs={"X": X}, extra=extra)
    print(f"iterations={result.iterations} stop_reason={result.stop_reason} "
          f"residual_fro={result.trace[-1].residual_fro!r}")
    if report is not None:
        print(f"rms_sad={report.rms_sad!r} rms_aad={report.rms_aad!r}")
    return 0


def cmd_eval(args) -> int:
    names = None
    if args.truth_a is not None:
        A_true = sio.load_matrix_csv(args.truth_a)
    elif args.library is not None or args.endmembers:
        lib = _library(args)
        if args.wavelengths is not None:
            lib = lib.resample_nearest(sio.load_matrix_csv(args.wavelengths).ravel())
        names = args.endmembers
        A_true = lib.matrix(names)
    else:
        raise SystemExit("eval: give --truth-a or --library/--endmembers")
    A_est = sio.load_matrix_csv(args.est_a)
    if A_true.shape != A_est.shape:
        print(f"error: true endmembers are {A_true.shape[0]}x{A_true.shape[1]}, "
              f"estimates are {A_est.shape[0]}x{A_est.shape[1]}", file=sys.stderr)
        return EXIT_USAGE
    S_true = S_est = None
    if args.truth_s is not None and args.est_s is not None:
        S_true = sio.load_matrix_csv(args.truth_s)
        S_est = sio.load_matrix_csv(args.est_s)
        if S_true.shape != S_est.shape:
            print(f"error: true abundances are {S_true.shape[0]}x{S_true.shape[1]}, "
                  f"estimates are {S_est.shape[0]}x{S_est.shape[1]}", file=sys.stderr)
            return EXIT_USAGE
    report = score(A_true, A_est, S_true, S_est)
    if args.out is not None:
        report.write(args.out)
    for p, val in enumerate(report.per_endmember_sad):
        label = names[p] if names else f"endmember_{p}"
        print(f"{label}\t{val:.4f}")
    print(f"rms_sad={report.rms_sad!r}")
    print(f"rms_aad={report.rms_aad!r}")
    return 0


def cmd_sweep(args) -> int:
    lib = _library(args)
    variants = [BASELINE if v == "vca" else v for v in args.variants]
    spec = SweepSpec(snr_list=args.snr, runs=args.runs, variants=variants, solver=_config(args),
                     scene=_scene_spec(args, None, 0), master_seed=args.seed, init=args.init)

    def progress(rows):
        for r in rows:
            log.info("snr=%g run=%d %s rms_sad=%.4f rms_aad=%.4f", r.snr_db, r.run, r.variant,
                     r.rms_sad, r.rms_aad)

    rows = run_sweep(spec, lib, workers=args.workers, progress=progress)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(rows, out / "sweep.csv")
    summary = summarize(rows)
    write_summary(summary, out / "sweep_summary.csv")
    for s in summary:
        print(f"snr={s['snr_db']:g}\t{s['variant']}\trms_sad={s['mean_rms_sad']:.4f}"
              f"\trms_aad={s['mean_rms_aad']:.4f}\tfailed={s['failed']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgnmf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic mixed scene")
    _add_scene_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("unmix", help="factor an observation matrix")
    p.add_argument("--input", type=Path, required=True,
                   help="X.csv, a scene directory, or an ENVI-style .hdr cube header")
    p.add_argument("--p", type=int, required=True, help="number of endmembers")
    p.add_argument("--band-mask", help="band drop-list file, or 'cuprite' for the shipped mask")
    p.add_argument("--scale", type=float, default=None, help="divide cube values by this factor")
    p.add_argument("--truth-dir", type=Path, help="scene directory with A_true.csv/S_true.csv to score against")
    p.add_argument("--out-dir", type=Path, required=True)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_unmix)

    p = sub.add_parser("eval", help="score estimates against reference endmembers/abundances")
    p.add_argument("--truth-a", type=Path)
    p.add_argument("--truth-s", type=Path)
    p.add_argument("--est-a", type=Path, required=True)
    p.add_argument("--est-s", type=Path)
    p.add_argument("--library", type=Path, help="reference library (alternative to --truth-a)")
    p.add_argument("--library-format", choices=("csv", "usgs_ascii"), default="csv")
    p.add_argument("--endmembers", type=_csv_list, help="reference signature names, in order")
    p.add_argument("--wavelengths", type=Path, help="sensor band centres for nearest-band resampling")
    p.add_argument("--out", type=Path, help="write the report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="Monte Carlo SNR sweep")
    _add_scene_flags(p, snr_default=None)
    p.add_argument("--snr", type=lambda s: [float(v) for v in _csv_list(s)], default=list(DEFAULT_SNRS),
                   help="comma-separated dB values (default 15,20,25,30,35,40)")
    p.add_argument("--runs", type=int, default=DEFAULT_RUNS)
    p.add_argument("--variants", type=_csv_list, default=["vca", "sparse-nmf", "sparse-gnmf"],
                   help=f"comma-separated subset of vca,{','.join(VARIANTS[1:])}")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", type=Path, required=True)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
