"""Command line interface.

Subcommands: ``solve-rte``, ``asymptotics``, ``clt``, ``sweep`` and ``render``.
Settings come from an optional flat YAML file (``--config``) and are
overridden by flags. Exit status is 0 on success, 2 when a sweep recorded a
failing cell and 1 on a fatal error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import asymptotics
from .errors import RteMvdrError
from .harness import ExperimentConfig, divergence_sweep, emit_figures, run_clt, samples_to_csv
from .mvdr import oracle_snr, output_snr
from .rte import solve_rte
from .scenario import build_covariance, sample_snapshots, scenario_from_config
from .stats import divergence_report

log = logging.getLogger("rtemvdr")

DEFAULTS = {
    "n_sensors": 4,
    "noise_floor_db": 0.0,
    "interferer_angles_deg": [-35.0, 70.0],
    "interferer_inr_db": [10.0, 10.0],
    "look_angle_deg": 0.0,
    "texture": {"kind": "inverse-gamma", "shape": 2.0},
    "seed": 0,
}

SCENARIO_FLAGS = ("n_sensors", "noise_floor_db", "interferer_angles_deg", "interferer_inr_db",
                  "look_angle_deg")
EXPERIMENT_FLAGS = ("rho_list", "n_list", "n_trials", "seed", "regime", "output_dir",
                    "histogram_bins", "n_cal", "n_reps", "nn_trials", "tol", "max_iter",
                    "workers")


def load_config(path) -> dict:
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return data


def _merged(args) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS))
    if getattr(args, "config", None):
        cfg.update(load_config(args.config))
    for key in SCENARIO_FLAGS + EXPERIMENT_FLAGS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    texture = dict(cfg.get("texture") or {})
    for key in [k for k in cfg if k.startswith("texture.")]:
        texture[key.split(".", 1)[1]] = cfg.pop(key)
    if getattr(args, "texture_kind", None):
        texture["kind"] = args.texture_kind
    if getattr(args, "texture_shape", None) is not None:
        texture["shape"] = args.texture_shape
    cfg["texture"] = texture
    return cfg


def experiment_config(cfg: dict) -> ExperimentConfig:
    kwargs = {k: cfg[k] for k in EXPERIMENT_FLAGS if k in cfg and cfg[k] is not None}
    for key in ("rho_list", "n_list"):
        if key in kwargs and np.isscalar(kwargs[key]):
            kwargs[key] = [kwargs[key]]
    return ExperimentConfig(scenario=scenario_from_config(cfg), **kwargs)


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _add_scenario_flags(p):
    p.add_argument("--config", help="flat YAML config file")
    p.add_argument("--n-sensors", dest="n_sensors", type=int)
    p.add_argument("--noise-floor-db", dest="noise_floor_db", type=float)
    p.add_argument("--interferer-angles-deg", dest="interferer_angles_deg", type=_floats)
    p.add_argument("--interferer-inr-db", dest="interferer_inr_db", type=_floats)
    p.add_argument("--look-angle-deg", dest="look_angle_deg", type=float)
    p.add_argument("--texture-kind", dest="texture_kind",
                   choices=["constant", "inverse-gamma", "exponential"])
    p.add_argument("--texture-shape", dest="texture_shape", type=float)
    p.add_argument("--seed", type=int)


def _add_experiment_flags(p, with_lists=True):
    if with_lists:
        p.add_argument("--rho-list", dest="rho_list", type=_floats, help="comma separated")
        p.add_argument("--n-list", dest="n_list", type=_ints, help="comma separated")
    p.add_argument("--n-trials", dest="n_trials", type=int)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--histogram-bins", dest="histogram_bins", type=int)
    p.add_argument("--n-cal", dest="n_cal", type=int)
    p.add_argument("--n-reps", dest="n_reps", type=int)
    p.add_argument("--nn-trials", dest="nn_trials", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--workers", type=int)


def _complex_matrix(A):
    return [[[float(z.real), float(z.imag)] for z in row] for row in A]


def cmd_solve_rte(args) -> int:
    cfg = _merged(args)
    s = scenario_from_config(cfg)
    batch = sample_snapshots(s, args.n, cfg["seed"])
    est = solve_rte(batch, args.rho, cfg.get("tol") or 1e-10, cfg.get("max_iter") or 500)
    sigma = build_covariance(s)
    snr = output_snr(est.matrix, sigma, s.steering)
    opt = oracle_snr(sigma, s.steering)
    out = {
        "N": s.n_sensors, "n": args.n, "rho": args.rho, "seed": cfg["seed"],
        "iterations": est.iterations, "residual": est.residual,
        "snr": snr, "snr_db": 10 * np.log10(snr),
        "oracle_snr": opt, "oracle_snr_db": 10 * np.log10(opt),
        "matrix": _complex_matrix(est.matrix),
    }
    _emit_json(out, args.output)
    return 0


def cmd_asymptotics(args) -> int:
    cfg = _merged(args)
    s = scenario_from_config(cfg)
    sigma = build_covariance(s)
    rho = args.rho
    out = {"N": s.n_sensors, "rho": rho}
    sol = asymptotics.solve_sigma0(sigma, rho, full_output=True)
    out["sigma0_eigenvalues"] = [float(d) for d in sol.eigvals]
    out["snr0"] = asymptotics.snr0(sigma, sol.matrix, s.steering)
    if rho < 1.0:
        out["gamma"] = asymptotics.solve_gamma(sigma, rho)
    if not args.skip_sigma_n and rho < 1.0:
        p = asymptotics.large_n_params(s, rho, cfg.get("n_cal", 2000), cfg.get("n_reps", 400),
                                       cfg["seed"], cfg.get("workers", 1))
        out["sigma_n"] = p.sigma_n
    if args.n is not None and rho < 1.0:
        p = asymptotics.large_nn_params(s, rho, args.n, cfg.get("n_trials", 5000), cfg["seed"],
                                        cfg.get("workers", 1))
        out.update(n=args.n, c_ratio=p.c_ratio, alpha=p.alpha, delta=p.delta,
                   center=p.center, scale=p.scale)
    _emit_json(out, args.output)
    return 0


def cmd_clt(args) -> int:
    cfg = _merged(args)
    cfg["regime"] = args.regime
    exp = experiment_config({**cfg, "rho_list": [args.rho], "n_list": [args.n]})
    sets = run_clt(exp, args.rho, args.n)
    outdir = Path(exp.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / f"samples_rho{args.rho:g}_n{args.n}.csv"
    path.write_text(samples_to_csv(sets.values()))
    for regime, ss in sets.items():
        rep = divergence_report(ss.values, exp.histogram_bins)
        print(f"{regime}: mean={np.mean(ss.values):.4f} std={np.std(ss.values, ddof=1):.4f} "
              f"center={ss.center:.6g} scale={ss.scale:.6g} ks={rep.ks:.4f} "
              f"hellinger={rep.hellinger:.4f} tv={rep.total_variation:.4f} "
              f"sym_kl={rep.sym_kl:.4f}")
    print(f"wrote {path}")
    return 0


def cmd_sweep(args) -> int:
    exp = experiment_config(_merged(args))
    path = Path(args.output) if args.output else Path(exp.output_dir) / "sweep.csv"
    text = divergence_sweep(exp, path)
    print(f"wrote {path}")
    rows = list(csv.DictReader(io.StringIO(text)))
    return 2 if any(r["error"] for r in rows) else 0


def cmd_render(args) -> int:
    for path in emit_figures(args.input, args.output_dir):
        print(f"wrote {path}")
    return 0


def _emit_json(obj, path):
    text = json.dumps(obj, indent=2)
    if path:
        Path(path).write_text(text + "\n")
    print(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rtemvdr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-rte", help="solve the RTE on one simulated batch")
    _add_scenario_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--output", help="also write the JSON result here")
    p.set_defaults(func=cmd_solve_rte)

    p = sub.add_parser("asymptotics", help="deterministic equivalents and CLT parameters")
    _add_scenario_flags(p)
    _add_experiment_flags(p, with_lists=False)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--n", type=int, help="also compute large-(N,n) quantities at this n")
    p.add_argument("--skip-sigma-n", action="store_true",
                   help="skip the Monte Carlo calibration of sigma_n")
    p.add_argument("--output")
    p.set_defaults(func=cmd_asymptotics)

    p = sub.add_parser("clt", help="standardized SNR samples for one (rho, n)")
    _add_scenario_flags(p)
    _add_experiment_flags(p, with_lists=False)
    p.add_argument("--regime", choices=["large_n", "large_nn", "both"], default="both")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_clt)

    p = sub.add_parser("sweep", help="divergence sweep over rho_list x n_list")
    _add_scenario_flags(p)
    _add_experiment_flags(p)
    p.add_argument("--regime", choices=["large_n", "large_nn", "both"])
    p.add_argument("--output", help="CSV path (default: OUTPUT_DIR/sweep.csv)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("render", help="SVG figures from a sweep or samples CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output-dir", dest="output_dir", default="figures")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (RteMvdrError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
