"""Command-line interface.

Verbs:
  run        execute one Monte-Carlo sequence and emit a report
  sweep      execute the sweep named in the configuration
  calibrate  shot-noise calibration plus backend cross-check
  report     re-render summary and figures from a saved report directory
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import default_config, load_config, to_dict, from_dict
from .reporting import emit_run_report, emit_sweep_report, render_report
from .runner import run_sequence, run_sweep


def _load(args):
    cfg = load_config(args.config) if args.config else default_config()
    d = to_dict(cfg)
    if args.seed is not None:
        d["sequence"]["master_seed"] = args.seed
    if args.backend is not None:
        d["sequence"]["backend"] = args.backend
    return from_dict(d)


def _cmd_run(args) -> int:
    cfg = _load(args)
    dump = os.path.join(args.out, "records") if args.dump_records else None
    result = run_sequence(cfg, workers=args.workers, dump_records_to=dump)
    files = emit_run_report(result, args.out)
    print(f"eta = {result.metrics['eta']:.4f}  "
          f"phi_r = {result.metrics['phi_r']:.4f} rad  "
          f"shot = {result.metrics['shot_scalar']:.4f}")
    if result.tv is not None:
        print(f"T = {result.tv.t_total:.4f}  V = {result.tv.v_geo:.4f}  "
              f"bound = {result.tv.v_classical:.4f}  "
              f"verdict = {result.tv.verdict}")
    print(f"report written to {args.out} ({len(files)} files)")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    if cfg.sweep is None:
        print("error: configuration has no sweep section", file=sys.stderr)
        return 2
    result = run_sweep(cfg, workers=args.workers)
    files = emit_sweep_report(result, args.out)
    n_err = sum("error" in r for r in result.rows)
    print(f"sweep {result.kind}: {len(result.rows)} points, {n_err} errors")
    if result.fit:
        print("fit:", ", ".join(f"{k} = {v:.6g}"
                                for k, v in result.fit.items()))
    print(f"report written to {args.out} ({len(files)} files)")
    return 0


def _cmd_calibrate(args) -> int:
    from .propagation import PropagationBackend, PropagationGrid
    from .storage import PhenomenologicalBackend

    cfg = _load(args)
    d = to_dict(cfg)
    d["sequence"]["n_realizations"] = min(cfg.sequence.n_realizations, 500)
    d["signal"]["amplitude"] = 0.0  # blank runs only
    cal_cfg = from_dict(d)
    result = run_sequence(cal_cfg, workers=args.workers)
    print(f"shot-noise scalar (blank ensemble, "
          f"n={cal_cfg.sequence.n_realizations}): "
          f"{result.metrics['shot_scalar']:.4f}")

    phenom = PhenomenologicalBackend(eta0=cfg.eta0,
                                     write_fraction=cfg.write_fraction,
                                     excess_noise_table=cfg.excess_noise_table)
    prop = PropagationBackend(grid=PropagationGrid(nz=cfg.nz, dt=cfg.dt),
                              read_duration=cfg.sequence.read_duration)
    tau = cfg.sequence.hold_time
    eta_ph = phenom(cfg.pulse, tau, cfg.medium, cfg.control)
    eta_pr = prop(cfg.pulse, tau, cfg.medium, cfg.control)
    print(f"backend cross-check at hold = {tau*1e6:.2f} us:")
    print(f"  phenomenological eta = {eta_ph.amplitude_efficiency:.4f}")
    print(f"  propagation      eta = {eta_pr.amplitude_efficiency:.4f}  "
          f"(energy defect {eta_pr.energy_audit['defect']:.2e})")
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "calibration.txt"), "w") as f:
        f.write(f"shot_scalar = {result.metrics['shot_scalar']!r}\n")
        f.write(f"eta_phenomenological = "
                f"{eta_ph.amplitude_efficiency!r}\n")
        f.write(f"eta_propagation = {eta_pr.amplitude_efficiency!r}\n")
        f.write(f"energy_defect = {eta_pr.energy_audit['defect']!r}\n")
    return 0


def _cmd_report(args) -> int:
    files = render_report(args.out)
    print(f"re-rendered {len(files)} files in {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ssbmem",
        description="EIT single-sideband memory simulator and analysis",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, fn in (("run", _cmd_run), ("sweep", _cmd_sweep),
                     ("calibrate", _cmd_calibrate), ("report", _cmd_report)):
        p = sub.add_parser(verb)
        p.add_argument("--config", type=str, default=None,
                       help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the master seed")
        p.add_argument("--backend", type=str, default=None,
                       choices=("phenomenological", "propagation"))
        p.add_argument("--out", type=str, default="out",
                       help="report directory")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--dump-records", action="store_true",
                       help="also dump binary records")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
