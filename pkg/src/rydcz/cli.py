"""Command-line interface: simulate, optimize, sweep, stability, verify.

Frequencies on the command line are ordinary frequencies in Hz (the rad/s
conversion by 2 pi happens internally), so `--V 500e6` means
V/(2 pi) = 500 MHz.  Times are in seconds.  Every flag can also be given
through a JSON config file (`--config run.json`, keys named like the
flags with underscores); explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, dynamics, experiments, optimizer, pulses, verify
from .pulses import TWO_PI, ECDParams, ErrorModel, SweepParams

log = logging.getLogger("rydcz")

DEFAULTS = {
    "V": 500e6,
    "T": 0.54e-6,
    "s": 1.0,
    "seed": 0,
    "metric": "phase_optimized",
    "segments": 128,
    "max_iters": 2000,
    "starts": 8,
    "workers": None,
    "method": "ecd",
    "blockade_mode": "rr",
    "delta_offset": 0.0,
    "omega_rel": 0.0,
    "osc_freq": None,
    "smoothed": False,
    "out": None,
    "methods": None,
    "T_min": 0.027e-6,
    "T_max": 0.54e-6,
    "nT": 24,
    "s_min": 1.0,
    "s_max": 4.8,
    "nS": 8,
    "detuning_span": 2e6,
    "amplitude_span": 0.1,
    "points": 17,
    "axis": "both",
}


class CliError(RuntimeError):
    pass


def _add_common(sub):
    sub.add_argument("--config", help="JSON file with default values for any flag")
    sub.add_argument("--V", type=float, help="blockade V/(2pi) in Hz [500e6]")
    sub.add_argument("--seed", type=int, help="master RNG seed [0]")
    sub.add_argument("--workers", type=int, help="worker processes (or RYDCZ_WORKERS env)")
    sub.add_argument("--metric", choices=["phase_optimized", "raw"],
                     help="reported infidelity metric [phase_optimized]")
    sub.add_argument("--log-level", default="WARNING", help="logging level")


def build_parser():
    p = argparse.ArgumentParser(prog="rydcz", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"rydcz {__version__}")
    subs = p.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="simulate one gate and print the result as JSON")
    _add_common(sim)
    sim.add_argument("--method", choices=["original", "ecd", "optimized"])
    sim.add_argument("--T", type=float, help="protocol time in s [0.54e-6]")
    sim.add_argument("--s", type=float, help="amplitude scaling [1.0]")
    sim.add_argument("--osc-freq", dest="osc_freq", type=float,
                     help="eCD oscillation frequency in Hz [calibrated]")
    sim.add_argument("--blockade-mode", dest="blockade_mode", choices=["rr", "single_atom"])
    sim.add_argument("--delta-offset", dest="delta_offset", type=float,
                     help="static detuning error in Hz [0]")
    sim.add_argument("--omega-rel", dest="omega_rel", type=float,
                     help="relative amplitude error [0]")
    sim.add_argument("--smoothed", action="store_const", const=True,
                     help="use the edge-flattened Rabi pulse for the original gate")
    sim.add_argument("--segments", type=int, help="optimizer segments [128]")
    sim.add_argument("--max-iters", dest="max_iters", type=int)
    sim.add_argument("--starts", type=int, help="optimizer restarts [8]")

    opt = subs.add_parser("optimize", help="optimize a pulse pair and write pulse files")
    _add_common(opt)
    opt.add_argument("--T", type=float)
    opt.add_argument("--s", type=float)
    opt.add_argument("--segments", type=int)
    opt.add_argument("--max-iters", dest="max_iters", type=int)
    opt.add_argument("--starts", type=int)
    opt.add_argument("--out", help="output directory [runs/optimize]")

    sw = subs.add_parser("sweep", help="protocol-time x amplitude infidelity grids")
    _add_common(sw)
    sw.add_argument("--out", help="output directory [runs/fig1]")
    sw.add_argument("--methods", help="comma list from {ecd,optimized,original} [ecd,optimized]")
    sw.add_argument("--T-min", dest="T_min", type=float)
    sw.add_argument("--T-max", dest="T_max", type=float)
    sw.add_argument("--nT", type=int, help="protocol-time points [24]")
    sw.add_argument("--s-min", dest="s_min", type=float)
    sw.add_argument("--s-max", dest="s_max", type=float)
    sw.add_argument("--nS", type=int, help="amplitude-scaling points [8]")
    sw.add_argument("--segments", type=int)
    sw.add_argument("--max-iters", dest="max_iters", type=int)
    sw.add_argument("--starts", type=int)

    st = subs.add_parser("stability", help="static-error stability scans")
    _add_common(st)
    st.add_argument("--out", help="output directory [runs/fig2]")
    st.add_argument("--methods", help="comma list [original,ecd,optimized]")
    st.add_argument("--axis", choices=["detuning", "amplitude", "both"])
    st.add_argument("--T", type=float)
    st.add_argument("--s", type=float)
    st.add_argument("--detuning-span", dest="detuning_span", type=float,
                    help="detuning scan half-range in Hz [2e6]")
    st.add_argument("--amplitude-span", dest="amplitude_span", type=float,
                    help="amplitude scan half-range (relative) [0.1]")
    st.add_argument("--points", type=int, help="points per scan [17]")
    st.add_argument("--segments", type=int)
    st.add_argument("--max-iters", dest="max_iters", type=int)
    st.add_argument("--starts", type=int)

    ver = subs.add_parser("verify", help="run the invariant suite")
    _add_common(ver)
    return p


def _resolve(args):
    """Fill unset options from the config file, then from defaults."""
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise CliError("config file must hold a JSON object")
    ns = vars(args)
    for key, value in cfg.items():
        if key in ns and ns[key] is None:
            ns[key] = value
    for key, value in DEFAULTS.items():
        if key in ns and ns[key] is None:
            ns[key] = value
    return args


def _optimizer_opts(args):
    return {"n_segments": args.segments, "max_iters": args.max_iters,
            "n_starts": args.starts}


def _cmd_simulate(args) -> int:
    V = TWO_PI * args.V
    sweep = SweepParams.from_scale(args.s, args.T)
    errors = None
    if args.delta_offset or args.omega_rel:
        errors = ErrorModel(delta_offset=TWO_PI * args.delta_offset,
                            omega_rel=args.omega_rel)
    if args.method == "original":
        result = dynamics.simulate_adiabatic(sweep, V, errors=errors,
                                             smoothed=bool(args.smoothed))
    elif args.method == "ecd":
        osc = TWO_PI * args.osc_freq if args.osc_freq else \
            pulses.calibrate_osc_freq(sweep.omega_max, sweep)
        result = dynamics.simulate_ecd(sweep, ECDParams(osc_freq=osc, blockade=V),
                                       errors=errors, blockade_mode=args.blockade_mode)
    else:
        cfg = experiments.optimizer_config_for(args.T, args.s, args.seed,
                                               _optimizer_opts(args))
        pulse = optimizer.optimize(V, cfg, workers=args.workers)
        om = pulse.omega_ctrl.values
        de = pulse.delta_ctrl.values
        if errors is not None:
            om, de = pulses.apply_drive_errors((om, de), errors)
        result = optimizer.evaluate_physical(om, de, V, cfg)
    doc = result.to_dict()
    doc["method"] = args.method
    doc["T_s"] = args.T
    doc["s"] = args.s
    doc["V_rad_s"] = V
    print(json.dumps(doc, indent=1))
    return 0


def _cmd_optimize(args) -> int:
    V = TWO_PI * args.V
    out = Path(args.out or "runs/optimize")
    out.mkdir(parents=True, exist_ok=True)
    cfg = experiments.optimizer_config_for(args.T, args.s, args.seed,
                                           _optimizer_opts(args))
    pulse = optimizer.optimize(V, cfg, workers=args.workers)
    experiments.piecewise_to_csv(pulse.omega_ctrl, out / "omega.csv")
    experiments.piecewise_to_json(pulse.omega_ctrl, out / "omega.json")
    experiments.piecewise_to_csv(pulse.delta_ctrl, out / "delta.csv")
    experiments.piecewise_to_json(pulse.delta_ctrl, out / "delta.json")
    with open(out / "trace.json", "w") as fh:
        json.dump([{"iteration": i, "cost": c} for i, c in enumerate(pulse.history)],
                  fh, indent=1)
        fh.write("\n")
    summary = {
        "final_infidelity": pulse.final_infidelity,
        "iterations": pulse.iterations,
        "converged": pulse.converged,
        "pulse_area_rad": optimizer.pulse_area(pulse.omega_ctrl),
        "T_s": args.T, "s": args.s, "V_rad_s": V, "seed": args.seed,
        "n_segments": cfg.n_segments, "n_starts": cfg.n_starts,
        "code_version": __version__,
    }
    with open(out / "result.json", "w") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
    print(json.dumps(summary, indent=1))
    return 0


def _cmd_sweep(args) -> int:
    out = Path(args.out or "runs/fig1")
    methods = tuple((args.methods or "ecd,optimized").split(","))
    grid = experiments.SweepGrid(
        T_values=np.geomspace(args.T_min, args.T_max, args.nT),
        s_values=np.linspace(args.s_min, args.s_max, args.nS),
        V=TWO_PI * args.V)
    tables = experiments.run_fig1(grid, methods=methods, seed=args.seed,
                                  metric=args.metric,
                                  optimizer_opts=_optimizer_opts(args),
                                  workers=args.workers)
    for method, table in tables.items():
        table.save(out, f"fig1_{method}")
    with open(out / "metadata.json", "w") as fh:
        json.dump({m: t.metadata for m, t in tables.items()}, fh, indent=1)
        fh.write("\n")
    print(f"wrote {len(tables)} tables to {out}")
    return 0


def _cmd_stability(args) -> int:
    out = Path(args.out or "runs/fig2")
    methods = tuple((args.methods or "original,ecd,optimized").split(","))
    n = args.points
    det = np.linspace(-TWO_PI * args.detuning_span, TWO_PI * args.detuning_span, n)
    amp = np.linspace(-args.amplitude_span, args.amplitude_span, n)
    if args.axis == "detuning":
        amp = np.array([0.0])
    elif args.axis == "amplitude":
        det = np.array([0.0])
    tables = experiments.run_fig2(err_detuning=det, err_amplitude=amp,
                                  methods=methods, T=args.T, s=args.s,
                                  V=TWO_PI * args.V, seed=args.seed,
                                  metric=args.metric,
                                  optimizer_opts=_optimizer_opts(args),
                                  workers=args.workers)
    for key, table in tables.items():
        table.save(out, f"fig2_{key}")
    with open(out / "metadata.json", "w") as fh:
        json.dump({k: t.metadata for k, t in tables.items()}, fh, indent=1)
        fh.write("\n")
    print(f"wrote {len(tables)} tables to {out}")
    return 0


def _cmd_verify(args) -> int:
    results = verify.run_invariant_suite(seed=args.seed)
    failed = 0
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failed += 0 if ok else 1
    print(f"{len(results) - failed}/{len(results)} invariant checks passed")
    return 0 if failed == 0 else 1


def cli_main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    try:
        args = _resolve(args)
        handler = {
            "simulate": _cmd_simulate,
            "optimize": _cmd_optimize,
            "sweep": _cmd_sweep,
            "stability": _cmd_stability,
            "verify": _cmd_verify,
        }[args.command]
        return handler(args)
    except (CliError, pulses.PulseError, pulses.CalibrationError,
            pulses.DegeneracyError, dynamics.PropagationError, ValueError,
            OSError) as exc:
        print(f"rydcz: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
