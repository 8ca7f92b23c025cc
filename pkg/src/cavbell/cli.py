"""Command-line entry point: ``cavbell <subcommand> [flags]``.

Data goes to ``--out`` (default stdout); the resolved configuration is
logged to stderr. Exit codes: 0 success, 1 I/O failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

from . import geometry, protocol, sweep
from .config import ConfigError, load_flat
from .montecarlo import FailurePolicy, ProtocolParams, run_until_success, simulate_trials, summarize, trial_rng

log = logging.getLogger("cavbell")

GEOMETRY_FLAGS = {
    # key: (flag, help)
    "w0": ("--w0", "mode waist [m]"),
    "lambda": ("--lambda", "field wavelength [m]"),
    "L": ("--L", "mirror separation [m]"),
    "R": ("--R", "mirror radius of curvature [m]"),
    "y0": ("--y0", "initial y offset [m]"),
    "z0": ("--z0", "initial z offset [m]"),
    "phi": ("--phi", "path angle in the x-y plane [rad]"),
    "theta": ("--theta", "path angle in the x-z plane [rad]"),
    "v": ("--v", "atom speed [m/s]"),
    "D0": ("--D0", "collimator exit to cavity A centre [m]"),
    "D1": ("--D1", "cavity A centre to cavity B centre [m]"),
    "beam_radius": ("--beam-radius", "effective beam radius for path sampling [m]"),
    "angular_radius": ("--angular-radius", "angular spread radius for path sampling [rad]"),
}


class UsageError(Exception):
    pass


def finite(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return value


def unit_interval(text: str) -> float:
    value = finite(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1]: {text!r}")
    return value


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return value


def seed_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text!r}")
    return value


def _out_flags(p: argparse.ArgumentParser, formats=("csv", "json")):
    p.add_argument("--config", default=None,
                   help="flat key=value file of flag values (SI units); explicit flags win")
    p.add_argument("-q", "--quiet", action="store_true", default=argparse.SUPPRESS,
                   help="only log warnings and errors to stderr")
    p.add_argument("--out", default="-", help="output file (default: standard output)")
    p.add_argument("--format", choices=formats, default=formats[0], help="output format")


def _range_flags(p, start, stop, steps, unit="dimensionless"):
    p.add_argument("--from", dest="start", type=finite, default=start, help=f"first abscissa, {unit} (default {start})")
    p.add_argument("--to", dest="stop", type=finite, default=stop, help=f"last abscissa, {unit} (default {stop})")
    p.add_argument("--steps", type=int, default=steps, help=f"number of grid points, >= 2 (default {steps})")


def _x_flag(p, default=0.5):
    p.add_argument("--x", "--g0tau", dest="x", type=finite, default=default,
                   help=f"pulse area g0*tau, dimensionless (default {default})")


def _protocol_flags(p):
    _x_flag(p)
    p.add_argument("--epsilon", type=finite, default=0.0, help="asymmetry; cavity B pulse area is x(1-epsilon), dimensionless")
    p.add_argument("--detector", type=unit_interval, default=1.0, help="detector efficiency D in [0, 1]")
    p.add_argument("--cutoff", type=int, default=2, help="Fock cutoff per cavity, >= 2")
    p.add_argument("--max-runs", type=positive_int, default=1000, help="runs before a trial counts as exhausted")
    p.add_argument("--max-failures", type=seed_int, default=None, help="end a trial after this many detection failures")
    p.add_argument("--policy", choices=[f.value for f in FailurePolicy], default=FailurePolicy.HALT_AND_DAMP.value,
                   help="what to do after a detection failure")
    p.add_argument("--run-duration", type=finite, default=20e-6, help="model time per run [s]")
    p.add_argument("--damp-wait", type=finite, default=1e-3, help="dissipation wait after a failure [s]")
    p.add_argument("--cavity-lifetime", type=finite, default=1e-3, help="photon lifetime of each cavity [s]")
    p.add_argument("--seed", type=seed_int, default=0, help="RNG seed (non-negative integer)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavbell", description="Conditional two-cavity Bell-state simulator.")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    p = sub.add_parser("fidelity-sweep", help="Bell fidelity after a successful run versus x")
    _range_flags(p, 0.0, 1.0, 101)
    _out_flags(p)

    p = sub.add_parser("success-sweep", help="success probability versus x")
    _range_flags(p, 0.0, 1.0, 101)
    p.add_argument("--detector", type=unit_interval, default=None, help="also report D**(1/P) for this detector efficiency in [0, 1]")
    _out_flags(p)

    p = sub.add_parser("epsilon-sweep", help="fidelity versus asymmetry epsilon at fixed x")
    _x_flag(p)
    _range_flags(p, -0.5, 0.5, 1001)
    p.add_argument("--log-abscissa", action="store_true", help="add ln(1-epsilon) column; drops epsilon >= 1")
    _out_flags(p)

    p = sub.add_parser("photon-sweep", help="n-photon repetition fidelity for n = from..to")
    _x_flag(p)
    _range_flags(p, 1, 4, 4, unit="photon number")
    p.add_argument("--cutoff", type=int, default=None, help="Fock cutoff per cavity (default to + 2)")
    _out_flags(p)

    p = sub.add_parser("window", help="x-interval meeting a fidelity floor and a success-probability floor")
    p.add_argument("--fidelity-floor", type=finite, default=None, help="minimum fidelity, dimensionless (required)")
    p.add_argument("--prob-floor", type=finite, default=None, help="minimum success probability, dimensionless (required)")
    _out_flags(p, ("json",))

    p = sub.add_parser("geometry", help="effective times and asymmetry for one atomic path")
    for key, (flag, helptext) in GEOMETRY_FLAGS.items():
        p.add_argument(flag, dest=f"g_{key}", type=finite, default=None, help=helptext)
    p.add_argument("--literal-delta", action="store_true",
                   help="closed form with cos(angle)*D displacements instead of straight-line geometry")
    p.add_argument("--samples", type=int, default=0, help="also sample this many beam paths for fidelity stats")
    _x_flag(p, default=0.8)
    p.add_argument("--seed", type=seed_int, default=0, help="RNG seed for path sampling")
    _out_flags(p, ("json",))

    p = sub.add_parser("montecarlo", help="repeat-until-success statistics over many seeded trials")
    _protocol_flags(p)
    p.add_argument("--trials", type=positive_int, default=10000, help="independent trials per point")
    p.add_argument("--vary", choices=["x", "epsilon", "D"], default=None, help="sweep this parameter")
    _range_flags(p, None, None, 11, unit="units of the --vary parameter (all dimensionless)")
    p.add_argument("--workers", type=positive_int, default=1, help="worker processes; output does not depend on it")
    _out_flags(p, ("json", "csv"))

    p = sub.add_parser("run", help="one seeded trial, printed as a JSON record")
    _protocol_flags(p)
    p.add_argument("--trial", type=seed_int, default=0, help="trial index within the seed's streams")
    _out_flags(p, ("json",))

    p = sub.add_parser("preset", help="print a named parameter preset")
    p.add_argument("name", choices=["paris"], help="preset name")
    p.add_argument("--cavity-scale", type=finite, default=1.0, help="mirror separation multiplier, dimensionless (g0 ~ L^-3/2)")
    _out_flags(p, ("json",))
    parser.subcommands = sub.choices
    return parser


CONFIG_ALIASES = {"g0tau": "x", "D": "detector", "detector_eff": "detector", "failure_policy": "policy", "from": "start", "to": "stop"}


def _config_defaults(sub: argparse.ArgumentParser, command: str, raw: dict[str, str]) -> dict:
    actions = {a.dest: a for a in sub._actions}
    out = {}
    for key, text in raw.items():
        if command == "geometry" and key in GEOMETRY_FLAGS:
            dest = f"g_{key}"
        else:
            dest = CONFIG_ALIASES.get(key, key.replace("-", "_"))
        action = actions.get(dest)
        if action is None or dest in ("config", "out", "help"):
            raise UsageError(f"unknown config key {key!r} for {command}")
        if action.nargs == 0:
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"config key {key!r}: expected a boolean, got {text!r}")
            value = text.lower() in ("true", "1", "yes")
        else:
            try:
                value = action.type(text) if action.type else text
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"config key {key!r}: {value!r} not in {list(action.choices)}")
        out[dest] = value
    return out


def _sweep_spec(args, variable, fixed=None) -> sweep.SweepSpec:
    try:
        return sweep.SweepSpec(variable, args.start, args.stop, args.steps, fixed or {})
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _params(args) -> ProtocolParams:
    try:
        return ProtocolParams(
            x=args.x, epsilon=args.epsilon, detector_eff=args.detector, cutoff=args.cutoff,
            max_runs=args.max_runs, seed=args.seed, failure_policy=args.policy,
            run_duration=args.run_duration, damp_wait=args.damp_wait,
            cavity_lifetime=args.cavity_lifetime, max_failures=args.max_failures,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _render(rows, fmt) -> str:
    return sweep.to_csv(rows) if fmt == "csv" else sweep.to_json(rows)


def cmd_fidelity_sweep(args):
    spec = _sweep_spec(args, "x")
    log.info("resolved config: %s", json.dumps(asdict(spec)))
    return _render(sweep.sweep_fidelity(spec), args.format)


def cmd_success_sweep(args):
    fixed = {} if args.detector is None else {"D": args.detector}
    spec = _sweep_spec(args, "x", fixed)
    log.info("resolved config: %s", json.dumps(asdict(spec)))
    return _render(sweep.sweep_success(spec), args.format)


def cmd_epsilon_sweep(args):
    spec = _sweep_spec(args, "epsilon", {"x": args.x, "log_abscissa": args.log_abscissa})
    log.info("resolved config: %s", json.dumps(asdict(spec)))
    return _render(sweep.sweep_epsilon(spec), args.format)


def cmd_photon_sweep(args):
    if args.start < 0:
        raise UsageError("photon numbers start at 0")
    cutoff = args.cutoff if args.cutoff is not None else int(args.stop) + 2
    if cutoff < int(args.stop) + 1:
        raise UsageError("--cutoff must be at least --to + 1")
    spec = _sweep_spec(args, "n_photons", {"x": args.x, "cutoff": cutoff})
    log.info("resolved config: %s", json.dumps(asdict(spec)))
    return _render(sweep.sweep_photons(spec), args.format)


def cmd_window(args):
    if args.fidelity_floor is None or args.prob_floor is None:
        raise UsageError("--fidelity-floor and --prob-floor are required")
    log.info("resolved config: %s", json.dumps({"fidelity_floor": args.fidelity_floor, "prob_floor": args.prob_floor}))
    win = sweep.sweep_operating_window(args.fidelity_floor, args.prob_floor)
    out = {"fidelity_floor": args.fidelity_floor, "prob_floor": args.prob_floor}
    if win is None:
        out.update(empty=True, x_min=None, x_max=None)
    else:
        out.update(empty=False, x_min=win[0], x_max=win[1],
                   success_prob_at_x_max=protocol.success_probability(win[1]),
                   fidelity_at_x_min=protocol.ideal_fidelity(win[0]))
    return sweep.to_json(out)


def _geometry_config(args) -> dict[str, float]:
    return {key: getattr(args, f"g_{key}") for key in GEOMETRY_FLAGS if getattr(args, f"g_{key}") is not None}


def cmd_geometry(args):
    cfg = _geometry_config(args)
    log.info("resolved config: %s", json.dumps(cfg, sort_keys=True))
    try:
        mode = geometry.mode_from_config(cfg)
        path = geometry.path_from_config(cfg)
    except geometry.GeometryError as exc:
        raise UsageError(str(exc)) from None
    out = {
        "w0": mode.w0,
        "tau_central": geometry.central_time(mode, path.v),
        "tau_a_closed": geometry.effective_time_closed(path, mode, path.D0, args.literal_delta),
        "tau_b_closed": geometry.effective_time_closed(path, mode, path.D0 + path.D1, args.literal_delta),
        "displacement_convention": "literal" if args.literal_delta else "straight-line",
        "epsilon_second_order": geometry.epsilon_second_order(path, mode),
    }
    try:
        t = geometry.epsilon_exact(path, mode)
        out.update(tau_a=t.tau_a, tau_b=t.tau_b, epsilon=t.epsilon,
                   fidelity=protocol.asymmetric_fidelity(args.x, t.epsilon), x=args.x)
    except geometry.UndefinedAsymmetry as exc:
        out.update(epsilon=None, epsilon_error=str(exc))
    if args.samples:
        if args.samples < 1:
            raise UsageError("--samples must be >= 1")
        beam = cfg.get("beam_radius")
        ang = cfg.get("angular_radius", beam / path.D1 if beam is not None and path.D1 > 0 else None)
        if beam is None or ang is None:
            raise UsageError("sampling needs beam_radius (and angular_radius unless D1 > 0)")
        config = geometry.BeamConfig(mode, beam, ang, path.D0, path.D1, path.v)
        out["collimation"] = geometry.collimation_fidelity_stats(args.x, config, args.samples, args.seed)
    out["note"] = "epsilon depends on the assumed D0 and D1"
    return sweep.to_json(out)


def cmd_montecarlo(args):
    params = _params(args)
    if args.vary is None:
        log.info("resolved config: %s", json.dumps({**params.to_dict(), "trials": args.trials}))
        summary = summarize(simulate_trials(params, args.trials, workers=args.workers))
        row = {"x": params.x, "epsilon": params.epsilon, "D": params.detector_eff,
               **sweep.montecarlo_columns(params, summary)}
        return _render([row], args.format) if args.format == "csv" else sweep.to_json(row)
    if args.start is None or args.stop is None:
        raise UsageError("--vary needs --from and --to")
    fixed = {k: v for k, v in params.to_dict().items() if k != "seed"}
    spec = _sweep_spec(args, args.vary, fixed)
    log.info("resolved config: %s", json.dumps({**asdict(spec), "trials": args.trials, "seed": args.seed}))
    try:
        rows = sweep.sweep_montecarlo(spec, args.trials, args.seed, workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return _render(rows, args.format)


def cmd_run(args):
    params = _params(args)
    log.info("resolved config: %s", json.dumps({**params.to_dict(), "trial": args.trial}))
    rec = run_until_success(params, trial_rng(params.seed, args.trial))
    return sweep.to_json(rec.to_json())


def cmd_preset(args):
    log.info("resolved config: %s", json.dumps({"name": args.name, "cavity_scale": args.cavity_scale}))
    try:
        preset = sweep.preset_paris(args.cavity_scale)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return sweep.to_json(preset.to_dict())


COMMANDS = {
    "fidelity-sweep": cmd_fidelity_sweep,
    "success-sweep": cmd_success_sweep,
    "epsilon-sweep": cmd_epsilon_sweep,
    "photon-sweep": cmd_photon_sweep,
    "window": cmd_window,
    "geometry": cmd_geometry,
    "montecarlo": cmd_montecarlo,
    "run": cmd_run,
    "preset": cmd_preset,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        if args.config:
            sub = parser.subcommands[args.command]
            sub.set_defaults(**_config_defaults(sub, args.command, load_flat(args.config)))
            args = parser.parse_args(argv)
        text = COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cavbell {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"cavbell {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cavbell: I/O error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.out == "-":
            sys.stdout.write(text)
            sys.stdout.flush()
        else:
            Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        print(f"cavbell: I/O error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
