"""Command-line entry point: ``nes run | bench | sweep``."""

import argparse
import itertools
import json
import logging
from pathlib import Path
import sys

from .harness import ConfigError, execute_experiment, spec_from_dict

_FLAG_KEYS = {
    "algo": "algorithm",
    "objective": "objective",
    "dim": "dim",
    "instance_seed": "instance_seed",
    "seed": "seed",
    "budget": "budget",
    "target": "target_precision",
    "pop_size": "popsize",
    "eta_sigma": "eta_sigma",
    "alpha": "alpha",
    "restart_p": "restart_p",
    "repetitions": "repetitions",
    "sigma0": "sigma0",
    "id": "experiment_id",
}


def _add_spec_flags(p):
    p.add_argument("--algo", help="xnes, snes, plain, cnes, xnes-1+1, snes-1+1, radial-1+1, cauchy-1+1")
    p.add_argument("--objective", help="objective name (e.g. sphere, rosenbrock, f2rosen)")
    p.add_argument("--dim", type=int)
    p.add_argument("--instance-seed", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--budget", type=int, help="evaluations per repetition")
    p.add_argument("--target", type=float, help="precision above the known optimum")
    p.add_argument("--pop-size", type=int)
    p.add_argument("--eta-sigma", type=float)
    p.add_argument("--alpha", type=float, help="importance mixing refresh rate")
    p.add_argument("--importance-mixing", action="store_true", default=None)
    p.add_argument("--adaptation-sampling", action="store_true", default=None)
    p.add_argument("--restart-p", type=float)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--sigma0", type=float)
    p.add_argument("--id", help="experiment id (used for output file names)")


def _flags_to_dict(args):
    data = {}
    for flag, key in _FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    for flag in ("importance_mixing", "adaptation_sampling"):
        if getattr(args, flag, None):
            data[flag] = True
    return data


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from None


def _execute(specs, out):
    for spec in specs:
        _, report = execute_experiment(spec, out)
        med = report.median_evaluations
        print(f"{report.experiment_id}: success {report.successes}/{report.runs}"
              f" ({report.success_rate:.2f}), median evaluations "
              f"{'n/a' if med is None else f'{med:g}'}, best {report.best_fitness[0]:.6g}")


def _cmd_run(args):
    data = _load_json(args.config) if args.config else {}
    data.update(_flags_to_dict(args))
    return [spec_from_dict(data)]


def _cmd_bench(args):
    campaign = _load_json(args.campaign)
    if isinstance(campaign, dict):
        campaign = campaign.get("experiments", None)
    if not isinstance(campaign, list) or not campaign:
        raise ConfigError("experiments", "campaign must be a non-empty list of experiments")
    overrides = _flags_to_dict(args)
    specs = []
    for i, entry in enumerate(campaign):
        entry = dict(entry)
        entry.setdefault("experiment_id", f"exp{i:03d}")
        entry.update(overrides)
        specs.append(spec_from_dict(entry))
    return specs


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _cmd_sweep(args):
    base = _load_json(args.config) if args.config else {}
    base.update(_flags_to_dict(args))
    axes = []
    if args.dims:
        axes.append(("dim", args.dims))
    for item in args.grid or []:
        key, _, values = item.partition("=")
        if not values:
            raise ConfigError(key, "grid entries look like key=v1,v2,...")
        axes.append((key, [_parse_value(v) for v in values.split(",")]))
    if not axes:
        raise ConfigError("grid", "nothing to sweep; give --dims or --grid")
    prefix = base.get("experiment_id", "sweep")
    specs = []
    for combo in itertools.product(*(values for _, values in axes)):
        entry = dict(base)
        tags = []
        for (key, _), value in zip(axes, combo):
            entry[key] = value
            tags.append(f"{key}{value}")
        entry["experiment_id"] = "_".join([prefix] + tags)
        specs.append(spec_from_dict(entry))
    return specs


def build_parser():
    parser = argparse.ArgumentParser(prog="nes", description="Natural evolution strategies experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a single experiment")
    p.add_argument("--config", help="JSON experiment file; flags override its entries")
    _add_spec_flags(p)
    p.add_argument("--out", default="results", help="output directory")
    p.set_defaults(build=_cmd_run)

    p = sub.add_parser("bench", help="run every experiment of a campaign file")
    p.add_argument("campaign", help="JSON list of experiments (or {\"experiments\": [...]})")
    _add_spec_flags(p)
    p.add_argument("--out", default="results")
    p.set_defaults(build=_cmd_bench)

    p = sub.add_parser("sweep", help="run a grid over dimensions and parameters")
    p.add_argument("--config", help="JSON base experiment")
    _add_spec_flags(p)
    p.add_argument("--dims", type=int, nargs="+")
    p.add_argument("--grid", action="append", metavar="KEY=V1,V2",
                   help="extra grid axis, repeatable")
    p.add_argument("--out", default="results")
    p.set_defaults(build=_cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        specs = args.build(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        _execute(specs, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
