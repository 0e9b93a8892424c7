"""Command line entry point ``tapergp``.

``tapergp <simulate|fit|predict|mspe-curve|experiment> --config FILE [--seed N] [--out DIR]``

``--config`` takes a path or the name of a shipped preset (``--list``
shows them).  ``fit``, ``predict`` and ``mspe-curve`` force the matching
mode; ``experiment`` runs whatever mode the config names.  The exit code
is 2 for configuration errors, 3 for file errors and 0 otherwise,
including runs where some fits did not converge.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import ConfigError, Scenario, list_presets, load_scenario, run_scenario, summarize
from .experiments.runner import GridRun, write_outputs
from .geometry import ParameterError, write_locations_csv
from .simulate import write_simulation_csv

log = logging.getLogger("tapergp")

_FORCED_MODE = {"fit": "estimate", "predict": "predict", "mspe-curve": "mspe_curve"}


def _gammas(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid taper range list {text!r}") from None
    return vals


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tapergp", description="Covariance tapering for bivariate Matérn fields")
    parser.add_argument("--list", action="store_true", help="list shipped preset scenarios and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")
    helps = {
        "simulate": "simulate the field on one location set",
        "fit": "one-taper ML fits with range continuation",
        "predict": "kriging at the prediction site with exact MSPEs",
        "mspe-curve": "tapered over untapered MSPE ratios",
        "experiment": "run a scenario in the mode given by its config",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="config file or preset name")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", default=".", help="output directory [.]")
        p.add_argument("--model", choices=("A", "B"))
        p.add_argument("--family", help="comma separated taper families")
        p.add_argument("--gammas", type=_gammas, help="comma separated taper ranges, inf allowed")
        p.add_argument("--n-rep", type=int, dest="n_rep")
        p.add_argument("--m", type=_ints, help="comma separated half-grid counts")
        p.add_argument("--delta", type=float)
        p.add_argument("--workers", type=int)
        if name == "experiment":
            p.add_argument("--summary", action="store_true", help="also write per-group quantiles")
    return parser


def scenario_from_args(args) -> Scenario:
    base = Scenario(name=args.command.replace("-", "_"))
    s = load_scenario(args.config, base) if args.config else base
    updates = {}
    if args.command in _FORCED_MODE:
        updates["mode"] = _FORCED_MODE[args.command]
    for attr, key in (("seed", "seed"), ("model", "model"), ("gammas", "gammas"), ("n_rep", "n_rep"),
                      ("m", "ms"), ("delta", "delta"), ("workers", "workers")):
        val = getattr(args, attr)
        if val is not None:
            updates[key] = val
    if args.family:
        updates["families"] = tuple(f.strip() for f in args.family.split(",") if f.strip())
    return s.with_updates(**updates) if updates else s


def _simulate(s: Scenario, out: Path) -> list[Path]:
    cfg = s.model_config()
    g = GridRun(s, cfg, s.ms[0])
    locs = g.locations(0)
    samples = g.samples(range(s.n_rep), locs)
    out.mkdir(parents=True, exist_ok=True)
    sim_path = out / f"{s.name}.csv"
    loc_path = out / f"{s.name}.locations.csv"
    write_simulation_csv(samples, cfg.p, sim_path)
    write_locations_csv(locs, loc_path)
    return [sim_path, loc_path]


def run(args) -> list[Path]:
    s = scenario_from_args(args)
    out = Path(args.out)
    if args.command == "simulate":
        return _simulate(s, out)
    table = run_scenario(s)
    paths = list(write_outputs(table, s, out))
    if getattr(args, "summary", False):
        summ = summarize(table)
        path = out / f"{s.name}.summary.csv"
        summ.to_csv(path)
        paths.append(path)
    bad = sum(1 for r in table.rows if r["status"] != "ok")
    if bad:
        log.warning("%d of %d rows have a non-ok status", bad, len(table))
    return paths


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.list:
        print("\n".join(list_presets()))
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        paths = run(args)
    except (ConfigError, ParameterError) as exc:
        print(f"tapergp: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"tapergp: I/O error: {exc}", file=sys.stderr)
        return 3
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
