"""``simulate`` command: run heating-coordination experiments from a JSON config."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import InvalidParameterError
from .experiment import CASES, ExperimentConfig, default_config_dict, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Simulate baseline, uncoordinated and coordinated space heating for a household population.")
    parser.add_argument("--config", help="JSON config file (defaults are used for missing keys)")
    parser.add_argument("--case", action="append", choices=CASES,
                        help="case to run; repeat for several (default: the config's run.cases)")
    parser.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--households", type=int, help="override population.household_count")
    parser.add_argument("--max-passes", type=int, help="override run.max_passes")
    parser.add_argument("--emit-default-config", action="store_true",
                        help="print the full default config as JSON and exit")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for per-pass logs")
    return parser


def load_config(args) -> ExperimentConfig:
    data = default_config_dict()
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            user = json.load(fh)
        for section, values in user.items():
            if isinstance(values, dict) and isinstance(data.get(section), dict):
                data[section].update(values)
            else:
                data[section] = values
    if args.case:
        data["run"]["cases"] = list(dict.fromkeys(args.case))
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise InvalidParameterError("--seed must be an unsigned 64-bit integer")
        data["run"]["seed"] = args.seed
    if args.out:
        data["run"]["out_dir"] = args.out
    if args.households is not None:
        data["population"]["household_count"] = args.households
    if args.max_passes is not None:
        data["run"]["max_passes"] = args.max_passes
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.emit_default_config:
        json.dump(default_config_dict(), sys.stdout, indent=2)
        sys.stdout.write("\n")
        return 0
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.verbose < 2:
        logging.getLogger("heatshift.coordinator").setLevel(max(level, logging.WARNING))
    try:
        config = load_config(args)
    except (OSError, ValueError, TypeError) as exc:
        parser.error(str(exc))
    exp = run_experiment(config)
    m = exp.metrics
    print(f"households: {m.households} (excluded {m.excluded_households})")
    for case in m.cases:
        line = (f"{case:>14}: cost {m.total_cost_gbp[case]:.2f} GBP ({0.0 - m.cost_reduction_pct[case]:+.2f}% vs baseline), "
                f"evening peak {m.evening_peak_mw[case]:.1f} MW ({m.evening_shaving_pct[case]:.2f}% shaved)")
        if case in m.passes:
            line += f", {m.passes[case]} passes{'' if m.converged[case] else ' (not converged)'}"
        print(line)
    print(f"results written to {config.run.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
