"""Command line: ``run``, ``sweep`` and ``diag``.

Exit codes: 0 success, 1 failed diagnostic, 2 configuration error, 3 algorithm fault.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import diagnostics
from .config import ExperimentConfig
from .errors import ConfigError
from .experiment import run_experiment, sweep

EXIT_OK, EXIT_DIAG_FAIL, EXIT_CONFIG, EXIT_FAULT = 0, 1, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="bandit-newton", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run replicated experiments from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--out")
    r.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("sweep", help="repeat an experiment over values of one setting")
    s.add_argument("--config", required=True)
    s.add_argument("--axis", required=True, help="n, d, or a constant such as eta or C_log")
    s.add_argument("--values", default="", help="comma separated")
    s.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    s.add_argument("--out")
    s.add_argument("--workers", type=int, default=1)

    d = sub.add_parser("diag", help="run a numerical property suite")
    d.add_argument("suite", choices=("gauge", "unbiasedness", "ftrl"))
    d.add_argument("--seed", type=int, default=0)
    return p


def _load(args):
    cfg = ExperimentConfig.load(args.config)
    for item in args.override:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        key, value = item.split("=", 1)
        cfg = cfg.with_override(key.strip(), value.strip())
    return cfg


def _values(text):
    out = []
    for v in (x.strip() for x in text.split(",")):
        if not v:
            continue
        try:
            out.append(json.loads(v))
        except json.JSONDecodeError:
            out.append(v)
    return out


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "diag":
            rng = np.random.default_rng(args.seed)
            result = {"gauge": diagnostics.gauge_check, "unbiasedness": diagnostics.unbiasedness_check,
                      "ftrl": diagnostics.ftrl_check}[args.suite](rng)
            print(result.line())
            return EXIT_OK if result.passed else EXIT_DIAG_FAIL
        cfg = _load(args)
        if args.command == "run":
            summary = run_experiment(cfg, args.out, args.workers)
            print(f"mean final regret {summary['mean_final_regret']:.6g}, "
                  f"Reg/sqrt(n) {summary['mean_reg_over_sqrt_n']:.6g}, faults {summary['faults']}")
            return EXIT_FAULT if summary["faults"] else EXIT_OK
        rows = sweep(cfg, args.axis, _values(args.values), args.out, args.workers)
        for r in rows:
            print(f"{args.axis}={r['value']}: mean regret {r['mean_regret']:.6g}, "
                  f"Reg/sqrt(n) {r['reg_over_sqrt_n']:.6g}, restarts {r['restarts']}")
        return EXIT_FAULT if any(r["faults"] for r in rows) else EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
