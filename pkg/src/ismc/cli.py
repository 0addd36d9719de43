"""Command line interface: ``ismc {estimate,ais,compare,diag,cost}``.

Exit codes: 0 success, 2 configuration or input error, 3 properness
violation at run time. ``ISMC_LOG`` sets the log level (default WARNING).
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .ais import ALGORITHMS, predicted_cost
from .bench import fmt_value, run_experiment
from .config import ConfigError, load_config
from .diagnostics import ess_from_log_weights
from .errors import ConfigurationError, ISMCError, PropernessError, ValidationError

EXIT_OK, EXIT_CONFIG, EXIT_PROPERNESS = 0, 2, 3

log = logging.getLogger("ismc")


def _add_run_flags(p):
    p.add_argument("--config", required=True, help="experiment file (TOML)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--trials", type=int, help="override the number of trials")
    p.add_argument("--out", help="output path (default: config [output] path, else stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="output format")
    p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--timing", action="store_true", help="fill the wall_time_ms column")


def build_parser():
    parser = argparse.ArgumentParser(prog="ismc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ismc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("estimate", "single IS or MIS run per trial"),
        ("ais", "adaptive importance sampling run per trial"),
        ("compare", "paired comparison of MIS weighting schemes on identical draws"),
    ):
        _add_run_flags(sub.add_parser(name, help=text))

    d = sub.add_parser("diag", help="ESS diagnostics for a file of log-weights")
    d.add_argument("weights_file", help="one log-weight per line")

    c = sub.add_parser("cost", help="predicted evaluation counts per algorithm")
    c.add_argument("--K", type=int, default=1, help="samples per proposal")
    c.add_argument("--N", type=int, default=1, help="number of proposals")
    c.add_argument("--J", type=int, default=1, help="iterations")
    c.add_argument("--algorithm", choices=ALGORITHMS, help="only this algorithm")
    return parser


def _run(args, stdout):
    exp = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be a 64-bit unsigned integer", source="--seed")
        exp = replace(exp, master_seed=args.seed)
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be >= 1", source="--trials")
        exp = replace(exp, trials=args.trials)
    if args.out is not None:
        exp = replace(exp, output_path=args.out)
    if args.format is not None:
        exp = replace(exp, output_format=args.format)
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1", source="--workers")
    try:
        run_experiment(exp, args.command, args.workers, args.timing, stdout=stdout)
    except ConfigurationError as exc:
        raise ConfigError(str(exc), source=args.config) from None
    return EXIT_OK


def read_log_weights(path):
    """Parse one log-weight per line; blank lines and ``#`` comments are skipped."""
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read weights file: {exc.strerror}", source=str(path)) from None
    values = []
    for lineno, line in enumerate(lines, 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            v = float(s)
        except ValueError:
            raise ConfigError(f"cannot parse log-weight {s!r}", lineno, str(path)) from None
        if math.isnan(v) or v == math.inf:
            raise ConfigError(f"log-weight must be finite or -inf, got {s!r}", lineno, str(path))
        values.append(v)
    if not values:
        raise ConfigError("no log-weights found", source=str(path))
    return np.array(values)


def _diag(args, stdout):
    lw = read_log_weights(args.weights_file)
    try:
        rep = ess_from_log_weights(lw)
    except ISMCError as exc:
        raise ConfigError(str(exc), source=args.weights_file) from None
    for key, value in rep.as_dict().items():
        stdout.write(f"{key},{fmt_value(value)}\n")
    return EXIT_OK


def _cost(args, stdout):
    for k, v in (("K", args.K), ("N", args.N), ("J", args.J)):
        if v < 1:
            raise ConfigError(f"--{k} must be >= 1", source=f"--{k}")
    names = [args.algorithm] if args.algorithm else ALGORITHMS
    stdout.write("algorithm,K,N,J,target_evals,proposal_evals\n")
    for name in names:
        c = predicted_cost(name, args.K, args.N, args.J)
        stdout.write(f"{name},{args.K},{args.N},{args.J},{c.target_evals},{c.proposal_evals}\n")
    return EXIT_OK


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    level = getattr(logging, os.environ.get("ISMC_LOG", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=stderr,
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    handler = {"diag": _diag, "cost": _cost}.get(args.command, _run)
    try:
        return handler(args, stdout)
    except PropernessError as exc:
        point = "" if exc.point is None else f" offending sample: {np.asarray(exc.point).tolist()}"
        stderr.write(f"properness violation: {exc}.{point}\n")
        return EXIT_PROPERNESS
    except (ConfigurationError, ValidationError) as exc:
        stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
