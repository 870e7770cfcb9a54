"""``remlab`` command line.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 acceptance failure (``verify`` only).
"""
import argparse
import sys
import traceback

from .config import COMMANDS, ExperimentConfig, _parse
from .errors import ConfigError, OutOfRange, RemlabError, SpecViolation
from .harness import emit_report, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 2, 3, 4

# option -> config key; values are parsed by the config text parser
_OPTIONS = {
    "field": "field spec, e.g. uniform(0.5,1.5), gaussian(0,1), point(1)",
    "m": "spin bias m in (-1, 1)",
    "epsilon": "margin epsilon for the technical region",
    "h-file": "CSV (index,h) holding a fixed disorder vector",
    "rho": "thinning exponent rho in (0, 1)",
    "beta": "inverse temperature for gibbs (default 2.5 lambda~)",
    "n": "number of sites",
    "n-grid": "comma list of n for the tail convergence table",
    "replicates": "number of (h, U) replicates",
    "window": "centred window lo:hi (default -2/lambda~:6/lambda~)",
    "lambda-grid": "lo:hi:steps for mgf",
    "lambda-star": "lambda* for the sharp-tail range check",
    "a": "tail level (a fraction of Sigma_n with --n-grid)",
    "C": "constant C of the coupled system (default n c)",
    "x": "offset x of the coupled system",
    "method": "tail method: exact, tilted or sharp",
    "samples": "sample count for the tilted estimator",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="remlab", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", help="root seed (default 0)")
    common.add_argument("--out", help="output directory (default remlab-out)")
    common.add_argument("--threads", help="worker threads (default 1)")
    common.add_argument("--config", help="config file; command-line options override it")
    common.add_argument("--no-report", action="store_true", help="skip report.txt")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name != "verify":
            for opt, text in _OPTIONS.items():
                p.add_argument(f"--{opt}", dest=opt.replace("-", "_"), help=text)
    return parser


def config_from_args(args):
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                base = ExperimentConfig.from_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
        base = base.with_overrides(command=args.command)
    else:
        base = ExperimentConfig(args.command)
    keys = ["seed", "out", "threads"] + [o.replace("-", "_") for o in _OPTIONS]
    over = {k: _parse(k, getattr(args, k)) for k in keys if getattr(args, k, None) is not None}
    return base.with_overrides(**over).validate()


def _context(exc):
    frame = traceback.extract_tb(exc.__traceback__)[-1] if exc.__traceback__ else None
    where = ""
    if frame is not None:
        module = frame.filename.rsplit("/", 1)[-1].removesuffix(".py")
        where = f" in {module}.{frame.name}"
    return f"{type(exc).__name__}{where}: {exc}"


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        manifest = run_experiment(cfg)
        if not args.no_report:
            emit_report(manifest)
    except (ConfigError, SpecViolation, OutOfRange) as exc:
        print(f"remlab {args.command}: {_context(exc)}", file=sys.stderr)
        return EXIT_CONFIG
    except RemlabError as exc:
        print(f"remlab {args.command}: {_context(exc)}", file=sys.stderr)
        return EXIT_NUMERIC
    for name in sorted(manifest.files):
        print(f"{cfg.out}/{name}")
    if manifest.failed:
        print("acceptance failures: " + ", ".join(str(k) for k in manifest.failed), file=sys.stderr)
        return EXIT_ACCEPTANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
