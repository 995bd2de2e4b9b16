"""Command line entry point: ``miso-goodput run|validate``."""
import argparse
import logging
import sys

from .exceptions import GoodputError
from .experiments import PRESETS, dump_config, parse_config, run


def build_parser():
    parser = argparse.ArgumentParser(prog="miso-goodput", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment preset")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--preset", choices=[p for p in PRESETS if p != "custom"])
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out")
    p_run.add_argument("--jobs", type=int, default=1)

    p_val = sub.add_parser("validate", help="parse a config and print the resolved config")
    p_val.add_argument("--config", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        spec = parse_config(args.config)
        if args.command == "validate":
            sys.stdout.write(dump_config(spec))
            return 0
        if args.preset:
            spec.preset = args.preset
        if args.seed is not None:
            spec.seed = args.seed
        spec.validate()
        path = run(spec, args.out, args.jobs)
        print(path)
        return 0
    except (GoodputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
