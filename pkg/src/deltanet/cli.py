"""Command-line pipeline driver.

Subcommands map one-to-one onto pipeline stages:

    deltanet synth|ingest|stats|pairs|features|train|importance|did|report
        [--config PATH] [--seed N] [--threads N] [--output-dir DIR]
        [--input PATH] [--variant V] [--feature-set F]

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback

from .config import build_config
from .errors import ConfigError, DataError
from .pipeline import STAGES, run_stage

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

logger = logging.getLogger("deltanet")


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2, matching EXIT_CONFIG
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _build_parser() -> _ArgumentParser:
    parser = _ArgumentParser(prog="deltanet", description=__doc__,
                             formatter_class=argparse.RawDescriptionHelpFormatter)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a key = value config file")
    common.add_argument("--seed", type=int, help="master random seed")
    common.add_argument("--threads", type=int, help="worker threads (0 = all cores)")
    common.add_argument("--output-dir", dest="output_dir", help="artifact directory")
    common.add_argument("--input", help="input corpus (line-delimited JSON)")
    common.add_argument(
        "--variant",
        choices=("main", "unweighted", "exclude-winning"),
        help="graph variant for the panel stage",
    )
    common.add_argument(
        "--feature-set",
        dest="feature_set",
        choices=("language", "network", "all"),
        help="restrict training to one feature set",
    )
    common.add_argument("--verbose", action="store_true", help="debug logging")

    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in STAGES:
        sub.add_parser(stage, parents=[common], help=f"run the {stage} stage")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = build_config(
            config_path=args.config,
            seed=args.seed,
            threads=args.threads,
            output_dir=args.output_dir,
            input=args.input,
            variant=args.variant,
            feature_set=args.feature_set,
        )
        artifacts = run_stage(args.stage, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - boundary: map to internal-error exit code
        traceback.print_exc()
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL

    for path in artifacts:
        logger.info("wrote %s", path)
    if args.stage == "stats":
        payload = json.loads(artifacts[0].read_text(encoding="utf-8"))
        print(json.dumps(payload.get("stats", {}), indent=2, sort_keys=True))
    elif args.stage == "report":
        print(artifacts[1].read_text(encoding="utf-8"))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
