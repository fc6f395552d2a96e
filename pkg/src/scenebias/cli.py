"""Command line entry point: ``scenebias {gen,detect,eval,report,all}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .detect import UnknownDetectorError
from .pipeline import RunConfig, cmd_all, cmd_detect, cmd_eval, cmd_gen, cmd_report
from .rank import LabelError
from .xform import ConfigurationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3

logger = logging.getLogger("scenebias")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _name_list(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # defaults are None so that values from --config are only overridden by explicit flags
    common.add_argument("--config", type=Path, help="JSON file with any of the options below")
    common.add_argument("--db", type=Path, help="database root (holds manifest.json)")
    common.add_argument("--out", type=Path, help="results directory")
    common.add_argument("--refs", type=Path, help="directory of reference images (gen)")
    common.add_argument("--labels", type=Path, help="scene labels CSV: scene_id,f,g,h")
    common.add_argument("--detectors", type=_name_list,
                        help="comma list of HARLAP,HESLAP,MSER,FASTHESS or EXT:<tag>")
    common.add_argument("--eps-overlap", type=float, help="overlap error threshold (default 0.4)")
    common.add_argument("--normalize-radius", type=float,
                        help="rescale regions to this radius before measuring overlap")
    common.add_argument("--j", type=int, help="ranking size (default 20)")
    common.add_argument("--blur-schedule", type=_float_list, help="blur sigmas, first must be 0 (gen)")
    common.add_argument("--light-schedule", type=_float_list, help="light factors, first must be 1 (gen)")
    common.add_argument("--steps-blur", type=_float_list, help="reported blur sigmas (default 0.5,2.0,3.0)")
    common.add_argument("--steps-light", type=_float_list,
                        help="reported light reductions in percent (default 10,40,60)")
    common.add_argument("--jobs", type=int, help="worker processes (default 1)")
    common.add_argument("--force", action="store_true", default=None, help="recompute cached outputs")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="scenebias", description="Detector scene-bias benchmark.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("gen", "synthesize the blur and light datasets"),
        ("detect", "run detectors on every database image"),
        ("eval", "compute repeatability records"),
        ("report", "rank scenes and write trait-index tables"),
        ("all", "run every stage in order"),
    ):
        sub.add_parser(name, parents=[common], help=helptext)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{args.config}: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigurationError(f"{args.config}: expected a JSON object")
        data = {k.replace("-", "_"): v for k, v in data.items()}
        base = args.config.parent
        for key in ("db", "out", "refs", "labels"):
            if isinstance(data.get(key), str):
                data[key] = base / data[key]
    for key in RunConfig.field_names():
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    return RunConfig.from_mapping(data)


_COMMANDS = {
    "gen": cmd_gen,
    "detect": cmd_detect,
    "eval": cmd_eval,
    "report": cmd_report,
    "all": cmd_all,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        outcome = _COMMANDS[args.command](config)
    except (ConfigurationError, LabelError, UnknownDetectorError, ValueError, TypeError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    results = outcome if isinstance(outcome, list) else [outcome]
    partial = False
    for res in results:
        for note in getattr(res, "notes", ()):
            logger.info("%s: %s", res.stage, note)
        partial = partial or getattr(res, "partial", False)
    if partial:
        logger.warning("finished with gaps or failures; see the reports in the output directory")
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
