"""
Command-line interface

    scatter-kirchhoff {goa|kirchhoff|validate|compare} --config PATH
                      [--output DIR] [--threads N] [--log-level LEVEL]

Exit codes: 0 success, 1 configuration or module error, 2 validation
failure. Errors are also reported as one JSON record on stderr and in
<output>/error.json.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from scatter_kirchhoff.cli.runner import EXIT_ERROR, EXIT_VALIDATION, run
from scatter_kirchhoff.exceptions import ConfigError, ScatterError, ValidationFailed
from scatter_kirchhoff.models.run_config import RunConfig, RunMode
from scatter_kirchhoff.utils import write_json

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def load_run_config(path: Path) -> RunConfig:
    """
    Read and validate a JSON run configuration

    Raises:
        ConfigError: The file is unreadable or does not match the schema
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return RunConfig.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, required=True, help='JSON run configuration')
    common.add_argument('--output', type=Path, default=Path('results'), help='Output directory')
    common.add_argument('--threads', type=int, default=1, help='Worker threads for kernel sums')
    common.add_argument('--log-level', default='WARNING',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='Logging level')

    parser = argparse.ArgumentParser(
        prog='scatter-kirchhoff',
        description='Iterated Kirchhoff and geometrical-optics scattering by convex obstacles',
    )
    sub = parser.add_subparsers(dest='mode', required=True)
    sub.add_parser('goa', parents=[common], help='Geometrical-optics field')
    sub.add_parser('kirchhoff', parents=[common], help='Iterated Kirchhoff field')
    sub.add_parser('validate', parents=[common], help='Stationary-phase identity sweep')
    sub.add_parser('compare', parents=[common], help='Kirchhoff versus geometrical optics')
    return parser


def _report_error(exc: ScatterError, output: Path, exit_code: int) -> int:
    record = {"error": exc.code, "message": str(exc), "exit_code": exit_code}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    try:
        write_json(output / "error.json", record)
    except OSError:
        logger.exception("Could not write error record")
    return exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)

    if args.threads < 1:
        return _report_error(ConfigError("--threads must be at least 1"), args.output, EXIT_ERROR)
    try:
        config = load_run_config(args.config)
        result = run(config, RunMode(args.mode), args.output, threads=args.threads)
    except ValidationFailed as exc:
        logger.error("Validation failed: %s", exc)
        return _report_error(exc, args.output, EXIT_VALIDATION)
    except ScatterError as exc:
        logger.error("%s failed: %s", args.mode, exc)
        return _report_error(exc, args.output, EXIT_ERROR)
    for path in result.outputs:
        logger.info("Wrote %s", path)
    return result.exit_code


if __name__ == '__main__':
    raise SystemExit(main())
