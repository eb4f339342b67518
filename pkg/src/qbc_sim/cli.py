"""Command-line interface: run, sweep, hiding-test and fig2."""

import argparse
import csv
import io
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from pydantic import BaseModel

from .config import get_settings, load_sim_config
from .exceptions import (
    ConfigurationError,
    InvariantViolationError,
    PreconditionError,
    QBCSimError,
)
from .harness import (
    SWEEP_COLUMNS,
    basis_success_experiment,
    hiding_test,
    run_monte_carlo,
    sweep,
    sweep_to_csv,
)
from .models import AggregateStats, BasisSuccessRow
from .transcript import TranscriptStore

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_INVARIANT_VIOLATION = 2


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="SimConfig JSON document")
    common.add_argument("--seed", type=int, help="master seed (u64)")
    common.add_argument("--trials", type=int, help="sessions per batch")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--transcripts", help="directory for transcript dumps")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="qbc-sim",
        description="Monte Carlo simulator of a practical quantum bit commitment.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("run", parents=[common], help="one Monte Carlo batch")
    sweep_parser = commands.add_parser(
        "sweep", parents=[common], help="one batch per parameter value"
    )
    sweep_parser.add_argument(
        "--param", required=True, help="dotted field, e.g. channel.visibility_v"
    )
    sweep_parser.add_argument("--values", required=True, help="comma-separated values")
    hiding_parser = commands.add_parser(
        "hiding-test", parents=[common], help="chi-square test of the hiding property"
    )
    hiding_parser.add_argument("--sessions", type=int, required=True)
    commands.add_parser(
        "fig2",
        aliases=["basis-success"],
        parents=[common],
        help="five sessions of in/out-of-basis success",
    )
    return parser


def _parse_values(raw: str) -> list[float]:
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigurationError(f"--values must be numbers: {e}") from e


def _rows_to_csv(rows: Sequence[BaseModel], columns: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(
        buffer, fieldnames=columns, lineterminator="\n", extrasaction="ignore"
    )
    writer.writeheader()
    for row in rows:
        writer.writerow(
            {k: "" if v is None else v for k, v in row.model_dump(mode="json").items()}
        )
    return buffer.getvalue()


def _to_json(payload: BaseModel | Sequence[BaseModel]) -> str:
    if isinstance(payload, BaseModel):
        data = payload.model_dump(mode="json")
    else:
        data = [row.model_dump(mode="json") for row in payload]
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    Path(out).expanduser().write_text(text, encoding="utf-8")


def _render_run(stats: AggregateStats, fmt: str) -> str:
    if fmt == "json":
        return _to_json(stats)
    return _rows_to_csv([stats], SWEEP_COLUMNS[1:])


def _dispatch(args: argparse.Namespace) -> str:
    settings = get_settings()
    seed = args.seed
    if seed is None and args.config is None:
        seed = settings.default_seed
    config = load_sim_config(args.config, seed=seed, trials=args.trials)
    transcript_dir = args.transcripts or settings.transcript_dir
    store = TranscriptStore(transcript_dir) if transcript_dir else None

    if args.command == "run":
        stats = run_monte_carlo(config, settings.parallelism, store)
        return _render_run(stats, args.format)

    if args.command == "sweep":
        values = _parse_values(args.values)
        rows = sweep(config, args.param, values, settings.parallelism)
        return sweep_to_csv(rows) if args.format == "csv" else _to_json(rows)

    if args.command == "hiding-test":
        result = hiding_test(config, args.sessions, settings.parallelism)
        if args.format == "csv":
            columns = ("statistic", "p_value", "n_bins", "dof", "note")
            return _rows_to_csv([result], columns)
        return _to_json(result)

    rows = basis_success_experiment(config)
    if args.format == "csv":
        return _rows_to_csv(rows, tuple(BasisSuccessRow.model_fields))
    return _to_json(rows)


def main(argv: Sequence[str] | None = None) -> int:
    """Run the qbc-sim command line."""
    args = build_parser().parse_args(argv)
    try:
        logging.basicConfig(
            level=get_settings().log_level.upper(),
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
        _emit(_dispatch(args), args.out)
    except (ConfigurationError, PreconditionError) as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except InvariantViolationError as e:
        print(f"Internal invariant violated: {e}", file=sys.stderr)
        return EXIT_INVARIANT_VIOLATION
    except QBCSimError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVARIANT_VIOLATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
