"""Command-line reproduction driver.

Every experiment is a subcommand taking a JSON config (validated against the
schemas shipped under docs/schemas/), an output directory, and a seed.  Each
run writes RFC-4180 CSV results plus a config echo; rerunning from the echo
reproduces the results byte for byte.  Wall-clock timings are never written
into result files, by design.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import sys
from pathlib import Path

from .runners import RUNNERS

_SCHEMA_DIR = Path(__file__).resolve().parent / "schemas"

_GNUPLOT_HINTS = {
    "tails": ("set logscale y\nplot '{csv}' using 3:4 with lines title 'bound', "
              "'{csv}' using 3:5 with points title 'monte carlo'\n"),
    "mle": ("plot '{csv}' using 1:2 with linespoints title 'median estimate'\n"
            "set logscale x\n"),
    "rates": ("set logscale xy\nplot '{csv}' using 1:6 with points title 'risk'\n"),
    "schedule": ("set logscale x\nplot '{csv}' using 1:5 with linespoints title 'r(n)'\n"),
}


class ConfigError(Exception):
    pass


def _load_config(path: str, command: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    schema_path = _SCHEMA_DIR / f"{command}.v1.json"
    with open(schema_path, "r", encoding="utf-8") as fh:
        schema = json.load(fh)
    import jsonschema

    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config does not match schema: {exc.message}") from exc
    return doc


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])


@contextlib.contextmanager
def _thread_cap(threads):
    if threads is None:
        yield
        return
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        yield
        return
    with threadpool_limits(limits=threads):
        yield


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="effdimlab",
        description="Experiment driver: approximation, covering, tails, "
                    "dimension estimation, and rate studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in sorted(RUNNERS):
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", required=True, help="output directory for CSV results")
        p.add_argument("--seed", type=int, default=None,
                       help="seed override (defaults to the config seed or 0)")
        p.add_argument("--threads", type=int, default=None,
                       help="cap for the numerical thread pools")
        p.add_argument("--emit-gnuplot", action="store_true",
                       help="write a companion gnuplot script next to the CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config, args.command)
        if args.out is None:
            raise ConfigError("missing output path")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with _thread_cap(args.threads):
            _, files = RUNNERS[args.command](cfg, seed)
        echo = dict(cfg)
        echo["seed"] = seed
        with open(out_dir / f"{args.command}_config.json", "w", encoding="utf-8") as fh:
            json.dump(echo, fh, indent=2, sort_keys=True)
            fh.write("\n")
        for suffix, (header, rows) in files.items():
            csv_path = out_dir / f"{args.command}{suffix}.csv"
            _write_csv(csv_path, header, rows)
        if args.emit_gnuplot:
            csv_name = f"{args.command}.csv"
            hint = _GNUPLOT_HINTS.get(
                args.command, "plot '{csv}' using 1:2 with points\n"
            )
            with open(out_dir / f"{args.command}.gp", "w", encoding="utf-8") as fh:
                fh.write("set datafile separator ','\n")
                fh.write(hint.format(csv=csv_name))
    except Exception as exc:  # runtime failures map to exit code 1
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
