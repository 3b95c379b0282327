"""Command line front door.

One executable exposes the theory tables, the equilibrium scan, agent
simulations, precision fitting, transcript export, and the live session
server. Every artifact-producing run drops a manifest next to its outputs
so a directory of CSVs is self-describing.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import random
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .behavior import estimate_precision, generate_choices, read_choices_csv, write_choices_csv
from .equilibrium import DEFAULT_SIMS, scan_equilibria, write_scan_csvs
from .game import GameParams
from .simlab import ScenarioConfig, block_rows, forecast_rows, run_scenario, write_scenario_csvs
from .tableio import write_csv
from .theory import UtilitySpec, theory_rows

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_AMBIGUOUS = 4

SEED_ENV = "EVIDENCELAB_SEED"
DEFAULT_FIT_PRECISION = 1.4


class CliError(Exception):
    """Failure with a chosen exit code; the message goes to stderr."""

    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def resolve_seed(value: int | None) -> int | None:
    """Explicit flag beats the environment; None means caller's default."""
    if value is not None:
        return value
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise CliError(EXIT_CONFIG, f"{SEED_ENV} must be an integer, got {raw!r}")


def write_manifest(
    out_dir: Path, command: str, config: dict, seed: int, outputs: list[Path]
) -> Path:
    digest = hashlib.sha256(
        json.dumps(config, sort_keys=True).encode()
    ).hexdigest()
    manifest = {
        "command": command,
        "config_digest": digest,
        "master_seed": seed,
        "versions": {"evidencelab": __version__, "python": platform.python_version()},
        "outputs": sorted(p.name for p in outputs),
    }
    path = out_dir / f"{command}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _ensure_out(raw: str | None) -> Path | None:
    if raw is None:
        return None
    path = Path(raw)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _params(cards: int, budget: int) -> GameParams:
    try:
        return GameParams(
            cards_per_period=cards,
            flips_per_block=budget,
            min_flips=min(5, cards),
            max_flips=min(15, cards),
        )
    except ValueError as err:
        raise CliError(EXIT_CONFIG, str(err))


def _utility(args) -> UtilitySpec:
    try:
        if args.utility == "risk-neutral":
            return UtilitySpec.risk_neutral()
        if args.utility == "cara":
            if args.alpha is None:
                raise CliError(EXIT_CONFIG, "cara utility needs --alpha")
            return UtilitySpec.cara(args.alpha)
        return UtilitySpec.prospect()
    except ValueError as err:
        raise CliError(EXIT_CONFIG, str(err))


def _print_rows(header: list[str], rows: list[dict]) -> None:
    print(",".join(header))
    for row in rows:
        print(",".join(str(row.get(column, "")) for column in header))


def cmd_theory(args) -> int:
    params = _params(args.M, args.N)
    utilities = () if args.utility is None else (_utility(args),)
    rows = theory_rows(params, utilities)
    header = list(rows[0].keys())
    _print_rows(header, rows)
    out = _ensure_out(args.out)
    if out is not None:
        path = out / "theory.csv"
        write_csv(path, header, rows)
        config = {"M": args.M, "N": args.N, "utility": args.utility, "alpha": args.alpha}
        write_manifest(out, "theory", config, 0, [path])
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    utility = _utility(args)
    seed = resolve_seed(args.seed) or 0
    try:
        scan = scan_equilibria(
            utility, sims=args.sims, seed=seed, threads=args.threads
        )
    except ValueError as err:
        raise CliError(EXIT_CONFIG, str(err))
    print(f"utility: {scan.utility_label}  sims: {scan.sims}  seed: {scan.seed}")
    for row in scan.rows:
        marker = "  AMBIGUOUS" if row.ambiguous else ""
        print(
            f"field {row.field_flips:2d}: best reply {row.best_flips:2d}"
            f" (separation {row.separation:.2f} se){marker}"
        )
    print("equilibrium set: {" + ", ".join(str(f) for f in scan.fixed_points) + "}")
    out = _ensure_out(args.out)
    if out is not None:
        paths = write_scan_csvs(scan, out)
        config = {"utility": args.utility, "alpha": args.alpha, "sims": args.sims}
        write_manifest(out, "equilibrium", config, seed, paths)
    if scan.ambiguous_rows:
        print(
            f"ambiguous best replies at fields {list(scan.ambiguous_rows)};"
            " raise --sims",
            file=sys.stderr,
        )
        return EXIT_AMBIGUOUS
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.config is None or args.out is None:
        raise CliError(EXIT_CONFIG, "simulate needs --config and --out")
    try:
        config = ScenarioConfig.from_json(args.config)
    except OSError as err:
        raise CliError(EXIT_IO, f"cannot read config: {err}")
    except (ValueError, KeyError, TypeError) as err:
        raise CliError(EXIT_CONFIG, f"bad scenario config: {err}")
    seed = resolve_seed(args.seed)
    if seed is not None:
        config = replace(config, seed=seed)
    logs = run_scenario(config, threads=args.threads)
    out = _ensure_out(args.out)
    paths = write_scenario_csvs(logs, out)
    config_digest_source = {
        "config": str(args.config),
        "seed": config.seed,
        "sessions": config.sessions,
        "treatments": [t.label for t in config.treatments],
    }
    write_manifest(out, "simulate", config_digest_source, config.seed, paths)
    print(
        f"simulated {len(logs)} sessions across {len(config.treatments)} treatments"
        f" -> {out}"
    )
    return EXIT_OK


def cmd_fit_lambda(args) -> int:
    if (args.choices is None) == (args.sims is None):
        raise CliError(EXIT_CONFIG, "fit-lambda needs exactly one of --choices or --sims")
    seed = resolve_seed(args.seed) or 0
    out = _ensure_out(args.out)
    outputs: list[Path] = []
    if args.choices is not None:
        try:
            choices = read_choices_csv(args.choices)
        except OSError as err:
            raise CliError(EXIT_IO, f"cannot read choices: {err}")
        except ValueError as err:
            raise CliError(EXIT_CONFIG, str(err))
    else:
        choices = generate_choices(args.precision, args.sims, random.Random(seed))
        if out is not None:
            path = out / "choices.csv"
            write_choices_csv(path, choices)
            outputs.append(path)
    try:
        estimate = estimate_precision(choices)
    except ValueError as err:
        raise CliError(EXIT_CONFIG, str(err))
    report = estimate.to_json()
    print(json.dumps(report, indent=2))
    if out is not None:
        path = out / "lambda_fit.json"
        path.write_text(json.dumps(report, indent=2) + "\n")
        outputs.append(path)
        config = {
            "choices": str(args.choices) if args.choices else None,
            "sims": args.sims,
            "precision": args.precision if args.choices is None else None,
        }
        write_manifest(out, "fit-lambda", config, seed, outputs)
    if estimate.at_boundary:
        print("estimate pinned to the search bracket; not trustworthy", file=sys.stderr)
        return EXIT_AMBIGUOUS
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    if args.ui is not None and not Path(args.ui).is_dir():
        raise CliError(EXIT_CONFIG, f"--ui is not a directory: {args.ui}")
    app = create_app(_ensure_out(args.out), ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_export(args) -> int:
    if args.log is None:
        raise CliError(EXIT_CONFIG, "export needs --log")
    log_path = Path(args.log)
    try:
        text = log_path.read_text()
    except OSError as err:
        raise CliError(EXIT_IO, f"cannot read log: {err}")
    events = []
    for index, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            events.append(json.loads(line))
        except json.JSONDecodeError as err:
            raise CliError(EXIT_CONFIG, f"bad JSON on line {index}: {err}")
    out = _ensure_out(args.out) or log_path.parent
    if events:
        from .service import SessionEngine

        try:
            engine = SessionEngine.replay(events)
        except ValueError as err:
            raise CliError(EXIT_CONFIG, f"cannot replay log: {err}")
        logs = engine.session_logs()
    else:
        logs = []
    from .simlab import BLOCK_COLUMNS, FORECAST_COLUMNS

    paths = []
    for name, header, rows in (
        ("forecasts.csv", FORECAST_COLUMNS, forecast_rows(logs)),
        ("blocks.csv", BLOCK_COLUMNS, block_rows(logs)),
    ):
        path = out / name
        write_csv(path, header, rows)
        paths.append(path)
    write_manifest(out, "export", {"log": str(log_path)}, 0, paths)
    print(f"exported {len(events)} events -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evidencelab",
        description="Card-majority forecasting game: theory, simulation, and lab service.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    theory = sub.add_parser("theory", help="probability and score table per flip count")
    theory.add_argument("--M", type=int, default=15, help="cards per period (odd)")
    theory.add_argument("--N", type=int, default=100, help="flip budget per block")
    theory.add_argument("--utility", choices=("risk-neutral", "cara", "prospect"))
    theory.add_argument("--alpha", type=float, help="absolute risk aversion for cara")
    theory.add_argument("--out", help="directory for theory.csv")
    theory.set_defaults(handler=cmd_theory)

    equilibrium = sub.add_parser("equilibrium", help="simulated best-reply scan")
    equilibrium.add_argument(
        "--utility", choices=("risk-neutral", "cara", "prospect"), default="risk-neutral"
    )
    equilibrium.add_argument("--alpha", type=float)
    equilibrium.add_argument("--sims", type=int, default=DEFAULT_SIMS)
    equilibrium.add_argument("--seed", type=int)
    equilibrium.add_argument("--threads", type=int, default=1)
    equilibrium.add_argument("--out", help="directory for scan CSVs")
    equilibrium.set_defaults(handler=cmd_equilibrium)

    simulate = sub.add_parser("simulate", help="run a scenario config over agent groups")
    simulate.add_argument("--config", help="scenario JSON")
    simulate.add_argument("--seed", type=int, help="override the config seed")
    simulate.add_argument("--threads", type=int, default=1)
    simulate.add_argument("--out", help="directory for scenario CSVs")
    simulate.set_defaults(handler=cmd_simulate)

    fit = sub.add_parser("fit-lambda", help="maximum-likelihood choice precision")
    fit.add_argument("--choices", help="choices CSV (columns n,r,g,chose_red)")
    fit.add_argument("--sims", type=int, help="synthesize this many choices instead")
    fit.add_argument(
        "--precision",
        type=float,
        default=DEFAULT_FIT_PRECISION,
        help="true precision when synthesizing",
    )
    fit.add_argument("--seed", type=int)
    fit.add_argument("--out", help="directory for the fit report")
    fit.set_defaults(handler=cmd_fit_lambda)

    serve = sub.add_parser("serve", help="start the live session server")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--out", help="directory for session event logs")
    serve.add_argument("--ui", help="static directory to serve at / (the built web client)")
    serve.set_defaults(handler=cmd_serve)

    export = sub.add_parser("export", help="CSV tables from a session event log")
    export.add_argument("--log", help="JSONL transcript")
    export.add_argument("--out", help="output directory (default: next to the log)")
    export.set_defaults(handler=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
