"""Command-line front end: scripted experiments, the service, and reports.

Exit codes: 0 success, 2 usage, 3 bad configuration, 4 validation failed,
5 suggestion-provider failure, 6 I/O failure on logs or model files.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .errors import InputError, ParameterError, ProviderError, SpellerError
from .metrics import emit_report, record_from_log_events, report_from_record
from .session import (
    SessionConfig,
    default_config_yaml,
    load_config,
    read_log,
    run_calibration,
    run_session,
    run_validation,
)
from .swlda import load_model, save_model

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_VALIDATION = 4
EXIT_PROVIDER = 5
EXIT_IO = 6

REPORT_FORMATS = ("text", "csv", "json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="p300speller",
        description="Row/column flash speller: calibration, spelling runs, service, reports.",
    )
    sub = parser.add_subparsers(dest="command")

    def add_common(p):
        p.add_argument("--config", help="YAML session config (see `config print-default`)")
        p.add_argument("--seed", type=int, help="session seed override")
        p.add_argument("--log", help="JSONL event log path override")

    p_cal = sub.add_parser("calibrate", help="run the cued calibration phase and train a model")
    add_common(p_cal)
    p_cal.add_argument("--model-out", help="write the trained model to this JSON file")

    p_val = sub.add_parser("validate", help="run cued validation trials against a model")
    add_common(p_val)
    p_val.add_argument("--model", help="trained model JSON (calibrates first when omitted)")

    p_run = sub.add_parser("run", help="full session: calibrate, validate, then spell")
    add_common(p_run)
    p_run.add_argument("--mode", help="session mode override")
    p_run.add_argument("--provider", help="suggestion provider override (mock|oracle|remote)")
    p_run.add_argument(
        "--skip-validation",
        action="store_true",
        help="spell even when validation fails",
    )

    p_serve = sub.add_parser("serve", help="serve the live session over WebSocket")
    add_common(p_serve)
    p_serve.add_argument("--mode", help="session mode override")
    p_serve.add_argument("--provider", help="suggestion provider override")
    p_serve.add_argument("--port", type=int, default=8977)
    p_serve.add_argument("--static-dir", help="UI bundle directory served at /")

    p_rep = sub.add_parser("report", help="compute spelling metrics from session logs")
    p_rep.add_argument("--log", nargs="+", required=True, help="session JSONL log file(s)")
    p_rep.add_argument("--format", choices=REPORT_FORMATS, default="text")

    p_cfg = sub.add_parser("config", help="configuration helpers")
    p_cfg.add_argument("action", choices=["print-default"])
    return parser


def _build_config(args) -> SessionConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else SessionConfig()
    overrides = {}
    for field, attr in (
        ("seed", "seed"),
        ("log_path", "log"),
        ("mode", "mode"),
        ("provider", "provider"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[field] = value
    if "seed" in overrides and "subject" not in overrides:
        overrides["subject"] = dataclasses.replace(cfg.subject, seed=overrides["seed"])
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def cmd_calibrate(args) -> int:
    cfg = _config_or_raise(args)
    result = run_calibration(cfg)
    meta = result.model.metadata
    print(f"calibration: {result.training.n_rows} epochs "
          f"({int(result.training.labels.sum())} target)")
    print(f"model: {len(result.model.selected)} features selected "
          f"(stop: {meta.get('stop_reason', 'n/a')})")
    if args.model_out:
        try:
            save_model(result.model, args.model_out)
        except OSError as exc:
            print(f"cannot write model: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"model written to {args.model_out}")
    if cfg.log_path:
        print(f"log written to {cfg.log_path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _config_or_raise(args)
    if args.model:
        model = load_model(args.model)
    else:
        model = run_calibration(cfg).model
    result = run_validation(cfg, model)
    marks = ", ".join("ok" if ok else "miss" for ok in result.outcomes)
    print(f"validation trials: {marks}")
    if not result.passed:
        print("validation FAILED: no run of 3 consecutive correct selections")
        return EXIT_VALIDATION
    print(f"validation passed after {result.n_trials} trials")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config_or_raise(args)
    result = run_session(cfg, require_validation=not args.skip_validation)
    if not result.validation.passed:
        print("validation FAILED: no run of 3 consecutive correct selections")
        if result.online is None:
            return EXIT_VALIDATION
    report = report_from_record(result.online.record)
    print(emit_report([report], "text"))
    if result.online.truncated:
        print("note: session hit the selection cap before finishing")
    if cfg.log_path:
        print(f"log written to {cfg.log_path}")
    return EXIT_OK


def cmd_serve(args) -> int:
    cfg = _config_or_raise(args)
    from .service import serve

    serve(cfg, port=args.port, static_dir=args.static_dir)
    return EXIT_OK


def cmd_report(args) -> int:
    rows = []
    for path in args.log:
        events = read_log(path)
        record = record_from_log_events(events, label=Path(path).stem)
        rows.append(report_from_record(record))
    print(emit_report(rows, args.format))
    return EXIT_OK


def cmd_config(args) -> int:
    print(default_config_yaml(), end="")
    return EXIT_OK


class _ConfigError(Exception):
    pass


def _config_or_raise(args) -> SessionConfig:
    try:
        return _build_config(args)
    except (ParameterError, InputError) as exc:
        raise _ConfigError(str(exc)) from exc


_COMMANDS = {
    "calibrate": cmd_calibrate,
    "validate": cmd_validate,
    "run": cmd_run,
    "serve": cmd_serve,
    "report": cmd_report,
    "config": cmd_config,
}


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage()
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if not args.command:
        parser.print_usage()
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except _ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProviderError as exc:
        print(f"suggestion provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (InputError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ParameterError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SpellerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
