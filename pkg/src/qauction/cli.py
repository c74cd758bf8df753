"""Command-line interface.

Subcommands: gen-data, mint, train, eval, regret-audit, report. Experiment
flags mirror ExperimentConfig fields; --config points at a JSON file and
explicit flags override it. Exit codes: 0 success, 2 validation failure,
3 runtime/numeric failure. QAUCTION_OUT_DIR overrides the default output
directory.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import data
from .auction import SearchConfig, TrainingDiverged
from .data import LedgerError
from .harness import (
    DATA_STREAM_TEST,
    DATA_STREAM_TRAIN,
    ConfigError,
    ExperimentConfig,
    default_out_dir,
    emit_report,
    evaluate,
    regret_audit,
    train_run,
)

_CONFIG_FLAGS = [
    ("variant", str), ("n", int), ("m", int), ("train_count", int),
    ("test_count", int), ("seed", int), ("epochs", int), ("batch_size", int),
    ("lr", float), ("lstm_size", int), ("hidden_size", int), ("qubits", int),
    ("layers", int), ("lambda_init", float), ("lambda_ramp_epochs", int),
    ("rho", float),
    ("misreport_steps", int), ("misreport_step_size", float), ("grid_step", float),
]


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", metavar="PATH", help="JSON config file; flags override it")
    for name, kind in _CONFIG_FLAGS:
        parser.add_argument("--" + name.replace("_", "-"), type=kind, default=None,
                            dest=name)


def _build_config(args) -> ExperimentConfig:
    raw = {}
    if args.config:
        with Path(args.config).open(encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("invalid config:\n  config file must hold a JSON object")
    for name, _ in _CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            raw[name] = value
    return ExperimentConfig.from_dict(raw).require_valid()


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qauction",
                                     description="Learned NFT auctions: train, audit, report.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a valuation dataset (JSON lines)")
    _add_config_flags(p)
    p.add_argument("--role", choices=["train", "test"], default="train",
                   help="picks the RNG stream and default count/path")
    p.add_argument("--count", type=int, default=None, help="override record count")
    p.add_argument("--out", metavar="PATH", default=None)
    p.add_argument("--out-dir", metavar="DIR", default=None)

    p = sub.add_parser("mint", help="append dataset lots to the ledger")
    p.add_argument("--dataset", required=True)
    p.add_argument("--ledger", default=None)
    p.add_argument("--creator", default="auctioneer")
    p.add_argument("--out-dir", metavar="DIR", default=None)

    p = sub.add_parser("train", help="train a mechanism and write metrics/checkpoint")
    _add_config_flags(p)
    p.add_argument("--out-dir", metavar="DIR", default=None)
    p.add_argument("--train-data", metavar="PATH", default=None)
    p.add_argument("--test-data", metavar="PATH", default=None)
    p.add_argument("--ledger", metavar="PATH", default=None)
    p.add_argument("--creator", default="auctioneer")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("eval", help="score a checkpoint (or spa / myerson[:reserve])")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--misreport-steps", type=int, default=None)
    p.add_argument("--misreport-step-size", type=float, default=None)
    p.add_argument("--grid-step", type=float, default=None)
    p.add_argument("--no-regret", action="store_true",
                   help="skip the misreport search, report revenue/IR only")

    p = sub.add_parser("regret-audit", help="ascent vs grid-oracle regret comparison")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--grid-step", type=float, default=0.05)
    p.add_argument("--profiles", type=int, default=100)

    p = sub.add_parser("report", help="emit revenue/regret charts from metrics CSVs")
    p.add_argument("csvs", nargs="+", metavar="CSV")
    p.add_argument("--out-dir", metavar="DIR", default=None)
    p.add_argument("--spa-value", type=float, default=None,
                   help="measured SPA revenue for the horizontal baseline")
    p.add_argument("--labels", default=None, help="comma-separated curve labels")
    return parser


def _out_dir(args) -> Path:
    return Path(args.out_dir) if getattr(args, "out_dir", None) else default_out_dir()


def _cmd_gen_data(args) -> int:
    config = _build_config(args)
    stream = DATA_STREAM_TRAIN if args.role == "train" else DATA_STREAM_TEST
    count = args.count if args.count is not None else (
        config.train_count if args.role == "train" else config.test_count)
    out = Path(args.out) if args.out else _out_dir(args) / f"{args.role}.jsonl"
    path = data.gen_dataset(config.n, config.m, count, config.seed, out, stream=stream)
    print(f"wrote {count} records to {path}")
    return 0


def _cmd_mint(args) -> int:
    ledger = Path(args.ledger) if args.ledger else _out_dir(args) / "ledger.jsonl"
    appended = data.mint_lots(args.dataset, ledger, args.creator)
    print(f"minted {appended} new lots into {ledger}")
    return 0


def _cmd_train(args) -> int:
    config = _build_config(args)
    out_dir = _out_dir(args)
    log = None if args.quiet else print
    metrics, ckpt, rows = train_run(config, out_dir=out_dir,
                                    train_path=args.train_data,
                                    test_path=args.test_data,
                                    ledger_path=args.ledger,
                                    creator_id=args.creator, log=log)
    print(f"metrics: {metrics}")
    print(f"checkpoint: {ckpt}")
    if rows:
        final = rows[-1]
        print(f"final test revenue {final.revenue_test:.4f}, "
              f"max regret {max(final.regret_test):.4f}")
    return 0


def _cmd_eval(args) -> int:
    search = None
    if any(v is not None for v in (args.misreport_steps, args.misreport_step_size,
                                   args.grid_step)):
        base = SearchConfig()
        search = SearchConfig(
            steps=args.misreport_steps or base.steps,
            step_size=args.misreport_step_size or base.step_size,
            grid_step=args.grid_step or base.grid_step)
    summary = evaluate(args.checkpoint, args.dataset, search=search,
                       with_regret=not args.no_regret)
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_regret_audit(args) -> int:
    report = regret_audit(args.checkpoint, args.dataset,
                          grid_step=args.grid_step, profiles=args.profiles)
    print(f"mechanism: {report['mechanism']}  profiles: {report['profiles']}")
    print(f"{'buyer':>5}  {'ascent':>10}  {'grid':>10}  {'gap':>10}")
    for row in report["buyers"]:
        print(f"{row['buyer']:>5}  {row['ascent']:>10.6f}  {row['grid']:>10.6f}  "
              f"{row['gap']:>10.6f}")
    print(f"max discrepancy: {report['max_gap']:.6f}")
    return 0


def _cmd_report(args) -> int:
    labels = args.labels.split(",") if args.labels else None
    if labels is not None and len(labels) != len(args.csvs):
        raise ConfigError("invalid config:\n  labels: need one label per CSV")
    outputs = emit_report(args.csvs, out_dir=_out_dir(args),
                          spa_value=args.spa_value, labels=labels)
    for name, path in outputs.items():
        print(f"{name}: {path}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "mint": _cmd_mint,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "regret-audit": _cmd_regret_audit,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TrainingDiverged, FloatingPointError, LedgerError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
