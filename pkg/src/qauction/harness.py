"""Experiment orchestration: configs, checkpoints, runs, audits, reports.

A run is fully determined by (config, seed): dataset bytes, metrics CSV
bytes, and checkpoint values all reproduce. Metrics CSVs therefore carry no
wallclock column; timing lives in the in-memory MetricsRow and the console
log only.

Baselines are exposed as pseudo-checkpoints ("spa", "myerson[:reserve]" or
a JSON file with such a variant) so `evaluate`, `regret_audit` and `report`
treat learned nets and classical mechanisms uniformly.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import auction, baselines, data
from .auction import (
    AuctionNet,
    MetricsRow,
    NetConfig,
    SearchConfig,
    evaluate_net,
    stream_rng,
)

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "CHECKPOINT_VERSION",
    "default_out_dir",
    "save_checkpoint",
    "load_checkpoint",
    "LoadedMechanism",
    "resolve_checkpoint",
    "train_run",
    "evaluate",
    "regret_audit",
    "emit_report",
]

CHECKPOINT_VERSION = "qauction-ckpt-1"
OUT_DIR_ENV = "QAUCTION_OUT_DIR"

DATA_STREAM_TRAIN = 0
DATA_STREAM_TEST = 1


class ConfigError(ValueError):
    """Invalid experiment configuration; message lists every bad field."""


@dataclass
class ExperimentConfig:
    """Everything a run needs; defaults reproduce the paper-scale setup
    (3 buyers, 3 items, 7000/3000 split)."""

    variant: str = "dla"
    n: int = 3
    m: int = 3
    train_count: int = 7000
    test_count: int = 3000
    seed: int = 42
    epochs: int = 30
    batch_size: int = 100
    lr: float | None = None
    lstm_size: int | None = None
    hidden_size: int | None = None
    qubits: int = 4
    layers: int = 6
    lambda_init: float = 5.0
    lambda_ramp_epochs: int = 5
    rho: float = 1.0
    misreport_steps: int = 20
    misreport_step_size: float = 0.1
    grid_step: float = 0.05

    def __post_init__(self):
        defaults = (NetConfig.dla_default() if self.variant == "dla"
                    else NetConfig.qdla_default() if self.variant == "qdla"
                    else None)
        if defaults is not None:
            if self.lr is None:
                self.lr = defaults.lr
            if self.lstm_size is None:
                self.lstm_size = defaults.lstm_size
            if self.hidden_size is None:
                self.hidden_size = defaults.hidden_size

    def validate(self) -> list[str]:
        """Every constraint violation, one message per bad field."""
        bad = []
        if self.variant not in ("dla", "qdla"):
            bad.append(f"variant: {self.variant!r} is not 'dla' or 'qdla'")
        for name in ("n", "m", "train_count", "test_count", "batch_size",
                     "lstm_size", "hidden_size", "misreport_steps",
                     "lambda_ramp_epochs"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                bad.append(f"{name}: must be a positive integer, got {value!r}")
        if not isinstance(self.epochs, int) or self.epochs < 0:
            bad.append(f"epochs: must be a non-negative integer, got {self.epochs!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 63:
            bad.append(f"seed: must be an integer in [0, 2^63), got {self.seed!r}")
        if self.variant == "qdla":
            for name in ("qubits", "layers"):
                value = getattr(self, name)
                if not isinstance(value, int) or value < 1:
                    bad.append(f"{name}: must be a positive integer, got {value!r}")
            if isinstance(self.qubits, int) and self.qubits > 12:
                bad.append(f"qubits: statevector simulation capped at 12, got {self.qubits}")
        for name in ("lr", "lambda_init", "misreport_step_size"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or value <= 0:
                bad.append(f"{name}: must be positive, got {value!r}")
        if not isinstance(self.rho, (int, float)) or self.rho <= 0:
            bad.append(f"rho: must be positive, got {self.rho!r}")
        try:
            if isinstance(self.m, int) and self.m >= 1:
                baselines.GridSpec(step=self.grid_step, dims=self.m)
        except ValueError as exc:
            bad.append(f"grid_step: {exc}")
        return bad

    def require_valid(self):
        bad = self.validate()
        if bad:
            raise ConfigError("invalid config:\n  " + "\n  ".join(bad))
        return self

    def net_config(self) -> NetConfig:
        qdla = self.variant == "qdla"
        return NetConfig(variant=self.variant, lstm_size=self.lstm_size,
                         hidden_size=self.hidden_size,
                         qubits=self.qubits if qdla else 0,
                         layers=self.layers if qdla else 0, lr=self.lr)

    def search(self) -> SearchConfig:
        return SearchConfig(steps=self.misreport_steps,
                            step_size=self.misreport_step_size,
                            grid_step=self.grid_step)

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        known = set(ExperimentConfig.__dataclass_fields__)
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError("invalid config:\n  "
                              + "\n  ".join(f"{k}: unknown field" for k in unknown))
        return ExperimentConfig(**raw)

    @staticmethod
    def from_json(path) -> "ExperimentConfig":
        with Path(path).open(encoding="utf-8") as fh:
            return ExperimentConfig.from_dict(json.load(fh))


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "out"))


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path, net: AuctionNet, config: ExperimentConfig,
                    epoch: int) -> Path:
    """Single JSON document: config echo, seed, epoch, row-major tensors."""
    doc = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "seed": config.seed,
        "epoch": epoch,
        "params": [
            {"name": name, "shape": list(value.shape),
             "values": value.reshape(-1).tolist()}
            for name, value in net.params.items()
        ],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8")
    return path


@dataclass
class LoadedMechanism:
    """Uniform handle over learned checkpoints and baseline pseudo-checkpoints."""

    kind: str  # "net", "spa" or "myerson"
    config: ExperimentConfig | None
    seed: int
    epoch: int
    net: AuctionNet | None = None
    reserve: float = 0.5

    @property
    def label(self) -> str:
        return self.kind if self.kind != "net" else self.config.variant

    def forward_batch(self, bids: np.ndarray):
        if self.kind == "net":
            return self.net.forward_batch(bids)
        if self.kind == "spa":
            return baselines.spa_batch(bids)
        return baselines.myerson_batch(bids, self.reserve)

    def regret(self, values: np.ndarray, search: SearchConfig):
        """Per-buyer regret: ascent for nets, grid fallback for baselines."""
        if self.kind == "net":
            return auction.empirical_regret(self.net, values, search,
                                            seed=self.seed).rgt
        return auction.empirical_regret(self.forward_batch, values, search).rgt


def load_checkpoint(path) -> LoadedMechanism:
    with Path(path).open(encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    raw_config = doc["config"]
    variant = raw_config.get("variant")
    if variant in ("spa", "myerson"):
        return LoadedMechanism(kind=variant, config=None, seed=doc.get("seed", 0),
                               epoch=doc.get("epoch", 0),
                               reserve=raw_config.get("reserve", 0.5))
    config = ExperimentConfig.from_dict(raw_config).require_valid()
    net = AuctionNet(config.n, config.m, config.net_config(),
                     stream_rng(config.seed, auction.STREAM_WEIGHTS))
    for entry in doc["params"]:
        name, shape = entry["name"], tuple(entry["shape"])
        if name not in net.params or net.params[name].shape != shape:
            raise ValueError(f"{path}: unexpected parameter {name} of shape {shape}")
        net.params[name] = np.asarray(entry["values"], dtype=np.float64).reshape(shape)
    return LoadedMechanism(kind="net", config=config, seed=doc["seed"],
                           epoch=doc["epoch"], net=net)


def resolve_checkpoint(spec: str, search_defaults: SearchConfig | None = None) -> LoadedMechanism:
    """A checkpoint path, or the literals "spa" / "myerson[:reserve]"."""
    if spec == "spa":
        return LoadedMechanism(kind="spa", config=None, seed=0, epoch=0)
    if spec == "myerson" or spec.startswith("myerson:"):
        reserve = float(spec.split(":", 1)[1]) if ":" in spec else 0.5
        return LoadedMechanism(kind="myerson", config=None, seed=0, epoch=0,
                               reserve=reserve)
    return load_checkpoint(spec)


# ---------------------------------------------------------------------------
# Metrics files
# ---------------------------------------------------------------------------


def metrics_header(n: int) -> list[str]:
    return (["epoch", "revenue_train", "revenue_test"]
            + [f"regret_b{i}" for i in range(n)]
            + ["ir_violations", "lambda_mean"])


def write_metrics_csv(path, rows: list[MetricsRow], n: int) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(metrics_header(n))
    for row in rows:
        writer.writerow([row.epoch, repr(row.revenue_train), repr(row.revenue_test)]
                        + [repr(r) for r in row.regret_test]
                        + [row.ir_violations, repr(row.lambda_mean)])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_metrics_csv(path):
    """Parse a metrics CSV back into {column: list of floats/ints}."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}:1: empty metrics CSV") from None
        columns = {name: [] for name in header}
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{line_no}: expected {len(header)} fields, "
                                 f"got {len(row)}")
            for name, cell in zip(header, row):
                try:
                    columns[name].append(float(cell))
                except ValueError:
                    raise ValueError(f"{path}:{line_no}: non-numeric value {cell!r} "
                                     f"in column {name}") from None
    return columns


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------


def _decode_sales(mech: LoadedMechanism, lot_ids, values: np.ndarray) -> list[dict]:
    """Argmax-decode allocations into per-item sales for the ledger.

    An item sells when the winning buyer's mass exceeds the unsold mass;
    the buyer's payment is split over its won items proportionally to
    allocated reported value.
    """
    alloc, pay = mech.forward_batch(values)
    n = values.shape[1]
    sales = []
    for k, lot_id in enumerate(lot_ids):
        z = alloc[k]
        winners = []
        prices = []
        value_share = z[:n, :] * values[k]
        totals = value_share.sum(axis=1)
        for j in range(values.shape[2]):
            w = int(z[:n, j].argmax())
            if z[w, j] > z[n, j]:
                winners.append(w)
                share = value_share[w, j] / totals[w] if totals[w] > 0 else 0.0
                prices.append(float(pay[k, w] * share))
            else:
                winners.append(None)
                prices.append(0.0)
        sales.append({"lot_id": lot_id, "winner": winners, "price": prices,
                      "mechanism": mech.label})
    return sales


def train_run(config: ExperimentConfig, out_dir=None, train_path=None,
              test_path=None, ledger_path=None, creator_id: str = "auctioneer",
              log=print):
    """Train per config, then write metrics CSV, checkpoint, and ledger sales.

    Datasets must already exist (see gen-data); the ledger is minted from
    the test dataset on first use so sales always reference minted lots.
    Returns (metrics path, checkpoint path, rows).
    """
    config.require_valid()
    out_dir = Path(out_dir) if out_dir is not None else default_out_dir()
    train_path = Path(train_path) if train_path else out_dir / "train.jsonl"
    test_path = Path(test_path) if test_path else out_dir / "test.jsonl"
    ledger_path = Path(ledger_path) if ledger_path else out_dir / "ledger.jsonl"

    _, train_values = data.load_dataset(train_path)
    test_ids, test_values = data.load_dataset(test_path)
    for name, values in (("train", train_values), ("test", test_values)):
        if values.shape[1:] != (config.n, config.m):
            raise ConfigError(f"invalid config:\n  {name} dataset shape "
                              f"{values.shape[1:]} does not match (n, m) = "
                              f"({config.n}, {config.m})")

    def log_row(row: MetricsRow):
        if log is not None:
            regs = " ".join(f"{r:.4f}" for r in row.regret_test)
            log(f"epoch {row.epoch:3d}  rev_train {row.revenue_train:.4f}  "
                f"rev_test {row.revenue_test:.4f}  regret [{regs}]  "
                f"ir {row.ir_violations}  lambda {row.lambda_mean:.2f}  "
                f"{row.wallclock_s:.1f}s")

    result = auction.train(train_values, test_values, config.net_config(),
                           epochs=config.epochs, seed=config.seed,
                           batch_size=config.batch_size, search=config.search(),
                           lam_init=config.lambda_init, rho=config.rho,
                           lam_ramp_epochs=config.lambda_ramp_epochs,
                           log=log_row)

    metrics_path = write_metrics_csv(out_dir / f"metrics_{config.variant}.csv",
                                     result.rows, config.n)
    ckpt_path = save_checkpoint(out_dir / f"checkpoint_{config.variant}.json",
                                result.net, config, epoch=config.epochs)

    data.mint_lots(test_path, ledger_path, creator_id)
    mech = LoadedMechanism(kind="net", config=config, seed=config.seed,
                           epoch=config.epochs, net=result.net)
    data.record_sales(ledger_path, _decode_sales(mech, test_ids, test_values))
    return metrics_path, ckpt_path, result.rows


def evaluate(checkpoint_spec: str, dataset_path, search: SearchConfig | None = None,
             batch_size: int | None = None, with_regret: bool = True):
    """Revenue, per-buyer ascent regret, and IR violations over a dataset.

    `with_regret=False` skips the misreport search (for a baseline it is an
    exhaustive grid per profile, far slower than the revenue pass itself).
    """
    mech = resolve_checkpoint(checkpoint_spec)
    _, values = data.load_dataset(dataset_path)
    n, m = values.shape[1], values.shape[2]
    if mech.kind == "net" and (mech.config.n, mech.config.m) != (n, m):
        raise ValueError(f"checkpoint is for (n, m) = ({mech.config.n}, "
                         f"{mech.config.m}) but dataset has ({n}, {m})")
    if mech.kind == "net" and with_regret:
        search = search or mech.config.search()
        batch = batch_size or mech.config.batch_size
        revenue, rgt, ir_count = evaluate_net(mech.net, values, search,
                                              mech.seed, batch)
    else:
        alloc, pay = mech.forward_batch(values)
        revenue = float(pay.sum(axis=1).mean())
        u = (alloc[:, :n, :] * values).sum(axis=2) - pay
        ir_count = int((u.min(axis=1) < -auction.IR_TOLERANCE).sum())
        rgt = (mech.regret(values, search or SearchConfig())
               if with_regret else np.full(n, np.nan))
    summary = {
        "mechanism": mech.label,
        "samples": int(values.shape[0]),
        "revenue": float(revenue),
        "ir_violations": int(ir_count),
    }
    if with_regret:
        summary["regret"] = [float(r) for r in rgt]
    return summary


def regret_audit(checkpoint_spec: str, dataset_path, grid_step: float = 0.05,
                 profiles: int = 100):
    """Compare ascent regret against the exhaustive grid oracle.

    Returns {"buyers": [{buyer, ascent, grid, gap}], "max_gap": float} over
    the first `profiles` dataset records.
    """
    mech = resolve_checkpoint(checkpoint_spec)
    _, values = data.load_dataset(dataset_path)
    values = values[:profiles]
    n, m = values.shape[1], values.shape[2]
    search = (mech.config.search() if mech.kind == "net" else SearchConfig())
    search = SearchConfig(steps=search.steps, step_size=search.step_size,
                          grid_step=grid_step)

    ascent = mech.regret(values, search)
    grid = baselines.GridSpec(step=grid_step, dims=m)
    grid_rgt = np.zeros(n)
    for b in range(values.shape[0]):
        grid_rgt += baselines.regret_grid_oracle(mech.forward_batch, values[b], grid)
    grid_rgt /= values.shape[0]

    buyers = [{"buyer": i, "ascent": float(ascent[i]), "grid": float(grid_rgt[i]),
               "gap": float(abs(ascent[i] - grid_rgt[i]))} for i in range(n)]
    return {"mechanism": mech.label, "profiles": int(values.shape[0]),
            "buyers": buyers, "max_gap": max(b["gap"] for b in buyers)}


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def emit_report(csv_paths, out_dir=None, spa_value: float | None = None,
                labels=None):
    """Revenue and regret vs epoch charts (SVG) plus pass-through chart CSVs.

    Each input CSV contributes one labelled curve; the SPA baseline, when
    given, appears as a horizontal line on the revenue chart and zero on
    the regret chart.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not csv_paths:
        raise ValueError("need at least one metrics CSV")
    out_dir = Path(out_dir) if out_dir is not None else default_out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    if labels is None:
        labels = [Path(p).stem.replace("metrics_", "") for p in csv_paths]

    runs = [(label, read_metrics_csv(path)) for label, path in zip(labels, csv_paths)]

    rev_csv = out_dir / "report_revenue.csv"
    reg_csv = out_dir / "report_regret.csv"
    with rev_csv.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label", "epoch", "revenue_test"])
        for label, cols in runs:
            for epoch, rev in zip(cols["epoch"], cols["revenue_test"]):
                writer.writerow([label, int(epoch), repr(rev)])
        if spa_value is not None:
            writer.writerow(["spa", "", repr(float(spa_value))])
    with reg_csv.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        regret_cols = [c for c in runs[0][1] if c.startswith("regret_b")]
        writer.writerow(["label", "epoch"] + regret_cols)
        for label, cols in runs:
            names = [c for c in cols if c.startswith("regret_b")]
            for k, epoch in enumerate(cols["epoch"]):
                writer.writerow([label, int(epoch)] + [repr(cols[c][k]) for c in names])

    rev_svg = out_dir / "report_revenue.svg"
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, cols in runs:
        ax.plot(cols["epoch"], cols["revenue_test"], marker="o", markersize=3,
                label=label)
    if spa_value is not None:
        ax.axhline(float(spa_value), color="gray", linestyle="--",
                   label=f"spa ({spa_value:.3f})")
    ax.set_xlabel("epoch")
    ax.set_ylabel("test revenue")
    ax.legend()
    fig.tight_layout()
    fig.savefig(rev_svg)
    plt.close(fig)

    reg_svg = out_dir / "report_regret.svg"
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, cols in runs:
        names = [c for c in cols if c.startswith("regret_b")]
        mean_regret = np.mean([cols[c] for c in names], axis=0)
        ax.plot(cols["epoch"], mean_regret, marker="o", markersize=3, label=label)
    if spa_value is not None:
        ax.axhline(0.0, color="gray", linestyle="--", label="spa (0)")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean test regret")
    ax.legend()
    fig.tight_layout()
    fig.savefig(reg_svg)
    plt.close(fig)

    return {"revenue_svg": rev_svg, "regret_svg": reg_svg,
            "revenue_csv": rev_csv, "regret_csv": reg_csv}
