"""Valuation datasets and the append-only NFT lot ledger.

Datasets are JSON-lines files of {"lot_id", "valuations"} records with
i.i.d. U[0,1] valuations drawn from a Philox counter-based generator, so a
(seed, stream) pair reproduces the file byte for byte.

The ledger is a JSON-lines append-only log of two record types: "lot"
(mint) entries carrying a SHA-256 digest of the dataset line, and "sale"
entries referencing a previously minted lot. Re-minting an already-present
lot is a no-op unless its digest changed, which is reported as corruption.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "DatasetRecord",
    "LedgerError",
    "gen_dataset",
    "load_dataset",
    "read_ledger",
    "mint_lots",
    "record_sales",
]


@dataclass(frozen=True)
class DatasetRecord:
    lot_id: str
    valuations: np.ndarray  # (n, m) in [0, 1]


class LedgerError(RuntimeError):
    """Ledger corruption or reference violation."""


def _record_line(lot_id: str, valuations: np.ndarray) -> str:
    return json.dumps({"lot_id": lot_id, "valuations": valuations.tolist()},
                      separators=(",", ":"))


def gen_dataset(n: int, m: int, count: int, seed: int, path, stream: int = 0) -> Path:
    """Write `count` valuation records to a JSON-lines file.

    Draws come from Philox keyed (seed, stream); identical arguments
    reproduce identical bytes.
    """
    if count < 1:
        raise ValueError("dataset needs at least one record")
    path = Path(path)
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, stream], dtype=np.uint64)))
    values = rng.uniform(size=(count, n, m))
    lines = [_record_line(f"lot-{seed}-{stream}-{i:06d}", values[i]) for i in range(count)]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_dataset(path):
    """Read a dataset file into (lot_ids, (N, n, m) valuation array)."""
    path = Path(path)
    ids: list[str] = []
    rows: list[list] = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                ids.append(record["lot_id"])
                rows.append(record["valuations"])
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path}:{line_no}: malformed dataset record: {exc}") from exc
    if not ids:
        raise ValueError(f"{path}: dataset file is empty")
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate lot_id in dataset")
    values = np.asarray(rows, dtype=np.float64)
    if values.ndim != 3:
        raise ValueError(f"{path}: inconsistent valuation shapes")
    if values.min() < 0.0 or values.max() > 1.0:
        raise ValueError(f"{path}: valuations outside [0, 1]")
    return ids, values


def read_ledger(path):
    """Load the ledger as (lots dict by lot_id, sales list).

    Each lot dict gains a "sale" key (None until a sale record references
    it), mirroring the append-only file as a merged view.
    """
    path = Path(path)
    lots: dict[str, dict] = {}
    sales: list[dict] = []
    if not path.exists():
        return lots, sales
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            entry = json.loads(line)
            kind = entry.get("type")
            if kind == "lot":
                if entry["lot_id"] in lots:
                    raise LedgerError(f"{path}:{line_no}: duplicate lot {entry['lot_id']}")
                entry["sale"] = None
                lots[entry["lot_id"]] = entry
            elif kind == "sale":
                if entry["lot_id"] not in lots:
                    raise LedgerError(f"{path}:{line_no}: sale references unknown lot "
                                      f"{entry['lot_id']}")
                lots[entry["lot_id"]]["sale"] = entry
                sales.append(entry)
            else:
                raise LedgerError(f"{path}:{line_no}: unknown ledger record type {kind!r}")
    return lots, sales


def mint_lots(dataset_path, ledger_path, creator_id: str) -> int:
    """Append one "lot" entry per dataset record not yet in the ledger.

    Digests are SHA-256 over the dataset line bytes. A lot_id already
    present must carry the same digest; otherwise the ledger (or dataset)
    is corrupt. Returns the number of newly appended entries.
    """
    dataset_path = Path(dataset_path)
    ledger_path = Path(ledger_path)
    lots, _ = read_ledger(ledger_path)
    mint_epoch = len(lots)
    appended = 0
    ledger_path.parent.mkdir(parents=True, exist_ok=True)
    with dataset_path.open(encoding="utf-8") as fh, \
            ledger_path.open("a", encoding="utf-8") as ledger:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            lot_id = record["lot_id"]
            digest = hashlib.sha256(line.encode("utf-8")).hexdigest()
            existing = lots.get(lot_id)
            if existing is not None:
                if existing["content_digest"] != digest:
                    raise LedgerError(f"digest mismatch for minted lot {lot_id}")
                continue
            entry = {"type": "lot", "lot_id": lot_id, "creator_id": creator_id,
                     "mint_epoch": mint_epoch, "content_digest": digest}
            ledger.write(json.dumps(entry, separators=(",", ":")) + "\n")
            lots[lot_id] = {**entry, "sale": None}
            mint_epoch += 1
            appended += 1
    return appended


def record_sales(ledger_path, sales) -> int:
    """Append sale records {lot_id, winner, price, mechanism}; every lot_id
    must already be minted."""
    ledger_path = Path(ledger_path)
    lots, _ = read_ledger(ledger_path)
    with ledger_path.open("a", encoding="utf-8") as ledger:
        for sale in sales:
            if sale["lot_id"] not in lots:
                raise LedgerError(f"sale references unminted lot {sale['lot_id']}")
            entry = {"type": "sale", "lot_id": sale["lot_id"],
                     "winner": sale["winner"], "price": sale["price"],
                     "mechanism": sale["mechanism"]}
            ledger.write(json.dumps(entry, separators=(",", ":")) + "\n")
    return len(sales)
