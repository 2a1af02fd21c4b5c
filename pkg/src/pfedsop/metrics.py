"""Round-wise averages, the best-accuracy table and their CSV forms.

CSV numbers carry 6 decimals; in-memory values keep full precision.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Optional

from .errors import DataError, ProtocolError

METRICS_COLUMNS = ("round", "client_id", "train_loss", "test_accuracy", "theta", "beta")
SUMMARY_COLUMNS = ("round", "avg_train_loss", "avg_test_accuracy")
BEST_COLUMNS = ("client_id", "best_accuracy")
OVERALL = "__overall__"


@dataclass(frozen=True)
class ClientRecord:
    client_id: int
    train_loss: float
    test_accuracy: float
    theta: Optional[float] = None
    beta: Optional[float] = None


@dataclass
class RoundMetrics:
    round: int
    records: list
    avg_train_loss: float
    avg_test_accuracy: float

    @property
    def sampled_ids(self):
        return [r.client_id for r in self.records]


def _finite(name, value, client_id, round_index):
    if value is not None and not math.isfinite(value):
        raise DataError(f"round {round_index}, client {client_id}: {name} is {value}")


def record_round(round_index: int, records) -> RoundMetrics:
    """Average the participating clients' records for one round."""
    records = sorted(records, key=lambda r: r.client_id)
    if not records:
        raise ProtocolError(f"round {round_index} has no participating clients")
    for r in records:
        for name in ("train_loss", "test_accuracy", "theta", "beta"):
            _finite(name, getattr(r, name), r.client_id, round_index)
    n = len(records)
    return RoundMetrics(
        round_index,
        records,
        math.fsum(r.train_loss for r in records) / n,
        math.fsum(r.test_accuracy for r in records) / n,
    )


@dataclass
class BestAccuracyTable:
    """Highest test accuracy each client reached in rounds it took part in."""

    best: dict = field(default_factory=dict)

    def update(self, metrics: RoundMetrics) -> "BestAccuracyTable":
        for r in metrics.records:
            prev = self.best.get(r.client_id)
            if prev is None or r.test_accuracy > prev:
                self.best[r.client_id] = r.test_accuracy
        return self

    @property
    def overall(self) -> float:
        if not self.best:
            return float("nan")
        return math.fsum(self.best.values()) / len(self.best)


def update_best_table(table: BestAccuracyTable, metrics: RoundMetrics) -> BestAccuracyTable:
    return table.update(metrics)


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

def fmt(value) -> str:
    if value is None:
        return ""
    text = f"{value:.6f}"
    return "0.000000" if text == "-0.000000" else text


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def metrics_csv(history) -> str:
    return render_csv(METRICS_COLUMNS, [
        (m.round, r.client_id, fmt(r.train_loss), fmt(r.test_accuracy), fmt(r.theta), fmt(r.beta))
        for m in history for r in m.records
    ])


def summary_csv(history) -> str:
    return render_csv(SUMMARY_COLUMNS, [
        (m.round, fmt(m.avg_train_loss), fmt(m.avg_test_accuracy)) for m in history
    ])


def best_csv(table: BestAccuracyTable) -> str:
    rows = [(cid, fmt(acc)) for cid, acc in sorted(table.best.items())]
    rows.append((OVERALL, fmt(table.overall) if table.best else ""))
    return render_csv(BEST_COLUMNS, rows)


def _opt_float(text):
    return float(text) if text != "" else None


def read_metrics_csv(path_or_text) -> list:
    """Rebuild ``RoundMetrics`` from a metrics CSV (path or CSV text)."""
    if "\n" in str(path_or_text):
        text = str(path_or_text)
    else:
        with open(path_or_text, newline="") as fh:
            text = fh.read()
    rows = list(csv.DictReader(io.StringIO(text)))
    by_round = {}
    for row in rows:
        rec = ClientRecord(
            int(row["client_id"]), float(row["train_loss"]), float(row["test_accuracy"]),
            _opt_float(row["theta"]), _opt_float(row["beta"]),
        )
        by_round.setdefault(int(row["round"]), []).append(rec)
    return [record_round(t, recs) for t, recs in sorted(by_round.items())]


def write_files_atomically(directory, files: dict) -> None:
    """Write ``{name: text}`` under ``directory`` all-or-nothing.

    Every file goes to a temp file first; only when all temps exist are they
    renamed into place.  On failure the temps (and any file already renamed in
    this call) are removed.
    """
    os.makedirs(directory, exist_ok=True)
    temps, placed = {}, []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=directory)
            temps[name] = tmp
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
        for name, tmp in temps.items():
            final = os.path.join(directory, name)
            os.replace(tmp, final)
            placed.append(final)
    except BaseException:
        for tmp in temps.values():
            if os.path.exists(tmp):
                os.unlink(tmp)
        for final in placed:
            os.unlink(final)
        raise
