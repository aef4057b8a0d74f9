"""Trial result sink and serialisers for ScalingLab.

Collects ``TrialResult`` records from concurrent workers and writes them out
in a canonical order so files are byte-identical across re-runs regardless of
how many workers produced them.

Environment variables:
    RESULTS_STORE_PATH - Optional file path; when set each appended record is
                         also written as one line of newline-delimited JSON.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import threading
from datetime import datetime, timezone
from typing import Any, Iterable, Optional

from ..models.experiment import SCHEMA_VERSION, TrialResult
from .observability import get_logger

logger = get_logger("results")

# Canonical column order for results.csv
CSV_COLUMNS = [
    "n",
    "m",
    "trial_index",
    "seed",
    "throughput_bits",
    "distinct_event",
    "per_link_success_rate",
    "scheduled_fraction",
    "extra",
]


class ResultSink:
    """Thread-safe append-only store of trial results.

    Records may arrive in any order; :meth:`sorted_records` always returns them
    ordered by ``(n, trial_index)``.
    """

    def __init__(self, store_path: Optional[str] = None) -> None:
        self._lock = threading.Lock()
        self._records: list[TrialResult] = []
        if store_path is None:
            store_path = os.getenv("RESULTS_STORE_PATH", "").strip() or None
        self._store_path = store_path

    # ------------------------------------------------------------------
    # Write
    # ------------------------------------------------------------------

    def append(self, record: TrialResult) -> None:
        with self._lock:
            self._records.append(record)
        self._persist(record)

    def extend(self, records: Iterable[TrialResult]) -> None:
        for record in records:
            self.append(record)

    # ------------------------------------------------------------------
    # Read
    # ------------------------------------------------------------------

    def sorted_records(self) -> list[TrialResult]:
        with self._lock:
            records = list(self._records)
        return sorted(records, key=lambda rec: rec.sort_key)

    def for_n(self, n: int) -> list[TrialResult]:
        return [rec for rec in self.sorted_records() if rec.n == n]

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    # ------------------------------------------------------------------
    # Internal helpers
    # ------------------------------------------------------------------

    def _persist(self, record: TrialResult) -> None:
        if not self._store_path:
            return
        try:
            with open(self._store_path, "a", encoding="utf-8") as fh:
                fh.write(record.model_dump_json() + "\n")
        except OSError as exc:
            logger.warning("results.persist_failed path=%s error=%s", self._store_path, exc)


# ---------------------------------------------------------------------------
# Export helpers
# ---------------------------------------------------------------------------


def format_number(value: Any) -> str:
    """Full round-trip text for a CSV cell; empty for ``None``."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def _extra_cell(extra: dict[str, float]) -> str:
    if not extra:
        return ""
    return json.dumps({key: _json_number(extra[key]) for key in sorted(extra)}, separators=(",", ":"))


def _json_number(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def records_to_csv(records: Iterable[TrialResult]) -> str:
    """Serialise *records* as CSV with a header row, sorted by ``(n, trial_index)``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in sorted(records, key=lambda r: r.sort_key):
        row = rec.model_dump()
        row["extra"] = _extra_cell(rec.extra)
        writer.writerow(
            [row["extra"] if col == "extra" else format_number(row[col]) for col in CSV_COLUMNS]
        )
    return buf.getvalue()


def rows_to_csv(header: list[str], rows: Iterable[Iterable[Any]]) -> str:
    """Generic CSV writer used for curves, samples and genie tables."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(value) for value in row])
    return buf.getvalue()


def records_to_json(records: Iterable[TrialResult]) -> str:
    """Serialise *records* as a JSON array string."""
    ordered = sorted(records, key=lambda r: r.sort_key)
    return json.dumps([_json_number_tree(r.model_dump()) for r in ordered], indent=2, sort_keys=True)


def _json_number_tree(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: _json_number_tree(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_number_tree(item) for item in value]
    return _json_number(value)


def summary_to_json(payload: dict) -> str:
    """Versioned summary document; ``schema_version`` is added when absent."""
    document = {"schema_version": SCHEMA_VERSION}
    document.update(payload)
    return json.dumps(_json_number_tree(document), indent=2, sort_keys=True) + "\n"


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def write_text(path: str, text: str) -> None:
    """Write *text* with ``\\n`` line endings regardless of platform."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    logger.debug("results.written path=%s bytes=%d", path, len(text.encode("utf-8")))
