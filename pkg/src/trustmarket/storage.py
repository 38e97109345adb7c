"""Private per-domain trust store and the shared append-only interaction ledger.

Both persist as UTF-8 JSON lines: a header line naming the schema and format
version, one line per record, and a trailer carrying the record count so a
truncated file is detected instead of half-loaded.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from dataclasses import dataclass, field
from typing import Any, Iterable

from .engine import (
    Evidence,
    FeedbackRecord,
    Recommendation,
    RecommenderLedgerEntry,
    TrustState,
    feedback_from_interactions,
)
from .errors import SchemaError, StorageError, ValidationError
from .ingestion import InteractionRecord, to_json_line

FORMAT_VERSION = 1
STORE_SCHEMA = "trustmarket.private_store"
LEDGER_SCHEMA = "trustmarket.shared_ledger"


@dataclass
class PrivateStore:
    """Non-public trust data owned by one domain."""

    domain_id: str
    trust_states: dict[tuple[str, str], TrustState] = field(default_factory=dict)
    recommender_ledger: dict[tuple[str, str], RecommenderLedgerEntry] = field(default_factory=dict)
    feedback_log: list[FeedbackRecord] = field(default_factory=list)

    def put_state(self, state: TrustState) -> None:
        if state.trustor_id != self.domain_id:
            raise ValidationError(
                f"store of {self.domain_id!r} cannot hold states for trustor {state.trustor_id!r}"
            )
        self.trust_states[(state.trustor_id, state.trustee_id)] = state

    def put_ledger_entry(self, trustor: str, entry: RecommenderLedgerEntry) -> None:
        self.recommender_ledger[(trustor, entry.recommender_id)] = entry

    def append_feedback(self, record: FeedbackRecord) -> None:
        self.feedback_log.append(record)


class SharedLedger:
    """Emulated data lake: append-only interaction records and recommendations.

    Appends go through a lock so there is a single logical writer; readers get
    tuples, which later appends cannot alter.
    """

    def __init__(
        self,
        records: Iterable[InteractionRecord] = (),
        recommendations: Iterable[Recommendation] = (),
    ) -> None:
        self._lock = threading.Lock()
        self._records: list[InteractionRecord] = []
        self._recs: list[Recommendation] = []
        for r in records:
            self.push_interaction(r)
        for r in recommendations:
            self.push_recommendation(r)

    def __len__(self) -> int:
        return len(self._records)

    def push_interaction(self, record: InteractionRecord) -> int:
        """Append one interaction and return its position (the acknowledgment)."""
        if not isinstance(record, InteractionRecord):
            raise ValidationError(f"expected an InteractionRecord, got {type(record).__name__}")
        with self._lock:
            self._records.append(record)
            return len(self._records) - 1

    def push_recommendation(self, rec: Recommendation) -> int:
        if not isinstance(rec, Recommendation):
            raise ValidationError(f"expected a Recommendation, got {type(rec).__name__}")
        with self._lock:
            self._recs.append(rec)
            return len(self._recs) - 1

    @property
    def log(self) -> tuple[InteractionRecord, ...]:
        """Records in append order."""
        with self._lock:
            return tuple(self._records)

    @property
    def records(self) -> tuple[InteractionRecord, ...]:
        """Records ordered by ``recorded_at``; ties keep append order."""
        return tuple(sorted(self.log, key=lambda r: r.recorded_at))

    @property
    def recommendations(self) -> tuple[Recommendation, ...]:
        with self._lock:
            return tuple(self._recs)

    def find_recommenders(self, target: str, exclude: str | None = None) -> list[str]:
        return find_recommenders(self, target, exclude)

    def save(self, path: str | os.PathLike) -> None:
        lines = [("interaction", r.to_dict()) for r in self.log]
        lines += [("recommendation", r.to_dict()) for r in self.recommendations]
        _write_records(path, LEDGER_SCHEMA, {}, lines)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SharedLedger":
        _, body = _read_records(path, LEDGER_SCHEMA)
        records, recs = [], []
        for lineno, kind, obj in body:
            try:
                if kind == "interaction":
                    records.append(InteractionRecord.from_dict(obj))
                elif kind == "recommendation":
                    recs.append(Recommendation.from_dict(obj))
                else:
                    raise SchemaError(f"unexpected record type {kind!r}")
            except (SchemaError, ValidationError, KeyError, TypeError, ValueError) as exc:
                raise StorageError(f"{os.fspath(path)}:{lineno}: {exc}") from exc
        return cls(records, recs)


def push_interaction(ledger: SharedLedger, record: InteractionRecord) -> int:
    return ledger.push_interaction(record)


def find_recommenders(ledger: SharedLedger, target: str, exclude: str | None = None) -> list[str]:
    """Distinct trustors that interacted with ``target``, most recent first."""
    latest: dict[str, tuple[float, int]] = {}
    for pos, r in enumerate(ledger.log):
        if r.trustee_id != target or r.trustor_id in (exclude, target):
            continue
        key = (r.recorded_at, pos)
        if r.trustor_id not in latest or key > latest[r.trustor_id]:
            latest[r.trustor_id] = key
    return sorted(latest, key=lambda t: latest[t], reverse=True)


def evidence_from(
    ledger: SharedLedger,
    store: PrivateStore | None = None,
    window_seconds: float = 300.0,
    current_window: int | None = None,
) -> Evidence:
    """Snapshot the shared ledger (plus a private store, if given) for the engine."""
    records = ledger.records
    feedback = feedback_from_interactions(records, window_seconds)
    ledger_entries: dict = {}
    if store is not None:
        feedback += store.feedback_log
        ledger_entries = dict(store.recommender_ledger)
    return Evidence(
        feedback=tuple(feedback),
        recommendations=ledger.recommendations,
        ledger=ledger_entries,
        interactions=records,
        current_window=current_window,
    )


# ---------------------------------------------------------------------------
# persistence

def _write_records(path, schema: str, meta: dict[str, Any], lines: list[tuple[str, dict]]) -> None:
    path = os.fspath(path)
    header = {"schema": schema, "version": FORMAT_VERSION, **meta}
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".jsonl")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for kind, obj in lines:
                fh.write(to_json_line({"type": kind, **obj}) + "\n")
            fh.write(json.dumps({"type": "end", "count": len(lines)}) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_records(path, schema: str) -> tuple[dict, list[tuple[int, str, dict]]]:
    name = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw_lines = fh.read().split("\n")
    except (OSError, UnicodeDecodeError) as exc:
        raise StorageError(f"cannot read {name}: {exc}") from exc
    if raw_lines and raw_lines[-1] == "":
        raw_lines.pop()
    else:
        raise StorageError(f"{name}: file does not end with a newline (truncated?)")

    parsed = []
    for lineno, line in enumerate(raw_lines, start=1):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StorageError(f"{name}:{lineno}: corrupt record ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise StorageError(f"{name}:{lineno}: record is not an object")
        parsed.append((lineno, obj))

    if not parsed:
        raise StorageError(f"{name}: empty file")
    _, header = parsed[0]
    if header.get("schema") != schema:
        raise StorageError(f"{name}:1: expected schema {schema!r}, got {header.get('schema')!r}")
    if header.get("version") != FORMAT_VERSION:
        raise StorageError(f"{name}:1: unsupported format version {header.get('version')!r}")
    lineno, trailer = parsed[-1]
    if len(parsed) < 2 or trailer.get("type") != "end":
        raise StorageError(f"{name}:{lineno}: missing end marker (truncated?)")
    body = []
    for lineno, obj in parsed[1:-1]:
        kind = obj.pop("type", None)
        if kind == "end":
            raise StorageError(f"{name}:{lineno}: unexpected end marker")
        body.append((lineno, kind, obj))
    if trailer.get("count") != len(body):
        raise StorageError(
            f"{name}:{lineno}: end marker counts {trailer.get('count')} records, found {len(body)}"
        )
    return header, body


def save_state(store: PrivateStore, location: str | os.PathLike) -> None:
    lines: list[tuple[str, dict]] = []
    for key in sorted(store.trust_states):
        lines.append(("trust_state", store.trust_states[key].to_dict()))
    for (trustor, _), entry in sorted(store.recommender_ledger.items()):
        lines.append(("ledger_entry", {"trustor_id": trustor, **entry.to_dict()}))
    for rec in store.feedback_log:
        lines.append(("feedback", rec.to_dict()))
    _write_records(location, STORE_SCHEMA, {"domain_id": store.domain_id}, lines)


def load_state(location: str | os.PathLike) -> PrivateStore:
    header, body = _read_records(location, STORE_SCHEMA)
    name = os.fspath(location)
    domain = header.get("domain_id")
    if not isinstance(domain, str):
        raise StorageError(f"{name}:1: header lacks domain_id")
    store = PrivateStore(domain)
    for lineno, kind, obj in body:
        try:
            if kind == "trust_state":
                store.put_state(TrustState.from_dict(obj))
            elif kind == "ledger_entry":
                trustor = obj.pop("trustor_id")
                store.put_ledger_entry(trustor, RecommenderLedgerEntry.from_dict(obj))
            elif kind == "feedback":
                store.append_feedback(FeedbackRecord.from_dict(obj))
            else:
                raise SchemaError(f"unexpected record type {kind!r}")
        except (SchemaError, ValidationError, KeyError, TypeError, ValueError) as exc:
            raise StorageError(f"{name}:{lineno}: {exc}") from exc
    return store

