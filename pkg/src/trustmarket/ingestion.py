"""Parsers and normalizers for the four external information sources.

Offers, interaction records and SLA events arrive as UTF-8 JSON lines, one
object per line. Security monitoring data arrives as Zeek ASCII logs. Every
parser returns a :class:`ParseReport`: well-formed lines become records,
malformed lines become :class:`LineError` entries, and a bad line never
aborts the rest of the file.
"""

from __future__ import annotations

import io
import json
import math
import os
from collections import Counter
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import IO, Any, Callable, Iterable, Iterator, Mapping, Sequence, Union

from .errors import InputError, SchemaError, ValidationError, ZeekFormatError

UNKNOWN_STAKEHOLDER = "UNKNOWN"

Stream = Union[str, os.PathLike, IO[str], Iterable[str]]


class AssetType(str, Enum):
    """Marketplace asset categories; VNF and CNF are kept apart."""

    RAN = "RAN"
    SPECTRUM = "SPECTRUM"
    VNF = "VNF"
    CNF = "CNF"
    SLICE = "SLICE"
    NETWORK_SERVICE = "NETWORK_SERVICE"
    CLOUD = "CLOUD"
    EDGE = "EDGE"

    @classmethod
    def parse(cls, value: Any) -> "AssetType":
        if isinstance(value, cls):
            return value
        if not isinstance(value, str):
            raise SchemaError(f"asset_type must be a string, got {value!r}")
        key = value.strip().upper().replace("-", "_").replace(" ", "_")
        try:
            return cls[key]
        except KeyError:
            allowed = ", ".join(m.value for m in cls)
            raise SchemaError(
                f"unknown asset_type {value!r} (expected one of {allowed})"
            ) from None


class LogKind(str, Enum):
    CONN = "CONN"
    NOTICE = "NOTICE"
    WEIRD = "WEIRD"
    STATS = "STATS"


class SlaKind(str, Enum):
    VIOLATION = "VIOLATION"
    WARNING = "WARNING"


# Zeek connection states; anything else is normalized to UNKNOWN.
CONN_STATES = frozenset(
    {"S0", "S1", "SF", "REJ", "S2", "S3", "RSTO", "RSTR", "RSTOS0",
     "RSTRH", "SH", "SHR", "OTH"}
)


def _check_unit(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise ValidationError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class ProductOffer:
    offer_id: str
    provider_id: str
    asset_type: AssetType
    location: str
    price: float
    published_at: float
    withdrawn_at: float | None = None

    def __post_init__(self) -> None:
        if not self.offer_id or not self.provider_id:
            raise ValidationError("offer_id and provider_id must be non-empty")
        if not math.isfinite(self.price) or self.price < 0:
            raise ValidationError(f"price must be a non-negative number, got {self.price!r}")
        if self.withdrawn_at is not None and self.withdrawn_at < self.published_at:
            raise ValidationError(
                f"offer {self.offer_id}: withdrawn_at {self.withdrawn_at} precedes "
                f"published_at {self.published_at}"
            )

    def is_live(self, as_of: float) -> bool:
        """Published at or before ``as_of`` and not yet withdrawn (strictly)."""
        if self.published_at > as_of:
            return False
        return self.withdrawn_at is None or self.withdrawn_at > as_of

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["asset_type"] = self.asset_type.value
        return d

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "ProductOffer":
        _require(obj, ("offer_id", "provider_id", "asset_type", "location", "price", "published_at"))
        return cls(
            offer_id=_str(obj, "offer_id"),
            provider_id=_str(obj, "provider_id"),
            asset_type=AssetType.parse(obj["asset_type"]),
            location=_str(obj, "location"),
            price=_num(obj, "price"),
            published_at=_num(obj, "published_at"),
            withdrawn_at=_opt_num(obj, "withdrawn_at"),
        )


@dataclass(frozen=True)
class CatalogFeatures:
    provider_id: str
    offers_total: int
    offers_by_type: dict[AssetType, int]
    offers_by_location: dict[str, int]
    offers_withdrawn: int
    as_of: float


@dataclass(frozen=True)
class InteractionRecord:
    trustor_id: str
    trustee_id: str
    offer_id: str
    asset_type: AssetType
    start_date: float
    interaction_count: int
    satisfaction: float
    recorded_at: float

    def __post_init__(self) -> None:
        _check_unit("satisfaction", self.satisfaction)
        if isinstance(self.interaction_count, bool) or not isinstance(self.interaction_count, int):
            raise ValidationError("interaction_count must be an integer")
        if self.interaction_count < 1:
            raise ValidationError(f"interaction_count must be >= 1, got {self.interaction_count}")
        if self.trustor_id == self.trustee_id:
            raise ValidationError(f"trustor and trustee are both {self.trustor_id!r}")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["asset_type"] = self.asset_type.value
        return d

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "InteractionRecord":
        _require(obj, ("trustor_id", "trustee_id", "offer_id", "asset_type", "start_date",
                       "interaction_count", "satisfaction", "recorded_at"))
        count = obj["interaction_count"]
        if isinstance(count, float) and count.is_integer():
            count = int(count)
        if isinstance(count, bool) or not isinstance(count, int):
            raise SchemaError(f"interaction_count must be an integer, got {count!r}")
        return cls(
            trustor_id=_str(obj, "trustor_id"),
            trustee_id=_str(obj, "trustee_id"),
            offer_id=_str(obj, "offer_id"),
            asset_type=AssetType.parse(obj["asset_type"]),
            start_date=_num(obj, "start_date"),
            interaction_count=count,
            satisfaction=_num(obj, "satisfaction"),
            recorded_at=_num(obj, "recorded_at"),
        )


@dataclass(frozen=True)
class SecurityLogRecord:
    """One Zeek log line attributed to stakeholders.

    Only the payload fields belonging to ``log_kind`` are meaningful; the rest
    keep their defaults. ``unmapped`` flags records where an endpoint address
    was missing from the address map and fell back to ``UNKNOWN``.
    """

    log_kind: LogKind
    timestamp: float
    originator_id: str = UNKNOWN_STAKEHOLDER
    responder_id: str = UNKNOWN_STAKEHOLDER
    unmapped: bool = False
    conn_state: str | None = None
    orig_bytes: int = 0
    resp_bytes: int = 0
    orig_pkts: int = 0
    resp_pkts: int = 0
    notice_type: str | None = None
    severity: float = 0.0
    weird_name: str | None = None
    packets_received: int = 0
    packets_dropped: int = 0

    def __post_init__(self) -> None:
        if self.packets_dropped > self.packets_received:
            raise ValidationError(
                f"packets_dropped {self.packets_dropped} exceeds "
                f"packets_received {self.packets_received}"
            )
        _check_unit("severity", self.severity)


@dataclass(frozen=True)
class SlaEvent:
    provider_id: str
    timestamp: float
    kind: SlaKind

    def __post_init__(self) -> None:
        if self.timestamp < 0:
            raise ValidationError(f"timestamp must be >= 0, got {self.timestamp}")

    def to_dict(self) -> dict[str, Any]:
        return {"provider_id": self.provider_id, "timestamp": self.timestamp,
                "kind": self.kind.value}

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "SlaEvent":
        _require(obj, ("provider_id", "timestamp", "kind"))
        raw = obj["kind"]
        try:
            kind = SlaKind(str(raw).upper())
        except ValueError:
            raise SchemaError(f"unknown SLA event kind {raw!r}") from None
        return cls(provider_id=_str(obj, "provider_id"), timestamp=_num(obj, "timestamp"), kind=kind)


@dataclass(frozen=True)
class LineError:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass
class ParseReport:
    records: list = field(default_factory=list)
    errors: list[LineError] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


# ---------------------------------------------------------------------------
# field helpers

def _require(obj: Mapping[str, Any], names: Sequence[str]) -> None:
    missing = [n for n in names if n not in obj]
    if missing:
        raise SchemaError(f"missing field(s): {', '.join(missing)}")


def _str(obj: Mapping[str, Any], name: str) -> str:
    value = obj[name]
    if not isinstance(value, str):
        raise SchemaError(f"{name} must be a string, got {value!r}")
    return value


def _num(obj: Mapping[str, Any], name: str) -> float:
    value = obj[name]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{name} must be a number, got {value!r}")
    return float(value)


def _opt_num(obj: Mapping[str, Any], name: str) -> float | None:
    if obj.get(name) is None:
        return None
    return _num(obj, name)


def _open_lines(stream: Stream) -> Iterator[str]:
    if isinstance(stream, (str, os.PathLike)):
        try:
            with open(stream, encoding="utf-8") as fh:
                text = fh.read()
        except (OSError, UnicodeDecodeError) as exc:
            raise InputError(f"cannot read {os.fspath(stream)}: {exc}") from exc
        return iter(io.StringIO(text))
    try:
        lines = list(stream)
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read stream: {exc}") from exc
    return iter(lines)


def _parse_jsonl(stream: Stream, build: Callable[[Mapping[str, Any]], Any]) -> ParseReport:
    report = ParseReport()
    for lineno, raw in enumerate(_open_lines(stream), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            report.errors.append(LineError(lineno, f"invalid JSON: {exc.msg}"))
            continue
        if not isinstance(obj, dict):
            report.errors.append(LineError(lineno, "record must be a JSON object"))
            continue
        try:
            report.records.append(build(obj))
        except (SchemaError, ValidationError) as exc:
            report.errors.append(LineError(lineno, str(exc)))
    return report


def to_json_line(obj: Any) -> str:
    """Serialize a record (anything with ``to_dict``) as one JSON line."""
    data = obj.to_dict() if hasattr(obj, "to_dict") else obj
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# catalog, interactions, SLA events

def parse_catalog(stream: Stream) -> ParseReport:
    """Parse product offers from JSON lines."""
    return _parse_jsonl(stream, ProductOffer.from_dict)


def parse_interactions(stream: Stream) -> ParseReport:
    return _parse_jsonl(stream, InteractionRecord.from_dict)


def ingest_sla_events(stream: Stream) -> ParseReport:
    """Parse SLA events; ``records`` come back sorted by timestamp (stable)."""
    report = _parse_jsonl(stream, SlaEvent.from_dict)
    report.records.sort(key=lambda e: e.timestamp)
    return report


def sla_counts(events: Iterable[SlaEvent], kind: SlaKind | None = None) -> Counter:
    """Number of events per provider, optionally restricted to one kind."""
    return Counter(e.provider_id for e in events if kind is None or e.kind is kind)


def derive_catalog_features(offers: Iterable[ProductOffer], as_of: float) -> dict[str, CatalogFeatures]:
    """Per-provider offer statistics at time ``as_of``.

    Live offers are counted by type and location. Offers withdrawn at or
    before ``as_of`` go to ``offers_withdrawn``; offers not yet published are
    ignored apart from registering their provider.
    """
    by_type: dict[str, Counter] = {}
    by_loc: dict[str, Counter] = {}
    withdrawn: Counter = Counter()
    for offer in offers:
        pid = offer.provider_id
        by_type.setdefault(pid, Counter())
        by_loc.setdefault(pid, Counter())
        if offer.is_live(as_of):
            by_type[pid][offer.asset_type] += 1
            by_loc[pid][offer.location] += 1
        elif offer.withdrawn_at is not None and offer.withdrawn_at <= as_of:
            withdrawn[pid] += 1

    features = {}
    for pid in sorted(by_type):
        types = {t: by_type[pid][t] for t in AssetType if by_type[pid][t]}
        locs = {loc: by_loc[pid][loc] for loc in sorted(by_loc[pid])}
        features[pid] = CatalogFeatures(
            provider_id=pid,
            offers_total=sum(types.values()),
            offers_by_type=types,
            offers_by_location=locs,
            offers_withdrawn=withdrawn[pid],
            as_of=as_of,
        )
    return features


# ---------------------------------------------------------------------------
# Zeek ASCII logs

ZEEK_REQUIRED = {
    LogKind.CONN: ("ts", "id.orig_h", "id.resp_h", "conn_state"),
    LogKind.NOTICE: ("ts", "src", "note"),
    LogKind.WEIRD: ("ts", "id.orig_h", "name"),
    LogKind.STATS: ("ts", "pkts_proc", "pkts_dropped"),
}

ZEEK_PATHS = {
    LogKind.CONN: "conn",
    LogKind.NOTICE: "notice",
    LogKind.WEIRD: "weird",
    LogKind.STATS: "stats",
}


class _Unset(Exception):
    pass


def _decode_separator(text: str) -> str:
    if text.startswith("\\x") and len(text) == 4:
        return chr(int(text[2:], 16))
    return text


def parse_zeek_log(
    stream: Stream,
    kind: LogKind | str,
    address_map: Mapping[str, str] | None = None,
    severity_weights: Mapping[str, float] | None = None,
    default_severity: float = 1.0,
) -> ParseReport:
    """Parse a Zeek ASCII log of the given kind into :class:`SecurityLogRecord`.

    Columns are located through the ``#fields`` header. Addresses absent from
    ``address_map`` are attributed to ``UNKNOWN`` and the record is flagged.
    Raises :class:`ZeekFormatError` when the header is missing or lacks a
    column required for ``kind``.
    """
    kind = LogKind(kind.upper() if isinstance(kind, str) else kind)
    address_map = address_map or {}
    severity_weights = severity_weights or {}
    report = ParseReport()
    sep = "\t"
    unset = "-"
    index: dict[str, int] | None = None
    n_cols = 0

    for lineno, raw in enumerate(_open_lines(stream), start=1):
        line = raw.rstrip("\r\n")
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith("#separator"):
                sep = _decode_separator(line.split(" ", 1)[1].strip())
                continue
            parts = line.split(sep)
            directive = parts[0]
            if directive == "#unset_field" and len(parts) > 1:
                unset = parts[1]
            elif directive == "#fields":
                columns = parts[1:]
                missing = [c for c in ZEEK_REQUIRED[kind] if c not in columns]
                if missing:
                    raise ZeekFormatError(
                        f"{kind.value} log is missing required field(s): {', '.join(missing)}"
                    )
                index = {name: i for i, name in enumerate(columns)}
                n_cols = len(columns)
            continue
        if index is None:
            raise ZeekFormatError(f"line {lineno}: data before #fields header")

        values = line.split(sep)
        if len(values) != n_cols:
            report.errors.append(
                LineError(lineno, f"expected {n_cols} columns, found {len(values)}")
            )
            continue

        def get(name: str) -> str:
            pos = index.get(name)
            if pos is None or values[pos] == unset:
                raise _Unset(name)
            return values[pos]

        def opt(name: str) -> str | None:
            try:
                return get(name)
            except _Unset:
                return None

        def count(name: str) -> int:
            text = opt(name)
            return 0 if text is None else int(text)

        def who(name: str) -> tuple[str, bool]:
            addr = opt(name)
            if addr is not None and addr in address_map:
                return address_map[addr], False
            return UNKNOWN_STAKEHOLDER, True

        try:
            ts = float(get("ts"))
            if not math.isfinite(ts):
                raise ValueError("non-finite timestamp")
            if kind is LogKind.CONN:
                orig, f1 = who("id.orig_h")
                resp, f2 = who("id.resp_h")
                state = get("conn_state")
                record = SecurityLogRecord(
                    LogKind.CONN, ts, orig, resp, f1 or f2,
                    conn_state=state if state in CONN_STATES else "UNKNOWN",
                    orig_bytes=count("orig_bytes"), resp_bytes=count("resp_bytes"),
                    orig_pkts=count("orig_pkts"), resp_pkts=count("resp_pkts"),
                )
            elif kind is LogKind.NOTICE:
                orig, f1 = who("src")
                resp, _ = who("dst")
                note = get("note")
                weight = float(severity_weights.get(note, default_severity))
                record = SecurityLogRecord(
                    LogKind.NOTICE, ts, orig, resp, f1, notice_type=note, severity=weight
                )
            elif kind is LogKind.WEIRD:
                orig, f1 = who("id.orig_h")
                resp, _ = who("id.resp_h")
                record = SecurityLogRecord(
                    LogKind.WEIRD, ts, orig, resp, f1, weird_name=get("name")
                )
            else:
                peer, flagged = who("peer")
                record = SecurityLogRecord(
                    LogKind.STATS, ts, peer, UNKNOWN_STAKEHOLDER, flagged,
                    packets_received=int(get("pkts_proc")),
                    packets_dropped=int(get("pkts_dropped")),
                )
        except _Unset as exc:
            report.errors.append(LineError(lineno, f"required field {exc.args[0]} is unset"))
            continue
        except (ValueError, ValidationError) as exc:
            report.errors.append(LineError(lineno, str(exc)))
            continue
        report.records.append(record)

    if index is None:
        raise ZeekFormatError("no #fields header found")
    return report


def write_zeek_log(
    out: IO[str],
    kind: LogKind,
    columns: Sequence[str],
    rows: Iterable[Mapping[str, Any]],
) -> None:
    """Write rows as a Zeek ASCII log; missing or ``None`` values become ``-``."""
    out.write("#separator \\x09\n")
    out.write("#set_separator\t,\n")
    out.write("#empty_field\t(empty)\n")
    out.write("#unset_field\t-\n")
    out.write(f"#path\t{ZEEK_PATHS[kind]}\n")
    out.write("#fields\t" + "\t".join(columns) + "\n")
    for row in rows:
        cells = []
        for col in columns:
            value = row.get(col)
            if value is None:
                cells.append("-")
            elif isinstance(value, float):
                cells.append(f"{value:.6f}")
            else:
                cells.append(str(value))
        out.write("\t".join(cells) + "\n")
