"""Reward/punishment updates driven by security monitoring windows.

Each window's Zeek records are folded into a :class:`WindowLogSummary`, scored
into a reward/punishment value ``rp`` in [0, 1], and the previous trust score
moves by at most 0.05 toward the side ``rp`` falls on::

    rp >= 0.5:  new = old + (rp - 0.5) * (1 - old) / 10
    rp <  0.5:  new = old - (0.5 - rp) * (1 - old) / 10

Both branches carry ``(1 - old)``, so a score of exactly 1.0 never moves.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

from .engine import TrustState
from .errors import ContractError, ValidationError
from .ingestion import LogKind, SecurityLogRecord, UNKNOWN_STAKEHOLDER, _check_unit


@dataclass(frozen=True)
class RpWeights:
    w_conn: float = 0.4
    w_notice: float = 0.3
    w_weird: float = 0.2
    w_stat: float = 0.1

    def __post_init__(self) -> None:
        for name in ("w_conn", "w_notice", "w_weird", "w_stat"):
            _check_unit(name, getattr(self, name))
        total = self.w_conn + self.w_notice + self.w_weird + self.w_stat
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"RP weights must sum to 1, got {total!r}")


@dataclass(frozen=True)
class UpdateConfig:
    window_seconds: float = 300.0
    notice_cap: float = 5.0
    weird_cap: int = 10
    weights: RpWeights = field(default_factory=RpWeights)
    success_states: frozenset[str] = frozenset({"SF"})

    def __post_init__(self) -> None:
        if not self.window_seconds > 0:
            raise ValidationError("window_seconds must be positive")
        if not self.notice_cap > 0 or not self.weird_cap > 0:
            raise ValidationError("notice_cap and weird_cap must be positive")

    def window_of(self, timestamp: float) -> int:
        return int(math.floor(timestamp / self.window_seconds))

    def window_span(self, window_index: int) -> tuple[float, float]:
        return window_index * self.window_seconds, (window_index + 1) * self.window_seconds


@dataclass(frozen=True)
class WindowLogSummary:
    trustor_id: str
    trustee_id: str
    window_index: int
    conn_total: int = 0
    conn_success: int = 0
    notice_weighted: float = 0.0
    weird_count: int = 0
    packets_received: int = 0
    packets_dropped: int = 0

    def __post_init__(self) -> None:
        if self.conn_success > self.conn_total:
            raise ValidationError("conn_success exceeds conn_total")
        if self.packets_dropped > self.packets_received:
            raise ValidationError("packets_dropped exceeds packets_received")
        if self.notice_weighted < 0 or self.weird_count < 0:
            raise ValidationError("event tallies must be non-negative")


@dataclass(frozen=True)
class UpdateAudit:
    window_index: int
    trustor_id: str
    trustee_id: str
    rp: float
    old_score: float
    new_score: float


def _involves(record: SecurityLogRecord, pair: set[str]) -> bool:
    return record.originator_id in pair or record.responder_id in pair


def summarize_window(
    records: Iterable[SecurityLogRecord],
    trustor: str,
    trustee: str,
    window_index: int,
    config: UpdateConfig,
) -> WindowLogSummary:
    """Tally one window of monitoring records for the trustor/trustee pair.

    CONN records count when both endpoints are the pair. NOTICE and WEIRD
    records count when either endpoint is a party to the relationship, and
    unattributed ones count as well because the sensor only watches this
    relationship's traffic. STATS records are sensor-wide and always count.
    """
    start, end = config.window_span(window_index)
    pair = {trustor, trustee}
    watched = pair | {UNKNOWN_STAKEHOLDER}
    conn_total = conn_success = weird = received = dropped = 0
    notice = 0.0
    for r in records:
        if not start <= r.timestamp < end:
            raise ContractError(
                f"record at ts={r.timestamp} lies outside window {window_index} [{start}, {end})"
            )
        if r.log_kind is LogKind.CONN:
            if {r.originator_id, r.responder_id} == pair:
                conn_total += 1
                conn_success += r.conn_state in config.success_states
        elif r.log_kind is LogKind.NOTICE:
            if _involves(r, watched):
                notice += r.severity
        elif r.log_kind is LogKind.WEIRD:
            if _involves(r, watched):
                weird += 1
        else:
            received += r.packets_received
            dropped += r.packets_dropped
    return WindowLogSummary(
        trustor, trustee, window_index,
        conn_total=conn_total, conn_success=conn_success, notice_weighted=notice,
        weird_count=weird, packets_received=received, packets_dropped=dropped,
    )


def dimension_scores(summary: WindowLogSummary, config: UpdateConfig) -> tuple[float, float, float, float]:
    """Per-log scores (conn, notice, weird, stat), each in [0, 1]."""
    conn = summary.conn_success / summary.conn_total if summary.conn_total else 0.5
    notice = 1.0 - min(1.0, summary.notice_weighted / config.notice_cap)
    weird = 1.0 - min(1.0, summary.weird_count / config.weird_cap)
    if summary.packets_received:
        stat = 1.0 - summary.packets_dropped / summary.packets_received
    else:
        stat = 0.5
    return conn, notice, weird, stat


def rp_score(summary: WindowLogSummary, config: UpdateConfig) -> float:
    w = config.weights
    conn, notice, weird, stat = dimension_scores(summary, config)
    rp = math.fsum((w.w_conn * conn, w.w_notice * notice, w.w_weird * weird, w.w_stat * stat))
    return min(1.0, max(0.0, rp))


def apply_update(old_score: float, rp: float) -> float:
    if rp >= 0.5:
        new = old_score + (rp - 0.5) * (1.0 - old_score) / 10.0
    else:
        new = old_score - (0.5 - rp) * (1.0 - old_score) / 10.0
    return min(1.0, max(0.0, new))


def run_update_cycle(
    state: TrustState,
    records: Iterable[SecurityLogRecord],
    window_index: int,
    config: UpdateConfig,
) -> tuple[TrustState, UpdateAudit]:
    """Apply one window to ``state``; returns the new state and its audit line."""
    summary = summarize_window(records, state.trustor_id, state.trustee_id, window_index, config)
    rp = rp_score(summary, config)
    new = apply_update(state.score, rp)
    _, end = config.window_span(window_index)
    audit = UpdateAudit(window_index, state.trustor_id, state.trustee_id, rp, state.score, new)
    return replace(state, score=new, updated_at=end), audit


def split_windows(
    records: Iterable[SecurityLogRecord], config: UpdateConfig
) -> dict[int, list[SecurityLogRecord]]:
    """Group records into half-open windows ``[kW, (k+1)W)``."""
    windows: dict[int, list[SecurityLogRecord]] = defaultdict(list)
    for r in records:
        windows[config.window_of(r.timestamp)].append(r)
    return dict(windows)


def replay(
    state: TrustState,
    records: Iterable[SecurityLogRecord],
    config: UpdateConfig,
    windows: Sequence[int] | None = None,
) -> Iterator[tuple[TrustState, UpdateAudit]]:
    """Run update cycles in window order.

    By default every window from the first to the last record is visited,
    including quiet windows in between.
    """
    grouped = split_windows(records, config)
    if windows is None:
        if not grouped:
            return
        windows = range(min(grouped), max(grouped) + 1)
    for k in windows:
        state, audit = run_update_cycle(state, grouped.get(k, []), k, config)
        yield state, audit
