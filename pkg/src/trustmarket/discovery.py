"""Trust-based offer discovery: constraint filtering, intent scoring, ranking, selection."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .engine import EngineConfig, Evidence, TrustState, score_target
from .errors import SelectionError, ValidationError
from .ingestion import AssetType, InteractionRecord, ProductOffer, to_json_line
from .storage import SharedLedger
from .update import UpdateConfig

CRITERIA = ("price", "proximity", "performance")


@dataclass(frozen=True)
class ConstraintFilter:
    asset_types: frozenset[AssetType] | None = None
    locations: frozenset[str] | None = None
    max_price: float | None = None

    def __post_init__(self) -> None:
        if self.max_price is not None and self.max_price < 0:
            raise ValidationError("max_price must be non-negative")

    def matches(self, offer: ProductOffer) -> bool:
        if self.asset_types is not None and offer.asset_type not in self.asset_types:
            return False
        if self.locations is not None and offer.location not in self.locations:
            return False
        if self.max_price is not None and offer.price > self.max_price:
            return False
        return True


@dataclass(frozen=True)
class IntentPriorities:
    weights: Mapping[str, float] = field(default_factory=lambda: {"price": 1.0})
    reference_location: str | None = None
    performance_hint: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        unknown = set(self.weights) - set(CRITERIA)
        if unknown:
            raise ValidationError(f"unknown intent criteria: {', '.join(sorted(unknown))}")
        if any(w < 0 for w in self.weights.values()):
            raise ValidationError("intent weights must be non-negative")
        if not any(w > 0 for w in self.weights.values()):
            raise ValidationError("at least one intent weight must be positive")
        for oid, hint in self.performance_hint.items():
            if not 0.0 <= hint <= 1.0:
                raise ValidationError(f"performance hint for {oid} outside [0, 1]")

    def normalized(self) -> dict[str, float]:
        total = sum(self.weights.values())
        return {c: self.weights.get(c, 0.0) / total for c in CRITERIA}


@dataclass(frozen=True)
class RankedOffer:
    offer: ProductOffer
    trust: TrustState
    intent_score: float
    rank: int

    def to_dict(self) -> dict:
        return {
            "offer_id": self.offer.offer_id,
            "provider_id": self.offer.provider_id,
            "trust": self.trust.score,
            "intent_score": self.intent_score,
            "rank": self.rank,
            "provisional": self.trust.provisional,
        }


@dataclass(frozen=True)
class MonitoringDirective:
    """Start of a monitored trust relationship after an offer is chosen."""

    trustor_id: str
    trustee_id: str
    offer_id: str
    start_window: int
    window_seconds: float
    initial_score: float


def prefilter(
    offers: Iterable[ProductOffer], constraints: ConstraintFilter, as_of: float
) -> list[ProductOffer]:
    return [o for o in offers if o.is_live(as_of) and constraints.matches(o)]


def intent_score(
    offer: ProductOffer,
    priorities: IntentPriorities,
    price_range: tuple[float, float],
) -> float:
    lo, hi = price_range
    price = 1.0 if hi == lo else 1.0 - (offer.price - lo) / (hi - lo)
    if priorities.reference_location is None:
        proximity = 0.5
    else:
        proximity = 1.0 if offer.location == priorities.reference_location else 0.0
    performance = priorities.performance_hint.get(offer.offer_id, 0.5)
    w = priorities.normalized()
    score = w["price"] * price + w["proximity"] * proximity + w["performance"] * performance
    return min(1.0, max(0.0, score))


def _order_key(item: tuple[ProductOffer, TrustState, float]):
    offer, trust, intent = item
    # Descending trust, then intent, then evidence-backed first, then id ascending.
    return (-trust.score, -intent, trust.provisional, offer.offer_id)


def rank_offers(
    candidates: Sequence[ProductOffer],
    trustor: str,
    priorities: IntentPriorities,
    evidence: Evidence,
    config: EngineConfig,
    workers: int = 1,
) -> list[RankedOffer]:
    """Score every candidate afresh and return them best first."""
    if not candidates:
        return []
    prices = [o.price for o in candidates]
    price_range = (min(prices), max(prices))

    def score(o: ProductOffer) -> TrustState:
        return score_target(trustor, o.provider_id, o.asset_type, evidence, config)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trusts = list(pool.map(score, candidates))
    else:
        trusts = [score(o) for o in candidates]

    scored = [
        (o, t, intent_score(o, priorities, price_range)) for o, t in zip(candidates, trusts)
    ]
    scored.sort(key=_order_key)
    return [RankedOffer(o, t, i, rank) for rank, (o, t, i) in enumerate(scored, start=1)]


def select_offer(
    ranked: Sequence[RankedOffer],
    choice: str,
    ledger: SharedLedger,
    now: float,
    update_config: UpdateConfig | None = None,
) -> MonitoringDirective:
    """Record the consumer's choice and arm monitoring for its provider.

    The pushed interaction carries the trust score at selection time as its
    expected satisfaction; realized satisfaction is pushed later by whoever
    closes the interaction.
    """
    update_config = update_config or UpdateConfig()
    picked = next((r for r in ranked if r.offer.offer_id == choice), None)
    if picked is None:
        raise SelectionError(f"offer {choice!r} is not in the ranked list")
    trustor = picked.trust.trustor_id
    ledger.push_interaction(
        InteractionRecord(
            trustor_id=trustor,
            trustee_id=picked.offer.provider_id,
            offer_id=picked.offer.offer_id,
            asset_type=picked.offer.asset_type,
            start_date=now,
            interaction_count=1,
            satisfaction=picked.trust.score,
            recorded_at=now,
        )
    )
    return MonitoringDirective(
        trustor_id=trustor,
        trustee_id=picked.offer.provider_id,
        offer_id=picked.offer.offer_id,
        start_window=update_config.window_of(now),
        window_seconds=update_config.window_seconds,
        initial_score=picked.trust.score,
    )


RANKING_COLUMNS = ("offer_id", "provider_id", "trust", "intent_score", "rank")


def ranking_csv(ranked: Iterable[RankedOffer]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RANKING_COLUMNS)
    for r in ranked:
        writer.writerow([r.offer.offer_id, r.offer.provider_id, repr(r.trust.score),
                         repr(r.intent_score), r.rank])
    return buf.getvalue()


def ranking_jsonl(ranked: Iterable[RankedOffer]) -> str:
    return "".join(to_json_line(r.to_dict()) + "\n" for r in ranked)
