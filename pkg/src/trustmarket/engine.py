"""Adapted PeerTrust scoring.

A trustor's score for a target combines a direct part and a community part::

    T(u) = alpha * direct(u) + (1 - alpha) * CF(u)

where ``direct`` weighs each feedback source's satisfaction with the target by
that source's credibility and scales the result by the transaction factor,
and ``CF`` mixes the target's participation ratio with the
confidence-weighted opinion of its recommenders.

Everything here is a pure function of an :class:`Evidence` snapshot. Nothing
is cached, so a score always reflects the evidence it was handed.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

from .errors import ContractError, ValidationError
from .ingestion import AssetType, InteractionRecord, _check_unit


@dataclass(frozen=True)
class FeedbackRecord:
    source_id: str
    target_id: str
    offer_asset_type: AssetType
    satisfaction: float
    window_index: int = 0
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        _check_unit("satisfaction", self.satisfaction)
        if self.source_id == self.target_id:
            raise ValidationError(f"feedback source and target are both {self.source_id!r}")
        if self.window_index < 0:
            raise ValidationError("window_index must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["offer_asset_type"] = self.offer_asset_type.value
        return d

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "FeedbackRecord":
        return cls(
            source_id=obj["source_id"],
            target_id=obj["target_id"],
            offer_asset_type=AssetType.parse(obj["offer_asset_type"]),
            satisfaction=float(obj["satisfaction"]),
            window_index=int(obj["window_index"]),
            timestamp=float(obj["timestamp"]),
        )


@dataclass(frozen=True)
class Recommendation:
    recommender_id: str
    target_id: str
    value: float
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        _check_unit("recommendation value", self.value)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "Recommendation":
        return cls(
            recommender_id=obj["recommender_id"],
            target_id=obj["target_id"],
            value=float(obj["value"]),
            timestamp=float(obj.get("timestamp", 0.0)),
        )


@dataclass(frozen=True)
class RecommenderLedgerEntry:
    """What a trustor knows about one recommender.

    ``last_trust`` is the trustor's latest trust score for the recommender and
    ``recommendation_trust`` tracks how accurate its recommendations proved.
    The recommender's influence is derived per computation, never stored.
    """

    recommender_id: str
    last_trust: float
    recommendation_trust: float

    def __post_init__(self) -> None:
        _check_unit("last_trust", self.last_trust)
        _check_unit("recommendation_trust", self.recommendation_trust)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "RecommenderLedgerEntry":
        return cls(
            recommender_id=obj["recommender_id"],
            last_trust=float(obj["last_trust"]),
            recommendation_trust=float(obj["recommendation_trust"]),
        )


@dataclass(frozen=True)
class EngineConfig:
    alpha_direct: float = 0.6
    alpha_confidence: float = 0.5
    provider_offer_blend: float = 0.5
    tf_decay: float = 0.7
    tf_window_cap: int = 10
    tf_window_count: int = 4
    rt_learning_rate: float = 0.3
    bootstrap_trust: float = 0.5

    def __post_init__(self) -> None:
        for name in ("alpha_direct", "alpha_confidence", "provider_offer_blend", "bootstrap_trust"):
            _check_unit(name, getattr(self, name))
        if not 0.0 < self.tf_decay < 1.0:
            raise ValidationError(f"tf_decay must lie in (0, 1), got {self.tf_decay}")
        if self.tf_window_cap < 1 or self.tf_window_count < 1:
            raise ValidationError("tf_window_cap and tf_window_count must be positive")
        # 0 is accepted so that recommendation-trust learning can be switched off.
        if not 0.0 <= self.rt_learning_rate <= 1.0:
            raise ValidationError(f"rt_learning_rate must lie in [0, 1], got {self.rt_learning_rate}")


@dataclass(frozen=True)
class TrustState:
    trustor_id: str
    trustee_id: str
    score: float
    direct_component: float = 0.0
    community_component: float = 0.0
    evidence_interactions: int = 0
    provisional: bool = False
    updated_at: float = 0.0

    def __post_init__(self) -> None:
        _check_unit("score", self.score)
        if self.provisional and self.evidence_interactions:
            raise ValidationError("a provisional state cannot carry interaction evidence")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "TrustState":
        return cls(
            trustor_id=obj["trustor_id"],
            trustee_id=obj["trustee_id"],
            score=float(obj["score"]),
            direct_component=float(obj["direct_component"]),
            community_component=float(obj["community_component"]),
            evidence_interactions=int(obj["evidence_interactions"]),
            provisional=bool(obj["provisional"]),
            updated_at=float(obj["updated_at"]),
        )


@dataclass(frozen=True)
class Evidence:
    """Immutable snapshot of everything a score may depend on.

    ``ledger`` is keyed by ``(trustor, recommender)``. ``current_window``
    anchors the transaction-factor windows; when ``None`` the newest window
    index present in ``feedback`` is used.
    """

    feedback: tuple[FeedbackRecord, ...] = ()
    recommendations: tuple[Recommendation, ...] = ()
    ledger: Mapping[tuple[str, str], RecommenderLedgerEntry] = field(default_factory=dict)
    interactions: tuple[InteractionRecord, ...] = ()
    current_window: int | None = None


def feedback_from_interactions(
    records: Iterable[InteractionRecord], window_seconds: float
) -> list[FeedbackRecord]:
    """Turn shared-ledger interaction records into feedback records."""
    return [
        FeedbackRecord(
            source_id=r.trustor_id,
            target_id=r.trustee_id,
            offer_asset_type=r.asset_type,
            satisfaction=r.satisfaction,
            window_index=max(0, int(r.recorded_at // window_seconds)),
            timestamp=r.recorded_at,
        )
        for r in records
    ]


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def satisfaction(
    target: str,
    asset_type: AssetType | None,
    feedback: Sequence[FeedbackRecord],
    config: EngineConfig,
) -> float:
    """Blend of provider-level and offer-type-level mean satisfaction.

    With ``asset_type=None`` only the provider-level mean is used.
    """
    records = [f for f in feedback if f.target_id == target]
    if len(records) != len(feedback):
        raise ContractError(f"feedback passed to satisfaction() must all target {target!r}")
    if not records:
        return config.bootstrap_trust
    provider = _mean([f.satisfaction for f in records])
    offer = [f.satisfaction for f in records if f.offer_asset_type is asset_type]
    if not offer:
        return provider
    blend = config.provider_offer_blend
    return _clamp(blend * provider + (1.0 - blend) * _mean(offer))


def _means_by_target(feedback: Iterable[FeedbackRecord]) -> dict[str, float]:
    groups: dict[str, list[float]] = defaultdict(list)
    for f in feedback:
        groups[f.target_id].append(f.satisfaction)
    return {t: _mean(v) for t, v in groups.items()}


def psm_similarity(
    self_feedback: Iterable[FeedbackRecord], peer_feedback: Iterable[FeedbackRecord]
) -> float:
    """One minus the RMS gap between two parties' mean ratings of common targets."""
    mine = _means_by_target(self_feedback)
    theirs = _means_by_target(peer_feedback)
    common = sorted(mine.keys() & theirs.keys())
    if not common:
        return 0.5
    sq = math.fsum((mine[x] - theirs[x]) ** 2 for x in common)
    return _clamp(1.0 - math.sqrt(sq / len(common)))


def credibilities(
    trustor_feedback: Sequence[FeedbackRecord],
    all_feedback_by_source: Mapping[str, Sequence[FeedbackRecord]],
) -> dict[str, float]:
    """Normalized PSM credibility of every source in the map.

    Weights sum to one. When no source has positive similarity there is
    nothing to discriminate on and the weights are uniform.
    """
    raw = {s: psm_similarity(trustor_feedback, fb) for s, fb in all_feedback_by_source.items()}
    if not raw:
        return {}
    total = math.fsum(raw.values())
    if total <= 0.0:
        return {s: 1.0 / len(raw) for s in raw}
    return {s: v / total for s, v in raw.items()}


def credibility(
    trustor_feedback: Sequence[FeedbackRecord],
    source: str,
    all_feedback_by_source: Mapping[str, Sequence[FeedbackRecord]],
) -> float:
    if source not in all_feedback_by_source:
        raise KeyError(f"unknown feedback source {source!r}")
    return credibilities(trustor_feedback, all_feedback_by_source)[source]


def transaction_factor(
    target: str, feedback_counts_per_window: Sequence[int], config: EngineConfig
) -> float:
    """Decay-weighted saturation of feedback volume, newest window first.

    ``target`` only labels the computation; the counts carry the evidence.
    """
    k_windows = config.tf_window_count
    counts = list(feedback_counts_per_window[:k_windows])
    counts += [0] * (k_windows - len(counts))
    weights = [config.tf_decay ** k for k in range(k_windows)]
    num = math.fsum(w * min(1.0, c / config.tf_window_cap) for w, c in zip(weights, counts))
    return _clamp(num / math.fsum(weights))


def confidence(entry: RecommenderLedgerEntry, rec: Recommendation, config: EngineConfig) -> float:
    """Confidence in one recommender's opinion of a target."""
    if rec.recommender_id != entry.recommender_id:
        raise ContractError(
            f"recommendation from {rec.recommender_id!r} checked against "
            f"ledger entry for {entry.recommender_id!r}"
        )
    a = config.alpha_confidence
    return _clamp(a * entry.last_trust + (1.0 - a) * entry.recommendation_trust * rec.value)


def influence_weights(rts: Sequence[float]) -> list[float]:
    """Recommendation-trust shares; uniform when every RT is zero."""
    if not rts:
        return []
    total = math.fsum(rts)
    if total <= 0.0:
        return [1.0 / len(rts)] * len(rts)
    return [rt / total for rt in rts]


def community_factor(
    target: str,
    recs: Sequence[Recommendation],
    ledger: Mapping[str, RecommenderLedgerEntry],
    published_recs_by_target: int,
    interactions_of_target: int,
    config: EngineConfig,
) -> float:
    """Average of the target's participation ratio and its recommenders' weighted opinion."""
    entries = []
    for rec in recs:
        try:
            entries.append(ledger[rec.recommender_id])
        except KeyError:
            raise KeyError(f"recommender {rec.recommender_id!r} missing from ledger") from None

    if interactions_of_target > 0:
        participation = min(1.0, published_recs_by_target / interactions_of_target)
    else:
        participation = 0.0

    inf = influence_weights([e.recommendation_trust for e in entries])
    aggregate = math.fsum(
        confidence(e, rec, config) * w for e, rec, w in zip(entries, recs, inf)
    )
    return _clamp((participation + aggregate) / 2.0)


def compose_trust(direct: float, community: float, config: EngineConfig) -> float:
    a = config.alpha_direct
    return _clamp(a * direct + (1.0 - a) * community)


def update_recommendation_trust(
    entry: RecommenderLedgerEntry,
    rec_value: float,
    realized_satisfaction: float,
    config: EngineConfig,
) -> RecommenderLedgerEntry:
    """Move RT toward how closely ``rec_value`` matched the realized outcome."""
    eta = config.rt_learning_rate
    accuracy = 1.0 - abs(rec_value - realized_satisfaction)
    rt = _clamp((1.0 - eta) * entry.recommendation_trust + eta * accuracy)
    return replace(entry, recommendation_trust=rt)


def latest_recommendations(
    recommendations: Iterable[Recommendation], target: str, exclude: Iterable[str] = ()
) -> list[Recommendation]:
    """Newest recommendation per recommender about ``target``, sorted by recommender."""
    skip = set(exclude) | {target}
    latest: dict[str, Recommendation] = {}
    for rec in recommendations:
        if rec.target_id != target or rec.recommender_id in skip:
            continue
        prev = latest.get(rec.recommender_id)
        if prev is None or rec.timestamp >= prev.timestamp:
            latest[rec.recommender_id] = rec
    return [latest[k] for k in sorted(latest)]


def score_target(
    trustor: str,
    target: str,
    asset_type: AssetType | None,
    evidence: Evidence,
    config: EngineConfig,
) -> TrustState:
    """Recompute the trustor's trust in ``target`` from the evidence snapshot."""
    if asset_type is not None:
        asset_type = AssetType.parse(asset_type)
    about_target = [f for f in evidence.feedback if f.target_id == target]
    recs = latest_recommendations(evidence.recommendations, target, exclude=[trustor])
    stamps = [f.timestamp for f in evidence.feedback] + [r.timestamp for r in evidence.recommendations]
    updated_at = max(stamps, default=0.0)

    if not about_target and not recs:
        return TrustState(
            trustor_id=trustor,
            trustee_id=target,
            score=config.bootstrap_trust,
            provisional=True,
            updated_at=updated_at,
        )

    direct = 0.0
    if about_target:
        by_source: dict[str, list[FeedbackRecord]] = defaultdict(list)
        for f in about_target:
            by_source[f.source_id].append(f)
        source_history = {
            s: [f for f in evidence.feedback if f.source_id == s] for s in sorted(by_source)
        }
        own = [f for f in evidence.feedback if f.source_id == trustor]
        cred = credibilities(own, source_history)

        if evidence.current_window is not None:
            current = evidence.current_window
        else:
            current = max(f.window_index for f in evidence.feedback)
        per_window: dict[int, int] = defaultdict(int)
        for f in about_target:
            per_window[f.window_index] += 1
        counts = [per_window.get(current - k, 0) for k in range(config.tf_window_count)]
        tf = transaction_factor(target, counts, config)

        direct = _clamp(tf * math.fsum(
            cred[s] * satisfaction(target, asset_type, by_source[s], config) for s in cred
        ))

    ledger = {}
    for rec in recs:
        entry = evidence.ledger.get((trustor, rec.recommender_id))
        if entry is None:
            entry = RecommenderLedgerEntry(
                rec.recommender_id, config.bootstrap_trust, config.bootstrap_trust
            )
        ledger[rec.recommender_id] = entry
    published = sum(1 for r in evidence.recommendations if r.recommender_id == target)
    interactions = sum(
        r.interaction_count for r in evidence.interactions if target in (r.trustor_id, r.trustee_id)
    )
    community = community_factor(target, recs, ledger, published, interactions, config)

    return TrustState(
        trustor_id=trustor,
        trustee_id=target,
        score=compose_trust(direct, community, config),
        direct_component=direct,
        community_component=community,
        evidence_interactions=len(about_target),
        provisional=False,
        updated_at=updated_at,
    )
