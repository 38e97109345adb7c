"""Seeded end-to-end marketplace scenarios.

Generative model
----------------
* ``domains * providers_per_domain`` providers, named ``d<i>-p<j>``. Each has a
  latent quality drawn uniformly from ``[quality_low, quality_high]``; the
  bad-mouthing victim (``bad_mouther_target``, default ``d0-p0``) gets
  ``victim_quality`` instead. Setting ``rival_quality`` gives every other
  provider that exact quality, which makes attack experiments controlled.
* ``recommenders`` third-party consumers ``r00, r01, ...``. The first
  ``floor(bad_mouther_fraction * recommenders)`` are bad-mouthers, the next
  ``floor(honest_recommender_fraction * recommenders)`` are honest, the rest
  stay silent (they interact and publish feedback but never recommend).
* During each of ``feedback_rounds`` rounds the trustor ``consumer`` and every
  recommender interact once with every provider. Realized satisfaction is the
  provider's quality plus uniform noise of at most ``satisfaction_noise``.
  Honest recommenders then recommend the provider's quality plus uniform
  noise of at most 0.1. Bad-mouthers run a targeted attack: they recommend
  only the victim, with a value in ``[0, 0.05]``, while their own interaction
  feedback stays truthful. The trustor updates recommendation
  trust against what it experienced in the same round.
* After the rounds the trustor ranks all live offers, picks rank 1 (or the
  scripted ``choice``) and monitors the chosen provider, plus every trustee
  named in ``incident_schedule``, for ``windows`` windows of synthetic Zeek
  traffic. Incidents inject failing connections, notices, weird events and
  packet drops according to their severity profile.

Every random draw comes from a stream keyed by ``(seed, entity name)`` so the
output does not depend on evaluation order or on the number of workers.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import os
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from . import __version__
from .config import Settings, config_hash
from .discovery import (
    ConstraintFilter,
    IntentPriorities,
    RankedOffer,
    prefilter,
    rank_offers,
    ranking_csv,
    ranking_jsonl,
    select_offer,
)
from .engine import (
    EngineConfig,
    Evidence,
    Recommendation,
    RecommenderLedgerEntry,
    TrustState,
    update_recommendation_trust,
)
from .errors import ConfigError
from .ingestion import (
    AssetType,
    InteractionRecord,
    LogKind,
    ProductOffer,
    SlaEvent,
    SlaKind,
    ZEEK_PATHS,
    parse_zeek_log,
    sla_counts,
    to_json_line,
    write_zeek_log,
)
from .storage import SharedLedger, evidence_from
from .update import UpdateAudit, UpdateConfig, run_update_cycle

TRUSTOR = "consumer"
TRUSTOR_ADDR = "10.255.0.1"
LOCATIONS = ("madrid", "barcelona", "murcia", "valencia")

# Scenario ranking is trust-first; intent only breaks ties, on price.
_constraints = ConstraintFilter()
_priorities = IntentPriorities(weights={"price": 1.0})

# Severity presets: fraction of failed connections, notices as a multiple of
# notice_cap, weird events as a multiple of weird_cap, packet drop ratio.
SEVERITY_PROFILES: dict[str, dict[str, float]] = {
    "minor": {"conn_fail": 0.2, "notices": 0.2, "weirds": 0.2, "drop": 0.02},
    "major": {"conn_fail": 0.5, "notices": 0.6, "weirds": 0.6, "drop": 0.3},
    "severe": {"conn_fail": 1.0, "notices": 1.2, "weirds": 1.0, "drop": 1.0},
}

ZEEK_COLUMNS = {
    LogKind.CONN: ("ts", "uid", "id.orig_h", "id.orig_p", "id.resp_h", "id.resp_p", "proto",
                   "conn_state", "orig_bytes", "resp_bytes", "orig_pkts", "resp_pkts"),
    LogKind.NOTICE: ("ts", "uid", "src", "dst", "note", "msg"),
    LogKind.WEIRD: ("ts", "uid", "id.orig_h", "id.resp_h", "name"),
    LogKind.STATS: ("ts", "peer", "pkts_proc", "pkts_dropped"),
}


@dataclass(frozen=True)
class Incident:
    window_index: int
    trustee_id: str
    severity: str | Mapping[str, float] = "severe"

    def profile(self) -> dict[str, float]:
        if isinstance(self.severity, str):
            try:
                return dict(SEVERITY_PROFILES[self.severity])
            except KeyError:
                raise ConfigError(f"unknown severity profile {self.severity!r}") from None
        prof = {"conn_fail": 0.0, "notices": 0.0, "weirds": 0.0, "drop": 0.0}
        unknown = set(self.severity) - set(prof)
        if unknown:
            raise ConfigError(f"unknown severity keys: {', '.join(sorted(unknown))}")
        prof.update({k: float(v) for k, v in self.severity.items()})
        return prof


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 42
    domains: int = 3
    providers_per_domain: int = 3
    offers_per_provider: int = 2
    asset_mix: Mapping[str, float] = field(default_factory=lambda: {t.value: 1.0 for t in AssetType})
    recommenders: int = 10
    honest_recommender_fraction: float = 0.7
    bad_mouther_fraction: float = 0.0
    bad_mouther_target: str | None = None
    victim_quality: float = 0.9
    quality_low: float = 0.4
    quality_high: float = 0.95
    rival_quality: float | None = None
    satisfaction_noise: float = 0.05
    feedback_rounds: int = 6
    windows: int = 10
    incident_schedule: tuple[Incident, ...] = ()
    choice: str | None = None
    sweep_step: float = 0.1
    engine: EngineConfig = field(default_factory=EngineConfig)
    update: UpdateConfig = field(default_factory=UpdateConfig)

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed: must be a 64-bit unsigned integer")
        for name in ("domains", "providers_per_domain", "offers_per_provider",
                     "recommenders", "feedback_rounds", "windows"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be >= 1")
        for name in ("honest_recommender_fraction", "bad_mouther_fraction", "victim_quality",
                     "quality_low", "quality_high", "satisfaction_noise"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name}: must lie in [0, 1]")
        if self.honest_recommender_fraction + self.bad_mouther_fraction > 1.0 + 1e-12:
            raise ConfigError(
                "bad_mouther_fraction: honest_recommender_fraction + bad_mouther_fraction exceeds 1"
            )
        if self.rival_quality is not None and not 0.0 <= self.rival_quality <= 1.0:
            raise ConfigError("rival_quality: must lie in [0, 1]")
        if self.quality_low > self.quality_high:
            raise ConfigError("quality_low: must not exceed quality_high")
        if not 0.0 < self.sweep_step <= 1.0:
            raise ConfigError("sweep_step: must lie in (0, 1]")
        for key, weight in self.asset_mix.items():
            try:
                AssetType.parse(key)
            except Exception as exc:
                raise ConfigError(f"asset_mix: {exc}") from exc
            if weight < 0:
                raise ConfigError(f"asset_mix: negative weight for {key}")
        if not any(w > 0 for w in self.asset_mix.values()):
            raise ConfigError("asset_mix: at least one weight must be positive")
        for inc in self.incident_schedule:
            inc.profile()
            if not 0 <= inc.window_index < self.windows:
                raise ConfigError(f"incident_schedule: window {inc.window_index} out of range")

    @property
    def provider_ids(self) -> list[str]:
        return [f"d{d}-p{p}" for d in range(self.domains) for p in range(self.providers_per_domain)]

    @property
    def victim(self) -> str:
        return self.bad_mouther_target or self.provider_ids[0]

    @property
    def recommender_ids(self) -> list[str]:
        return [f"r{k:02d}" for k in range(self.recommenders)]

    def roles(self) -> dict[str, str]:
        n_bad = math.floor(self.bad_mouther_fraction * self.recommenders + 1e-9)
        n_honest = math.floor(self.honest_recommender_fraction * self.recommenders + 1e-9)
        roles = {}
        for k, rid in enumerate(self.recommender_ids):
            if k < n_bad:
                roles[rid] = "bad"
            elif k < n_bad + n_honest:
                roles[rid] = "honest"
            else:
                roles[rid] = "silent"
        return roles


SCENARIO_KEYS = {f.name for f in dataclasses.fields(ScenarioConfig)} - {"engine", "update"}


def scenario_from_settings(settings: Settings, **overrides: Any) -> ScenarioConfig:
    """Build a ScenarioConfig from the ``scenario`` section of the config file."""
    raw = dict(settings.scenario)
    raw.update(overrides)
    unknown = sorted(set(raw) - SCENARIO_KEYS)
    if unknown:
        raise ConfigError(f"scenario: unknown key(s): {', '.join(unknown)}")
    if "incident_schedule" in raw:
        incidents = []
        for item in raw["incident_schedule"] or ():
            if isinstance(item, Incident):
                incidents.append(item)
                continue
            try:
                incidents.append(Incident(int(item["window_index"]), str(item["trustee_id"]),
                                          item.get("severity", "severe")))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"scenario.incident_schedule: bad entry {item!r}") from exc
        raw["incident_schedule"] = tuple(incidents)
    try:
        return ScenarioConfig(engine=settings.engine, update=settings.update, **raw)
    except TypeError as exc:
        raise ConfigError(f"scenario: {exc}") from exc


def _stream(seed: int, *name: object) -> random.Random:
    return random.Random("/".join([str(seed), *map(str, name)]))


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


@dataclass
class Scenario:
    """Generated inputs for one run."""

    config: ScenarioConfig
    qualities: dict[str, float]
    offers: list[ProductOffer]
    roles: dict[str, str]
    # rounds[r] = (interactions, recommendations)
    rounds: list[tuple[list[InteractionRecord], list[Recommendation]]]
    sla_events: list[SlaEvent]
    addresses: dict[str, str]

    @property
    def round_end(self) -> float:
        return self.config.feedback_rounds * self.config.update.window_seconds


def generate_scenario(config: ScenarioConfig) -> Scenario:
    seed = config.seed
    window = config.update.window_seconds
    providers = config.provider_ids
    if config.victim not in providers:
        raise ConfigError(f"bad_mouther_target: {config.victim!r} is not a generated provider")

    qualities = {}
    for pid in providers:
        if pid == config.victim:
            qualities[pid] = config.victim_quality
        elif config.rival_quality is not None:
            qualities[pid] = config.rival_quality
        else:
            qualities[pid] = _stream(seed, "quality", pid).uniform(config.quality_low, config.quality_high)

    mix_types = [AssetType.parse(k) for k in config.asset_mix]
    mix_weights = [config.asset_mix[k] for k in config.asset_mix]
    offers = []
    for pid in providers:
        rng = _stream(seed, "offers", pid)
        domain = int(pid[1:].split("-")[0])
        for k in range(config.offers_per_provider):
            offers.append(ProductOffer(
                offer_id=f"{pid}-o{k}",
                provider_id=pid,
                asset_type=rng.choices(mix_types, weights=mix_weights)[0],
                location=LOCATIONS[domain % len(LOCATIONS)],
                price=round(rng.uniform(5.0, 50.0), 2),
                published_at=0.0,
            ))

    roles = config.roles()
    consumers = [TRUSTOR, *config.recommender_ids]
    by_id = {o.provider_id: o for o in offers}
    rounds = []
    for r in range(config.feedback_rounds):
        ts = r * window + window / 2
        interactions, recs = [], []
        for cid in consumers:
            rng = _stream(seed, "satisfaction", cid, r)
            for pid in providers:
                sat = _clamp(qualities[pid] + rng.uniform(-config.satisfaction_noise,
                                                          config.satisfaction_noise))
                offer = by_id[pid]
                interactions.append(InteractionRecord(
                    cid, pid, offer.offer_id, offer.asset_type, ts, 1, sat, ts))
        for rid, role in roles.items():
            if role == "silent":
                continue
            rng = _stream(seed, "recommend", rid, r)
            for pid in providers:
                honest = _clamp(qualities[pid] + rng.uniform(-0.1, 0.1))
                lie = rng.uniform(0.0, 0.05)
                if role == "bad":
                    if pid == config.victim:
                        recs.append(Recommendation(rid, pid, lie, ts))
                else:
                    recs.append(Recommendation(rid, pid, honest, ts))
        rounds.append((interactions, recs))

    sla_events = []
    for pid in providers:
        rng = _stream(seed, "sla", pid)
        for w in range(config.windows):
            if rng.random() < (1.0 - qualities[pid]) * 0.5:
                kind = SlaKind.VIOLATION if rng.random() < 0.5 else SlaKind.WARNING
                sla_events.append(SlaEvent(pid, (config.feedback_rounds + w) * window, kind))
    sla_events.sort(key=lambda e: (e.timestamp, e.provider_id))

    addresses = {TRUSTOR: TRUSTOR_ADDR}
    for pid in providers:
        d, p = pid[1:].split("-p")
        addresses[pid] = f"10.{int(d)}.{int(p)}.1"
    return Scenario(config, qualities, offers, roles, rounds, sla_events, addresses)


# ---------------------------------------------------------------------------
# discovery phase

def learn_and_rank(scenario: Scenario, workers: int = 1) -> tuple[list[RankedOffer], SharedLedger, dict]:
    """Play the feedback rounds, learning recommendation trust, then rank offers."""
    config = scenario.config
    engine = config.engine
    ledger = SharedLedger()
    entries = {
        rid: RecommenderLedgerEntry(rid, engine.bootstrap_trust, engine.bootstrap_trust)
        for rid in config.recommender_ids
    }
    for interactions, recs in scenario.rounds:
        for rec in interactions:
            ledger.push_interaction(rec)
        for rec in recs:
            ledger.push_recommendation(rec)
        realized = {i.trustee_id: i.satisfaction for i in interactions if i.trustor_id == TRUSTOR}
        for rec in recs:
            if rec.target_id in realized:
                entries[rec.recommender_id] = update_recommendation_trust(
                    entries[rec.recommender_id], rec.value, realized[rec.target_id], engine)

    base = evidence_from(ledger, window_seconds=config.update.window_seconds,
                         current_window=config.feedback_rounds - 1)
    evidence = Evidence(
        feedback=base.feedback,
        recommendations=base.recommendations,
        ledger={(TRUSTOR, rid): e for rid, e in entries.items()},
        interactions=base.interactions,
        current_window=base.current_window,
    )
    candidates = prefilter(scenario.offers, _constraints, scenario.round_end)
    ranked = rank_offers(candidates, TRUSTOR, _priorities, evidence, engine, workers=workers)
    return ranked, ledger, entries


def provider_rank(ranked: Sequence[RankedOffer], provider: str) -> int:
    """Best rank achieved by any offer of ``provider``."""
    return min(r.rank for r in ranked if r.offer.provider_id == provider)


# ---------------------------------------------------------------------------
# monitoring phase

def _zeek_window_logs(scenario: Scenario, trustee: str, window_index: int, abs_window: int) -> dict[LogKind, str]:
    """Synthetic Zeek text for one monitored window of one relationship."""
    config = scenario.config
    upd = config.update
    rng = _stream(config.seed, "zeek", trustee, window_index)
    start = abs_window * upd.window_seconds
    span = upd.window_seconds
    src, dst = scenario.addresses[TRUSTOR], scenario.addresses[trustee]

    profile = {"conn_fail": 0.0, "notices": 0.0, "weirds": 0.0, "drop": 0.0}
    background = True
    for inc in config.incident_schedule:
        if inc.window_index == window_index and inc.trustee_id == trustee:
            background = False
            for k, v in inc.profile().items():
                profile[k] = max(profile[k], v)

    def ts() -> float:
        return round(start + rng.uniform(0.0, span * 0.999), 6)

    n_conn = rng.randint(8, 16)
    n_fail = math.ceil(profile["conn_fail"] * n_conn)
    conns = []
    for k in range(n_conn):
        if k < n_fail:
            state = rng.choice(("REJ", "S0", "RSTO"))
        elif background and rng.random() < 0.05:
            state = "S0"
        else:
            state = "SF"
        conns.append({"ts": ts(), "uid": f"C{trustee}{window_index}{k}", "id.orig_h": src,
                      "id.orig_p": rng.randint(1024, 65535), "id.resp_h": dst, "id.resp_p": 443,
                      "proto": "tcp", "conn_state": state, "orig_bytes": rng.randint(100, 9000),
                      "resp_bytes": rng.randint(100, 90000), "orig_pkts": rng.randint(2, 40),
                      "resp_pkts": rng.randint(2, 80)})
    n_notice = math.ceil(profile["notices"] * upd.notice_cap)
    notices = [{"ts": ts(), "uid": None, "src": dst, "dst": src, "note": "Scan::Port_Scan",
                "msg": "port scan detected"} for _ in range(n_notice)]
    n_weird = math.ceil(profile["weirds"] * upd.weird_cap)
    weirds = [{"ts": ts(), "uid": None, "id.orig_h": dst, "id.resp_h": src,
               "name": rng.choice(("bad_TCP_checksum", "truncated_header", "data_before_established"))}
              for _ in range(n_weird)]
    pkts = rng.randint(1000, 5000)
    drop_ratio = profile["drop"] if not background else rng.uniform(0.0, 0.01)
    stats = [{"ts": round(start + span * 0.999, 6), "peer": dst, "pkts_proc": pkts,
              "pkts_dropped": int(pkts * drop_ratio)}]

    out = {}
    for kind, rows in ((LogKind.CONN, conns), (LogKind.NOTICE, notices),
                       (LogKind.WEIRD, weirds), (LogKind.STATS, stats)):
        buf = io.StringIO()
        write_zeek_log(buf, kind, ZEEK_COLUMNS[kind], sorted(rows, key=lambda r: r["ts"]))
        out[kind] = buf.getvalue()
    return out


def monitor_relationship(
    scenario: Scenario, initial: TrustState, settings: Settings | None = None
) -> tuple[list[float], list[UpdateAudit], dict[LogKind, list[str]]]:
    """Run every monitoring window for one relationship."""
    config = scenario.config
    settings = settings or Settings()
    address_map = {addr: sid for sid, addr in scenario.addresses.items()}
    state = initial
    scores = [state.score]
    audits = []
    logs: dict[LogKind, list[str]] = {k: [] for k in LogKind}
    for w in range(config.windows):
        abs_window = config.feedback_rounds + w
        texts = _zeek_window_logs(scenario, initial.trustee_id, w, abs_window)
        records = []
        for kind, text in texts.items():
            logs[kind].append(text)
            report = parse_zeek_log(io.StringIO(text), kind, address_map,
                                    settings.notice_severity, settings.default_notice_severity)
            records.extend(report.records)
        state, audit = run_update_cycle(state, records, abs_window, config.update)
        scores.append(state.score)
        audits.append(audit)
    return scores, audits, logs


# ---------------------------------------------------------------------------
# full run

@dataclass
class RunMetrics:
    trajectories: dict[tuple[str, str], list[float]]
    ranking: list[RankedOffer]
    audits: list[UpdateAudit]
    victim: str
    victim_rank: int
    baseline_victim_rank: int
    displacement: int
    rank_preserved: bool
    threshold_fraction: float | None
    sweep: list[tuple[float, int]]
    sla_counts: dict[str, int]
    selected_offer: str
    scenario: Scenario = field(repr=False)
    zeek_logs: dict[str, dict[LogKind, list[str]]] = field(default_factory=dict, repr=False)
    ledger: SharedLedger | None = field(default=None, repr=False)


def victim_rank_under(config: ScenarioConfig, bad_fraction: float, workers: int = 1) -> int:
    """Victim's rank after the feedback rounds with the given bad-mouther fraction."""
    honest = min(config.honest_recommender_fraction, 1.0 - bad_fraction)
    variant = dataclasses.replace(config, bad_mouther_fraction=bad_fraction,
                                  honest_recommender_fraction=honest, incident_schedule=())
    ranked, _, _ = learn_and_rank(generate_scenario(variant), workers)
    return provider_rank(ranked, variant.victim)


def badmouthing_check(config: ScenarioConfig, workers: int = 1) -> tuple[int, int]:
    """(victim rank under attack, victim rank in the honest-only baseline)."""
    return (victim_rank_under(config, config.bad_mouther_fraction, workers),
            victim_rank_under(config, 0.0, workers))


def run_scenario(
    config: ScenarioConfig, settings: Settings | None = None, workers: int = 1
) -> RunMetrics:
    scenario = generate_scenario(config)
    ranked, ledger, _ = learn_and_rank(scenario, workers)
    victim_rank = provider_rank(ranked, config.victim)
    baseline = victim_rank_under(config, 0.0, workers)

    fractions = []
    f = 0.0
    while f <= 1.0 + 1e-9:
        fractions.append(round(f, 10))
        f += config.sweep_step
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sweep_ranks = list(pool.map(lambda x: victim_rank_under(config, x), fractions))
    else:
        sweep_ranks = [victim_rank_under(config, x) for x in fractions]
    sweep = list(zip(fractions, sweep_ranks))
    threshold = next((x for x, rank in sweep if rank != baseline), None)

    choice = config.choice or ranked[0].offer.offer_id
    directive = select_offer(ranked, choice, ledger, scenario.round_end, config.update)

    initial: dict[str, TrustState] = {}
    for r in ranked:
        if r.offer.provider_id not in initial:
            initial[r.offer.provider_id] = r.trust
    monitored = [directive.trustee_id]
    for inc in config.incident_schedule:
        if inc.trustee_id in initial and inc.trustee_id not in monitored:
            monitored.append(inc.trustee_id)

    def monitor(pid: str):
        return monitor_relationship(scenario, initial[pid], settings)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(monitor, monitored))
    else:
        results = [monitor(pid) for pid in monitored]

    trajectories, audits, logs = {}, [], {}
    for pid, (scores, rel_audits, rel_logs) in zip(monitored, results):
        trajectories[(TRUSTOR, pid)] = scores
        audits.extend(rel_audits)
        logs[pid] = rel_logs
    audits.sort(key=lambda a: (a.window_index, a.trustee_id))

    return RunMetrics(
        trajectories=trajectories,
        ranking=ranked,
        audits=audits,
        victim=config.victim,
        victim_rank=victim_rank,
        baseline_victim_rank=baseline,
        displacement=victim_rank - baseline,
        rank_preserved=victim_rank == baseline,
        threshold_fraction=threshold,
        sweep=sweep,
        sla_counts=dict(sorted(sla_counts(scenario.sla_events).items())),
        selected_offer=choice,
        scenario=scenario,
        zeek_logs=logs,
        ledger=ledger,
    )


# ---------------------------------------------------------------------------
# output files

METRICS_COLUMNS = ("window", "trustor", "trustee", "rp", "old_score", "new_score")


def audit_csv(audits: Sequence[UpdateAudit]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_COLUMNS)
    for a in audits:
        writer.writerow([a.window_index, a.trustor_id, a.trustee_id,
                         repr(a.rp), repr(a.old_score), repr(a.new_score)])
    return buf.getvalue()


def write_run_outputs(metrics: RunMetrics, out_dir: str, settings: Settings) -> list[str]:
    """Write every run artifact under ``out_dir``; returns the relative paths written."""
    written: dict[str, str] = {}
    written["metrics.csv"] = audit_csv(metrics.audits)
    written["ranking.csv"] = ranking_csv(metrics.ranking)
    written["ranking.jsonl"] = ranking_jsonl(metrics.ranking)
    written["trajectories.jsonl"] = "".join(
        to_json_line({"trustor": t, "trustee": u, "scores": scores}) + "\n"
        for (t, u), scores in sorted(metrics.trajectories.items())
    )
    written["badmouthing.json"] = json.dumps({
        "victim": metrics.victim,
        "victim_rank": metrics.victim_rank,
        "baseline_victim_rank": metrics.baseline_victim_rank,
        "displacement": metrics.displacement,
        "rank_preserved": metrics.rank_preserved,
        "threshold_fraction": metrics.threshold_fraction,
        "sweep": [{"bad_mouther_fraction": f, "victim_rank": r} for f, r in metrics.sweep],
    }, indent=2, sort_keys=True) + "\n"
    written["inputs/catalog.jsonl"] = "".join(to_json_line(o) + "\n" for o in metrics.scenario.offers)
    written["inputs/sla_events.jsonl"] = "".join(
        to_json_line(e) + "\n" for e in metrics.scenario.sla_events)
    for pid, logs in sorted(metrics.zeek_logs.items()):
        for kind, texts in logs.items():
            name = f"inputs/zeek/{pid}/{ZEEK_PATHS[kind]}.log"
            written[name] = _merge_zeek(texts)

    manifest = {
        "package": "trustmarket",
        "version": __version__,
        "config_hash": config_hash(settings),
        "seed": metrics.scenario.config.seed,
        "selected_offer": metrics.selected_offer,
        "sla_counts": metrics.sla_counts,
        "files": {},
    }
    os.makedirs(out_dir, exist_ok=True)
    for rel, text in written.items():
        path = os.path.join(out_dir, rel)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        manifest["files"][rel] = hashlib.sha256(text.encode()).hexdigest()
    if metrics.ledger is not None:
        ledger_path = os.path.join(out_dir, "inputs", "ledger.jsonl")
        metrics.ledger.save(ledger_path)
        with open(ledger_path, "rb") as fh:
            manifest["files"]["inputs/ledger.jsonl"] = hashlib.sha256(fh.read()).hexdigest()
    with open(os.path.join(out_dir, "run-manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return sorted([*manifest["files"], "run-manifest.json"])


def _merge_zeek(texts: Sequence[str]) -> str:
    """Concatenate per-window logs of one kind under a single header."""
    if not texts:
        return ""
    head, body = [], []
    for i, text in enumerate(texts):
        for line in text.splitlines(keepends=True):
            if line.startswith("#"):
                if i == 0:
                    head.append(line)
            else:
                body.append(line)
    return "".join(head + body)
