import pytest
from hypothesis import given, strategies as st

from conftest import ADDRESS_MAP, FIXTURES
from oracles import apply_update_oracle
from trustmarket.engine import TrustState
from trustmarket.errors import ContractError, ValidationError
from trustmarket.ingestion import UNKNOWN_STAKEHOLDER, LogKind, SecurityLogRecord, parse_zeek_log
from trustmarket.update import (
    RpWeights,
    UpdateConfig,
    WindowLogSummary,
    apply_update,
    replay,
    rp_score,
    run_update_cycle,
    summarize_window,
)

CFG = UpdateConfig()
unit = st.floats(0.0, 1.0, allow_nan=False)


def conn(ts, state="SF", a="v", b="u"):
    return SecurityLogRecord(LogKind.CONN, ts, a, b, conn_state=state)


def notice(ts, sev, a="u", b="v"):
    return SecurityLogRecord(LogKind.NOTICE, ts, a, b, notice_type="X", severity=sev)


def weird(ts, a="u", b="v"):
    return SecurityLogRecord(LogKind.WEIRD, ts, a, b, weird_name="w")


def stats(ts, recv, drop):
    return SecurityLogRecord(LogKind.STATS, ts, "u", UNKNOWN_STAKEHOLDER,
                             packets_received=recv, packets_dropped=drop)


def summary(**kw):
    return WindowLogSummary("v", "u", 0, **kw)


# --- summarize_window -----------------------------------------------------------

def test_summarize_empty():
    assert summarize_window([], "v", "u", 0, CFG) == summary()


def test_summarize_conn_counts():
    recs = [conn(1), conn(2), conn(3), conn(4, "REJ")]
    s = summarize_window(recs, "v", "u", 0, CFG)
    assert (s.conn_total, s.conn_success) == (4, 3)


def test_summarize_notice_weights():
    s = summarize_window([notice(1, 1.0), notice(2, 0.5)], "v", "u", 0, CFG)
    assert s.notice_weighted == 1.5


def test_summarize_ignores_other_pairs():
    recs = [conn(1, a="v", b="x"), notice(2, 1.0, a="x", b="y"), weird(3, a="x", b="y"),
            weird(4, a=UNKNOWN_STAKEHOLDER, b=UNKNOWN_STAKEHOLDER)]
    s = summarize_window(recs, "v", "u", 0, CFG)
    assert (s.conn_total, s.notice_weighted, s.weird_count) == (0, 0.0, 1)


def test_summarize_window_bounds_half_open():
    assert summarize_window([conn(299.999)], "v", "u", 0, CFG).conn_total == 1
    with pytest.raises(ContractError, match="300"):
        summarize_window([conn(300.0)], "v", "u", 0, CFG)
    assert summarize_window([conn(300.0)], "v", "u", 1, CFG).conn_total == 1


# --- rp_score -------------------------------------------------------------------

def test_rp_pristine():
    assert rp_score(summary(conn_total=5, conn_success=5, packets_received=10), CFG) == 1.0


def test_rp_empty():
    assert rp_score(summary(), CFG) == pytest.approx(0.75, abs=1e-12)


def test_rp_half_conns():
    s = summary(conn_total=4, conn_success=2, packets_received=100)
    assert rp_score(s, CFG) == pytest.approx(0.8, abs=1e-12)


def test_rp_worst_case():
    s = summary(conn_total=3, conn_success=0, notice_weighted=9.0, weird_count=20,
                packets_received=50, packets_dropped=50)
    assert rp_score(s, CFG) == 0.0


def test_weights_must_sum_to_one():
    with pytest.raises(ValidationError):
        RpWeights(0.5, 0.5, 0.5, 0.5)


@given(st.integers(0, 20), st.integers(0, 20), st.floats(0, 10), st.integers(0, 20),
       st.integers(0, 100), st.integers(0, 100))
def test_rp_monotone_in_events(total, ok, notice_w, weirds, recv, drop):
    ok, drop = min(ok, total), min(drop, recv)
    base = summary(conn_total=total, conn_success=ok, notice_weighted=notice_w,
                   weird_count=weirds, packets_received=recv, packets_dropped=drop)
    rp = rp_score(base, CFG)
    assert 0.0 <= rp <= 1.0
    more_weird = summary(conn_total=total, conn_success=ok, notice_weighted=notice_w,
                         weird_count=weirds + 1, packets_received=recv, packets_dropped=drop)
    more_notice = summary(conn_total=total, conn_success=ok, notice_weighted=notice_w + 0.5,
                          weird_count=weirds, packets_received=recv, packets_dropped=drop)
    more_ok = summary(conn_total=total + 1, conn_success=ok + 1, notice_weighted=notice_w,
                      weird_count=weirds, packets_received=recv, packets_dropped=drop)
    assert rp_score(more_weird, CFG) <= rp
    assert rp_score(more_notice, CFG) <= rp
    if total:
        # with no prior conns the neutral 0.5 is replaced by 1.0, also an increase
        assert rp_score(more_ok, CFG) >= rp


# --- apply_update ---------------------------------------------------------------

@pytest.mark.parametrize("old, rp, expected", [
    (0.8, 0.7, 0.804),
    (0.6, 0.2, 0.588),
    (0.6, 0.5, 0.6),
    (0.0, 0.0, 0.0),
])
def test_apply_update_examples(old, rp, expected):
    assert apply_update(old, rp) == pytest.approx(expected, abs=1e-9)


@given(unit, unit)
def test_apply_update_properties(old, rp):
    new = apply_update(old, rp)
    assert 0.0 <= new <= 1.0
    assert abs(new - old) <= 0.05 + 1e-12
    assert new == pytest.approx(apply_update_oracle(old, rp), abs=1e-12)
    assert apply_update(1.0, rp) == 1.0


@given(st.floats(0.0, 0.99), st.floats(0.2501, 0.7499))
def test_extremes_move_more_than_middle(old, mid):
    step = lambda rp: abs(apply_update(old, rp) - old)
    assert step(1.0) > step(mid)
    # below old = 1/21 the clamp at zero eats the rp = 0 decrease
    if old >= 1 / 21:
        assert step(0.0) > step(mid)


# --- update cycle -----------------------------------------------------------------

def state(score=0.8):
    return TrustState("v", "u", score)


def test_cycle_pristine_increases():
    recs = [conn(10), stats(20, 100, 0)]
    new, audit = run_update_cycle(state(), recs, 0, CFG)
    assert new.score > 0.8 and audit.rp == 1.0
    assert new.updated_at == 300.0


def test_cycle_is_pure():
    old = state()
    run_update_cycle(old, [conn(10)], 0, CFG)
    assert old.score == 0.8


def test_cycle_worst_case():
    recs = [conn(1, "REJ"), stats(2, 10, 10)] + [notice(3, 1.0)] * 5 + [weird(4)] * 10
    new, audit = run_update_cycle(state(0.6), recs, 0, CFG)
    assert audit.rp == 0.0
    assert new.score == pytest.approx(0.6 - 0.5 * 0.4 / 10, abs=1e-12)


def test_two_pristine_windows():
    recs = [conn(10), stats(20, 100, 0), conn(310), stats(320, 100, 0)]
    scores = [s.score for s, _ in replay(state(), recs, CFG)]
    assert scores == pytest.approx([0.81, 0.8195], abs=1e-12)


def test_replay_visits_quiet_windows():
    recs = [conn(10), conn(910)]
    audits = [a for _, a in replay(state(), recs, CFG)]
    assert [a.window_index for a in audits] == [0, 1, 2, 3]
    assert audits[1].rp == pytest.approx(0.75)


def test_replay_fixture_gives_0804():
    records = []
    for name, kind in (("replay_conn.log", LogKind.CONN), ("replay_stats.log", LogKind.STATS)):
        report = parse_zeek_log(FIXTURES / name, kind, ADDRESS_MAP)
        assert report.ok
        records += report.records
    results = list(replay(TrustState("consumer", "provider-a", 0.8), records, CFG))
    assert len(results) == 1
    final, audit = results[0]
    assert audit.rp == pytest.approx(0.7, abs=1e-12)
    assert final.score == pytest.approx(0.804, abs=1e-9)
