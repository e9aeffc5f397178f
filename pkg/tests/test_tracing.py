import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from foodwatch.errors import UnknownBadge, ValidationError
from foodwatch.status import StatusEngine
from foodwatch.tracing import (
    InfectionReport,
    PositionPing,
    TraceConfig,
    Tracer,
    detect_proximity_violations,
    mark_at_risk,
    proximity_event,
    segment_visits,
    trace,
)
from foodwatch.twin import ViolationType

CFG = TraceConfig()


def ping(badge, t, x=1.0, y=1.0, space="cooking"):
    return PositionPing(badge, space, x, y, t)


def pings_every(badge, start, end, step=2.0, x=1.0, y=1.0, space="cooking"):
    out = []
    t = start
    while t <= end + 1e-9:
        out.append(ping(badge, t, x, y, space))
        t += step
    return out


# ---------------------------------------------------------------------------
# segment_visits


def test_continuous_pings_make_one_visit():
    visits = segment_visits(pings_every("b1", 0, 60), CFG)
    assert [(v.start, v.end, v.space_id) for v in visits] == [(0.0, 60.0, "cooking")]


def test_long_silence_splits_visit():
    # gap rule applied by hand: pings 0..30, silence of 120 s, pings 150..210
    stream = pings_every("b1", 0, 30) + pings_every("b1", 150, 210)
    visits = segment_visits(stream, CFG)
    assert [(v.start, v.end) for v in visits] == [(0.0, 30.0), (150.0, 210.0)]


def test_space_change_always_splits():
    stream = pings_every("b1", 0, 20) + pings_every("b1", 22, 40, space="seasoning")
    visits = segment_visits(stream, CFG)
    assert [(v.space_id, v.start, v.end) for v in visits] == [
        ("cooking", 0.0, 20.0),
        ("seasoning", 22.0, 40.0),
    ]


def test_isolated_ping_discarded():
    assert segment_visits([ping("b1", 5.0)], CFG) == []


@given(
    gaps=st.lists(st.floats(min_value=0.5, max_value=200.0), min_size=1, max_size=80),
    spaces=st.lists(st.sampled_from(["a", "b", "c"]), min_size=1, max_size=80),
)
def test_visit_partition_property(gaps, spaces):
    t = 0.0
    stream = []
    for i, gap in enumerate(gaps):
        t += gap
        stream.append(PositionPing("b1", spaces[i % len(spaces)], 1.0, 1.0, t))
    visits = segment_visits(stream, CFG)
    # visits never overlap and are time-ordered
    for a, b in zip(visits, visits[1:]):
        assert a.end <= b.start
    # every ping lies in exactly one visit or a discarded short fragment
    for p in stream:
        containing = [
            v for v in visits if v.space_id == p.space_id and v.start <= p.timestamp <= v.end
        ]
        assert len(containing) <= 1


# ---------------------------------------------------------------------------
# detect_proximity_violations


def test_two_badges_close_for_30s():
    stream = pings_every("b1", 0, 30, x=1.0) + pings_every("b2", 0, 30, x=2.0)
    violations = detect_proximity_violations(stream, CFG)
    assert len(violations) == 1
    v = violations[0]
    # brute-force distance scan: constant 1.0 m apart for the whole run
    assert v.min_distance == pytest.approx(1.0)
    assert (v.start, v.end) == (0.0, 30.0)
    assert {v.badge_a, v.badge_b} == {"b1", "b2"}


def test_far_badges_no_violation():
    stream = pings_every("b1", 0, 60, x=1.0) + pings_every("b2", 0, 60, x=3.5)
    assert detect_proximity_violations(stream, CFG) == []


def test_three_badges_mutually_close_make_three_pairs():
    stream = (
        pings_every("b1", 0, 30, x=1.0)
        + pings_every("b2", 0, 30, x=1.5)
        + pings_every("b3", 0, 30, x=2.0)
    )
    violations = detect_proximity_violations(stream, CFG)
    pairs = {(v.badge_a, v.badge_b) for v in violations}
    assert pairs == {("b1", "b2"), ("b1", "b3"), ("b2", "b3")}


def test_short_contact_below_min_duration_ignored():
    stream = pings_every("b1", 0, 8, x=1.0) + pings_every("b2", 0, 8, x=2.0)
    assert detect_proximity_violations(stream, CFG) == []


def test_proximity_invariant_under_relabeling():
    stream = pings_every("b1", 0, 40, x=1.0) + pings_every("b2", 0, 40, x=2.0)
    swapped = [PositionPing({"b1": "b2", "b2": "b1"}[p.badge_id], p.space_id, p.x, p.y, p.timestamp) for p in stream]
    a = detect_proximity_violations(stream, CFG)
    b = detect_proximity_violations(swapped, CFG)
    assert [(v.start, v.end, round(v.min_distance, 9)) for v in a] == [
        (v.start, v.end, round(v.min_distance, 9)) for v in b
    ]


def test_proximity_event_is_pseudonym_free():
    stream = pings_every("badge-alpha", 0, 40, x=1.0) + pings_every("badge-beta", 0, 40, x=2.0)
    violation = detect_proximity_violations(stream, CFG)[0]
    event = proximity_event(violation)
    doc = event.to_json()
    assert event.vtype is ViolationType.SOCIAL_DISTANCING
    blob = str(doc)
    assert "badge-alpha" not in blob and "badge-beta" not in blob
    assert event.location == pytest.approx(violation.last_midpoint)


# ---------------------------------------------------------------------------
# trace


def example_world():
    """Infected b1 in cooking [0, 600]; b2 nearby for 60 s; b3 visits during
    the linger window; b4 after it."""
    pings = {}
    pings["b1"] = pings_every("b1", 0, 600, x=1.0)
    # b2 stands 1.5 m away during [300, 400]
    pings["b2"] = pings_every("b2", 300, 400, x=2.5)
    pings["b3"] = pings_every("b3", 900, 1200, x=4.0)
    pings["b4"] = pings_every("b4", 5000, 5100, x=4.0)
    visits = []
    for badge in sorted(pings):
        visits.extend(segment_visits(pings[badge], CFG))
    return visits, pings


def test_trace_example_direct_indirect_and_linger():
    visits, pings = example_world()
    report = InfectionReport("r1", "b1", reported_at=2000.0, lookback_seconds=172800.0)
    result = trace(report, visits, pings, CFG)
    assert result.at_risk_spaces == [("cooking", [(0.0, 4200.0)])]
    assert result.direct_contacts == ["b2"]  # 1.5 m for 100 s >= 30 s cumulative
    assert result.indirect_contacts == ["b3"]  # inside linger window ending 4200
    # b4 enters at 5000, after the at-risk interval closes


def test_trace_no_visits_is_empty():
    report = InfectionReport("r1", "b9", reported_at=2000.0)
    result = trace(report, [], {}, CFG)
    assert result.at_risk_spaces == [] and result.direct_contacts == [] and result.indirect_contacts == []


def test_trace_linger_monotonicity():
    visits, pings = example_world()
    report = InfectionReport("r1", "b1", reported_at=2000.0)
    small = trace(report, visits, pings, TraceConfig(linger_seconds=600.0))
    large = trace(report, visits, pings, TraceConfig(linger_seconds=7200.0))
    assert set(small.indirect_contacts) <= set(large.indirect_contacts)
    assert {s for s, _ in small.at_risk_spaces} <= {s for s, _ in large.at_risk_spaces}


# -- randomized equivalence against a brute-force oracle --------------------


def oracle_trace(report, visits, pings_by_badge, cfg):
    """Independent reimplementation with naive loops."""
    w0 = report.reported_at - report.lookback_seconds
    w1 = report.reported_at
    infected_visits = [
        v for v in visits if v.badge_id == report.badge_id and v.end >= w0 and v.start <= w1
    ]
    raw = {}
    for v in infected_visits:
        raw.setdefault(v.space_id, []).append((v.start, v.end + cfg.linger_seconds))
    merged = {}
    for sid in raw:
        ivals = sorted(raw[sid])
        out = [list(ivals[0])]
        for s, e in ivals[1:]:
            if s <= out[-1][1]:
                out[-1][1] = max(out[-1][1], e)
            else:
                out.append([s, e])
        merged[sid] = [(s, e) for s, e in out]

    def nearest_sample_distance(pa, others):
        best = None
        best_dt = None
        for pb in others:
            if pb.space_id != pa.space_id:
                continue
            dt = abs(pb.timestamp - pa.timestamp)
            if dt <= cfg.pairing_tolerance_seconds and (best_dt is None or dt < best_dt):
                best, best_dt = pb, dt
        if best is None:
            return None
        return math.hypot(pa.x - best.x, pa.y - best.y)

    infected_pings = sorted(
        (p for p in pings_by_badge.get(report.badge_id, []) if w0 <= p.timestamp <= w1),
        key=lambda p: p.timestamp,
    )
    direct = set()
    for badge, pings in pings_by_badge.items():
        if badge == report.badge_id:
            continue
        others = sorted(
            (p for p in pings if w0 <= p.timestamp <= w1), key=lambda p: p.timestamp
        )
        samples = []
        for pa in infected_pings:
            d = nearest_sample_distance(pa, others)
            if d is not None:
                samples.append((pa.timestamp, d))
        total = 0.0
        run_start = None
        prev_t = None
        for t, d in samples:
            below = d < cfg.distance_threshold_meters
            if below and run_start is not None and t - prev_t <= cfg.visit_gap_tolerance_seconds:
                prev_t = t
            elif below:
                if run_start is not None:
                    total += prev_t - run_start
                run_start, prev_t = t, t
            else:
                if run_start is not None:
                    total += prev_t - run_start
                run_start, prev_t = None, None
        if run_start is not None:
            total += prev_t - run_start
        if total >= cfg.contact_min_seconds:
            direct.add(badge)

    indirect = set()
    for v in visits:
        if v.badge_id == report.badge_id or v.badge_id in direct:
            continue
        for s, e in merged.get(v.space_id, ()):
            if v.start <= e and v.end >= s:
                indirect.add(v.badge_id)
    return (
        {sid: tuple(ivals) for sid, ivals in merged.items()},
        sorted(direct),
        sorted(indirect),
    )


def random_world(rng, badges=6, spaces=3, horizon=6 * 3600.0):
    space_ids = [f"s{i}" for i in range(spaces)]
    pings_by_badge = {}
    for b in range(badges):
        badge = f"p{b}"
        stream = []
        t = rng.uniform(0, 600)
        while t < horizon and len(stream) < 700:
            space = rng.choice(space_ids)
            x, y = rng.uniform(0, 10), rng.uniform(0, 8)
            stay = rng.uniform(20, 900)
            end = min(t + stay, horizon)
            while t < end:
                x = min(max(x + rng.uniform(-0.6, 0.6), 0.0), 10.0)
                y = min(max(y + rng.uniform(-0.6, 0.6), 0.0), 8.0)
                stream.append(PositionPing(badge, space, x, y, t))
                t += rng.uniform(1.5, 8.0)
            t += rng.uniform(0, 300)  # sometimes beyond the gap tolerance
        pings_by_badge[badge] = stream
    return pings_by_badge


@pytest.mark.parametrize("trial", range(25))
def test_trace_matches_oracle_on_random_worlds(trial):
    rng = random.Random(9000 + trial)
    pings_by_badge = random_world(
        rng,
        badges=rng.randint(2, 10),
        spaces=rng.randint(1, 5),
        horizon=rng.uniform(3600, 72 * 3600),
    )
    visits = []
    for badge in sorted(pings_by_badge):
        visits.extend(segment_visits(pings_by_badge[badge], CFG))
    infected = rng.choice(sorted(pings_by_badge))
    report = InfectionReport(
        "r", infected, reported_at=rng.uniform(0, 80 * 3600), lookback_seconds=rng.uniform(3600, 172800)
    )
    result = trace(report, visits, pings_by_badge, CFG)
    oracle_spaces, oracle_direct, oracle_indirect = oracle_trace(report, visits, pings_by_badge, CFG)
    assert {sid: tuple(iv) for sid, iv in result.at_risk_spaces} == oracle_spaces
    assert result.direct_contacts == oracle_direct
    assert result.indirect_contacts == oracle_indirect
    # structural invariants on every trial
    assert infected not in result.direct_contacts
    assert infected not in result.indirect_contacts
    assert not (set(result.direct_contacts) & set(result.indirect_contacts))


# ---------------------------------------------------------------------------
# Tracer wrapper + mark_at_risk


def test_tracer_validates_pings(tiny_model):
    tracer = Tracer(tiny_model)
    with pytest.raises(UnknownBadge):
        tracer.add_pings([ping("ghost", 0.0)])
    with pytest.raises(ValidationError):
        tracer.add_pings([ping("b007", 0.0, x=50.0)])


def test_tracer_trace_unknown_badge(tiny_model):
    tracer = Tracer(tiny_model)
    with pytest.raises(UnknownBadge):
        tracer.trace(InfectionReport("r1", "ghost", reported_at=0.0))


def test_mark_at_risk_flags_and_injects(tiny_model):
    engine = StatusEngine(tiny_model)
    tracer = Tracer(tiny_model)
    tracer.add_pings(pings_every("b007", 0, 120, x=3.0))
    report = InfectionReport("r1", "b007", reported_at=600.0)
    result = tracer.trace(report)
    injected = []
    mark_at_risk(result, engine, injected.append, now=600.0)
    assert engine.is_at_risk("cooking")
    assert [e.vtype for e in injected] == [ViolationType.CONTACT_TRACING]
    assert injected[0].space_id == "cooking"
    # clearing one space leaves others untouched
    engine.set_at_risk("cooking", False)
    assert not engine.is_at_risk("cooking")


def test_mark_at_risk_empty_result_is_noop(tiny_model):
    engine = StatusEngine(tiny_model)
    tracer = Tracer(tiny_model)
    result = tracer.trace(InfectionReport("r1", "b007", reported_at=600.0))
    injected = []
    mark_at_risk(result, engine, injected.append, now=600.0)
    assert injected == []
    assert not engine.is_at_risk("cooking")
