import pytest

from qkdplan import link_models as lm
from qkdplan import planner as pl

T = pl.TechnologyKind


@pytest.mark.parametrize(
    "distance,segment",
    [
        (50.0, pl.Segment.ACCESS),
        (99.9, pl.Segment.ACCESS),
        (100.0, pl.Segment.METRO),
        (999.9, pl.Segment.METRO),
        (1000.0, pl.Segment.LONG_HAUL),
        (4999.9, pl.Segment.LONG_HAUL),
        (5000.0, pl.Segment.INTERCONTINENTAL),
        (6000.0, pl.Segment.INTERCONTINENTAL),
    ],
)
def test_classify_segment(distance, segment):
    assert pl.classify_segment(distance) is segment


def test_classify_segment_rejects_nonpositive():
    with pytest.raises(pl.PlannerError):
        pl.classify_segment(0.0)


def test_eligible_access_with_fiber():
    d = pl.Demand("a", "b", 50.0, has_fiber=True)
    assert pl.eligible_technologies(d) == {
        T.FIBER_DIRECT,
        T.FIBER_TRUSTED_RELAY,
        T.SATELLITE_TRUSTED_RELAY,
        T.SATELLITE_UNTRUSTED,
    }


def test_eligible_last_mile_includes_freespace():
    d = pl.Demand("a", "b", 8.0, has_fiber=True, has_los=True)
    assert T.FREE_SPACE_TERRESTRIAL in pl.eligible_technologies(d)


def test_eligible_transoceanic_satellite_only():
    d = pl.Demand("a", "b", 7000.0, transoceanic=True)
    assert pl.eligible_technologies(d) == {T.SATELLITE_TRUSTED_RELAY}


def test_eligible_untrusted_threshold():
    params = pl.PlannerParams()
    assert T.SATELLITE_UNTRUSTED in pl.eligible_technologies(
        pl.Demand("a", "b", 900.0), params
    )
    assert T.SATELLITE_UNTRUSTED not in pl.eligible_technologies(
        pl.Demand("a", "b", 1500.0), params
    )
    raised = pl.PlannerParams(untrusted_max_separation_km=1200.0)
    assert T.SATELLITE_UNTRUSTED in pl.eligible_technologies(
        pl.Demand("a", "b", 1200.0), raised
    )


def test_eligible_untrusted_required_filters():
    d = pl.Demand("a", "b", 500.0, has_fiber=True, untrusted_required=True)
    assert pl.eligible_technologies(d) == {T.SATELLITE_UNTRUSTED}
    far = pl.Demand("a", "b", 8000.0, transoceanic=True, untrusted_required=True)
    assert pl.eligible_technologies(far) == set()


def test_eligibility_monotonic_in_distance():
    short_range_kinds = {T.FIBER_DIRECT, T.FREE_SPACE_TERRESTRIAL}
    prev = None
    for km in (5.0, 50.0, 150.0, 1200.0, 6000.0):
        now = pl.eligible_technologies(
            pl.Demand("a", "b", km, has_fiber=True, has_los=True)
        )
        if prev is not None:
            assert (now - prev) & short_range_kinds == set()
        prev = now


def test_place_relays_2000km():
    offsets = pl.place_relays(2000.0, 100.0)
    assert len(offsets) == 19
    boundaries = [0.0, *offsets, 2000.0]
    spans = [b - a for a, b in zip(boundaries, boundaries[1:])]
    assert all(s <= 100.0 + 1e-9 for s in spans)
    assert offsets == pytest.approx([100.0 * i for i in range(1, 20)])


def test_place_relays_single_span():
    assert pl.place_relays(90.0, 100.0) == []


def test_place_relays_minimality():
    # removing any relay would create a span over the limit
    for length in (250.0, 1000.0, 2000.0, 3333.0):
        offsets = pl.place_relays(length, 100.0)
        boundaries = [0.0, *offsets, length]
        for i in range(1, len(boundaries) - 1):
            without = boundaries[:i] + boundaries[i + 1:]
            assert any(
                b - a > 100.0 for a, b in zip(without, without[1:])
            ), f"relay {i} redundant for {length} km"


def test_validate_32_relay_beijing_shanghai_layout():
    offsets = [i * 2000.0 / 33.0 for i in range(1, 33)]
    assert pl.validate_relay_layout(2000.0, offsets, 100.0)
    spans = 2000.0 / 33.0
    assert spans < 100.0 and spans == pytest.approx(60.606, abs=0.001)


def test_validate_relay_layout_rejects_bad():
    assert not pl.validate_relay_layout(2000.0, [150.0, 100.0], 100.0)  # unordered
    assert not pl.validate_relay_layout(300.0, [250.0], 100.0)  # 150 km first span... still >100
    assert not pl.validate_relay_layout(1000.0, [500.0], 100.0)


def test_select_deployment_strategy_mapping():
    demands = [
        pl.Demand("hq", "dc", 40.0, has_fiber=True),
        pl.Demand("t1", "t2", 8.0, has_los=True),
        pl.Demand("bj", "sh", 2000.0, has_fiber=True),
        pl.Demand("eu", "us", 8000.0, transoceanic=True),
    ]
    plan = pl.select_deployment(demands)
    chosen = {item.endpoints: item.technology for item in plan.items}
    assert chosen[("hq", "dc")] is T.FIBER_DIRECT
    assert chosen[("t1", "t2")] is T.FREE_SPACE_TERRESTRIAL
    assert chosen[("bj", "sh")] is T.FIBER_TRUSTED_RELAY
    assert chosen[("eu", "us")] is T.SATELLITE_TRUSTED_RELAY
    bj = next(i for i in plan.items if i.endpoints == ("bj", "sh"))
    assert len(bj.relay_offsets_km) == 19
    assert all(kind is pl.RelayKind.TRUSTED_NODE for _, kind in bj.relay_path)
    assert plan.all_feasible


def test_select_deployment_untrusted_required():
    plan = pl.select_deployment([pl.Demand("a", "b", 900.0, untrusted_required=True)])
    assert plan.items[0].technology is T.SATELLITE_UNTRUSTED
    (node_id, kind), = plan.items[0].relay_path
    assert kind is pl.RelayKind.UNTRUSTED_ENTANGLEMENT_SATELLITE


def test_select_deployment_infeasible_reported():
    demands = [
        pl.Demand("a", "b", 1500.0, untrusted_required=True),
        pl.Demand("c", "d", 40.0, has_fiber=True),
    ]
    plan = pl.select_deployment(demands)
    assert not plan.all_feasible
    assert len(plan.items) == 1  # the feasible demand is still planned
    assert plan.infeasible[0][0].endpoints == ("a", "b")


def test_select_deployment_deterministic():
    demands = [pl.Demand("a", "b", 2000.0, has_fiber=True)]
    p1 = pl.select_deployment(demands)
    p2 = pl.select_deployment(demands)
    assert pl.plan_to_dict(p1) == pl.plan_to_dict(p2)


def test_select_never_chooses_ineligible():
    import random

    rng = random.Random(7)
    for _ in range(100):
        d = pl.Demand(
            "a",
            "b",
            rng.choice([5.0, 50.0, 500.0, 2000.0, 8000.0]),
            has_fiber=rng.random() < 0.5,
            has_los=rng.random() < 0.5,
            transoceanic=rng.random() < 0.3,
            untrusted_required=rng.random() < 0.3,
        )
        plan = pl.select_deployment([d])
        eligible = pl.eligible_technologies(d)
        if plan.items:
            assert plan.items[0].technology in eligible
        else:
            assert not eligible


def _budgets_for(demand, params=pl.PlannerParams()):
    budgets = {}
    for tech in pl.eligible_technologies(demand, params):
        budgets[tech], _ = pl._budget_for(
            demand, tech, params, lm.FiberParams(), lm.FreeSpaceParams(), lm.SatLinkParams()
        )
    return budgets


def test_rank_fiber_direct_beats_satellite_for_access():
    d = pl.Demand("a", "b", 40.0, has_fiber=True)
    ranked = pl.rank_technologies(d, _budgets_for(d))
    assert ranked.index(T.FIBER_DIRECT) < ranked.index(T.SATELLITE_TRUSTED_RELAY)


def test_rank_untrusted_required_only_untrusted():
    d = pl.Demand("a", "b", 500.0, has_fiber=True, untrusted_required=True)
    assert pl.rank_technologies(d, _budgets_for(d)) == [T.SATELLITE_UNTRUSTED]


def test_rank_tie_break_deterministic():
    d = pl.Demand("a", "b", 40.0, has_fiber=True)
    budgets = _budgets_for(d)
    # force equal scores by zeroing both weights: preference order decides
    params = pl.PlannerParams(w_rate=0.0, w_cost=0.0)
    ranked = pl.rank_technologies(d, budgets, params)
    expected = [t for t in pl.DEFAULT_PREFERENCE_ORDER if t in budgets]
    assert ranked == expected


def test_plan_json_roundtrip():
    demands = [
        pl.Demand("a", "b", 2000.0, has_fiber=True),
        pl.Demand("c", "d", 900.0, untrusted_required=True),
    ]
    plan = pl.select_deployment(demands, orbit_id="leo-1")
    restored = pl.plan_from_dict(pl.plan_to_dict(plan))
    assert restored.items == plan.items
