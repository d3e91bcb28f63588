from __future__ import annotations

import itertools

import pytest

from memsim.rng import rng_stream
from memsim.sip import (
    DemandModel,
    DiscretizedNormalDemand,
    EmpiricalDemand,
    ReservationPlan,
    ResourceType,
    Scenario,
    SipInstance,
    UniformIntegerDemand,
    compare_schemes,
    evaluate_plan,
    newsvendor_quantile,
    round_half_up,
    sample_scenarios,
    solve_average_historical,
    solve_evf,
    solve_sip,
)

TWO_POINT = DemandModel(
    (Scenario((10,), 0.5), Scenario((20,), 0.5)),
    trace=((10,), (20,), (10,), (20,)),
)
EDGE = (ResourceType("edge", 1.0, 3.0),)


def plan_cost(units, demand, resources):
    return evaluate_plan(ReservationPlan(tuple(units)), demand, resources).expected_total


def brute_force_best(demand, resources, budget=None):
    """Exhaustive minimum over all integer plans up to the max scenario demand."""
    ranges = [range(demand.max_demand(r) + 1) for r in range(demand.n_resources)]
    best_cost, best_plan = float("inf"), None
    for units in itertools.product(*ranges):
        if budget is not None:
            spend = sum(r.price_reserved * x for r, x in zip(resources, units))
            if spend > budget + 1e-9:
                continue
        cost = plan_cost(units, demand, resources)
        if cost < best_cost - 1e-12:
            best_cost, best_plan = cost, units
    return best_plan, best_cost


# --- evaluate_plan ------------------------------------------------------------

def test_zero_reservation_is_pure_on_demand():
    rep = evaluate_plan(ReservationPlan((0,)), TWO_POINT, EDGE)
    assert rep.first_stage_cost == 0.0
    assert rep.expected_total == pytest.approx(3.0 * (0.5 * 10 + 0.5 * 20))


def test_full_coverage_has_no_recourse():
    rep = evaluate_plan(ReservationPlan((20,)), TWO_POINT, EDGE)
    assert rep.expected_on_demand_cost == 0.0
    assert rep.under_count == 0


def test_evaluate_hand_example():
    rep = evaluate_plan(ReservationPlan((15,)), TWO_POINT, EDGE)
    assert rep.expected_total == pytest.approx(15 + 3 * 0.5 * 5)
    assert rep.expected_total == pytest.approx(rep.first_stage_cost
                                               + rep.expected_on_demand_cost)


def test_recourse_identity_and_counts():
    rep = evaluate_plan(ReservationPlan((15,)), TWO_POINT, EDGE)
    assert [r.on_demand_units for r in rep.per_scenario] == [(0,), (5,)]
    assert rep.over_count == 1 and rep.under_count == 1


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        evaluate_plan(ReservationPlan((1, 2)), TWO_POINT, EDGE)


# --- newsvendor quantile --------------------------------------------------------

def test_quantile_dominated_reservation():
    with pytest.warns(UserWarning, match="pointless"):
        res = ResourceType("r", 3.0, 3.0)
    assert newsvendor_quantile(res, [(10, 0.5), (20, 0.5)]) == 0


def test_quantile_point_mass():
    assert newsvendor_quantile(ResourceType("r", 1.0, 3.0), [(12, 1.0)]) == 12


def test_quantile_two_point_example():
    assert newsvendor_quantile(ResourceType("r", 1.0, 3.0), [(10, 0.5), (20, 0.5)]) == 20


def test_quantile_tie_takes_smallest():
    # P(d > 10) = 0.5 exactly equals the price ratio: 10 and 20 cost the same,
    # enumeration keeps the smaller.
    res = ResourceType("r", 1.0, 2.0)
    marginal = [(10, 0.5), (20, 0.5)]
    assert newsvendor_quantile(res, marginal) == 10
    model = DemandModel((Scenario((10,), 0.5), Scenario((20,), 0.5)))
    assert plan_cost([10], model, (res,)) == plan_cost([20], model, (res,))


def test_quantile_matches_enumeration_randomized():
    for i in range(200):
        rng = rng_stream(42, f"nv/{i}")
        k = 1 + rng.choice_index(6)
        levels = sorted({int(d) for d in rng.integers(0, 40, k)})
        raw = rng.uniform(0.05, 1.0, len(levels))
        probs = [float(p) / float(sum(raw)) for p in raw]
        p_od = float(rng.uniform(1.0, 10.0))
        p_res = float(rng.uniform(0.0, p_od * 1.2))
        res = ResourceType("r", min(p_res, p_od - 1e-6), p_od)
        marginal = list(zip(levels, probs))
        model = DemandModel(tuple(Scenario((d,), p) for d, p in marginal))
        curve = [plan_cost([x], model, (res,)) for x in range(max(levels) + 1)]
        best = min(range(len(curve)), key=lambda x: (curve[x], x))
        assert newsvendor_quantile(res, marginal) == best


def test_per_resource_cost_is_discretely_convex():
    rng = rng_stream(7, "convex")
    levels = sorted({int(d) for d in rng.integers(0, 25, 5)})
    raw = rng.uniform(0.1, 1.0, len(levels))
    probs = [float(p) / float(sum(raw)) for p in raw]
    model = DemandModel(tuple(Scenario((d,), p) for d, p in zip(levels, probs)))
    res = (ResourceType("r", 1.0, 4.0),)
    curve = [plan_cost([x], model, res) for x in range(max(levels) + 2)]
    diffs = [b - a for a, b in zip(curve, curve[1:])]
    assert all(d2 >= d1 - 1e-9 for d1, d2 in zip(diffs, diffs[1:]))


# --- solve_sip -----------------------------------------------------------------

def test_deterministic_demand_reserves_exactly():
    model = DemandModel((Scenario((7,), 1.0),))
    plan, rep = solve_sip(model, EDGE)
    assert plan.units == (7,)
    assert rep.expected_total == pytest.approx(7.0)


def test_dominated_reservation_goes_on_demand():
    with pytest.warns(UserWarning, match="pointless"):
        res = (ResourceType("r", 3.0, 3.0),)
    plan, rep = solve_sip(TWO_POINT, res)
    assert plan.units == (0,)


def test_two_point_optimal():
    plan, rep = solve_sip(TWO_POINT, EDGE)
    assert plan.units == (20,)
    assert rep.expected_total == pytest.approx(20.0)


def test_sip_matches_brute_force_multi_resource():
    for i in range(25):
        rng = rng_stream(9, f"sip-bf/{i}")
        n_res = 1 + rng.choice_index(3)
        resources = tuple(
            ResourceType(f"r{j}", float(rng.uniform(0.5, 3.0)),
                         float(rng.uniform(3.5, 9.0)))
            for j in range(n_res)
        )
        n_scen = 2 + rng.choice_index(4)
        rows = [tuple(int(d) for d in rng.integers(0, 12, n_res))
                for _ in range(n_scen)]
        raw = rng.uniform(0.1, 1.0, n_scen)
        model = DemandModel(tuple(
            Scenario(row, float(p) / float(sum(raw))) for row, p in zip(rows, raw)
        ))
        plan, rep = solve_sip(model, resources)
        best_plan, best_cost = brute_force_best(model, resources)
        assert rep.expected_total == pytest.approx(best_cost)
        assert plan.units == best_plan


def test_budget_dp_matches_brute_force():
    for i in range(15):
        rng = rng_stream(11, f"sip-budget/{i}")
        n_res = 2 + rng.choice_index(2)
        resources = tuple(
            ResourceType(f"r{j}", float(1 + rng.choice_index(3)),
                         float(rng.uniform(5.0, 9.0)))
            for j in range(n_res)
        )
        rows = [tuple(int(d) for d in rng.integers(0, 10, n_res)) for _ in range(4)]
        model = DemandModel(tuple(Scenario(row, 0.25) for row in rows))
        unbounded, _ = solve_sip(model, resources)
        full_spend = unbounded.spend(resources)
        budget = round(full_spend * 0.5)
        plan, rep = solve_sip(model, resources, budget=budget)
        assert plan.spend(resources) <= budget + 1e-9
        _, best_cost = brute_force_best(model, resources, budget=budget)
        assert rep.expected_total == pytest.approx(best_cost)


def test_budget_tie_break_prefers_smaller_units():
    # Two identical resources, budget forces a choice; ids break the tie.
    resources = (ResourceType("a", 1.0, 5.0), ResourceType("b", 1.0, 5.0))
    model = DemandModel((Scenario((1, 1), 1.0),))
    plan, _ = solve_sip(model, resources, budget=1.0)
    assert plan.units == (0, 1) or plan.units == (1, 0)
    # lexicographically smallest over id order (a first): a gets the smaller
    assert plan.units == (0, 1)


def test_budget_validation():
    with pytest.raises(ValueError, match="budget"):
        solve_sip(TWO_POINT, EDGE, budget=-1.0)
    frac = (ResourceType("edge", 1.5, 3.0),)
    with pytest.raises(ValueError, match="integer"):
        solve_sip(TWO_POINT, frac, budget=10.0)


# --- baselines -------------------------------------------------------------------

def test_evf_two_point():
    plan, rep = solve_evf(TWO_POINT, EDGE)
    assert plan.units == (15,)
    assert rep.expected_total == pytest.approx(22.5)


def test_evf_equals_sip_on_deterministic_demand():
    model = DemandModel((Scenario((7,), 1.0),))
    assert solve_evf(model, EDGE)[0] == solve_sip(model, EDGE)[0]


def test_round_half_up():
    assert round_half_up(7.5) == 8
    assert round_half_up(7.49) == 7
    assert round_half_up(8.5) == 9


def test_evf_budget_decrements_most_expensive_first():
    resources = (ResourceType("cheap", 1.0, 9.0), ResourceType("dear", 4.0, 9.0))
    model = DemandModel((Scenario((4, 4), 1.0),))
    plan, _ = solve_evf(model, resources, budget=12.0)
    # full plan (4, 4) costs 20; shedding dear units first: (4, 2) costs 12
    assert plan.units == (4, 2)


def test_avg_historical_matches_evf_on_proportional_trace():
    evf = solve_evf(TWO_POINT, EDGE)
    avg = solve_average_historical(TWO_POINT.trace, TWO_POINT, EDGE)
    assert avg[0] == evf[0]
    assert avg[1].expected_total == pytest.approx(22.5)


def test_avg_historical_singleton_trace():
    plan, _ = solve_average_historical([(12,)], TWO_POINT, EDGE)
    assert plan.units == (12,)


def test_avg_historical_empty_trace():
    with pytest.raises(ValueError, match="empty"):
        solve_average_historical([], TWO_POINT, EDGE)


# --- scenario sampling ------------------------------------------------------------

def test_sample_scenarios_zero_count():
    with pytest.raises(ValueError):
        sample_scenarios(UniformIntegerDemand((10,), (20,)), 0, rng_stream(1, "s"))


def test_sample_uniform_mean():
    model = sample_scenarios(UniformIntegerDemand((10,), (20,)), 1000,
                             rng_stream(123, "sip/sample"))
    mean = sum(s.demand[0] * s.probability for s in model.scenarios)
    assert abs(mean - 15.0) < 0.5
    assert all(10 <= s.demand[0] <= 20 for s in model.scenarios)


def test_sample_empirical_identity():
    trace = ((3,), (9,), (4,))
    model = sample_scenarios(EmpiricalDemand(trace), 3, rng_stream(1, "s"))
    assert tuple(s.demand for s in model.scenarios) == trace


def test_sample_empirical_resamples_other_sizes():
    trace = ((3,), (9,), (4,))
    model = sample_scenarios(EmpiricalDemand(trace), 7, rng_stream(1, "s"))
    assert len(model.scenarios) == 7
    assert all(s.demand in trace for s in model.scenarios)


def test_sample_discretized_normal_nonnegative_ints():
    model = sample_scenarios(DiscretizedNormalDemand((2.0,), (4.0,)), 200,
                             rng_stream(5, "s"))
    assert all(isinstance(s.demand[0], int) and s.demand[0] >= 0
               for s in model.scenarios)


def test_sample_deterministic():
    spec = UniformIntegerDemand((0, 5), (9, 15))
    a = sample_scenarios(spec, 50, rng_stream(2, "s"))
    b = sample_scenarios(spec, 50, rng_stream(2, "s"))
    assert a == b


def test_invalid_bounds():
    with pytest.raises(ValueError):
        UniformIntegerDemand((10,), (5,))


# --- compare_schemes ---------------------------------------------------------------

def sip_instance(name="two-point", budget=None):
    return SipInstance(name, EDGE, TWO_POINT, budget)


def test_compare_two_point_totals():
    rows, flags = compare_schemes([sip_instance()])
    totals = {r.scheme: r.total for r in rows if r.instance == "two-point"}
    assert totals == pytest.approx({"sip": 20.0, "evf": 22.5, "avg": 22.5})
    assert flags == []


def test_compare_single_instance_matches_solvers():
    rows, _ = compare_schemes([sip_instance()])
    sip_row = next(r for r in rows if r.scheme == "sip" and r.instance == "two-point")
    _, rep = solve_sip(TWO_POINT, EDGE)
    assert sip_row.total == rep.expected_total
    assert sip_row.first_stage == rep.first_stage_cost


def test_compare_aggregate_rows_present():
    rows, _ = compare_schemes([sip_instance(), sip_instance(name="again")])
    agg = [r for r in rows if r.instance == "aggregate"]
    assert [r.scheme for r in agg] == ["sip", "evf", "avg"]
    assert agg[0].total == pytest.approx(20.0)


def test_compare_requires_trace():
    inst = SipInstance("no-trace", EDGE, DemandModel(TWO_POINT.scenarios), None)
    with pytest.raises(ValueError, match="trace"):
        compare_schemes([inst])


def test_compare_dominance_randomized():
    instances = []
    for i in range(60):
        rng = rng_stream(77, f"dom/{i}")
        n_res = 1 + rng.choice_index(3)
        resources = tuple(
            ResourceType(f"r{j}", float(rng.uniform(0.5, 3.0)),
                         float(rng.uniform(3.5, 9.0)))
            for j in range(n_res)
        )
        spec = UniformIntegerDemand((0,) * n_res, (25,) * n_res)
        model = sample_scenarios(spec, 2 + rng.choice_index(5), rng.substream("scen"))
        trace_model = sample_scenarios(spec, 4 + rng.choice_index(5),
                                       rng.substream("trace"))
        trace = tuple(s.demand for s in trace_model.scenarios)
        instances.append(SipInstance(f"i{i}", resources,
                                     DemandModel(model.scenarios, trace), None))
    rows, flags = compare_schemes(instances)
    assert flags == []
    by_instance = {}
    for r in rows:
        by_instance.setdefault(r.instance, {})[r.scheme] = r.total
    for name, totals in by_instance.items():
        assert totals["sip"] <= totals["evf"] + 1e-9
        assert totals["sip"] <= totals["avg"] + 1e-9
