"""Two-stage reservation planning under discrete demand uncertainty.

A provider reserves integer resource units up front at the reservation price;
once a demand scenario realizes, any shortfall is bought on demand at the
higher ad-hoc price (no capacity ceiling on the second stage). Without a
first-stage budget the problem splits into independent per-resource
newsvendor problems, each solved in closed form and cross-checked by
enumeration; an optional budget couples the resources and is handled exactly
by a dynamic program over budget units. Two planning baselines are included:
planning against the mean of the scenario model and planning against the
average of a historical trace.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

from .rng import RngStream

PROB_TOL = 1e-9


@dataclass(frozen=True)
class ResourceType:
    id: str
    price_reserved: float
    price_on_demand: float

    def __post_init__(self):
        if self.price_reserved < 0 or self.price_on_demand < 0:
            raise ValueError(f"resource {self.id}: prices must be >= 0")
        if self.price_reserved >= self.price_on_demand:
            warnings.warn(
                f"resource {self.id}: reservation price {self.price_reserved} is not "
                f"below the on-demand price {self.price_on_demand}; reserving is pointless",
                stacklevel=2,
            )


@dataclass(frozen=True)
class Scenario:
    demand: tuple[int, ...]
    probability: float


@dataclass(frozen=True)
class DemandModel:
    scenarios: tuple[Scenario, ...]
    trace: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if not self.scenarios:
            raise ValueError("demand model needs at least one scenario")
        width = len(self.scenarios[0].demand)
        for s in self.scenarios:
            if len(s.demand) != width:
                raise ValueError("all demand vectors must have the same length")
            if s.probability <= 0:
                raise ValueError("scenario probabilities must be > 0")
            if any(d < 0 or not isinstance(d, int) for d in s.demand):
                raise ValueError("demands must be non-negative integers")
        total = sum(s.probability for s in self.scenarios)
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {total:.10g}")
        if self.trace is not None:
            for row in self.trace:
                if len(row) != width:
                    raise ValueError("trace vectors must match the scenario width")
                if any(d < 0 for d in row):
                    raise ValueError("trace demands must be >= 0")

    @property
    def n_resources(self) -> int:
        return len(self.scenarios[0].demand)

    def max_demand(self, r: int) -> int:
        return max(s.demand[r] for s in self.scenarios)

    def marginal(self, r: int) -> list[tuple[int, float]]:
        """Per-resource demand distribution, aggregated and sorted."""
        acc: dict[int, float] = {}
        for s in self.scenarios:
            acc[s.demand[r]] = acc.get(s.demand[r], 0.0) + s.probability
        return sorted(acc.items())


@dataclass(frozen=True)
class ReservationPlan:
    units: tuple[int, ...]

    def __post_init__(self):
        if any(x < 0 or not isinstance(x, int) for x in self.units):
            raise ValueError("reserved units must be non-negative integers")

    def spend(self, resources: Sequence[ResourceType]) -> float:
        return sum(r.price_reserved * x for r, x in zip(resources, self.units))


@dataclass(frozen=True)
class ScenarioRecourse:
    on_demand_units: tuple[int, ...]
    cost: float


@dataclass(frozen=True)
class CostReport:
    first_stage_cost: float
    expected_on_demand_cost: float
    expected_total: float
    per_scenario: tuple[ScenarioRecourse, ...]
    over_count: int
    under_count: int


def _check_dims(plan: ReservationPlan, demand: DemandModel,
                resources: Sequence[ResourceType]) -> None:
    if not len(plan.units) == demand.n_resources == len(resources):
        raise ValueError(
            f"dimension mismatch: plan has {len(plan.units)} resources, "
            f"demand {demand.n_resources}, prices {len(resources)}"
        )


def evaluate_plan(
    plan: ReservationPlan, demand: DemandModel, resources: Sequence[ResourceType]
) -> CostReport:
    """Exact expected cost of a reservation plan over the scenario set."""
    _check_dims(plan, demand, resources)
    first_stage = plan.spend(resources)
    expected_od = 0.0
    per_scenario = []
    over = under = 0
    for s in demand.scenarios:
        recourse = tuple(max(0, d - x) for d, x in zip(s.demand, plan.units))
        cost = sum(r.price_on_demand * y for r, y in zip(resources, recourse))
        expected_od += s.probability * cost
        per_scenario.append(ScenarioRecourse(recourse, cost))
        over += sum(1 for d, x in zip(s.demand, plan.units) if x > d)
        under += sum(1 for d, x in zip(s.demand, plan.units) if x < d)
    return CostReport(
        first_stage_cost=first_stage,
        expected_on_demand_cost=expected_od,
        expected_total=first_stage + expected_od,
        per_scenario=tuple(per_scenario),
        over_count=over,
        under_count=under,
    )


def newsvendor_quantile(
    resource: ResourceType, marginal: Sequence[tuple[int, float]]
) -> int:
    """Smallest stock level whose tail demand probability no longer pays.

    Raising the stock by one unit saves ``price_on_demand * P(d > x)`` and
    costs ``price_reserved``; by discrete convexity the smallest minimizer is
    the first x where the saving no longer exceeds the cost. Candidates are
    0 and the demand levels themselves.
    """
    if resource.price_on_demand <= 0:
        raise ValueError(f"resource {resource.id}: on-demand price must be > 0")
    levels = sorted(marginal)
    tail = sum(p for d, p in levels if d > 0)  # P(demand > 0)
    if resource.price_on_demand * tail <= resource.price_reserved:
        return 0
    x = 0
    for d, p in levels:
        if d == 0:
            continue
        tail -= p  # now P(demand > d)
        x = d
        if resource.price_on_demand * tail <= resource.price_reserved:
            return x
    return x


def _resource_cost_curve(
    r: int, demand: DemandModel, resources: Sequence[ResourceType], x_max: int
) -> list[float]:
    """Expected cost attributable to resource r for each stock level 0..x_max."""
    res = resources[r]
    marginal = demand.marginal(r)
    curve = []
    for x in range(x_max + 1):
        expected_short = sum(p * max(0, d - x) for d, p in marginal)
        curve.append(res.price_reserved * x + res.price_on_demand * expected_short)
    return curve


def _argmin_smallest(curve: Sequence[float]) -> int:
    best = 0
    for x in range(1, len(curve)):
        if curve[x] < curve[best]:
            best = x
    return best


def solve_sip(
    demand: DemandModel,
    resources: Sequence[ResourceType],
    budget: float | None = None,
) -> tuple[ReservationPlan, CostReport]:
    """Exactly optimal integer reservation plan.

    Unbudgeted, the plan decomposes per resource; each level is taken from
    the closed-form quantile and cross-checked against enumeration up to the
    largest scenario demand. A budget couples resources and is solved by a
    dynamic program over whole currency units (reservation prices must then
    be integers), tie-broken toward smaller reservations in resource-id
    order.
    """
    if not demand.scenarios:
        raise ValueError("need at least one scenario")
    if len(resources) != demand.n_resources:
        raise ValueError("resource list does not match demand width")

    if budget is None:
        units = []
        for r, res in enumerate(resources):
            x_max = demand.max_demand(r)
            curve = _resource_cost_curve(r, demand, resources, x_max)
            x_enum = _argmin_smallest(curve)
            x_quantile = newsvendor_quantile(res, demand.marginal(r))
            if x_enum != x_quantile:
                raise RuntimeError(
                    f"resource {res.id}: quantile solution {x_quantile} disagrees "
                    f"with enumeration {x_enum}"
                )
            units.append(x_enum)
        plan = ReservationPlan(tuple(units))
        return plan, evaluate_plan(plan, demand, resources)

    if budget < 0:
        raise ValueError("budget must be >= 0")
    prices = []
    for res in resources:
        if abs(res.price_reserved - round(res.price_reserved)) > 1e-12:
            raise ValueError(
                "budgeted solving requires integer reservation prices; "
                f"resource {res.id} has {res.price_reserved}"
            )
        prices.append(int(round(res.price_reserved)))
    cap = int(math.floor(budget + 1e-9))

    order = sorted(range(len(resources)), key=lambda i: resources[i].id)
    curves = {
        r: _resource_cost_curve(r, demand, resources, demand.max_demand(r))
        for r in order
    }
    n = len(order)
    # suffix[i][b]: best cost for resources order[i:] with b budget units left
    suffix = [[0.0] * (cap + 1) for _ in range(n + 1)]
    choice = [[0] * (cap + 1) for _ in range(n)]
    for i in range(n - 1, -1, -1):
        r = order[i]
        price = prices[r]
        curve = curves[r]
        for b in range(cap + 1):
            best_cost = math.inf
            best_x = 0
            for x in range(len(curve)):
                spend = price * x
                if spend > b:
                    break
                cost = curve[x] + suffix[i + 1][b - spend]
                if cost < best_cost:
                    best_cost = cost
                    best_x = x
            suffix[i][b] = best_cost
            choice[i][b] = best_x

    units = [0] * len(resources)
    b = cap
    for i in range(n):
        r = order[i]
        x = choice[i][b]
        units[r] = x
        b -= prices[r] * x
    plan = ReservationPlan(tuple(units))
    report = evaluate_plan(plan, demand, resources)
    if plan.spend(resources) > budget + 1e-9:
        raise RuntimeError("budget DP produced an infeasible plan")
    return plan, report


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _fit_to_budget(
    units: list[int], resources: Sequence[ResourceType], budget: float | None
) -> list[int]:
    """Shed reserved units, most expensive resource first, until affordable."""
    if budget is None:
        return units
    if budget < 0:
        raise ValueError("budget must be >= 0")
    order = sorted(range(len(resources)),
                   key=lambda i: (-resources[i].price_reserved, resources[i].id))
    while sum(r.price_reserved * x for r, x in zip(resources, units)) > budget + 1e-9:
        for i in order:
            if units[i] > 0:
                units[i] -= 1
                break
        else:
            break
    return units


def solve_evf(
    demand: DemandModel,
    resources: Sequence[ResourceType],
    budget: float | None = None,
) -> tuple[ReservationPlan, CostReport]:
    """Baseline that plans against the mean demand of the scenario model."""
    if not demand.scenarios:
        raise ValueError("need at least one scenario")
    means = [
        sum(s.probability * s.demand[r] for s in demand.scenarios)
        for r in range(demand.n_resources)
    ]
    units = _fit_to_budget([round_half_up(m) for m in means], resources, budget)
    plan = ReservationPlan(tuple(units))
    return plan, evaluate_plan(plan, demand, resources)


def solve_average_historical(
    trace: Sequence[Sequence[int]],
    demand: DemandModel,
    resources: Sequence[ResourceType],
    budget: float | None = None,
) -> tuple[ReservationPlan, CostReport]:
    """Baseline that plans against the sample mean of a historical trace."""
    if not trace:
        raise ValueError("historical trace is empty")
    width = demand.n_resources
    for row in trace:
        if len(row) != width:
            raise ValueError("trace vectors must match the scenario width")
    means = [sum(row[r] for row in trace) / len(trace) for r in range(width)]
    units = _fit_to_budget([round_half_up(m) for m in means], resources, budget)
    plan = ReservationPlan(tuple(units))
    return plan, evaluate_plan(plan, demand, resources)


@dataclass(frozen=True)
class UniformIntegerDemand:
    low: tuple[int, ...]
    high: tuple[int, ...]

    def __post_init__(self):
        if len(self.low) != len(self.high):
            raise ValueError("low/high must have the same length")
        for a, b in zip(self.low, self.high):
            if a < 0 or a > b:
                raise ValueError(f"invalid bounds [{a}, {b}]")


@dataclass(frozen=True)
class DiscretizedNormalDemand:
    mean: tuple[float, ...]
    std: tuple[float, ...]

    def __post_init__(self):
        if len(self.mean) != len(self.std):
            raise ValueError("mean/std must have the same length")
        if any(s < 0 for s in self.std):
            raise ValueError("std must be >= 0")


@dataclass(frozen=True)
class EmpiricalDemand:
    trace: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.trace:
            raise ValueError("empirical trace must not be empty")
        width = len(self.trace[0])
        if any(len(row) != width for row in self.trace):
            raise ValueError("trace vectors must have the same length")


DemandSpec = UniformIntegerDemand | DiscretizedNormalDemand | EmpiricalDemand


def sample_scenarios(spec: DemandSpec, n: int, rng: RngStream) -> DemandModel:
    """n equiprobable scenarios drawn from a demand distribution.

    Resampling an empirical trace at exactly its own length reproduces the
    trace unchanged.
    """
    if n < 1:
        raise ValueError("need at least one scenario")
    if isinstance(spec, UniformIntegerDemand):
        rows = [
            tuple(int(rng.integers(a, b)) for a, b in zip(spec.low, spec.high))
            for _ in range(n)
        ]
    elif isinstance(spec, DiscretizedNormalDemand):
        rows = [
            tuple(
                max(0, round_half_up(float(rng.normal(m, s))))
                for m, s in zip(spec.mean, spec.std)
            )
            for _ in range(n)
        ]
    elif isinstance(spec, EmpiricalDemand):
        if n == len(spec.trace):
            rows = [tuple(row) for row in spec.trace]
        else:
            rows = [tuple(spec.trace[rng.choice_index(len(spec.trace))])
                    for _ in range(n)]
    else:
        raise TypeError(f"unknown demand spec: {type(spec).__name__}")
    prob = 1.0 / n
    return DemandModel(tuple(Scenario(row, prob) for row in rows))


@dataclass(frozen=True)
class SipInstance:
    name: str
    resources: tuple[ResourceType, ...]
    demand: DemandModel
    budget: float | None = None


@dataclass(frozen=True)
class SchemeRow:
    instance: str
    scheme: str
    first_stage: float
    on_demand: float
    total: float


SCHEMES = ("sip", "evf", "avg")


def compare_schemes(
    instances: Sequence[SipInstance],
) -> tuple[list[SchemeRow], list[tuple[str, str]]]:
    """Solve every instance with all three schemes.

    Returns per-instance rows (in instance order, schemes in fixed order)
    followed by aggregate mean rows, plus flags naming any instance where the
    optimizing scheme came out worse than a baseline; an empty flag list is
    the expected outcome.
    """
    if not instances:
        raise ValueError("need at least one instance")

    def solve_one(inst: SipInstance) -> list[SchemeRow]:
        if inst.demand.trace is None:
            raise ValueError(f"instance {inst.name} has no historical trace")
        reports = {
            "sip": solve_sip(inst.demand, inst.resources, inst.budget)[1],
            "evf": solve_evf(inst.demand, inst.resources, inst.budget)[1],
            "avg": solve_average_historical(
                inst.demand.trace, inst.demand, inst.resources, inst.budget)[1],
        }
        return [
            SchemeRow(inst.name, scheme, rep.first_stage_cost,
                      rep.expected_on_demand_cost, rep.expected_total)
            for scheme, rep in ((s, reports[s]) for s in SCHEMES)
        ]

    per_instance = [solve_one(inst) for inst in instances]
    rows = [row for chunk in per_instance for row in chunk]

    flags = []
    for chunk in per_instance:
        totals = {row.scheme: row.total for row in chunk}
        for scheme in ("evf", "avg"):
            if totals["sip"] > totals[scheme] + 1e-9:
                flags.append((chunk[0].instance, scheme))

    n = len(instances)
    for scheme in SCHEMES:
        scheme_rows = [row for row in rows if row.scheme == scheme]
        rows.append(SchemeRow(
            "aggregate", scheme,
            sum(r.first_stage for r in scheme_rows) / n,
            sum(r.on_demand for r in scheme_rows) / n,
            sum(r.total for r in scheme_rows) / n,
        ))
    return rows, flags
