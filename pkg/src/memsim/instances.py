"""Seeded auction instance families and controller comparisons."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .auction import Controller, oracle_max_welfare, run_dda
from .parallel import ordered_map
from .qoe import EdgeSeller, QoeParams, VrUser
from .rng import RngStream


@dataclass(frozen=True)
class AuctionInstance:
    name: str
    bitrate: float
    buyers: tuple[VrUser, ...]
    sellers: tuple[EdgeSeller, ...]
    p_low: float
    p_high: float


def derived_price_bounds(buyers: Sequence[VrUser]) -> tuple[float, float]:
    """Default clock span: floor at zero, ceiling just above the top valuation."""
    top = max((b.valuation for b in buyers), default=0.0)
    return 0.0, max(1.0, float(math.ceil(top)) + 1.0)


def sample_instance(
    name: str,
    bitrate: float,
    n_buyers: int,
    n_sellers: int,
    qoe: QoeParams,
    head_speed: tuple[float, float],
    energy_price: tuple[float, float],
    base_cost: tuple[float, float],
    rng: RngStream,
    price_bounds: tuple[float, float] | None = None,
) -> AuctionInstance:
    """Draw one market at a given bitrate from the perceptual/cost models."""
    speeds = rng.uniform(head_speed[0], head_speed[1], n_buyers)
    buyers = tuple(
        VrUser.from_qoe(f"{name}-b{i}", float(speeds[i]), bitrate, qoe)
        for i in range(n_buyers)
    )
    energies = rng.uniform(energy_price[0], energy_price[1], n_sellers)
    bases = rng.uniform(base_cost[0], base_cost[1], n_sellers)
    sellers = tuple(
        EdgeSeller.for_bitrate(f"{name}-s{j}", float(energies[j]), float(bases[j]), bitrate)
        for j in range(n_sellers)
    )
    p_low, p_high = price_bounds if price_bounds else derived_price_bounds(buyers)
    return AuctionInstance(name, bitrate, buyers, sellers, p_low, p_high)


def instance_family(
    bitrates: Sequence[float],
    count_per_bitrate: int,
    n_buyers: int,
    n_sellers: int,
    qoe: QoeParams,
    head_speed: tuple[float, float],
    energy_price: tuple[float, float],
    base_cost: tuple[float, float],
    rng: RngStream,
    price_bounds: tuple[float, float] | None = None,
) -> list[AuctionInstance]:
    """One sub-family of instances per bitrate, each from its own substream."""
    out = []
    for bitrate in bitrates:
        for k in range(count_per_bitrate):
            name = f"b{bitrate:g}-{k}"
            out.append(
                sample_instance(
                    name, bitrate, n_buyers, n_sellers, qoe, head_speed,
                    energy_price, base_cost, rng.substream(name), price_bounds,
                )
            )
    return out


ControllerFactory = Callable[[AuctionInstance], Controller]


@dataclass(frozen=True)
class RunResult:
    controller: str
    instance: str
    bitrate: float
    welfare: float
    oracle_welfare: float
    rounds: int
    messages: int

    @property
    def welfare_ratio(self) -> float:
        if self.oracle_welfare > 0:
            return self.welfare / self.oracle_welfare
        return 1.0


@dataclass(frozen=True)
class ControllerSummary:
    controller: str
    mean_welfare: float
    mean_welfare_ratio: float
    mean_rounds: float
    mean_messages: float


def evaluate_controller(
    name: str, factory: ControllerFactory, instance: AuctionInstance
) -> RunResult:
    outcome = run_dda(
        instance.buyers, instance.sellers, factory(instance),
        instance.p_low, instance.p_high,
    )
    return RunResult(
        controller=name,
        instance=instance.name,
        bitrate=instance.bitrate,
        welfare=outcome.welfare,
        oracle_welfare=oracle_max_welfare(instance.buyers, instance.sellers),
        rounds=outcome.rounds,
        messages=outcome.messages,
    )


def _summarize(name: str, results: list[RunResult]) -> ControllerSummary:
    n = len(results)
    return ControllerSummary(
        controller=name,
        mean_welfare=sum(r.welfare for r in results) / n,
        mean_welfare_ratio=sum(r.welfare_ratio for r in results) / n,
        mean_rounds=sum(r.rounds for r in results) / n,
        mean_messages=sum(r.messages for r in results) / n,
    )


def compare_controllers(
    instances: Sequence[AuctionInstance],
    controllers: Sequence[tuple[str, ControllerFactory]],
) -> tuple[list[RunResult], list[ControllerSummary]]:
    """Run every controller on every instance.

    Instances are independent and may run on worker threads; factories must
    build a fresh controller per call so no state is shared. Results come
    back in (instance, controller) order and summaries in controller order.
    """
    if not instances:
        raise ValueError("need at least one instance")

    def run_one(instance: AuctionInstance) -> list[RunResult]:
        return [evaluate_controller(name, factory, instance)
                for name, factory in controllers]

    per_instance = ordered_map(run_one, list(instances))
    results = [r for chunk in per_instance for r in chunk]
    summaries = [
        _summarize(name, [r for r in results if r.controller == name])
        for name, _ in controllers
    ]
    return results, summaries


def summarize_by_bitrate(
    results: Sequence[RunResult],
    controllers: Sequence[str],
) -> list[tuple[str, float, ControllerSummary]]:
    """Per-(controller, bitrate) aggregates, in controller then bitrate order."""
    bitrates = sorted({r.bitrate for r in results})
    out = []
    for name in controllers:
        for bitrate in bitrates:
            chunk = [r for r in results
                     if r.controller == name and r.bitrate == bitrate]
            if chunk:
                out.append((name, bitrate, _summarize(name, chunk)))
    return out
