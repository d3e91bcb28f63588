"""Two-clock double auction for matching rendering buyers with edge sellers.

A descending buyer clock starts at the price ceiling and an ascending seller
clock starts at the floor; they move in strict alternation (buyer clock
first) by a controller-supplied step. After every move, each unclaimed buyer
whose valuation has been reached claims at the current buyer clock, and each
unclaimed seller whose cost has been covered claims at the current seller
clock; simultaneous claimants enter in input order. The auction stops when
the clocks cross or when one side is exhausted and the other has at least as
many claims. Claimed buyers and sellers are then paired in claim order, each
pair trading at the midpoint of its two claim prices; pairs whose buyer claim
is below the seller claim are dropped.

Every trade is individually rational by construction and payments exactly
equal receipts. Message accounting charges one broadcast per clock move per
agent plus one message per claim.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Protocol, Sequence


class BuyerLike(Protocol):
    id: str
    valuation: float


class SellerLike(Protocol):
    id: str
    cost: float


@dataclass(frozen=True)
class ClockView:
    """What a clock controller sees before each move."""

    buyer_clock: float
    seller_clock: float
    p_low: float
    p_high: float
    buyers_claimed_frac: float
    sellers_claimed_frac: float

    @property
    def spread_frac(self) -> float:
        span = self.p_high - self.p_low
        return (self.buyer_clock - self.seller_clock) / span if span > 0 else 0.0


class Controller(Protocol):
    def step_size(self, view: ClockView) -> float: ...


@dataclass(frozen=True)
class Claim:
    agent_id: str
    price: float


@dataclass(frozen=True)
class Match:
    buyer_id: str
    seller_id: str
    price: float


@dataclass
class AuctionOutcome:
    matches: list[Match]
    rounds: int
    messages: int
    welfare: float
    buyer_claims: list[Claim]
    seller_claims: list[Claim]
    final_buyer_clock: float
    final_seller_clock: float


def run_dda(
    buyers: Sequence[BuyerLike],
    sellers: Sequence[SellerLike],
    controller: Controller,
    p_low: float,
    p_high: float,
) -> AuctionOutcome:
    """Run one auction; the controller must be fresh (not shared across runs)."""
    if not p_low < p_high:
        raise ValueError(f"price bounds require p_low < p_high, got ({p_low}, {p_high})")

    nb, ns = len(buyers), len(sellers)
    valuations = [b.valuation for b in buyers]
    costs = [s.cost for s in sellers]
    # Claim thresholds are crossed in sorted order; a cursor per side avoids
    # rescanning all agents on every move.
    buyer_order = sorted(range(nb), key=lambda i: (-valuations[i], i))
    seller_order = sorted(range(ns), key=lambda j: (costs[j], j))
    b_cursor = s_cursor = 0

    buyer_claims: list[Claim] = []
    seller_claims: list[Claim] = []
    buyer_clock, seller_clock = float(p_high), float(p_low)
    rounds = 0
    buyer_turn = True

    while True:
        if len(buyer_claims) == nb and len(seller_claims) >= nb:
            break
        if len(seller_claims) == ns and len(buyer_claims) >= ns:
            break
        if buyer_clock <= seller_clock:
            break
        view = ClockView(
            buyer_clock=buyer_clock,
            seller_clock=seller_clock,
            p_low=p_low,
            p_high=p_high,
            buyers_claimed_frac=len(buyer_claims) / nb if nb else 1.0,
            sellers_claimed_frac=len(seller_claims) / ns if ns else 1.0,
        )
        delta = controller.step_size(view)
        if not delta > 0:
            raise ValueError(f"controller produced a non-positive step: {delta}")
        if buyer_turn:
            buyer_clock -= delta
        else:
            seller_clock += delta
        rounds += 1

        batch = []
        while b_cursor < nb and valuations[buyer_order[b_cursor]] >= buyer_clock:
            batch.append(buyer_order[b_cursor])
            b_cursor += 1
        for i in sorted(batch):
            buyer_claims.append(Claim(buyers[i].id, buyer_clock))
        batch = []
        while s_cursor < ns and costs[seller_order[s_cursor]] <= seller_clock:
            batch.append(seller_order[s_cursor])
            s_cursor += 1
        for j in sorted(batch):
            seller_claims.append(Claim(sellers[j].id, seller_clock))

        buyer_turn = not buyer_turn

    valuation_by_id = {b.id: b.valuation for b in buyers}
    cost_by_id = {s.id: s.cost for s in sellers}
    matches: list[Match] = []
    welfare = 0.0
    for bc, sc in zip(buyer_claims, seller_claims):
        if bc.price < sc.price:
            continue
        matches.append(Match(bc.agent_id, sc.agent_id, (bc.price + sc.price) / 2.0))
        welfare += valuation_by_id[bc.agent_id] - cost_by_id[sc.agent_id]

    messages = rounds * (nb + ns) + len(buyer_claims) + len(seller_claims)
    return AuctionOutcome(
        matches=matches,
        rounds=rounds,
        messages=messages,
        welfare=welfare,
        buyer_claims=buyer_claims,
        seller_claims=seller_claims,
        final_buyer_clock=buyer_clock,
        final_seller_clock=seller_clock,
    )


def oracle_max_welfare(
    buyers: Sequence[BuyerLike], sellers: Sequence[SellerLike]
) -> float:
    """Efficient-matching benchmark: pair sorted valuations against sorted costs."""
    vals = sorted((b.valuation for b in buyers), reverse=True)
    cost = sorted(s.cost for s in sellers)
    total = 0.0
    for v, c in zip(vals, cost):
        if v < c:
            break
        total += v - c
    return total


def agent_utility(
    outcome: AuctionOutcome, side: str, agent_id: str, true_value: float
) -> float:
    """Trade surplus an agent realized, evaluated at its true valuation/cost."""
    for match in outcome.matches:
        if side == "buyer" and match.buyer_id == agent_id:
            return true_value - match.price
        if side == "seller" and match.seller_id == agent_id:
            return match.price - true_value
    return 0.0


def truthfulness_probe(
    buyers: Sequence[BuyerLike],
    sellers: Sequence[SellerLike],
    p_low: float,
    p_high: float,
    controller_factory: Callable[[], Controller],
    side: str,
    agent_id: str,
    misreport: float,
) -> float:
    """Utility gained by one agent misreporting while everyone else is truthful.

    The misreport drives the agent's claiming behavior; its realized utility
    is still evaluated at the true valuation/cost. Positive return means the
    deviation paid off.
    """
    if side == "buyer":
        pool = {b.id: b for b in buyers}
    elif side == "seller":
        pool = {s.id: s for s in sellers}
    else:
        raise ValueError(f"side must be 'buyer' or 'seller', got {side!r}")
    if agent_id not in pool:
        raise ValueError(f"unknown {side} id: {agent_id!r}")
    agent = pool[agent_id]
    true_value = agent.valuation if side == "buyer" else agent.cost

    truthful = run_dda(buyers, sellers, controller_factory(), p_low, p_high)
    u_truthful = agent_utility(truthful, side, agent_id, true_value)

    if side == "buyer":
        mod_buyers = [
            replace(b, valuation=misreport) if b.id == agent_id else b for b in buyers
        ]
        deviated = run_dda(mod_buyers, sellers, controller_factory(), p_low, p_high)
    else:
        mod_sellers = [
            replace(s, cost=misreport) if s.id == agent_id else s for s in sellers
        ]
        deviated = run_dda(buyers, mod_sellers, controller_factory(), p_low, p_high)
    u_deviated = agent_utility(deviated, side, agent_id, true_value)
    return u_deviated - u_truthful
