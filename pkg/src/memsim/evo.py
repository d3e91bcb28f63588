"""Sensing-service market as multi-population replicator dynamics.

Sensing providers are clustered into populations; each population spreads its
members across virtual regions that post reward pools. A region's reward is
shared in proportion to sensing capability, so the per-member payoff falls as
the capability-weighted serving mass grows. Shares evolve under replicator
dynamics integrated with fixed-step RK4, and each region's physical-virtual
sync frequency is proportional to the serving mass it attracts.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .parallel import ordered_map

SIMPLEX_TOL = 1e-9


class SimplexDriftError(RuntimeError):
    """Integration left the probability simplex by more than the guard allows."""


@dataclass(frozen=True)
class VspRegion:
    """A virtual region: reward pool per epoch and upload rate per unit mass."""

    id: str
    reward_pool: float
    sync_coeff: float

    def __post_init__(self):
        if self.reward_pool < 0:
            raise ValueError(f"region {self.id}: reward_pool must be >= 0")
        if self.sync_coeff <= 0:
            raise ValueError(f"region {self.id}: sync_coeff must be > 0")


@dataclass(frozen=True)
class SspPopulation:
    """A cluster of sensing providers with shared capability and costs."""

    id: str
    size: int
    capability: float
    learning_rate: float
    cost: tuple[float, ...]

    def __post_init__(self):
        if not isinstance(self.size, int) or self.size <= 0:
            raise ValueError(f"population {self.id}: size must be a positive integer")
        if self.capability <= 0:
            raise ValueError(f"population {self.id}: capability must be > 0")
        if self.learning_rate <= 0:
            raise ValueError(f"population {self.id}: learning_rate must be > 0")
        if any(c < 0 for c in self.cost):
            raise ValueError(f"population {self.id}: costs must be >= 0")


@dataclass(frozen=True)
class SensingMarket:
    regions: tuple[VspRegion, ...]
    populations: tuple[SspPopulation, ...]

    def __post_init__(self):
        if not self.regions or not self.populations:
            raise ValueError("market needs at least one region and one population")
        for pop in self.populations:
            if len(pop.cost) != len(self.regions):
                raise ValueError(
                    f"population {pop.id}: cost vector length {len(pop.cost)} "
                    f"!= number of regions {len(self.regions)}"
                )

    @cached_property
    def rewards(self) -> np.ndarray:
        return np.array([r.reward_pool for r in self.regions], dtype=float)

    @cached_property
    def sync_coeffs(self) -> np.ndarray:
        return np.array([r.sync_coeff for r in self.regions], dtype=float)

    @cached_property
    def weights(self) -> np.ndarray:
        """Per-population mass weight: member count times capability."""
        return np.array(
            [p.size * p.capability for p in self.populations], dtype=float
        )

    @cached_property
    def capabilities(self) -> np.ndarray:
        return np.array([p.capability for p in self.populations], dtype=float)

    @cached_property
    def learning_rates(self) -> np.ndarray:
        return np.array([p.learning_rate for p in self.populations], dtype=float)

    @cached_property
    def costs(self) -> np.ndarray:
        return np.array([p.cost for p in self.populations], dtype=float)

    def region_index(self, region_id: str) -> int:
        for i, region in enumerate(self.regions):
            if region.id == region_id:
                return i
        raise ValueError(f"unknown region id: {region_id!r}")

    def population_index(self, pop_id: str) -> int:
        for i, pop in enumerate(self.populations):
            if pop.id == pop_id:
                return i
        raise ValueError(f"unknown population id: {pop_id!r}")

    def with_reward(self, region_id: str, reward: float) -> "SensingMarket":
        """Copy of the market with one region's reward pool replaced."""
        v = self.region_index(region_id)
        regions = tuple(
            VspRegion(r.id, reward if i == v else r.reward_pool, r.sync_coeff)
            for i, r in enumerate(self.regions)
        )
        return SensingMarket(regions, self.populations)


def validate_state(market: SensingMarket, shares: np.ndarray) -> np.ndarray:
    shares = np.asarray(shares, dtype=float)
    expected = (len(market.populations), len(market.regions))
    if shares.shape != expected:
        raise ValueError(f"state shape {shares.shape} != {expected}")
    if shares.min() < -SIMPLEX_TOL or shares.max() > 1 + SIMPLEX_TOL:
        raise ValueError("shares must lie in [0, 1]")
    row_err = np.abs(shares.sum(axis=1) - 1.0).max()
    if row_err > SIMPLEX_TOL:
        raise ValueError(f"shares of some population sum to 1 off by {row_err:.3e}")
    return shares


def uniform_state(market: SensingMarket) -> np.ndarray:
    p, v = len(market.populations), len(market.regions)
    return np.full((p, v), 1.0 / v)


def serving_masses(market: SensingMarket, shares: np.ndarray) -> np.ndarray:
    """Capability-weighted mass serving each region."""
    return market.weights @ shares


def serving_mass(market: SensingMarket, shares: np.ndarray, region_id: str) -> float:
    return float(serving_masses(market, shares)[market.region_index(region_id)])


def payoffs(market: SensingMarket, shares: np.ndarray) -> np.ndarray:
    """Per-(population, region) payoff of a member serving that region.

    A member's reward share is its capability's fraction of the serving mass;
    the mass is floored at the member's own capability so a lone deviator's
    payoff stays finite.
    """
    masses = serving_masses(market, shares)
    caps = market.capabilities[:, np.newaxis]
    denom = np.maximum(masses[np.newaxis, :], caps)
    return caps * market.rewards[np.newaxis, :] / denom - market.costs


def payoff(
    market: SensingMarket, shares: np.ndarray, pop_id: str, region_id: str
) -> float:
    p = market.population_index(pop_id)
    v = market.region_index(region_id)
    return float(payoffs(market, shares)[p, v])


def replicator_derivative(market: SensingMarket, shares: np.ndarray) -> np.ndarray:
    """Share growth rates: learning rate times advantage over the population mean."""
    u = payoffs(market, shares)
    mean = (shares * u).sum(axis=1, keepdims=True)
    return market.learning_rates[:, np.newaxis] * shares * (u - mean)


def sync_frequencies(market: SensingMarket, shares: np.ndarray) -> np.ndarray:
    return market.sync_coeffs * serving_masses(market, shares)


def sync_frequency(market: SensingMarket, shares: np.ndarray, region_id: str) -> float:
    return float(sync_frequencies(market, shares)[market.region_index(region_id)])


@dataclass
class Trajectory:
    times: list[float]
    states: list[np.ndarray]
    converged: bool
    steps: int
    final_payoffs: np.ndarray
    max_drift: float

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _rk4_step(market: SensingMarket, x: np.ndarray, h: float) -> np.ndarray:
    k1 = replicator_derivative(market, x)
    k2 = replicator_derivative(market, x + 0.5 * h * k1)
    k3 = replicator_derivative(market, x + 0.5 * h * k2)
    k4 = replicator_derivative(market, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolve(
    market: SensingMarket,
    init: np.ndarray | None = None,
    step: float = 0.01,
    tol: float = 1e-6,
    max_steps: int = 10**6,
    record_every: int = 1,
) -> Trajectory:
    """Integrate the replicator dynamics until the flow stalls or steps run out.

    Convergence means the largest share derivative drops below ``tol``. After
    every RK4 step the state is renormalized back onto the simplex; drift
    beyond the 1e-9 guard raises SimplexDriftError (the step size is too
    large for the instance).
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    if tol < 0:
        raise ValueError("tol must be >= 0")
    if record_every <= 0:
        raise ValueError("record_every must be > 0")

    x = uniform_state(market) if init is None else validate_state(market, init).copy()
    times = [0.0]
    states = [x.copy()]
    max_drift = 0.0
    converged = False
    steps_taken = 0

    deriv = replicator_derivative(market, x)
    for i in range(1, max_steps + 1):
        if np.abs(deriv).max() < tol:
            converged = True
            break
        x_new = _rk4_step(market, x, step)
        neg = max(0.0, -float(x_new.min()))
        row_err = float(np.abs(x_new.sum(axis=1) - 1.0).max())
        drift = max(neg, row_err)
        if drift > SIMPLEX_TOL:
            raise SimplexDriftError(
                f"simplex drift {drift:.3e} at step {i} exceeds {SIMPLEX_TOL}; "
                "reduce the integration step"
            )
        max_drift = max(max_drift, drift)
        np.clip(x_new, 0.0, None, out=x_new)
        x_new /= x_new.sum(axis=1, keepdims=True)
        x = x_new
        steps_taken = i
        if i % record_every == 0:
            times.append(i * step)
            states.append(x.copy())
        deriv = replicator_derivative(market, x)

    final_time = steps_taken * step
    if times[-1] != final_time:
        times.append(final_time)
        states.append(x.copy())
    return Trajectory(
        times=times,
        states=states,
        converged=converged,
        steps=steps_taken,
        final_payoffs=payoffs(market, x),
        max_drift=max_drift,
    )


@dataclass(frozen=True)
class SweepPoint:
    reward: float
    shares: np.ndarray
    masses: np.ndarray
    frequencies: np.ndarray
    converged: bool


def reward_sweep(
    market: SensingMarket,
    region_id: str,
    rewards: list[float],
    init: np.ndarray | None = None,
    step: float = 0.01,
    tol: float = 1e-6,
    max_steps: int = 10**6,
) -> list[SweepPoint]:
    """Equilibrium composition for each reward level posted on one region.

    Grid points are independent and may run on worker threads; results are
    assembled in grid order either way.
    """
    if any(r < 0 for r in rewards):
        raise ValueError("rewards must be >= 0")
    market.region_index(region_id)  # validate up front

    def solve(reward: float) -> SweepPoint:
        swept = market.with_reward(region_id, reward)
        traj = evolve(swept, init=init, step=step, tol=tol, max_steps=max_steps,
                      record_every=max_steps)
        final = traj.final_state
        return SweepPoint(
            reward=reward,
            shares=final,
            masses=serving_masses(swept, final),
            frequencies=sync_frequencies(swept, final),
            converged=traj.converged,
        )

    return ordered_map(solve, list(rewards))
