"""Clock-step controllers for the double auction, plus Q-table training.

Three flavors: a fixed step, a mean-reverting noisy step (discrete
Ornstein-Uhlenbeck update), and a learned policy over a small discretized
view of the auction (clock spread plus claimed fractions on both sides). The
learned policy is trained by tabular Q-learning on whole episodes whose
reward is final welfare minus a per-round charge, so it is pushed toward
closing the books in fewer, larger moves without giving up matched surplus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .auction import ClockView, run_dda
from .rng import RngStream

SPREAD_BINS = 10
CLAIM_BINS = 4
N_STATES = SPREAD_BINS * CLAIM_BINS * CLAIM_BINS
DEFAULT_MULTIPLIERS = (0.5, 1.0, 2.0, 4.0)


def discretize_view(view: ClockView) -> int:
    spread = min(max(view.spread_frac, 0.0), 1.0)
    sb = min(SPREAD_BINS - 1, int(spread * SPREAD_BINS))
    fb = min(CLAIM_BINS - 1, int(view.buyers_claimed_frac * CLAIM_BINS))
    fs = min(CLAIM_BINS - 1, int(view.sellers_claimed_frac * CLAIM_BINS))
    return (sb * CLAIM_BINS + fb) * CLAIM_BINS + fs


def _clamp(value: float, lo: float, hi: float) -> float:
    return min(max(value, lo), hi)


@dataclass(frozen=True)
class FixedStep:
    """Constant clock step."""

    delta: float

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("step must be > 0")

    def step_size(self, view: ClockView) -> float:
        return self.delta


class OUStep:
    """Noisy mean-reverting step: next = clamp(d + theta*(mu - d) + sigma*eps).

    The emitted sequence is a pure function of the supplied stream, so two
    controllers built from equal streams produce identical auctions.
    """

    def __init__(
        self,
        theta: float,
        mu: float,
        sigma: float,
        step_min: float,
        step_max: float,
        rng: RngStream,
        delta0: float | None = None,
    ):
        if not 0 < theta <= 1:
            raise ValueError("theta must be in (0, 1]")
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not 0 < step_min <= mu <= step_max:
            raise ValueError("need 0 < step_min <= mu <= step_max")
        self.theta = theta
        self.mu = mu
        self.sigma = sigma
        self.step_min = step_min
        self.step_max = step_max
        self._rng = rng
        self._delta = _clamp(mu if delta0 is None else delta0, step_min, step_max)

    def step_size(self, view: ClockView) -> float:
        out = self._delta
        eps = float(self._rng.generator.standard_normal())
        nxt = self._delta + self.theta * (self.mu - self._delta) + self.sigma * eps
        self._delta = _clamp(nxt, self.step_min, self.step_max)
        return out


def make_ou_controller(
    theta: float,
    mu: float,
    sigma: float,
    step_min: float,
    step_max: float,
    rng: RngStream,
    delta0: float | None = None,
) -> OUStep:
    return OUStep(theta, mu, sigma, step_min, step_max, rng, delta0)


@dataclass(frozen=True, eq=False)
class QStepPolicy:
    """Greedy policy over a frozen Q-table; exploration stays off."""

    q: np.ndarray
    base_step: float
    step_min: float
    step_max: float
    multipliers: tuple[float, ...] = DEFAULT_MULTIPLIERS

    def step_size(self, view: ClockView) -> float:
        state = discretize_view(view)
        action = int(np.argmax(self.q[state]))
        return _clamp(self.base_step * self.multipliers[action],
                      self.step_min, self.step_max)


@dataclass(frozen=True)
class TrainConfig:
    episodes: int
    eta: float = 0.0
    learning_rate: float = 0.1
    discount: float = 0.95
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    base_step: float = 0.25
    step_min: float = 0.01
    step_max: float = 8.0
    multipliers: tuple[float, ...] = DEFAULT_MULTIPLIERS

    def __post_init__(self):
        if self.episodes <= 0:
            raise ValueError("episodes must be > 0")
        if not self.multipliers:
            raise ValueError("action set must not be empty")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if not 0 <= self.discount <= 1:
            raise ValueError("discount must be in [0, 1]")
        for name in ("epsilon_start", "epsilon_end"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if not 0 < self.step_min <= self.step_max:
            raise ValueError("need 0 < step_min <= step_max")
        if self.base_step <= 0:
            raise ValueError("base_step must be > 0")


class _EpisodePolicy:
    """Epsilon-greedy policy that records its (state, action) path."""

    def __init__(self, q: np.ndarray, epsilon: float, rng: RngStream,
                 cfg: TrainConfig):
        self.q = q
        self.epsilon = epsilon
        self.rng = rng
        self.cfg = cfg
        self.path: list[tuple[int, int]] = []

    def step_size(self, view: ClockView) -> float:
        state = discretize_view(view)
        if float(self.rng.random()) < self.epsilon:
            action = self.rng.choice_index(len(self.cfg.multipliers))
        else:
            action = int(np.argmax(self.q[state]))
        self.path.append((state, action))
        return _clamp(self.cfg.base_step * self.cfg.multipliers[action],
                      self.cfg.step_min, self.cfg.step_max)


@dataclass
class EpisodeStats:
    episode: int
    epsilon: float
    welfare: float
    rounds: int
    reward: float


@dataclass
class TrainResult:
    policy: QStepPolicy
    episodes: list[EpisodeStats] = field(default_factory=list)


def train_q_controller(
    instance_factory: Callable[[int], "object"],
    cfg: TrainConfig,
    rng: RngStream,
) -> TrainResult:
    """Tabular Q-learning over auction episodes.

    ``instance_factory(episode)`` must return an object with ``buyers``,
    ``sellers``, ``p_low`` and ``p_high``. The episode reward
    ``welfare - eta * rounds`` is credited at termination and propagated
    backward through the recorded path; training is strictly sequential and
    deterministic for a given stream.
    """
    q = np.zeros((N_STATES, len(cfg.multipliers)))
    stats: list[EpisodeStats] = []
    for episode in range(cfg.episodes):
        if cfg.episodes > 1:
            frac = episode / (cfg.episodes - 1)
        else:
            frac = 0.0
        epsilon = cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start)
        policy = _EpisodePolicy(q, epsilon, rng, cfg)
        inst = instance_factory(episode)
        outcome = run_dda(inst.buyers, inst.sellers, policy, inst.p_low, inst.p_high)
        reward = outcome.welfare - cfg.eta * outcome.rounds
        path = policy.path
        if path:
            s, a = path[-1]
            q[s, a] += cfg.learning_rate * (reward - q[s, a])
            for t in range(len(path) - 2, -1, -1):
                s, a = path[t]
                s_next = path[t + 1][0]
                target = cfg.discount * float(q[s_next].max())
                q[s, a] += cfg.learning_rate * (target - q[s, a])
        stats.append(EpisodeStats(episode, epsilon, outcome.welfare,
                                  outcome.rounds, reward))
    policy = QStepPolicy(
        q=q, base_step=cfg.base_step, step_min=cfg.step_min,
        step_max=cfg.step_max, multipliers=cfg.multipliers,
    )
    return TrainResult(policy=policy, episodes=stats)


def save_qtable(policy: QStepPolicy, path: str | Path) -> None:
    payload = {
        "base_step": policy.base_step,
        "step_min": policy.step_min,
        "step_max": policy.step_max,
        "multipliers": list(policy.multipliers),
        "spread_bins": SPREAD_BINS,
        "claim_bins": CLAIM_BINS,
        "q": [[float(v) for v in row] for row in policy.q],
    }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )


def load_qtable(path: str | Path) -> QStepPolicy:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("spread_bins") != SPREAD_BINS or payload.get("claim_bins") != CLAIM_BINS:
        raise ValueError(f"{path}: table was built with a different discretization")
    q = np.array(payload["q"], dtype=float)
    multipliers = tuple(float(m) for m in payload["multipliers"])
    if q.shape != (N_STATES, len(multipliers)):
        raise ValueError(f"{path}: table shape {q.shape} does not match the action set")
    return QStepPolicy(
        q=q,
        base_step=float(payload["base_step"]),
        step_min=float(payload["step_min"]),
        step_max=float(payload["step_max"]),
        multipliers=multipliers,
    )
