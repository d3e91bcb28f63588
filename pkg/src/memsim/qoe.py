"""Parametric perceptual model for VR rendering buyers and edge sellers.

Real streaming-quality and image-quality metrics need decoded video; here
both are replaced by saturating-exponential proxies in the effective bitrate,
which drops as the viewer's head rotates faster. A buyer's valuation is a
currency-scaled blend of the two scores; a seller's cost is an energy charge
linear in bitrate plus a flat occupancy charge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class QoeParams:
    """Proxy-model constants.

    alpha, gamma: per-(Mbit/s) sensitivity of the streaming / image score.
    beta: per-(rad/s) head-motion penalty on effective bitrate.
    w_vmaf, w_ssim: blend weights, must sum to 1.
    lam: currency value of a perfect-quality stream.
    """

    alpha: float = 0.02
    gamma: float = 0.05
    beta: float = 1.0
    w_vmaf: float = 0.5
    w_ssim: float = 0.5
    lam: float = 10.0

    def __post_init__(self):
        for name in ("alpha", "gamma", "beta", "lam"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.w_vmaf < 0 or self.w_ssim < 0:
            raise ValueError("weights must be >= 0")
        if abs(self.w_vmaf + self.w_ssim - 1.0) > WEIGHT_TOL:
            raise ValueError(
                f"w_vmaf + w_ssim must equal 1, got {self.w_vmaf + self.w_ssim}"
            )


DEFAULT_QOE = QoeParams()


def perceptual_scores(
    bitrate: float, head_speed: float, params: QoeParams = DEFAULT_QOE
) -> tuple[float, float]:
    """(streaming score on [0, 100], image score on [0, 1]) for one viewer."""
    if bitrate < 0:
        raise ValueError("bitrate must be >= 0")
    if head_speed < 0:
        raise ValueError("head_speed must be >= 0")
    effective = bitrate / (1.0 + params.beta * head_speed)
    vmaf = 100.0 * (1.0 - math.exp(-params.alpha * effective))
    ssim = 1.0 - math.exp(-params.gamma * effective)
    return vmaf, ssim


def valuation(
    bitrate: float, head_speed: float, params: QoeParams = DEFAULT_QOE
) -> float:
    """Currency value a viewer assigns to being served at this bitrate."""
    vmaf, ssim = perceptual_scores(bitrate, head_speed, params)
    return params.lam * (params.w_vmaf * vmaf / 100.0 + params.w_ssim * ssim)


def buyer_valuation(user: "VrUser", params: QoeParams = DEFAULT_QOE) -> float:
    """Valuation of a user's configured stream."""
    return valuation(user.bitrate, user.head_speed, params)


def seller_cost(energy_price: float, base_cost: float, bitrate: float) -> float:
    """Cost of rendering one stream: energy per Mbit/s plus occupancy charge."""
    if bitrate < 0:
        raise ValueError("bitrate must be >= 0")
    return energy_price * bitrate + base_cost


@dataclass(frozen=True)
class VrUser:
    """A rendering buyer with its cached valuation."""

    id: str
    head_speed: float
    bitrate: float
    valuation: float

    def __post_init__(self):
        if self.head_speed < 0 or self.bitrate < 0 or self.valuation < 0:
            raise ValueError(f"user {self.id}: fields must be >= 0")

    @classmethod
    def from_qoe(
        cls, id: str, head_speed: float, bitrate: float,
        params: QoeParams = DEFAULT_QOE,
    ) -> "VrUser":
        return cls(id, head_speed, bitrate, valuation(bitrate, head_speed, params))


@dataclass(frozen=True)
class EdgeSeller:
    """A rendering seller with its cached per-service cost."""

    id: str
    energy_price: float
    base_cost: float
    cost: float

    def __post_init__(self):
        if self.energy_price < 0 or self.base_cost < 0:
            raise ValueError(f"seller {self.id}: prices must be >= 0")

    @classmethod
    def for_bitrate(
        cls, id: str, energy_price: float, base_cost: float, bitrate: float
    ) -> "EdgeSeller":
        return cls(id, energy_price, base_cost,
                   seller_cost(energy_price, base_cost, bitrate))
