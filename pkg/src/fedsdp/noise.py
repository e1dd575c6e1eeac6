"""Noise injection: contribution-driven Gaussian noise scheduling.

The scheduler turns a client's private contribution ratio R into a privacy
tolerance

    T = R - alpha * ln(delta)          (delta < 1, so the log term is > 0)

and a per-coordinate Gaussian noise scale

    sigma = 2 * C * sqrt(max(T, beta)) / (epsilon * n)

where C is the clipping bound, n the client's training-set size, and
2C/n the L2 sensitivity of the clipped upload. beta floors the noise so a
low-contribution round still gets baseline protection.

Three reference schedules live behind the same interface for comparison
runs: a constant worst-case schedule (R pinned to 1), a geometric decay
with the same total noise energy as the constant schedule, and a schedule
scaled by the client's previous-round parameter movement. They are
calibrated stand-ins, not faithful reimplementations of any published
method.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .model import ModelParams, add_gaussian_noise, clip


@dataclass(frozen=True)
class DpParams:
    """Differential-privacy knobs for one client."""

    epsilon: float
    delta: float
    alpha: float
    beta: float
    clip_bound: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigurationError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError(f"delta must lie in (0, 1), got {self.delta}")
        if self.alpha <= 0:
            raise ConfigurationError(f"alpha must be > 0, got {self.alpha}")
        if self.beta <= 0:
            raise ConfigurationError(f"beta must be > 0, got {self.beta}")
        if self.clip_bound <= 0:
            raise ConfigurationError(f"clip_bound must be > 0, got {self.clip_bound}")


def sensitivity(dp: DpParams, dataset_size: int) -> float:
    """L2 sensitivity 2C/n of a clipped upload from n training samples."""
    if dataset_size < 1:
        raise ConfigurationError(f"dataset_size must be >= 1, got {dataset_size}")
    return 2.0 * dp.clip_bound / dataset_size


def privacy_tolerance(ratio: float, dp: DpParams) -> float:
    """Privacy tolerance T = R - alpha * ln(delta)."""
    return ratio - dp.alpha * math.log(dp.delta)


def fedsdp_sigma(tolerance: float, dp: DpParams, dataset_size: int) -> float:
    """Noise scale 2C*sqrt(max(T, beta)) / (epsilon * n)."""
    return sensitivity(dp, dataset_size) * math.sqrt(max(tolerance, dp.beta)) / dp.epsilon


def clamp_ratio(ratio: float) -> float:
    """Clamp a contribution ratio into [0, 1] (a Shapley value can be
    negative, but the scheduler treats R as a rate)."""
    return min(max(ratio, 0.0), 1.0)


@dataclass(frozen=True)
class RoundContext:
    """Everything a schedule may consult for one (client, round) decision."""

    dp: DpParams
    dataset_size: int
    ratio: float | None = None
    round_index: int | None = None
    total_rounds: int | None = None
    prev_delta_norm: float | None = None

    def require(self, *fields: str) -> None:
        for name in fields:
            if getattr(self, name) is None:
                raise ConfigurationError(
                    f"round context is missing {name!r}, required by this noise policy"
                )


class NoisePolicy:
    """Maps a round context to a per-coordinate noise standard deviation."""

    name = "abstract"
    protects = True  # False: skip clipping and noising entirely

    def sigma(self, ctx: RoundContext) -> float:
        raise NotImplementedError


class FedSdpPolicy(NoisePolicy):
    """Contribution-driven schedule: clamp R, then tolerance, then scale."""

    name = "fedsdp"

    def sigma(self, ctx: RoundContext) -> float:
        ctx.require("ratio")
        tolerance = privacy_tolerance(clamp_ratio(ctx.ratio), ctx.dp)
        return fedsdp_sigma(tolerance, ctx.dp, ctx.dataset_size)


class ConstantPolicy(NoisePolicy):
    """Worst-case flat schedule: the contribution ratio pinned to 1."""

    name = "constant"

    def sigma(self, ctx: RoundContext) -> float:
        dp = ctx.dp
        return (sensitivity(dp, ctx.dataset_size)
                * math.sqrt(1.0 - dp.alpha * math.log(dp.delta)) / dp.epsilon)


class TimeVaryingPolicy(NoisePolicy):
    """Geometric decay A * rho^t whose squared schedule sums to the same
    total as the constant schedule over the run, so the two inject equal
    noise energy and differ only in shape."""

    name = "time_varying"

    def __init__(self, rho_decay: float = 0.997):
        if not 0.0 < rho_decay < 1.0:
            raise ConfigurationError(f"rho_decay must lie in (0, 1), got {rho_decay}")
        self.rho_decay = rho_decay

    def sigma(self, ctx: RoundContext) -> float:
        ctx.require("round_index", "total_rounds")
        rho = self.rho_decay
        base = ConstantPolicy().sigma(ctx)
        t_total = ctx.total_rounds
        amplitude = base * math.sqrt(t_total * (1.0 - rho**2) / (1.0 - rho**(2 * t_total)))
        return amplitude * rho**ctx.round_index


class SensitivityPolicy(NoisePolicy):
    """Constant schedule scaled by the client's previous-round parameter
    movement, normalized by the clipping bound and clamped to [0.25, 1]."""

    name = "sensitivity"
    min_scale = 0.25

    def sigma(self, ctx: RoundContext) -> float:
        ctx.require("prev_delta_norm")
        scale = min(max(ctx.prev_delta_norm / ctx.dp.clip_bound, self.min_scale), 1.0)
        return ConstantPolicy().sigma(ctx) * scale


class NoProtection(NoisePolicy):
    """Plain federated averaging: no clipping, no noise."""

    name = "none"
    protects = False

    def sigma(self, ctx: RoundContext) -> float:
        return 0.0


POLICIES = {
    "fedsdp": FedSdpPolicy,
    "constant": ConstantPolicy,
    "time_varying": TimeVaryingPolicy,
    "sensitivity": SensitivityPolicy,
    "none": NoProtection,
}


def make_policy(name: str, rho_decay: float = 0.997) -> NoisePolicy:
    """Instantiate a policy by its config key."""
    if name not in POLICIES:
        raise ConfigurationError(
            f"unknown noise policy {name!r}; choose from {sorted(POLICIES)}"
        )
    if name == "time_varying":
        return TimeVaryingPolicy(rho_decay)
    return POLICIES[name]()


def policy_sigma(policy: NoisePolicy, ctx: RoundContext) -> float:
    """Evaluate a policy; always nonnegative."""
    return policy.sigma(ctx)


def protect_upload(params: ModelParams, sigma: float, clip_bound: float,
                   rng: np.random.Generator) -> ModelParams:
    """Clip to the L2 ball of radius clip_bound, then add N(0, sigma^2)
    noise per coordinate. Clipping strictly precedes noising so the 2C/n
    sensitivity bound holds for the released vector."""
    return add_gaussian_noise(clip(params, clip_bound), sigma, rng)
