"""Measurement values and densities used to weight particles.

Two measurements are derived from consecutive speed samples. The first is
the lateral force magnitude sqrt(a^2 + s^2 w^2), scored by a trapezoid that
is flat below a comfort bound and falls to zero at a physical one. The
second combines acceleration with the approach toward a target speed and is
scored by a heavy-tailed Cauchy density, which tolerates erratic driving.
Densities are used unnormalized; the filter renormalizes weights per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

GRAVITY = 9.80665


@dataclass(frozen=True)
class LateralParams:
    """Soft and hard lateral-force bounds, m/s^2 (defaults 0.55 g and 0.65 g)."""

    g1: float = 0.55 * GRAVITY
    g2: float = 0.65 * GRAVITY
    gravity: float = GRAVITY

    def __post_init__(self):
        if not (0 < self.g1 < self.g2):
            raise ValueError("need 0 < g1 < g2")


@dataclass(frozen=True)
class TargetSpeedParams:
    """Lookahead lag K (samples), approach gain c (1/s), Cauchy scale sigma (m/s^2)."""

    lag_k: int = 12
    gain_c: float = 0.05
    sigma: float = 1.5

    def __post_init__(self):
        if self.lag_k < 0:
            raise ValueError("lag_k must be nonnegative")
        if self.gain_c <= 0 or self.sigma <= 0:
            raise ValueError("gain_c and sigma must be positive")


def accel(s_k: float, s_k1: float, dt: float) -> float:
    """Longitudinal acceleration as the difference quotient of two speeds."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return (s_k1 - s_k) / dt


def lateral_force(s_k: float, s_k1: float, dt: float, omega_rad: float) -> float:
    """Lateral force magnitude sqrt(a^2 + s^2 w^2) in m/s^2."""
    a = accel(s_k, s_k1, dt)
    return math.sqrt(a * a + (s_k * omega_rad) ** 2)


def lateral_density(y1: float, params: LateralParams) -> float:
    """Trapezoid score: 1 below g1, linear ramp to 0 at g2, 0 beyond."""
    if y1 < params.g1:
        return 1.0
    if y1 < params.g2:
        return (y1 - params.g2) / (params.g1 - params.g2)
    return 0.0


def target_speed_value(s_k: float, s_k1: float, dt: float, gain_c: float) -> float:
    """Acceleration plus c times current speed; equals c*sbar in steady state."""
    return accel(s_k, s_k1, dt) + gain_c * s_k


def cauchy_density(y: float, location: float, scale: float) -> float:
    if scale <= 0:
        raise ValueError("scale must be positive")
    z = (y - location) / scale
    return 1.0 / (math.pi * scale * (1.0 + z * z))


def y2_density(y2: float, sbar: float, params: TargetSpeedParams) -> float:
    """Cauchy score of a target-speed measurement against estimate sbar.

    The measurement is built from speeds K samples old and scored against
    the target speed estimated now; the caller owns that lag bookkeeping.
    """
    return cauchy_density(y2, params.gain_c * sbar, params.sigma)
