"""Per-particle scalar Kalman filters for yaw and target speed.

Two small filters run alongside every particle: a two-state filter on yaw
angle and yaw rate, measured by the bearing of the particle's current link,
and a one-state random walk on the target speed, measured by the link's
speed limit. Both models are time-invariant for a fixed sampling interval,
so the covariances (and hence the gains) are identical across particles and
are carried once per population; only the means live on the particles.

Angles are kept in degrees throughout, matching the parameter table units;
conversion to rad/s happens at the likelihood boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geo import wrap_angle

# Weakly informative spread for the initial yaw-rate estimate, deg/s.
INIT_OMEGA_STD = 20.0

# Feasibility margin for the target-speed projection, m/s^2. The projected
# speed satisfies the lateral bound with at least this slack, realizing the
# strict inequality of the constraint set.
PROJECTION_MARGIN = 1e-6

DEG2RAD = math.pi / 180.0


@dataclass(frozen=True)
class KfNoiseParams:
    """Random-walk intensities and measurement stds for both filters.

    sigma_omega: yaw-rate walk, deg/s^2 per sqrt(Hz); increment variance dt*sigma^2.
    sigma_theta: bearing measurement std, degrees.
    sigma_s1:    target-speed walk, m/s^2 per sqrt(Hz); increment variance dt*sigma^2.
    sigma_s2:    speed-limit measurement std, m/s.
    """

    sigma_omega: float = 5.0
    sigma_theta: float = 15.0
    sigma_s1: float = 0.5
    sigma_s2: float = 10.0

    def __post_init__(self):
        for name in ("sigma_omega", "sigma_theta", "sigma_s1", "sigma_s2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class YawFilterState:
    """Yaw angle (deg, wrapped to [-180, 180)) and yaw rate (deg/s) with 2x2 covariance."""

    theta: float
    omega: float
    p00: float
    p01: float
    p11: float


@dataclass
class TargetSpeedState:
    sbar: float
    var: float


def initial_yaw_state(bearing_deg: float, params: KfNoiseParams) -> YawFilterState:
    return YawFilterState(
        theta=wrap_angle(bearing_deg),
        omega=0.0,
        p00=params.sigma_theta ** 2,
        p01=0.0,
        p11=INIT_OMEGA_STD ** 2,
    )


def initial_speed_state(limit_mps: float, params: KfNoiseParams) -> TargetSpeedState:
    return TargetSpeedState(sbar=limit_mps, var=params.sigma_s2 ** 2)


def yaw_time_update(state: YawFilterState, dt: float, params: KfNoiseParams) -> YawFilterState:
    """Propagate yaw by dt: theta advances by dt*omega, rate walks."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    theta = wrap_angle(state.theta + dt * state.omega)
    p00 = state.p00 + dt * (2.0 * state.p01 + dt * state.p11)
    p01 = state.p01 + dt * state.p11
    p11 = state.p11 + dt * params.sigma_omega ** 2
    return YawFilterState(theta, state.omega, p00, p01, p11)


def yaw_meas_update(state: YawFilterState, link_bearing: float, params: KfNoiseParams) -> YawFilterState:
    """Fuse a link-bearing measurement; the innovation is wrapped to [-180, 180)."""
    s = state.p00 + params.sigma_theta ** 2
    k0 = state.p00 / s
    k1 = state.p01 / s
    nu = wrap_angle(link_bearing - state.theta)
    theta = wrap_angle(state.theta + k0 * nu)
    omega = state.omega + k1 * nu
    p00 = (1.0 - k0) * state.p00
    p01 = (1.0 - k0) * state.p01
    p11 = state.p11 - k1 * state.p01
    return YawFilterState(theta, omega, p00, p01, p11)


def speed_time_update(state: TargetSpeedState, dt: float, params: KfNoiseParams) -> TargetSpeedState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    return TargetSpeedState(state.sbar, state.var + dt * params.sigma_s1 ** 2)


def speed_meas_update(state: TargetSpeedState, speed_limit: float, params: KfNoiseParams) -> TargetSpeedState:
    if speed_limit <= 0:
        raise ValueError("speed limit must be positive")
    gain = state.var / (state.var + params.sigma_s2 ** 2)
    sbar = state.sbar + gain * (speed_limit - state.sbar)
    return TargetSpeedState(sbar, (1.0 - gain) * state.var)


def project_target_speed(sbar: float, a: float, omega_rad: float, g1: float) -> tuple[float, bool]:
    """Clamp a target speed so it never implies a lateral force >= g1.

    `omega_rad` is the yaw rate in rad/s, `a` the longitudinal acceleration.
    Returns (speed, feasible). When |a| already exceeds the bound the
    feasible set is empty: the speed collapses to 0 and feasible is False.
    """
    if g1 <= 0:
        raise ValueError("g1 must be positive")
    bound = g1 - PROJECTION_MARGIN
    if abs(a) >= bound:
        return 0.0, False
    s = max(sbar, 0.0)
    w = abs(omega_rad)
    if w < 1e-15:
        return s, True
    s_max = math.sqrt(bound * bound - a * a) / w
    return min(s, s_max), True
