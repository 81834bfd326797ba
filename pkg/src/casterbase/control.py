"""Velocity limiting and pose-goal controllers for both drive modes."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .se2 import Pose2, Twist2, log, relative, wrap_angle

_HALF_PI = 0.5 * math.pi


class DriveMode(str, Enum):
    HOLONOMIC = "holonomic"
    DIFFERENTIAL = "differential"


@dataclass(frozen=True, slots=True)
class Limits:
    v_max: float = 1.0  # m/s
    omega_max: float = 2.0  # rad/s
    a_max: float = 1.0  # m/s^2
    alpha_max: float = 4.0  # rad/s^2

    def __post_init__(self) -> None:
        for name in ("v_max", "omega_max", "a_max", "alpha_max"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"Limits.{name} must be strictly positive")


@dataclass(frozen=True, slots=True)
class ControllerGains:
    k_pos: float = 2.0  # 1/s
    k_theta: float = 2.0  # 1/s
    pos_tol: float = 0.005  # m
    theta_tol: float = 0.0087  # rad (~0.5 deg)
    k_rho: float = 1.0  # 1/s
    k_alpha: float = 3.0  # 1/s
    k_beta: float = -2.0  # 1/s

    def __post_init__(self) -> None:
        if self.pos_tol <= 0.0 or self.theta_tol <= 0.0:
            raise ValueError("goal tolerances must be strictly positive")
        # Stability region of the polar-coordinate unicycle law.
        if not (self.k_rho > 0.0 and self.k_beta < 0.0 and self.k_alpha - self.k_rho > 0.0):
            raise ValueError(
                "unicycle gains must satisfy k_rho > 0, k_beta < 0, k_alpha - k_rho > 0"
            )


def saturate_twist(v: Twist2, lim: Limits) -> Twist2:
    """Clamp linear speed to v_max (direction preserved) and |omega| to omega_max."""
    vx, vy = v.vx, v.vy
    speed = math.hypot(vx, vy)
    if speed > lim.v_max:
        scale = lim.v_max / speed
        vx, vy = vx * scale, vy * scale
    omega = min(max(v.omega, -lim.omega_max), lim.omega_max)
    return Twist2(vx, vy, omega, v.frame)


def limit_twist(prev: Twist2, desired: Twist2, dt: float, lim: Limits) -> Twist2:
    """One tick of command shaping: magnitude clamp, then slew from ``prev``.

    Args:
        prev: twist commanded on the previous tick (body frame).
        desired: requested twist for this tick (body frame).
        dt: tick duration in seconds, > 0.
        lim: speed and acceleration bounds.

    Returns:
        A body twist within v_max/omega_max whose change from ``prev`` is
        bounded by a_max*dt in linear norm and alpha_max*dt in omega.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    sat = saturate_twist(desired, lim)
    dvx, dvy = sat.vx - prev.vx, sat.vy - prev.vy
    dv = math.hypot(dvx, dvy)
    max_dv = lim.a_max * dt
    if dv > max_dv:
        scale = max_dv / dv
        dvx, dvy = dvx * scale, dvy * scale
    domega = sat.omega - prev.omega
    max_domega = lim.alpha_max * dt
    if domega > max_domega:
        domega = max_domega
    elif domega < -max_domega:
        domega = -max_domega
    return Twist2(prev.vx + dvx, prev.vy + dvy, prev.omega + domega, "body")


def stop_limits(lim: Limits, decay_s: float) -> Limits:
    """Slew bounds for an emergency ramp-down reaching zero within ``decay_s``
    from any in-envelope twist (watchdog / e-stop use; steeper than a_max)."""
    return replace(lim, a_max=lim.v_max / decay_s, alpha_max=lim.omega_max / decay_s)


def goal_reached(current: Pose2, target: Pose2, g: ControllerGains) -> bool:
    rel = relative(current, target)
    return math.hypot(rel.x, rel.y) < g.pos_tol and abs(rel.theta) < g.theta_tol


def position_controller(
    current: Pose2, target: Pose2, g: ControllerGains, lim: Limits
) -> tuple[Twist2, bool]:
    """Holonomic proportional controller on the body-frame pose error.

    Returns the saturated command and a goal-reached flag; the command is the
    zero twist once both tolerances are met.
    """
    rel = relative(current, target)
    if math.hypot(rel.x, rel.y) < g.pos_tol and abs(rel.theta) < g.theta_tol:
        return Twist2(), True
    e = log(rel)
    cmd = Twist2(g.k_pos * e.vx, g.k_pos * e.vy, g.k_theta * e.omega, "body")
    return saturate_twist(cmd, lim), False


def diff_drive_controller(
    current: Pose2, target: Pose2, g: ControllerGains, lim: Limits
) -> tuple[Twist2, bool]:
    """Polar-coordinate unicycle law driving (distance, bearing, approach angle)
    to zero; vy is identically zero. Reverse driving engages when the target
    sits behind the wheel axle (|bearing| > pi/2); the tie at exactly pi/2
    prefers forward.

    Returns:
        (command, goal_reached). Once the position is captured within pos_tol
        the law degenerates to an in-place rotation onto the target heading.
    """
    rel = relative(current, target)
    rho = math.hypot(rel.x, rel.y)
    if rho < g.pos_tol:
        if abs(rel.theta) < g.theta_tol:
            return Twist2(), True
        omega = min(max(g.k_theta * rel.theta, -lim.omega_max), lim.omega_max)
        return Twist2(0.0, 0.0, omega, "body"), False

    alpha = math.atan2(rel.y, rel.x)  # bearing of target in the body frame
    beta = wrap_angle(rel.theta - alpha)  # target heading relative to the approach line
    if abs(alpha) > _HALF_PI:
        # Drive backward: measure both angles about the reversed body axis.
        alpha = wrap_angle(alpha + math.pi)
        beta = wrap_angle(beta + math.pi)
        v = -g.k_rho * rho * math.cos(alpha)
    else:
        v = g.k_rho * rho * math.cos(alpha)
    omega = g.k_alpha * alpha + g.k_beta * beta
    cmd = Twist2(v, 0.0, omega, "body")
    return saturate_twist(cmd, lim), False


def project_nonholonomic(v: Twist2) -> Twist2:
    """Zero the lateral component; safety projection for differential mode."""
    if v.vy == 0.0:
        return v
    return Twist2(v.vx, 0.0, v.omega, v.frame)
