"""Planar rigid-body poses and velocities (SE(2) with exact twist integration)."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal

TWO_PI = 2.0 * math.pi

Frame = Literal["body", "world"]


def wrap_angle(theta: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    wrapped = math.remainder(theta, TWO_PI)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


@dataclass(frozen=True, slots=True)
class Pose2:
    x: float = 0.0  # m
    y: float = 0.0  # m
    theta: float = 0.0  # rad, in (-pi, pi]

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def apply(self, px: float, py: float) -> tuple[float, float]:
        """Map a point given in this pose's frame into the parent frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return (self.x + c * px - s * py, self.y + s * px + c * py)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.theta)


@dataclass(frozen=True, slots=True)
class Twist2:
    vx: float = 0.0  # m/s
    vy: float = 0.0  # m/s
    omega: float = 0.0  # rad/s
    frame: Frame = "body"

    def speed(self) -> float:
        """Magnitude of the linear velocity component."""
        return math.hypot(self.vx, self.vy)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.vx, self.vy, self.omega)


def compose(a: Pose2, b: Pose2) -> Pose2:
    """Pose composition a . b: b expressed in a's frame, mapped to a's parent."""
    c, s = math.cos(a.theta), math.sin(a.theta)
    return Pose2(
        a.x + c * b.x - s * b.y,
        a.y + s * b.x + c * b.y,
        a.theta + b.theta,
    )


def inverse(p: Pose2) -> Pose2:
    c, s = math.cos(p.theta), math.sin(p.theta)
    return Pose2(-(c * p.x + s * p.y), -(-s * p.x + c * p.y), -p.theta)


def relative(a: Pose2, b: Pose2) -> Pose2:
    """b expressed in a's frame, i.e. inverse(a) . b."""
    return compose(inverse(a), b)


def _sinc_terms(theta: float) -> tuple[float, float]:
    # A = sin(t)/t and B = (1 - cos(t))/t, with series fallbacks so both stay
    # accurate through t = 0 (1 - cos cancels catastrophically in doubles).
    if abs(theta) < 1e-6:
        t2 = theta * theta
        return 1.0 - t2 / 6.0 * (1.0 - t2 / 20.0), theta * 0.5 * (1.0 - t2 / 12.0)
    half_sin = math.sin(0.5 * theta)
    return math.sin(theta) / theta, 2.0 * half_sin * half_sin / theta


def exp(v: Twist2, dt: float) -> Pose2:
    """Pose reached after riding a constant body twist for ``dt`` seconds.

    For nonzero omega the motion is an exact circular arc of radius
    ``speed / omega``; straight-line motion is the omega -> 0 limit.
    """
    if v.frame != "body":
        raise ValueError("exp expects a body-frame twist")
    dx, dy, dtheta = v.vx * dt, v.vy * dt, v.omega * dt
    a, b = _sinc_terms(dtheta)
    return Pose2(a * dx - b * dy, b * dx + a * dy, dtheta)


def log(p: Pose2) -> Twist2:
    """Body twist that reaches ``p`` from identity in unit time (inverse of exp).

    Total for all inputs; theta = pi is accepted and maps to the +pi branch.
    """
    a, b = _sinc_terms(p.theta)
    det = a * a + b * b
    return Twist2((a * p.x + b * p.y) / det, (-b * p.x + a * p.y) / det, p.theta, "body")


def rotate_twist(v: Twist2, theta: float) -> Twist2:
    """Rotate the linear part by ``theta`` and flip the frame tag (body <-> world)."""
    c, s = math.cos(theta), math.sin(theta)
    other: Frame = "world" if v.frame == "body" else "body"
    return Twist2(c * v.vx - s * v.vy, s * v.vx + c * v.vy, v.omega, other)


def body_to_world(v: Twist2, pose: Pose2) -> Twist2:
    if v.frame != "body":
        raise ValueError("expected a body-frame twist")
    return rotate_twist(v, pose.theta)


def world_to_body(v: Twist2, pose: Pose2) -> Twist2:
    if v.frame != "world":
        raise ValueError("expected a world-frame twist")
    return rotate_twist(v, -pose.theta)


def scale_pose(p: Pose2, gain: float) -> Pose2:
    """Scale a relative pose along its geodesic: exp(gain * log(p))."""
    if gain == 1.0:
        return p
    v = log(p)
    return exp(replace(v, vx=gain * v.vx, vy=gain * v.vy, omega=gain * v.omega), 1.0)
