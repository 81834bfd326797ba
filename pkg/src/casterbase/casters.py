"""Caster module geometry, gearbox algebra, and the joint<->base velocity maps.

Each caster has a steer joint about a vertical axis and a roll joint at the
wheel axle; the ground contact point sits at a 2D offset from the steer axis
(expressed in the wheel frame), which is what makes the base holonomic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .control import Limits
from .errors import RankDeficient, SingularOffset
from .se2 import TWO_PI, Twist2, wrap_angle

# Below this longitudinal offset the steer axis passes (numerically) through
# the contact point and the steering rate solution blows up.
MIN_OFFSET_X = 1e-4


@dataclass(frozen=True, slots=True)
class CasterGeometry:
    mount_radius: float  # m, distance of the steer axis from the base origin
    mount_angle: float  # rad, bearing of the steer axis from the base origin
    offset_x: float = -0.014  # m, steer axis -> contact, along the wheel heading
    offset_y: float = 0.005  # m, lateral component of the same vector
    wheel_radius: float = 0.05  # m
    steer_ratio: float = 12.8  # motor rad per steer joint rad
    drive_ratio: float = 6.75  # motor rad per wheel rad
    couple_ratio: float = 0.0  # wheel rad induced per steer joint rad
    steer_encoder_offset: float = 0.0  # rad, absolute encoder zero

    def __post_init__(self) -> None:
        if self.wheel_radius <= 0.0:
            raise ValueError("wheel_radius must be > 0")
        if self.mount_radius < 0.0:
            raise ValueError("mount_radius must be >= 0")
        if self.steer_ratio <= 0.0 or self.drive_ratio <= 0.0:
            raise ValueError("gear ratios must be > 0")


@dataclass(frozen=True, slots=True)
class CasterJointState:
    phi: float = 0.0  # rad, steer joint position, wrapped to (-pi, pi]
    rho: float = 0.0  # rad, roll joint position, unbounded accumulator
    phi_dot: float = 0.0  # rad/s
    rho_dot: float = 0.0  # rad/s

    def __post_init__(self) -> None:
        object.__setattr__(self, "phi", wrap_angle(self.phi))


@dataclass(frozen=True, slots=True)
class MotorState:
    steer_motor_pos: float = 0.0  # rad
    steer_motor_vel: float = 0.0  # rad/s
    drive_motor_pos: float = 0.0  # rad
    drive_motor_vel: float = 0.0  # rad/s
    abs_steer_reading: float = 0.0  # rad, in [0, 2*pi)


@dataclass(frozen=True)
class BaseConfig:
    casters: tuple[CasterGeometry, ...]
    limits: Limits = Limits()

    def __post_init__(self) -> None:
        object.__setattr__(self, "casters", tuple(self.casters))
        if len(self.casters) < 3:
            raise ValueError("base needs at least 3 casters")
        for i, g in enumerate(self.casters):
            if abs(g.offset_x) <= MIN_OFFSET_X:
                raise SingularOffset(
                    f"caster {i}: |offset_x| = {abs(g.offset_x):g} m <= {MIN_OFFSET_X:g} m; "
                    "steering is singular without a longitudinal contact offset"
                )
        # All three base DOF must be observable from the stacked rolling
        # constraints; probe at an arbitrary non-symmetric steer configuration.
        phis = [0.37 + 0.9 * i for i in range(len(self.casters))]
        a = np.array([row for i, g in enumerate(self.casters) for row in _constraint_rows(g, phis[i])])
        if np.linalg.matrix_rank(a) < 3:
            raise RankDeficient("caster layout cannot observe all of (vx, vy, omega)")


def default_base_config(limits: Limits | None = None) -> BaseConfig:
    """Four casters at the corners of a 0.40 x 0.36 m rectangle."""
    corners = [(0.20, 0.18), (-0.20, 0.18), (-0.20, -0.18), (0.20, -0.18)]
    casters = tuple(
        CasterGeometry(mount_radius=math.hypot(x, y), mount_angle=math.atan2(y, x))
        for x, y in corners
    )
    return BaseConfig(casters=casters, limits=limits if limits is not None else Limits())


def contact_point(g: CasterGeometry, phi: float) -> tuple[float, float]:
    """Ground contact point in the base frame at steer angle ``phi``."""
    sx = g.mount_radius * math.cos(g.mount_angle)
    sy = g.mount_radius * math.sin(g.mount_angle)
    cp, sp = math.cos(phi), math.sin(phi)
    return (sx + cp * g.offset_x - sp * g.offset_y, sy + sp * g.offset_x + cp * g.offset_y)


def _constraint_rows(g: CasterGeometry, phi: float) -> tuple[list[float], list[float]]:
    """The two rows this caster contributes to the stacked (vx, vy, omega)
    rolling-constraint system (coefficients only; see base_fk for the rhs)."""
    cx, cy = contact_point(g, phi)
    cp, sp = math.cos(phi), math.sin(phi)
    return ([cp, sp, cx * sp - cy * cp], [-sp, cp, cx * cp + cy * sp])


def caster_ik(g: CasterGeometry, phi: float, v: Twist2) -> tuple[float, float]:
    """Steer and roll rates that keep this caster's contact rolling without
    slip while the base moves with body twist ``v``.

    The base twist drags the contact point with velocity u; its component
    across the wheel must be absorbed by steering about the offset lever arm,
    and the remainder rolls. Always solvable thanks to the nonzero offset.

    Args:
        g: caster geometry; |offset_x| must exceed the singular band.
        phi: current steer joint angle in rad.
        v: body-frame base twist.

    Returns:
        (phi_dot, rho_dot) in rad/s.

    Raises:
        SingularOffset: if |offset_x| <= 1e-4 m.
    """
    if v.frame != "body":
        raise ValueError("caster_ik expects a body-frame twist")
    if abs(g.offset_x) <= MIN_OFFSET_X:
        raise SingularOffset(
            f"|offset_x| = {abs(g.offset_x):g} m <= {MIN_OFFSET_X:g} m"
        )
    cx, cy = contact_point(g, phi)
    ux = v.vx - v.omega * cy
    uy = v.vy + v.omega * cx
    cp, sp = math.cos(phi), math.sin(phi)
    u_par = cp * ux + sp * uy
    u_perp = -sp * ux + cp * uy
    phi_dot = -u_perp / g.offset_x
    rho_dot = (u_par + (g.offset_y / g.offset_x) * u_perp) / g.wheel_radius
    return phi_dot, rho_dot


def base_ik(cfg: BaseConfig, phis: list[float], v: Twist2) -> list[tuple[float, float]]:
    """Per-caster joint rates realizing body twist ``v`` at steer angles ``phis``."""
    if len(phis) != len(cfg.casters):
        raise ValueError(f"expected {len(cfg.casters)} steer angles, got {len(phis)}")
    rates = []
    for i, (g, phi) in enumerate(zip(cfg.casters, phis)):
        try:
            rates.append(caster_ik(g, phi, v))
        except SingularOffset as err:
            raise SingularOffset(f"caster {i}: {err}") from None
    return rates


# Pivot guard for the normal-equations path. Squaring the system means a pivot
# is only trustworthy well above its own rounding noise (~eps * accumulated
# magnitude); anything below defers to the SVD pseudo-solution, which also
# performs the definitive rank test. 1e-13 sits ~450x above double rounding.
_PIVOT_RTOL = 1e-13


def base_fk(cfg: BaseConfig, states: list[CasterJointState]) -> tuple[Twist2, float]:
    """Least-squares base twist from measured joint states, plus slip residual.

    Each caster contributes two linear equations in (vx, vy, omega) from its
    rolling constraint; the stacked 2Nx3 system is solved via the 3x3 normal
    equations (SVD minimum-norm fallback under extreme conditioning). The
    residual is the RMS constraint violation and serves as a slip indicator:
    zero on rates produced by base_ik, positive on noisy or slipping rates.

    Raises:
        RankDeficient: if the stacked matrix has numerical rank < 3.
    """
    n = len(cfg.casters)
    if len(states) != n:
        raise ValueError(f"expected {n} joint states, got {len(states)}")
    rows: list[tuple[float, float, float, float]] = []
    for g, st in zip(cfg.casters, states):
        cx, cy = contact_point(g, st.phi)
        cp, sp = math.cos(st.phi), math.sin(st.phi)
        rows.append(
            (cp, sp, cx * sp - cy * cp, g.wheel_radius * st.rho_dot + g.offset_y * st.phi_dot)
        )
        rows.append((-sp, cp, cx * cp + cy * sp, -g.offset_x * st.phi_dot))

    m11 = m12 = m13 = m22 = m23 = m33 = 0.0
    r1 = r2 = r3 = 0.0
    for a1, a2, a3, b in rows:
        m11 += a1 * a1
        m12 += a1 * a2
        m13 += a1 * a3
        m22 += a2 * a2
        m23 += a2 * a3
        m33 += a3 * a3
        r1 += a1 * b
        r2 += a2 * b
        r3 += a3 * b

    solution = _solve_spd3(m11, m12, m13, m22, m23, m33, r1, r2, r3)
    if solution is None:
        solution = _solve_min_norm(rows)
    vx, vy, omega = solution

    sq = 0.0
    for a1, a2, a3, b in rows:
        err = a1 * vx + a2 * vy + a3 * omega - b
        sq += err * err
    return Twist2(vx, vy, omega, "body"), math.sqrt(sq / len(rows))


def _solve_spd3(
    m11: float, m12: float, m13: float,
    m22: float, m23: float, m33: float,
    r1: float, r2: float, r3: float,
) -> tuple[float, float, float] | None:
    """Cholesky solve of the 3x3 normal equations; None if too ill-conditioned."""
    if m11 <= 0.0:
        return None
    l11 = math.sqrt(m11)
    l21 = m12 / l11
    l31 = m13 / l11
    p2 = m22 - l21 * l21
    if p2 <= (m22 + l21 * l21) * _PIVOT_RTOL:
        return None
    l22 = math.sqrt(p2)
    l32 = (m23 - l21 * l31) / l22
    p3 = m33 - l31 * l31 - l32 * l32
    if p3 <= (m33 + l31 * l31 + l32 * l32) * _PIVOT_RTOL:
        return None
    l33 = math.sqrt(p3)
    y1 = r1 / l11
    y2 = (r2 - l21 * y1) / l22
    y3 = (r3 - l31 * y1 - l32 * y2) / l33
    x3 = y3 / l33
    x2 = (y2 - l32 * x3) / l22
    x1 = (y1 - l21 * x2 - l31 * x3) / l11
    return (x1, x2, x3)


def _solve_min_norm(rows: list[tuple[float, float, float, float]]) -> tuple[float, float, float]:
    a = np.array([r[:3] for r in rows])
    b = np.array([r[3] for r in rows])
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    rank_tol = s[0] * max(a.shape) * np.finfo(float).eps if s[0] > 0.0 else 0.0
    if s[-1] <= rank_tol:
        raise RankDeficient(
            "stacked rolling constraints have rank < 3 at this steer configuration"
        )
    x = vt.T @ ((u.T @ b) / s)
    return (float(x[0]), float(x[1]), float(x[2]))


def joints_from_motors(g: CasterGeometry, m: MotorState) -> CasterJointState:
    """Recover joint positions and rates from motor readings.

    The steer position comes from the absolute encoder (no homing needed);
    the roll channel subtracts the gear-train coupling induced by steering.
    """
    phi = wrap_angle(m.abs_steer_reading - g.steer_encoder_offset)
    phi_dot = m.steer_motor_vel / g.steer_ratio
    rho_dot = m.drive_motor_vel / g.drive_ratio - g.couple_ratio * phi_dot
    rho = m.drive_motor_pos / g.drive_ratio - g.couple_ratio * (m.steer_motor_pos / g.steer_ratio)
    return CasterJointState(phi, rho, phi_dot, rho_dot)


def motors_from_joint_rates(g: CasterGeometry, phi_dot: float, rho_dot: float) -> tuple[float, float]:
    """Exact inverse of the rate part of joints_from_motors."""
    return (g.steer_ratio * phi_dot, g.drive_ratio * (rho_dot + g.couple_ratio * phi_dot))
