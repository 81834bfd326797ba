"""Independent checks of the kinematics: a finite-difference no-slip probe and
randomized round-trip harnesses.

The probe is purely geometric: it rides the base along the commanded twist for
a tiny time window, swings the steer joint by its returned rate, and measures
how far the contact point's displacement deviates from ideal rolling. It never
touches the closed-form rate solution, so it catches sign and convention bugs
that a round trip through the same formulas would miss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import casters, se2
from .casters import CasterGeometry, CasterJointState
from .se2 import Twist2


def no_slip_probe(
    g: CasterGeometry,
    phi: float,
    v: Twist2,
    phi_dot: float,
    rho_dot: float,
    delta: float = 1e-7,
) -> float:
    """Slip speed (m/s) implied by riding ``v`` for ``delta`` seconds while the
    steer joint moves at ``phi_dot`` and the wheel rolls at ``rho_dot``.

    Evaluated symmetrically about t = 0 (the window is [-delta/2, +delta/2]) so
    the probe is second-order accurate and the returned value reflects genuine
    constraint violation, not curvature of the finite step. Ideal rolling over
    the window advances the contact point by rho_dot * wheel_radius * delta
    along the wheel heading at the window center.
    """
    half = 0.5 * delta
    fwd = se2.exp(v, half)
    back = se2.exp(v, -half)
    cfx, cfy = fwd.apply(*casters.contact_point(g, phi + phi_dot * half))
    cbx, cby = back.apply(*casters.contact_point(g, phi - phi_dot * half))
    roll = rho_dot * g.wheel_radius * delta
    ex, ey = roll * math.cos(phi), roll * math.sin(phi)
    return math.hypot((cfx - cbx) - ex, (cfy - cby) - ey) / delta


def random_geometry(rng: np.random.Generator) -> CasterGeometry:
    """A physically plausible caster: mount within 0.3 m of the origin, a
    signed longitudinal offset well clear of the singular band, small lateral
    offset, hand-sized wheel."""
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return CasterGeometry(
        mount_radius=rng.uniform(0.0, 0.3),
        mount_angle=rng.uniform(-math.pi, math.pi),
        offset_x=sign * rng.uniform(0.005, 0.05),
        offset_y=rng.uniform(-0.02, 0.02),
        wheel_radius=rng.uniform(0.03, 0.08),
    )


def random_twist(rng: np.random.Generator, v_max: float = 1.0, omega_max: float = 2.0) -> Twist2:
    """Uniform direction, speed up to v_max, omega up to omega_max."""
    angle = rng.uniform(-math.pi, math.pi)
    speed = v_max * rng.random()
    return Twist2(speed * math.cos(angle), speed * math.sin(angle), omega_max * rng.uniform(-1, 1))


@dataclass(frozen=True)
class KinematicsCheck:
    samples: int
    max_round_trip_error: float  # worst |recovered - commanded| twist component
    max_residual: float  # worst least-squares residual on consistent rates
    max_slip: float  # worst delta-normalized slip from the probe
    round_trip_tol: float = 1e-9
    residual_tol: float = 1e-12
    slip_tol: float = 1e-5

    @property
    def passed(self) -> bool:
        return (
            self.max_round_trip_error < self.round_trip_tol
            and self.max_residual < self.residual_tol
            and self.max_slip < self.slip_tol
        )


def check_kinematics(base: casters.BaseConfig, samples: int, seed: int = 0) -> KinematicsCheck:
    """Run the IK->FK round trip on ``base`` and the no-slip probe on random
    single casters, ``samples`` times each."""
    rng = np.random.default_rng(seed)
    worst_rt = 0.0
    worst_res = 0.0
    for _ in range(samples):
        phis = [rng.uniform(-math.pi, math.pi) for _ in base.casters]
        v = random_twist(rng)
        rates = casters.base_ik(base, phis, v)
        states = [
            CasterJointState(phi, 0.0, pd, rd) for phi, (pd, rd) in zip(phis, rates)
        ]
        recovered, residual = casters.base_fk(base, states)
        worst_rt = max(
            worst_rt,
            abs(recovered.vx - v.vx),
            abs(recovered.vy - v.vy),
            abs(recovered.omega - v.omega),
        )
        worst_res = max(worst_res, residual)

    worst_slip = 0.0
    for _ in range(samples):
        g = random_geometry(rng)
        phi = rng.uniform(-math.pi, math.pi)
        v = random_twist(rng)
        phi_dot, rho_dot = casters.caster_ik(g, phi, v)
        worst_slip = max(worst_slip, no_slip_probe(g, phi, v, phi_dot, rho_dot))

    return KinematicsCheck(
        samples=samples,
        max_round_trip_error=worst_rt,
        max_residual=worst_res,
        max_slip=worst_slip,
    )
