"""Deterministic fixed-timestep kinematic simulator of the caster base.

The motors execute their commands exactly; noise lives at the ground contact.
Slip scales each wheel's effective roll rate and jitter perturbs its effective
steering direction, so the truth pose (computed from the effective rates)
diverges from what the encoders — which watch the motor side — report. That
gap is precisely what the odometry drift metrics measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .casters import BaseConfig, CasterJointState, MotorState, base_fk
from .errors import CommandLengthMismatch
from .se2 import TWO_PI, Pose2, compose, exp


@dataclass(frozen=True, slots=True)
class SimConfig:
    dt: float = 0.004  # s (250 Hz)
    slip_noise_std: float = 0.01  # fraction of wheel roll rate
    steer_noise_std: float = 0.002  # rad/s
    encoder_counts_per_motor_rev: int = 4096
    abs_encoder_counts_per_rev: int = 4096
    seed: int = 0
    quantize_encoders: bool = True  # off = ideal encoders (noise-free studies)

    def __post_init__(self) -> None:
        if not 0.0 < self.dt <= 0.1:
            raise ValueError("dt must be in (0, 0.1]")
        if self.slip_noise_std < 0.0 or self.steer_noise_std < 0.0:
            raise ValueError("noise stds must be >= 0")
        if self.encoder_counts_per_motor_rev < 1 or self.abs_encoder_counts_per_rev < 1:
            raise ValueError("encoder counts must be >= 1")

    def noise_free(self) -> SimConfig:
        return replace(
            self, slip_noise_std=0.0, steer_noise_std=0.0, quantize_encoders=False
        )


@dataclass(frozen=True)
class SimState:
    truth_pose: Pose2
    casters: tuple[CasterJointState, ...]  # true joint states (motor side)
    motors: tuple[MotorState, ...]  # true, unquantized motor states
    prev_motor_pos: tuple[tuple[float, float], ...]  # (steer, drive) pos one dt ago
    time: float = 0.0
    last_twist: tuple[float, float, float] = (0.0, 0.0, 0.0)  # truth twist of last step
    last_scrub: float = 0.0  # rolling-constraint RMS violation of last step

    def as_dict(self) -> dict:
        return {
            "time": self.time,
            "truth_pose": self.truth_pose.as_tuple(),
            "casters": [(c.phi, c.rho, c.phi_dot, c.rho_dot) for c in self.casters],
            "motors": [
                (
                    m.steer_motor_pos,
                    m.steer_motor_vel,
                    m.drive_motor_pos,
                    m.drive_motor_vel,
                    m.abs_steer_reading,
                )
                for m in self.motors
            ],
            "prev_motor_pos": [list(p) for p in self.prev_motor_pos],
        }


def state_from_dict(d: dict) -> SimState:
    """Rebuild a SimState saved by :meth:`SimState.as_dict` (episode replay)."""
    return SimState(
        truth_pose=Pose2(*d["truth_pose"]),
        casters=tuple(CasterJointState(*row) for row in d["casters"]),
        motors=tuple(MotorState(*row) for row in d["motors"]),
        prev_motor_pos=tuple((p[0], p[1]) for p in d["prev_motor_pos"]),
        time=d["time"],
    )


def initial_state(base: BaseConfig, start: Pose2 = Pose2()) -> SimState:
    n = len(base.casters)
    return SimState(
        truth_pose=start,
        casters=tuple(CasterJointState() for _ in range(n)),
        motors=tuple(
            MotorState(abs_steer_reading=g.steer_encoder_offset % TWO_PI)
            for g in base.casters
        ),
        prev_motor_pos=tuple((0.0, 0.0) for _ in range(n)),
    )


def step(
    state: SimState,
    motor_cmds: list[tuple[float, float]],
    cfg: SimConfig,
    base: BaseConfig,
    rng: np.random.Generator,
) -> SimState:
    """Advance one tick under (steer_motor_vel, drive_motor_vel) commands.

    Joint and motor positions integrate the commanded rates (what the
    hardware would measure); the truth pose integrates the slip-perturbed
    contact rates. Two normal draws per caster per tick keep the stream
    layout independent of the noise settings.
    """
    n = len(base.casters)
    if len(motor_cmds) != n:
        raise CommandLengthMismatch(f"expected {n} motor commands, got {len(motor_cmds)}")

    # .tolist() yields plain floats; numpy scalars would poison the pure-python
    # hot path downstream (and slow it several-fold).
    draws = rng.standard_normal(2 * n).tolist()
    dt = cfg.dt
    effective = []
    new_casters = []
    new_motors = []
    new_prev = []
    for i, (g, joint, motor) in enumerate(zip(base.casters, state.casters, state.motors)):
        steer_vel, drive_vel = motor_cmds[i]
        phi_dot = steer_vel / g.steer_ratio
        rho_dot = drive_vel / g.drive_ratio - g.couple_ratio * phi_dot
        eff_phi_dot = phi_dot + cfg.steer_noise_std * draws[2 * i]
        eff_rho_dot = rho_dot * (1.0 + cfg.slip_noise_std * draws[2 * i + 1])
        effective.append(CasterJointState(joint.phi, joint.rho, eff_phi_dot, eff_rho_dot))

        phi = joint.phi + phi_dot * dt
        new_casters.append(CasterJointState(phi, joint.rho + rho_dot * dt, phi_dot, rho_dot))
        steer_pos = motor.steer_motor_pos + steer_vel * dt
        drive_pos = motor.drive_motor_pos + drive_vel * dt
        new_motors.append(
            MotorState(
                steer_motor_pos=steer_pos,
                steer_motor_vel=steer_vel,
                drive_motor_pos=drive_pos,
                drive_motor_vel=drive_vel,
                abs_steer_reading=(phi + g.steer_encoder_offset) % TWO_PI,
            )
        )
        new_prev.append((motor.steer_motor_pos, motor.drive_motor_pos))

    twist, scrub = base_fk(base, effective)
    return SimState(
        truth_pose=compose(state.truth_pose, exp(twist, dt)),
        casters=tuple(new_casters),
        motors=tuple(new_motors),
        prev_motor_pos=tuple(new_prev),
        time=state.time + dt,
        last_twist=twist.as_tuple(),
        last_scrub=scrub,
    )


def _floor_quantize(value: float, resolution: float) -> float:
    return math.floor(value / resolution) * resolution


def read_encoders(state: SimState, cfg: SimConfig) -> list[MotorState]:
    """Measured motor states: positions floored to the encoder grid, velocities
    as first differences of the quantized positions over dt."""
    if not cfg.quantize_encoders:
        return list(state.motors)
    res = TWO_PI / cfg.encoder_counts_per_motor_rev
    abs_res = TWO_PI / cfg.abs_encoder_counts_per_rev
    out = []
    for motor, (prev_steer, prev_drive) in zip(state.motors, state.prev_motor_pos):
        steer_q = _floor_quantize(motor.steer_motor_pos, res)
        drive_q = _floor_quantize(motor.drive_motor_pos, res)
        out.append(
            MotorState(
                steer_motor_pos=steer_q,
                steer_motor_vel=(steer_q - _floor_quantize(prev_steer, res)) / cfg.dt,
                drive_motor_pos=drive_q,
                drive_motor_vel=(drive_q - _floor_quantize(prev_drive, res)) / cfg.dt,
                abs_steer_reading=_floor_quantize(motor.abs_steer_reading, abs_res),
            )
        )
    return out


class Simulator:
    """Owns a state stream and its RNG; all stepping goes through here."""

    def __init__(self, base: BaseConfig, cfg: SimConfig, start: Pose2 = Pose2()):
        self.base = base
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.state = initial_state(base, start)

    def step(self, motor_cmds: list[tuple[float, float]]) -> SimState:
        self.state = step(self.state, motor_cmds, self.cfg, self.base, self.rng)
        return self.state

    def read_encoders(self) -> list[MotorState]:
        return read_encoders(self.state, self.cfg)
