"""Closed-loop harness: one object owning simulator, odometry, controller and
limiter, advanced tick by tick; plus waypoint driving and the benchmark runs.

The measurement path mirrors what a real stack would do: read encoders, derive
joint rates, solve the rolling constraints for a twist, integrate. The twist of
the just-completed interval is evaluated at the interval's *starting* steer
angles (held from the previous tick), matching how the motion was generated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from . import odometry
from .casters import (
    BaseConfig,
    CasterJointState,
    base_fk,
    base_ik,
    joints_from_motors,
    motors_from_joint_rates,
)
from .control import (
    ControllerGains,
    DriveMode,
    Limits,
    diff_drive_controller,
    limit_twist,
    position_controller,
    project_nonholonomic,
)
from .errors import RunTimeout
from .odometry import DriftReport, OdometryState, PoseTrace, drift_metrics
from .se2 import Pose2, Twist2, relative
from .sim import SimConfig, Simulator, state_from_dict


class ControlLoop:
    """Simulated base plus everything needed to close a velocity loop on it."""

    def __init__(
        self,
        base: BaseConfig,
        sim_cfg: SimConfig,
        gains: ControllerGains = ControllerGains(),
        mode: DriveMode = DriveMode.HOLONOMIC,
        start: Pose2 = Pose2(),
    ):
        self.base = base
        self.gains = gains
        self.limits = base.limits
        self.mode = mode
        self.sim = Simulator(base, sim_cfg, start)
        self.odom = OdometryState(pose=start)
        self.target = start
        self.prev_cmd = Twist2()
        self.last_joints: list[CasterJointState] = [CasterJointState() for _ in base.casters]
        self.last_residual = 0.0
        self.truth_trace: PoseTrace = []
        self.odom_trace: PoseTrace = []
        self.command_log: list[Twist2] = []
        self.residual_log: list[float] = []
        self._prev_phis = [
            joints_from_motors(g, m).phi
            for g, m in zip(base.casters, self.sim.read_encoders())
        ]

    @property
    def time(self) -> float:
        return self.sim.state.time

    @property
    def dt(self) -> float:
        return self.sim.cfg.dt

    def snapshot(self) -> dict:
        """JSON-ready copy of everything needed to resume this loop exactly.

        The simulator's noise stream is *not* captured; restoring is exact
        for noise-free configurations (which is what episode replay uses).
        """
        return {
            "sim_state": self.sim.state.as_dict(),
            "odom": {
                "pose": list(self.odom.pose.as_tuple()),
                "distance_traveled": self.odom.distance_traveled,
                "rotation_traveled": self.odom.rotation_traveled,
            },
            "prev_cmd": list(self.prev_cmd.as_tuple()),
            "prev_phis": list(self._prev_phis),
            "target": list(self.target.as_tuple()),
            "mode": self.mode.value,
        }

    def restore(self, snap: dict) -> None:
        """Resume from a :meth:`snapshot` (traces and logs start fresh)."""
        self.sim.state = state_from_dict(snap["sim_state"])
        o = snap["odom"]
        self.odom = OdometryState(
            pose=Pose2(*o["pose"]),
            distance_traveled=o["distance_traveled"],
            rotation_traveled=o["rotation_traveled"],
        )
        self.prev_cmd = Twist2(*snap["prev_cmd"])
        self._prev_phis = list(snap["prev_phis"])
        self.target = Pose2(*snap["target"])
        self.mode = DriveMode(snap["mode"])

    def measure(self) -> None:
        """Fold the just-completed interval into the odometry estimate."""
        meas = self.sim.read_encoders()
        joints = [joints_from_motors(g, m) for g, m in zip(self.base.casters, meas)]
        interval = [
            CasterJointState(phi0, j.rho, j.phi_dot, j.rho_dot)
            for phi0, j in zip(self._prev_phis, joints)
        ]
        twist, residual = base_fk(self.base, interval)
        self.odom = odometry.update(self.odom, twist, self.dt)
        self.last_joints = joints
        self.last_residual = residual
        t = self.time
        self.truth_trace.append((t, self.sim.state.truth_pose))
        self.odom_trace.append((t, self.odom.pose))
        self.residual_log.append(residual)

    def desired_from_controller(self) -> tuple[Twist2, bool]:
        if self.mode is DriveMode.DIFFERENTIAL:
            desired, reached = diff_drive_controller(
                self.odom.pose, self.target, self.gains, self.limits
            )
            return project_nonholonomic(desired), reached
        return position_controller(self.odom.pose, self.target, self.gains, self.limits)

    def actuate(self, desired: Twist2, limits: Limits | None = None) -> None:
        """Shape ``desired`` through the slew limiter and push it to the motors."""
        cmd = limit_twist(self.prev_cmd, desired, self.dt, limits or self.limits)
        self.prev_cmd = cmd
        self.command_log.append(cmd)
        phis = [j.phi for j in self.last_joints]
        rates = base_ik(self.base, phis, cmd)
        motor_cmds = [
            motors_from_joint_rates(g, pd, rd)
            for g, (pd, rd) in zip(self.base.casters, rates)
        ]
        self.sim.step(motor_cmds)
        self._prev_phis = phis

    def tick(self, desired: Twist2 | None = None) -> bool:
        """One full control tick; returns the controller's goal-reached flag."""
        self.measure()
        if desired is None:
            desired, reached = self.desired_from_controller()
        else:
            reached = False
        self.actuate(desired)
        return reached


@dataclass
class RunResult:
    reached: bool
    duration: float  # simulated seconds
    truth_path_length: float  # m
    truth_trace: PoseTrace
    odom_trace: PoseTrace
    command_log: list[Twist2]
    residual_log: list[float]
    final_truth: Pose2
    final_odom: Pose2

    def drift(self) -> DriftReport:
        return drift_metrics(self.odom_trace, self.truth_trace)


def _path_length(trace: PoseTrace) -> float:
    total = 0.0
    for (_, a), (_, b) in zip(trace, trace[1:]):
        total += math.hypot(b.x - a.x, b.y - a.y)
    return total


def _result(loop: ControlLoop, reached: bool) -> RunResult:
    return RunResult(
        reached=reached,
        duration=loop.time,
        truth_path_length=_path_length(loop.truth_trace),
        truth_trace=loop.truth_trace,
        odom_trace=loop.odom_trace,
        command_log=loop.command_log,
        residual_log=loop.residual_log,
        final_truth=loop.sim.state.truth_pose,
        final_odom=loop.odom.pose,
    )


def run_to_goal(loop: ControlLoop, target: Pose2, timeout: float = 60.0) -> RunResult:
    """Drive until the controller reports the goal reached.

    Raises:
        RunTimeout: if the goal is not reached within ``timeout`` sim seconds.
    """
    loop.target = target
    while True:
        if loop.tick():
            return _result(loop, True)
        if loop.time > timeout:
            raise RunTimeout(f"goal not reached after {timeout:g} simulated seconds")


def drive_waypoints(
    loop: ControlLoop,
    waypoints: list[Pose2],
    capture_pos: float = 0.02,
    capture_theta: float = 0.15,
    leg_timeout: float = 30.0,
) -> RunResult:
    """Chase waypoints in order; intermediate ones are captured loosely, the
    final one to the controller's full tolerance."""
    for i, wp in enumerate(waypoints):
        final = i == len(waypoints) - 1
        loop.target = wp
        deadline = loop.time + leg_timeout
        while True:
            reached = loop.tick()
            if final:
                if reached:
                    return _result(loop, True)
            else:
                rel = relative(loop.odom.pose, wp)
                if math.hypot(rel.x, rel.y) < capture_pos and abs(rel.theta) < capture_theta:
                    break
            if loop.time > deadline:
                raise RunTimeout(
                    f"waypoint {i} not captured after {leg_timeout:g} simulated seconds"
                )
    raise ValueError("waypoint list must not be empty")


def track_twist(loop: ControlLoop, desired: Twist2, duration: float) -> RunResult:
    """Open-loop: hold one desired twist (through the limiter) for ``duration``."""
    end = loop.time + duration
    while loop.time < end - 0.5 * loop.dt:
        loop.tick(desired)
    loop.measure()  # fold the final interval so traces end synchronized
    return _result(loop, False)


# --- benchmark path shapes --------------------------------------------------


def square_waypoints(side: float) -> list[Pose2]:
    return [
        Pose2(side, 0.0, 0.0),
        Pose2(side, side, 0.0),
        Pose2(0.0, side, 0.0),
        Pose2(0.0, 0.0, 0.0),
    ]


def circle_waypoints(radius: float, points: int = 16) -> list[Pose2]:
    """A circle through the origin (center on +y), translated at heading 0."""
    out = []
    for k in range(1, points + 1):
        a = 2.0 * math.pi * k / points
        out.append(Pose2(radius * math.sin(a), radius * (1.0 - math.cos(a)), 0.0))
    return out


def spin_waypoints(revolutions: int) -> list[Pose2]:
    """In-place rotation in quarter-turn increments."""
    return [
        Pose2(0.0, 0.0, (k + 1) * math.pi / 2.0)
        for k in range(4 * revolutions)
    ]


def shape_waypoints(shape: str, length_scale: float) -> list[Pose2]:
    if shape == "square":
        return square_waypoints(length_scale)
    if shape == "circle":
        return circle_waypoints(0.5 * length_scale)
    if shape == "spin":
        return spin_waypoints(5)
    raise ValueError(f"unknown path shape: {shape!r}")


def bench_odometry(
    base: BaseConfig,
    sim_cfg: SimConfig,
    gains: ControllerGains,
    shape: str,
    length_scale: float = 1.0,
    seeds: int = 20,
) -> dict:
    """Drive ``shape`` once per seed and aggregate drift metrics.

    Returns a JSON-ready report with per-seed drift and the across-seed means.
    """
    waypoints = shape_waypoints(shape, length_scale)
    per_seed = []
    runs: list[RunResult] = []
    for k in range(seeds):
        cfg_k = replace(sim_cfg, seed=sim_cfg.seed + k)
        loop = ControlLoop(base, cfg_k, gains)
        result = drive_waypoints(loop, waypoints)
        runs.append(result)
        per_seed.append({"seed": cfg_k.seed, **result.drift().as_dict()})
    mean = lambda key: sum(row[key] for row in per_seed) / len(per_seed)  # noqa: E731
    return {
        "shape": shape,
        "length_scale": length_scale,
        "seeds": seeds,
        "note": "drift is final-pose error normalized by the truth path",
        "per_seed": per_seed,
        "mean": {
            "translation_drift_cm_per_m": mean("translation_drift_cm_per_m"),
            "rotation_drift_deg_per_rev": mean("rotation_drift_deg_per_rev"),
            "final_position_error_m": mean("final_position_error_m"),
            "final_heading_error_deg": mean("final_heading_error_deg"),
        },
        "_runs": runs,
    }


def compare_drive(
    base: BaseConfig,
    sim_cfg: SimConfig,
    gains: ControllerGains,
    goal: Pose2,
    timeout: float = 60.0,
) -> dict:
    """Noise-free race to ``goal`` in both drive modes; path lengths and times."""
    cfg = sim_cfg.noise_free()
    holo_loop = ControlLoop(base, cfg, gains, mode=DriveMode.HOLONOMIC)
    holo = run_to_goal(holo_loop, goal, timeout)
    diff_loop = ControlLoop(base, cfg, gains, mode=DriveMode.DIFFERENTIAL)
    diff = run_to_goal(diff_loop, goal, timeout)
    return {
        "goal": goal.as_tuple(),
        "holonomic_path_m": holo.truth_path_length,
        "diff_path_m": diff.truth_path_length,
        "ratio": (diff.truth_path_length / holo.truth_path_length)
        if holo.truth_path_length > 0.0
        else 1.0,
        "holonomic_time_s": holo.duration,
        "diff_time_s": diff.duration,
        "_holonomic": holo,
        "_differential": diff,
    }
