"""Dead-reckoning from measured base twists, and drift metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import TraceMismatch
from .se2 import Pose2, Twist2, compose, exp, wrap_angle

# (time_s, pose) samples at the control rate
PoseTrace = list[tuple[float, Pose2]]


@dataclass(frozen=True, slots=True)
class OdometryState:
    pose: Pose2 = Pose2()  # world-frame estimate
    distance_traveled: float = 0.0  # m, arc length of the estimate
    rotation_traveled: float = 0.0  # rad, |omega| dt accumulator


def update(s: OdometryState, v: Twist2, dt: float) -> OdometryState:
    """Advance the estimate by one tick of body twist ``v`` (exact arc step)."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    return OdometryState(
        pose=compose(s.pose, exp(v, dt)),
        distance_traveled=s.distance_traveled + v.speed() * dt,
        rotation_traveled=s.rotation_traveled + abs(v.omega) * dt,
    )


@dataclass(frozen=True, slots=True)
class DriftReport:
    translation_drift: float  # cm of final error per meter of truth distance
    rotation_drift: float  # deg of final error per 360 deg of truth rotation
    final_position_error: float  # m
    final_heading_error: float  # deg
    truth_distance: float  # m
    truth_rotation: float  # deg
    distance_degenerate: bool = False  # truth never translated; drift forced 0
    rotation_degenerate: bool = False  # truth never rotated; drift forced 0

    def as_dict(self) -> dict:
        return {
            "translation_drift_cm_per_m": self.translation_drift,
            "rotation_drift_deg_per_rev": self.rotation_drift,
            "final_position_error_m": self.final_position_error,
            "final_heading_error_deg": self.final_heading_error,
            "truth_distance_m": self.truth_distance,
            "truth_rotation_deg": self.truth_rotation,
            "distance_degenerate": self.distance_degenerate,
            "rotation_degenerate": self.rotation_degenerate,
        }


def drift_metrics(estimated: PoseTrace, truth: PoseTrace) -> DriftReport:
    """Final-pose drift of ``estimated`` against ``truth``, normalized by the
    truth path's arc length and accumulated rotation.

    Both traces must be sampled at the same instants. Degenerate runs (no
    translation / no rotation in truth) report 0 drift with a flag rather
    than dividing by zero.

    Raises:
        TraceMismatch: on differing lengths, fewer than 2 samples, or
            timestamps that disagree.
    """
    if len(estimated) != len(truth):
        raise TraceMismatch(
            f"trace lengths differ: {len(estimated)} vs {len(truth)}"
        )
    if len(truth) < 2:
        raise TraceMismatch("need at least 2 samples per trace")
    for i, ((te, _), (tt, _)) in enumerate(zip(estimated, truth)):
        if abs(te - tt) > 1e-9:
            raise TraceMismatch(f"timestamps diverge at sample {i}: {te} vs {tt}")

    distance = 0.0
    rotation = 0.0
    prev = truth[0][1]
    for _, pose in truth[1:]:
        distance += math.hypot(pose.x - prev.x, pose.y - prev.y)
        rotation += abs(wrap_angle(pose.theta - prev.theta))
        prev = pose
    rotation_deg = math.degrees(rotation)

    est_final = estimated[-1][1]
    truth_final = truth[-1][1]
    pos_err = math.hypot(est_final.x - truth_final.x, est_final.y - truth_final.y)
    heading_err_deg = math.degrees(abs(wrap_angle(est_final.theta - truth_final.theta)))

    no_distance = distance == 0.0
    no_rotation = rotation_deg == 0.0
    return DriftReport(
        translation_drift=0.0 if no_distance else 100.0 * pos_err / distance,
        rotation_drift=0.0 if no_rotation else heading_err_deg * 360.0 / rotation_deg,
        final_position_error=pos_err,
        final_heading_error=heading_err_deg,
        truth_distance=distance,
        truth_rotation=rotation_deg,
        distance_degenerate=no_distance,
        rotation_degenerate=no_rotation,
    )
