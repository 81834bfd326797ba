"""Demonstration episode recording (JSONL, one control tick per line) and
deterministic replay verification.

Each episode file carries a ``.meta.json`` sidecar with the full config and
the loop state at recording start, so a replay can resume the exact same
closed loop and re-run the recorded targets through the controller. Lines are
flushed as they are written; an interrupted recording still ends with a
complete final line.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

from .control import DriveMode
from .errors import EpisodeFormatError
from .se2 import Pose2, Twist2, wrap_angle

if TYPE_CHECKING:  # only for type hints; avoids an import cycle
    from .teleop import TeleopLoop

EPISODE_FORMAT = "casterbase-episode/1"


@dataclass(frozen=True, slots=True)
class EpisodeRecord:
    """One control tick: the state observed at ``t`` and the action taken."""

    t: float
    odom_pose: Pose2
    truth_pose: Pose2
    target_pose: Pose2
    commanded_twist: Twist2
    joint_states: tuple[tuple[float, float, float, float], ...]  # (phi, rho, phi., rho.)
    mode: DriveMode
    clutch_engaged: bool

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "odom_pose": list(self.odom_pose.as_tuple()),
            "truth_pose": list(self.truth_pose.as_tuple()),
            "target_pose": list(self.target_pose.as_tuple()),
            "commanded_twist": list(self.commanded_twist.as_tuple()),
            "joint_states": [list(js) for js in self.joint_states],
            "mode": self.mode.value,
            "clutch_engaged": self.clutch_engaged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> EpisodeRecord:
        try:
            return cls(
                t=float(d["t"]),
                odom_pose=Pose2(*d["odom_pose"]),
                truth_pose=Pose2(*d["truth_pose"]),
                target_pose=Pose2(*d["target_pose"]),
                commanded_twist=Twist2(*d["commanded_twist"]),
                joint_states=tuple(tuple(js) for js in d["joint_states"]),
                mode=DriveMode(d["mode"]),
                clutch_engaged=bool(d["clutch_engaged"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise EpisodeFormatError(str(e)) from e


def meta_sidecar_path(episode_path: str | Path) -> Path:
    return Path(episode_path).with_suffix(".meta.json")


class EpisodeWriter:
    """Appends one record per tick; the meta sidecar is written up front."""

    def __init__(self, path: str | Path, meta: dict):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        meta_sidecar_path(self.path).write_text(
            json.dumps({"format": EPISODE_FORMAT, **meta}, sort_keys=True, indent=2)
        )
        self._f = self.path.open("w")
        self.ticks = 0

    def append(self, record: EpisodeRecord) -> None:
        self._f.write(json.dumps(record.to_dict(), sort_keys=True))
        self._f.write("\n")
        self._f.flush()
        self.ticks += 1

    def append_tick(self, tl: TeleopLoop) -> None:
        """Record the tick a TeleopLoop just completed (state at the tick's
        start, action commanded during it)."""
        loop = tl.loop
        t, truth = loop.truth_trace[-1]
        _, odom = loop.odom_trace[-1]
        self.append(
            EpisodeRecord(
                t=t,
                odom_pose=odom,
                truth_pose=truth,
                target_pose=loop.target,
                commanded_twist=loop.prev_cmd,
                joint_states=tuple(
                    (j.phi, j.rho, j.phi_dot, j.rho_dot) for j in loop.last_joints
                ),
                mode=loop.mode,
                clutch_engaged=tl.hub.clutch_engaged(),
            )
        )

    def close(self) -> None:
        if not self._f.closed:
            self._f.close()

    def __enter__(self) -> EpisodeWriter:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def start_meta(tl: TeleopLoop, config_dict: dict, name: str) -> dict:
    """Sidecar payload for a recording that starts at ``tl``'s current state."""
    return {"name": name, "config": config_dict, "start": tl.loop.snapshot()}


def read_episode(path: str | Path) -> tuple[dict | None, list[EpisodeRecord]]:
    """Parse an episode file and its meta sidecar (None if the sidecar is
    missing). An empty file is a valid zero-tick episode.

    Raises:
        EpisodeFormatError: malformed line (named by number) or
            non-increasing timestamps.
    """
    p = Path(path)
    if not p.exists():
        raise EpisodeFormatError(f"episode file not found: {p}")
    meta = None
    side = meta_sidecar_path(p)
    if side.exists():
        try:
            meta = json.loads(side.read_text())
        except json.JSONDecodeError as e:
            raise EpisodeFormatError(f"meta sidecar {side} is not valid JSON: {e}") from e
    records: list[EpisodeRecord] = []
    with p.open() as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                rec = EpisodeRecord.from_dict(d)
            except (json.JSONDecodeError, EpisodeFormatError) as e:
                raise EpisodeFormatError(f"line {lineno}: {e}") from e
            if records and rec.t <= records[-1].t:
                raise EpisodeFormatError(
                    f"line {lineno}: tick time {rec.t} not after {records[-1].t}"
                )
            records.append(rec)
    return meta, records


def replay(path: str | Path) -> dict:
    """Re-execute a recorded episode's targets through a fresh noise-free sim.

    The loop is restored from the meta sidecar, then each recorded target is
    fed to the controller tick by tick; the report gives the maximum
    deviation of the replayed truth pose from the recorded one. Segments
    where the recorded commands came from safety ramps rather than the
    controller (watchdog stops, e-stop) replay only approximately and will
    show up as deviation.

    Raises:
        EpisodeFormatError: unreadable episode, missing/invalid sidecar
            state, or tick spacing that disagrees with the configured dt.
    """
    from .config import config_from_dict  # local import: config imports nothing from here
    from .runner import ControlLoop

    meta, records = read_episode(path)
    report = {
        "episode": Path(path).name,
        "ticks": len(records),
        "max_position_deviation_m": 0.0,
        "max_heading_deviation_rad": 0.0,
        "max_command_deviation": 0.0,
    }
    if not records:
        return report
    if meta is None or "start" not in meta or "config" not in meta:
        raise EpisodeFormatError(
            "replay requires the .meta.json sidecar with config and start state"
        )
    cfg = config_from_dict(meta["config"])
    loop = ControlLoop(cfg.base, cfg.sim.noise_free(), cfg.gains)
    loop.restore(meta["start"])

    dt = loop.dt
    max_pos = 0.0
    max_head = 0.0
    max_cmd = 0.0
    for i, rec in enumerate(records):
        if abs(loop.time - rec.t) > 1e-9:
            raise EpisodeFormatError(
                f"record {i}: tick time {rec.t} does not match replay clock "
                f"{loop.time} (dt {dt})"
            )
        truth = loop.sim.state.truth_pose
        max_pos = max(
            max_pos, math.hypot(truth.x - rec.truth_pose.x, truth.y - rec.truth_pose.y)
        )
        max_head = max(max_head, abs(wrap_angle(truth.theta - rec.truth_pose.theta)))
        loop.mode = rec.mode
        loop.target = rec.target_pose
        loop.tick()
        replayed_cmd = loop.command_log[-1]
        max_cmd = max(
            max_cmd,
            max(
                abs(a - b)
                for a, b in zip(replayed_cmd.as_tuple(), rec.commanded_twist.as_tuple())
            ),
        )
    report["max_position_deviation_m"] = max_pos
    report["max_heading_deviation_rad"] = max_head
    report["max_command_deviation"] = max_cmd
    return report
