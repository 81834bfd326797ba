"""Teleoperation core: wire-message validation, the clutched relative mapping
from streamed operator poses to base pose targets, the dead-man watchdog, and
the tick-level loop that fuses all of it with the simulated base.

Everything here runs in simulated time and touches no sockets; the network
layer (service.py) only feeds messages in and reads telemetry out. The two
sides communicate exclusively through a latest-wins target snapshot and an
append-only event queue, both owned by TeleopHub and drained once per control
tick.
"""

from __future__ import annotations

import json
import math
import threading
from collections import deque
from dataclasses import dataclass, replace
from typing import Any

from .casters import BaseConfig
from .control import ControllerGains, DriveMode, stop_limits
from .errors import DegenerateYaw, ProtocolError
from .runner import ControlLoop
from .se2 import Pose2, Twist2, compose, relative, scale_pose
from .sim import SimConfig

PROTOCOL_VERSION = 1

# client -> server message types: required fields, optional fields
_CLIENT_SCHEMA: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "hello": (("client_name",), ("protocol_version",)),
    "pose": (("t_ms", "position", "quaternion"), ()),
    "clutch": (("engaged",), ()),
    "mode": (("drive_mode",), ()),
    "estop": ((), ()),
    "estop_release": ((), ()),
    "episode": (("action",), ("name",)),
    "config_request": ((), ()),
}


def parse_message(text: str) -> dict:
    """Validate one raw client frame; returns the parsed dict.

    Raises:
        ProtocolError: malformed JSON, unknown type, or missing/ill-typed
            fields. The caller drops the message and keeps the session.
    """
    try:
        msg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"malformed JSON: {e}") from e
    if not isinstance(msg, dict) or "type" not in msg:
        raise ProtocolError("message must be an object with a 'type' field")
    mtype = msg["type"]
    if mtype not in _CLIENT_SCHEMA:
        raise ProtocolError(f"unknown message type {mtype!r}")
    required, optional = _CLIENT_SCHEMA[mtype]
    for key in required:
        if key not in msg:
            raise ProtocolError(f"{mtype} message missing field {key!r}")
    extras = set(msg) - {"type", *required, *optional}
    if extras:
        raise ProtocolError(f"{mtype} message has unknown field(s): {', '.join(sorted(extras))}")
    if mtype == "pose":
        _validate_pose_fields(msg)
    elif mtype == "clutch" and not isinstance(msg["engaged"], bool):
        raise ProtocolError("clutch.engaged must be a boolean")
    elif mtype == "mode":
        try:
            DriveMode(msg["drive_mode"])
        except ValueError:
            raise ProtocolError(f"unknown drive_mode {msg['drive_mode']!r}") from None
    elif mtype == "episode":
        if msg["action"] not in ("start", "stop"):
            raise ProtocolError(f"episode.action must be start|stop, got {msg['action']!r}")
        if msg["action"] == "start" and not isinstance(msg.get("name"), str):
            raise ProtocolError("episode start requires a string 'name'")
    return msg


def _validate_pose_fields(msg: dict) -> None:
    if not isinstance(msg["t_ms"], int) or isinstance(msg["t_ms"], bool):
        raise ProtocolError("pose.t_ms must be an integer")
    pos = msg["position"]
    if not (isinstance(pos, list) and len(pos) == 3) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in pos
    ):
        raise ProtocolError("pose.position must be [x, y, z] numbers")
    quat = msg["quaternion"]
    if not (isinstance(quat, list) and len(quat) == 4) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in quat
    ):
        raise ProtocolError("pose.quaternion must be [w, x, y, z] numbers")
    norm = math.sqrt(sum(v * v for v in quat))
    if abs(norm - 1.0) > 1e-3:
        raise ProtocolError(f"quaternion norm {norm:.6f} too far from 1")


def pose_to_planar(position: list[float], quaternion: list[float]) -> Pose2:
    """Project a streamed 6-DoF pose to the base's planar operational space.

    x, y come from the horizontal position components; theta is the yaw of
    the device's forward (+x) axis projected to the horizontal plane. Pitch,
    roll and height are discarded.

    Raises:
        DegenerateYaw: the forward axis points within 1e-6 of vertical, so
            yaw is undefined; the caller holds the previous heading.
    """
    norm = math.sqrt(sum(v * v for v in quaternion))
    w, x, y, z = (v / norm for v in quaternion)
    # first column of the rotation matrix = rotated +x axis
    fx = 1.0 - 2.0 * (y * y + z * z)
    fy = 2.0 * (x * y + w * z)
    if math.hypot(fx, fy) < 1e-6:
        raise DegenerateYaw("device forward axis is vertical; yaw undefined")
    return Pose2(position[0], position[1], math.atan2(fy, fx))


@dataclass(frozen=True, slots=True)
class SessionState:
    """One connected operator or observer, as seen by the hub."""

    session_id: int
    client_name: str = ""
    authoritative: bool = False
    clutch_engaged: bool = False
    ref_phone: Pose2 | None = None  # planar phone pose captured at clutch-down
    ref_target: Pose2 | None = None  # base target captured at the same instant
    gain: float = 1.0
    last_msg_time: float = 0.0  # sim-time of the last accepted message
    last_t_ms: int | None = None  # monotonicity fence for pose stamps
    prev_theta: float = 0.0  # held heading across degenerate-yaw poses
    protocol_errors: int = 0


def clutch_delta(s: SessionState, phone_now: Pose2) -> Pose2:
    """Base target implied by the phone's displacement since clutch-down.

    The phone's relative motion (in its own clutch-down frame) is log-scaled
    by the session gain and replayed in the captured target's body frame; at
    unit gain the target replays the phone displacement exactly.
    """
    assert s.ref_phone is not None and s.ref_target is not None
    return compose(s.ref_target, scale_pose(relative(s.ref_phone, phone_now), s.gain))


# --- control-side actions emitted by message handling -------------------------


@dataclass(frozen=True, slots=True)
class SetTarget:
    pose: Pose2


@dataclass(frozen=True, slots=True)
class Stop:
    reason: str  # "watchdog" | "disconnect"


@dataclass(frozen=True, slots=True)
class SetMode:
    mode: DriveMode


@dataclass(frozen=True, slots=True)
class EstopEngage:
    pass


@dataclass(frozen=True, slots=True)
class EstopRelease:
    pass


@dataclass(frozen=True, slots=True)
class EpisodeStart:
    name: str


@dataclass(frozen=True, slots=True)
class EpisodeStop:
    pass


ControlAction = (
    SetTarget | Stop | SetMode | EstopEngage | EstopRelease | EpisodeStart | EpisodeStop
)


def handle_message(
    s: SessionState, msg: dict, now: float, current_target: Pose2
) -> tuple[SessionState, ControlAction | None]:
    """Apply one validated message to a session.

    Pure function: returns the updated session plus the control action it
    implies (if any). ``current_target`` is the base target snapshot used to
    anchor clutch-down capture.

    Raises:
        ProtocolError: out-of-order pose stamp (message must be dropped and
            counted; session state unchanged).
    """
    mtype = msg["type"]
    if mtype == "pose":
        if s.last_t_ms is not None and msg["t_ms"] <= s.last_t_ms:
            raise ProtocolError(
                f"pose t_ms {msg['t_ms']} not after previous {s.last_t_ms}"
            )
        try:
            planar = pose_to_planar(msg["position"], msg["quaternion"])
        except DegenerateYaw:
            planar = Pose2(msg["position"][0], msg["position"][1], s.prev_theta)
        s = replace(
            s,
            last_msg_time=now,
            last_t_ms=msg["t_ms"],
            prev_theta=planar.theta,
        )
        if not s.clutch_engaged:
            return s, None
        if s.ref_phone is None:
            # first pose after clutch-down anchors both reference frames
            s = replace(s, ref_phone=planar, ref_target=current_target)
            return s, SetTarget(current_target)
        return s, SetTarget(clutch_delta(s, planar))
    if mtype == "clutch":
        engaged = msg["engaged"]
        s = replace(
            s,
            clutch_engaged=engaged,
            ref_phone=None,
            ref_target=None,
            last_msg_time=now,
        )
        return s, None
    if mtype == "mode":
        return replace(s, last_msg_time=now), SetMode(DriveMode(msg["drive_mode"]))
    if mtype == "estop":
        return replace(s, last_msg_time=now), EstopEngage()
    if mtype == "estop_release":
        return replace(s, last_msg_time=now), EstopRelease()
    if mtype == "episode":
        if msg["action"] == "start":
            return replace(s, last_msg_time=now), EpisodeStart(msg["name"])
        return replace(s, last_msg_time=now), EpisodeStop()
    # hello / config_request carry no control action
    return replace(s, last_msg_time=now), None


def watchdog(s: SessionState, now: float, threshold_s: float) -> Stop | None:
    """Dead-man rule: silence beyond the threshold while clutched means stop."""
    if s.clutch_engaged and now - s.last_msg_time > threshold_s:
        return Stop("watchdog")
    return None


@dataclass(frozen=True, slots=True)
class TickDirectives:
    """Everything the control loop drains from the hub on one tick."""

    target: Pose2 | None
    events: tuple[ControlAction, ...]
    stop: Stop | None


class TeleopHub:
    """Session arbiter and the only shared state between network and control.

    Thread-safe; the network side calls connect/disconnect/handle, the control
    loop calls poll once per tick. The first session to connect is the
    authoritative operator; later ones observe until it disconnects.
    """

    def __init__(
        self,
        watchdog_s: float = 0.25,
        gain: float = 1.0,
        config_payload: dict | None = None,
    ):
        self.watchdog_s = watchdog_s
        self.gain = gain
        self.config_payload = config_payload or {}
        self._lock = threading.Lock()
        self._sessions: dict[int, SessionState] = {}
        self._order: list[int] = []  # connect order, for operator succession
        self._next_id = 1
        self._latest_target: Pose2 | None = None
        self._events: deque[ControlAction] = deque()
        self._pending_stop: Stop | None = None
        self._current_target = Pose2()
        self.protocol_errors = 0
        self.watchdog_stopped = False

    # -- network side ---------------------------------------------------------

    def connect(self, client_name: str = "", now: float = 0.0) -> SessionState:
        with self._lock:
            sid = self._next_id
            self._next_id += 1
            s = SessionState(
                session_id=sid,
                client_name=client_name,
                authoritative=not any(
                    t.authoritative for t in self._sessions.values()
                ),
                gain=self.gain,
                last_msg_time=now,
            )
            self._sessions[sid] = s
            self._order.append(sid)
            return s

    def disconnect(self, session_id: int) -> None:
        with self._lock:
            s = self._sessions.pop(session_id, None)
            if s is None:
                return
            self._order.remove(session_id)
            if s.authoritative:
                if s.clutch_engaged:
                    # the operator vanished mid-drive; treat like a watchdog trip
                    self._pending_stop = Stop("disconnect")
                    self._latest_target = None
                for sid in self._order:  # promote the earliest observer
                    self._sessions[sid] = replace(self._sessions[sid], authoritative=True)
                    break

    def handle(self, session_id: int, raw: str, now: float) -> dict | None:
        """Apply one raw frame; returns an immediate reply payload or None."""
        with self._lock:
            s = self._sessions.get(session_id)
            if s is None:
                return None
            try:
                msg = parse_message(raw)
            except ProtocolError as e:
                self._count_error(s)
                return {"type": "error", "message": str(e)}
            if msg["type"] == "hello":
                self._sessions[session_id] = replace(
                    s, client_name=msg["client_name"], last_msg_time=now
                )
                return {
                    "type": "hello_ack",
                    "protocol_version": PROTOCOL_VERSION,
                    "session_id": session_id,
                    "authoritative": s.authoritative,
                }
            if msg["type"] == "config_request":
                return {"type": "config", "config": self.config_payload}
            # estop is accepted from anyone; everything else needs authority
            if not s.authoritative and msg["type"] != "estop":
                return None
            try:
                new_s, action = handle_message(s, msg, now, self._current_target)
            except ProtocolError as e:
                self._count_error(s)
                return {"type": "error", "message": str(e)}
            self._sessions[session_id] = new_s
            if isinstance(action, SetTarget):
                self._latest_target = action.pose  # latest wins
            elif isinstance(action, EstopEngage):
                # Highest-priority path: drop the pending target and force
                # every session to re-clutch, so releasing the e-stop can
                # never resume motion toward a stale target.
                self._latest_target = None
                for sid, other in list(self._sessions.items()):
                    self._sessions[sid] = replace(
                        other,
                        clutch_engaged=False,
                        ref_phone=None,
                        ref_target=None,
                    )
                self._events.append(action)
            elif action is not None:
                self._events.append(action)
            return None

    def _count_error(self, s: SessionState) -> None:
        self.protocol_errors += 1
        self._sessions[s.session_id] = replace(
            s, protocol_errors=s.protocol_errors + 1
        )

    # -- control side ---------------------------------------------------------

    def poll(self, now: float) -> TickDirectives:
        """Drain targets/events and run the watchdog; called once per tick."""
        with self._lock:
            stop = self._pending_stop
            self._pending_stop = None
            for sid, s in list(self._sessions.items()):
                trip = watchdog(s, now, self.watchdog_s)
                if trip is not None:
                    stop = stop or trip
                    # force re-clutching: stale references must not replay
                    self._sessions[sid] = replace(
                        s, clutch_engaged=False, ref_phone=None, ref_target=None
                    )
            if stop is not None:
                self._latest_target = None
                self.watchdog_stopped = True
            target = self._latest_target
            if target is not None:
                self.watchdog_stopped = False
            events = tuple(self._events)
            self._events.clear()
            return TickDirectives(target=target, events=events, stop=stop)

    def note_target(self, target: Pose2) -> None:
        """Control loop reports the target in force (anchors clutch capture)."""
        with self._lock:
            self._current_target = target

    def clutch_engaged(self) -> bool:
        with self._lock:
            return any(
                s.authoritative and s.clutch_engaged for s in self._sessions.values()
            )

    def session_count(self) -> int:
        with self._lock:
            return len(self._sessions)


class TeleopLoop:
    """The serve-mode control loop: simulated base driven by hub directives.

    Advances in simulated time only; the hosting layer decides pacing. Targets
    always run through the position/unicycle controllers (closed loop on
    odometry); watchdog and e-stop replace the controller output with a
    zero-twist ramped down by the steeper stop limits.
    """

    def __init__(
        self,
        base: BaseConfig,
        sim_cfg: SimConfig,
        gains: ControllerGains = ControllerGains(),
        hub: TeleopHub | None = None,
        mode: DriveMode = DriveMode.HOLONOMIC,
        start: Pose2 = Pose2(),
        stop_decay_s: float = 0.08,
    ):
        self.hub = hub if hub is not None else TeleopHub()
        self.loop = ControlLoop(base, sim_cfg, gains, mode, start)
        self.stop_lim = stop_limits(base.limits, stop_decay_s)
        self.estop = False
        self.stopping = False  # watchdog/disconnect ramp in progress
        self.recorder: Any | None = None  # duck-typed EpisodeWriter
        self.pending_episode: ControlAction | None = None

    @property
    def time(self) -> float:
        return self.loop.time

    def tick(self) -> None:
        loop = self.loop
        d = self.hub.poll(loop.time)
        self.pending_episode = None
        for ev in d.events:
            if isinstance(ev, SetMode):
                loop.mode = ev.mode
            elif isinstance(ev, EstopEngage):
                self.estop = True
                loop.target = loop.odom.pose  # hold here after release
            elif isinstance(ev, EstopRelease):
                self.estop = False
            elif isinstance(ev, (EpisodeStart, EpisodeStop)):
                # recording is managed by the host, which owns the files
                self.pending_episode = ev
        if d.stop is not None and not self.estop:
            self.stopping = True
            loop.target = loop.odom.pose  # freeze where the base believes it is
        if d.target is not None and not self.estop:
            self.stopping = False
            loop.target = d.target
        self.hub.note_target(loop.target)

        loop.measure()
        if self.estop or self.stopping:
            # pin the target to the rolling odometry pose so that once the
            # ramp ends the target sits exactly at the rest pose — releasing
            # the e-stop or re-clutching can then never cause a jump back to
            # where the stop began
            loop.target = loop.odom.pose
            loop.actuate(Twist2(), limits=self.stop_lim)
        else:
            desired, _ = loop.desired_from_controller()
            loop.actuate(desired)
        if self.recorder is not None:
            self.recorder.append_tick(self)
