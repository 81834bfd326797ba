"""Teleoperation core: message validation, pose projection, clutch mapping,
session arbitration, watchdog, and e-stop behavior — all in simulated time,
with no sockets involved.
"""

import json
import math
import random

import pytest

from casterbase.casters import default_base_config
from casterbase.control import ControllerGains, DriveMode
from casterbase.errors import DegenerateYaw, ProtocolError
from casterbase.se2 import Pose2, Twist2, compose, relative
from casterbase.sim import SimConfig
from casterbase.teleop import (
    PROTOCOL_VERSION,
    EstopEngage,
    SessionState,
    SetTarget,
    Stop,
    TeleopHub,
    TeleopLoop,
    clutch_delta,
    handle_message,
    parse_message,
    pose_to_planar,
    watchdog,
)

IDENT_QUAT = [1.0, 0.0, 0.0, 0.0]


def quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return [
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ]


def quat_about(axis, angle):
    s = math.sin(angle / 2.0)
    return [math.cos(angle / 2.0), axis[0] * s, axis[1] * s, axis[2] * s]


def pose_msg(t_ms, x, y, z=0.0, quat=None):
    return {
        "type": "pose",
        "t_ms": t_ms,
        "position": [x, y, z],
        "quaternion": list(quat) if quat is not None else list(IDENT_QUAT),
    }


# --- message validation -------------------------------------------------------


class TestParseMessage:
    def test_valid_messages_of_every_type(self):
        msgs = [
            {"type": "hello", "client_name": "ui", "protocol_version": 1},
            pose_msg(5, 0.1, 0.2, 0.3),
            {"type": "clutch", "engaged": True},
            {"type": "mode", "drive_mode": "differential"},
            {"type": "estop"},
            {"type": "estop_release"},
            {"type": "episode", "action": "start", "name": "demo"},
            {"type": "episode", "action": "stop"},
            {"type": "config_request"},
        ]
        for m in msgs:
            assert parse_message(json.dumps(m))["type"] == m["type"]

    def test_malformed_json(self):
        with pytest.raises(ProtocolError, match="malformed JSON"):
            parse_message("{not json")

    def test_non_object(self):
        with pytest.raises(ProtocolError, match="object with a 'type'"):
            parse_message("[1, 2, 3]")

    def test_missing_type(self):
        with pytest.raises(ProtocolError, match="'type'"):
            parse_message(json.dumps({"engaged": True}))

    def test_unknown_type(self):
        with pytest.raises(ProtocolError, match="unknown message type 'warp'"):
            parse_message(json.dumps({"type": "warp"}))

    def test_missing_required_field(self):
        m = pose_msg(1, 0, 0)
        del m["quaternion"]
        with pytest.raises(ProtocolError, match="missing field 'quaternion'"):
            parse_message(json.dumps(m))

    def test_unknown_extra_field_rejected(self):
        m = pose_msg(1, 0, 0)
        m["velocity"] = [0, 0, 0]
        with pytest.raises(ProtocolError, match="unknown field.*velocity"):
            parse_message(json.dumps(m))

    def test_t_ms_must_be_integer(self):
        with pytest.raises(ProtocolError, match="t_ms must be an integer"):
            parse_message(json.dumps(pose_msg(1.5, 0, 0)))
        with pytest.raises(ProtocolError, match="t_ms must be an integer"):
            parse_message(json.dumps(pose_msg(True, 0, 0)))

    def test_position_shape_and_types(self):
        m = pose_msg(1, 0, 0)
        m["position"] = [0.0, 1.0]
        with pytest.raises(ProtocolError, match="position"):
            parse_message(json.dumps(m))
        m["position"] = [0.0, 1.0, True]
        with pytest.raises(ProtocolError, match="position"):
            parse_message(json.dumps(m))

    def test_quaternion_shape(self):
        m = pose_msg(1, 0, 0)
        m["quaternion"] = [1.0, 0.0, 0.0]
        with pytest.raises(ProtocolError, match="quaternion"):
            parse_message(json.dumps(m))

    def test_quaternion_norm_gate(self):
        m = pose_msg(1, 0, 0, quat=[1.002, 0.0, 0.0, 0.0])
        with pytest.raises(ProtocolError, match="norm"):
            parse_message(json.dumps(m))
        # small drift from unit norm is tolerated (and normalized downstream)
        m = pose_msg(1, 0, 0, quat=[1.0005, 0.0, 0.0, 0.0])
        parse_message(json.dumps(m))

    def test_clutch_engaged_must_be_bool(self):
        with pytest.raises(ProtocolError, match="boolean"):
            parse_message(json.dumps({"type": "clutch", "engaged": 1}))

    def test_unknown_drive_mode(self):
        with pytest.raises(ProtocolError, match="unknown drive_mode 'ackermann'"):
            parse_message(json.dumps({"type": "mode", "drive_mode": "ackermann"}))

    def test_episode_action_gate(self):
        with pytest.raises(ProtocolError, match="start|stop"):
            parse_message(json.dumps({"type": "episode", "action": "pause"}))
        with pytest.raises(ProtocolError, match="string 'name'"):
            parse_message(json.dumps({"type": "episode", "action": "start"}))


# --- 6-DoF pose -> planar projection -----------------------------------------


class TestPoseToPlanar:
    def test_identity_orientation_keeps_xy_drops_height(self):
        p = pose_to_planar([0.3, -0.2, 1.1], IDENT_QUAT)
        assert p == Pose2(0.3, -0.2, 0.0)

    def test_pure_yaw(self):
        q = quat_about([0, 0, 1], math.pi / 2)
        p = pose_to_planar([0.0, 0.0, 0.0], q)
        assert p.theta == pytest.approx(math.pi / 2, abs=1e-12)

    def test_roll_does_not_disturb_yaw(self):
        # rolling the device about its own forward axis leaves yaw untouched
        for yaw in (0.0, 0.7, -2.1):
            for roll in (0.3, 1.2, -2.8):
                q = quat_mul(quat_about([0, 0, 1], yaw), quat_about([1, 0, 0], roll))
                p = pose_to_planar([0.0, 0.0, 0.0], q)
                assert p.theta == pytest.approx(yaw, abs=1e-12)

    def test_moderate_pitch_preserves_yaw(self):
        # yaw 30 deg then pitch 20 deg: the projected forward axis still
        # points 30 deg left of x
        q = quat_mul(
            quat_about([0, 0, 1], math.radians(30)),
            quat_about([0, 1, 0], math.radians(20)),
        )
        p = pose_to_planar([0.0, 0.0, 0.0], q)
        assert p.theta == pytest.approx(math.radians(30), abs=1e-12)

    def test_vertical_forward_axis_is_degenerate(self):
        q = quat_about([0, 1, 0], math.pi / 2)  # pitch the device nose-down
        with pytest.raises(DegenerateYaw):
            pose_to_planar([0.0, 0.0, 0.0], q)

    def test_unnormalized_input_is_normalized(self):
        q = [v * 1.0005 for v in quat_about([0, 0, 1], 0.4)]
        p = pose_to_planar([0.0, 0.0, 0.0], q)
        assert p.theta == pytest.approx(0.4, abs=1e-9)


# --- clutch mapping -----------------------------------------------------------


class TestClutchDelta:
    def session(self, ref_phone, ref_target, gain=1.0):
        return SessionState(
            session_id=1,
            clutch_engaged=True,
            ref_phone=ref_phone,
            ref_target=ref_target,
            gain=gain,
        )

    def test_no_motion_no_change(self):
        s = self.session(Pose2(0.2, 0.1, 0.3), Pose2(1.0, 2.0, 0.5))
        assert clutch_delta(s, Pose2(0.2, 0.1, 0.3)) == Pose2(1.0, 2.0, 0.5)

    def test_forward_drag_replays_exactly_at_unit_gain(self):
        s = self.session(Pose2(0.25, 0.1, 0.0), Pose2(0.0, 0.0, 0.0))
        t = clutch_delta(s, Pose2(0.35, 0.1, 0.0))
        assert abs(t.x - 0.1) < 1e-12
        assert abs(t.y) < 1e-12
        assert abs(t.theta) < 1e-12

    def test_displacement_is_replayed_in_target_frame(self):
        # phone moves +0.2 m along its own forward axis; the target, facing
        # +90 deg, must advance along world +y
        s = self.session(Pose2(0.0, 0.0, 0.0), Pose2(2.0, 1.0, math.pi / 2))
        t = clutch_delta(s, Pose2(0.2, 0.0, 0.0))
        assert t.x == pytest.approx(2.0, abs=1e-12)
        assert t.y == pytest.approx(1.2, abs=1e-12)
        assert t.theta == pytest.approx(math.pi / 2, abs=1e-12)

    def test_gain_scales_rotation(self):
        s = self.session(Pose2(), Pose2(), gain=0.5)
        t = clutch_delta(s, Pose2(0.0, 0.0, math.radians(30)))
        assert t.theta == pytest.approx(math.radians(15), abs=1e-12)

    def test_gain_scales_translation(self):
        s = self.session(Pose2(), Pose2(), gain=2.0)
        t = clutch_delta(s, Pose2(0.1, 0.0, 0.0))
        assert t.x == pytest.approx(0.2, abs=1e-12)


# --- per-session message handling --------------------------------------------


class TestHandleMessage:
    def test_pose_without_clutch_is_inert(self):
        s = SessionState(session_id=1)
        s2, action = handle_message(s, pose_msg(10, 1.0, 2.0), 0.04, Pose2())
        assert action is None
        assert s2.last_t_ms == 10
        assert s2.last_msg_time == 0.04

    def test_pose_stamps_must_increase(self):
        s = SessionState(session_id=1, last_t_ms=10)
        with pytest.raises(ProtocolError, match="not after previous 10"):
            handle_message(s, pose_msg(10, 0, 0), 0.0, Pose2())
        with pytest.raises(ProtocolError, match="not after"):
            handle_message(s, pose_msg(3, 0, 0), 0.0, Pose2())

    def test_first_clutched_pose_anchors_references(self):
        s = SessionState(session_id=1, clutch_engaged=True)
        cur = Pose2(0.5, 0.0, 0.1)
        s2, action = handle_message(s, pose_msg(1, 0.3, 0.2), 0.0, cur)
        assert action == SetTarget(cur)  # no jump at clutch-down
        assert s2.ref_phone == Pose2(0.3, 0.2, 0.0)
        assert s2.ref_target == cur

    def test_later_poses_track_displacement(self):
        s = SessionState(session_id=1, clutch_engaged=True)
        s, _ = handle_message(s, pose_msg(1, 0.3, 0.2), 0.0, Pose2())
        s, action = handle_message(s, pose_msg(2, 0.4, 0.2), 0.004, Pose2())
        assert isinstance(action, SetTarget)
        assert action.pose.x == pytest.approx(0.1, abs=1e-12)

    def test_degenerate_yaw_holds_previous_heading(self):
        s = SessionState(session_id=1, clutch_engaged=True)
        s, _ = handle_message(
            s, pose_msg(1, 0.0, 0.0, quat=quat_about([0, 0, 1], 0.8)), 0.0, Pose2()
        )
        assert s.prev_theta == pytest.approx(0.8)
        nose_down = quat_about([0, 1, 0], math.pi / 2)
        s, action = handle_message(
            s, pose_msg(2, 0.1, 0.0, quat=nose_down), 0.004, Pose2()
        )
        assert s.prev_theta == pytest.approx(0.8)  # held, not reset
        assert isinstance(action, SetTarget)
        assert action.pose.theta == pytest.approx(0.0, abs=1e-12)  # no net turn

    def test_clutch_release_clears_references(self):
        s = SessionState(session_id=1, clutch_engaged=True)
        s, _ = handle_message(s, pose_msg(1, 0.3, 0.2), 0.0, Pose2())
        s, action = handle_message(
            s, {"type": "clutch", "engaged": False}, 0.004, Pose2()
        )
        assert action is None
        assert not s.clutch_engaged
        assert s.ref_phone is None and s.ref_target is None

    def test_watchdog_only_fires_while_clutched(self):
        quiet = SessionState(session_id=1, last_msg_time=0.0)
        assert watchdog(quiet, 10.0, 0.25) is None
        clutched = SessionState(session_id=1, clutch_engaged=True, last_msg_time=0.0)
        assert watchdog(clutched, 0.2, 0.25) is None
        assert watchdog(clutched, 0.26, 0.25) == Stop("watchdog")


# --- hub arbitration ----------------------------------------------------------


def make_hub(**kw):
    kw.setdefault("watchdog_s", 0.25)
    return TeleopHub(**kw)


class TestHubSessions:
    def test_first_session_is_authoritative(self):
        hub = make_hub()
        a = hub.connect()
        b = hub.connect()
        assert a.authoritative and not b.authoritative
        assert hub.session_count() == 2

    def test_hello_ack_reports_protocol_and_authority(self):
        hub = make_hub()
        s = hub.connect()
        ack = hub.handle(
            s.session_id, json.dumps({"type": "hello", "client_name": "ui"}), now=0.0
        )
        assert ack == {
            "type": "hello_ack",
            "protocol_version": PROTOCOL_VERSION,
            "session_id": s.session_id,
            "authoritative": True,
        }

    def test_config_request_returns_payload(self):
        hub = make_hub(config_payload={"sim": {"dt": 0.004}})
        s = hub.connect()
        reply = hub.handle(s.session_id, json.dumps({"type": "config_request"}), 0.0)
        assert reply == {"type": "config", "config": {"sim": {"dt": 0.004}}}

    def test_observer_commands_are_ignored(self):
        hub = make_hub()
        op = hub.connect()
        ob = hub.connect()
        hub.handle(ob.session_id, json.dumps({"type": "clutch", "engaged": True}), 0.0)
        hub.handle(ob.session_id, json.dumps(pose_msg(1, 5.0, 5.0)), 0.0)
        d = hub.poll(now=0.0)
        assert d.target is None and d.events == () and d.stop is None
        assert not hub.clutch_engaged()
        assert op.session_id != ob.session_id

    def test_estop_accepted_from_observer(self):
        hub = make_hub()
        hub.connect()
        ob = hub.connect()
        hub.handle(ob.session_id, json.dumps({"type": "estop"}), 0.0)
        d = hub.poll(now=0.0)
        assert EstopEngage() in d.events

    def test_estop_release_needs_authority(self):
        hub = make_hub()
        hub.connect()
        ob = hub.connect()
        hub.handle(ob.session_id, json.dumps({"type": "estop_release"}), 0.0)
        assert hub.poll(now=0.0).events == ()

    def test_protocol_error_reply_and_count(self):
        hub = make_hub()
        s = hub.connect()
        reply = hub.handle(s.session_id, "{broken", now=0.0)
        assert reply["type"] == "error" and "JSON" in reply["message"]
        assert hub.protocol_errors == 1
        # session survives; a valid message still works
        ack = hub.handle(
            s.session_id, json.dumps({"type": "hello", "client_name": "x"}), 0.0
        )
        assert ack["type"] == "hello_ack"

    def test_out_of_order_pose_dropped_and_counted(self):
        hub = make_hub()
        s = hub.connect()
        hub.handle(s.session_id, json.dumps({"type": "clutch", "engaged": True}), 0.0)
        hub.handle(s.session_id, json.dumps(pose_msg(10, 0.0, 0.0)), 0.0)
        reply = hub.handle(s.session_id, json.dumps(pose_msg(9, 1.0, 0.0)), 0.01)
        assert reply["type"] == "error"
        assert hub.protocol_errors == 1
        # the stale pose must not have produced a target jump
        d = hub.poll(now=0.01)
        assert d.target == Pose2()  # still the anchor target

    def test_operator_disconnect_promotes_earliest_observer(self):
        hub = make_hub()
        op = hub.connect()
        ob1 = hub.connect()
        ob2 = hub.connect()
        hub.disconnect(op.session_id)
        # ob1 is now authoritative: its clutch is honored, ob2's is not
        hub.handle(ob1.session_id, json.dumps({"type": "clutch", "engaged": True}), 0.0)
        assert hub.clutch_engaged()
        hub.handle(ob1.session_id, json.dumps({"type": "clutch", "engaged": False}), 0.0)
        hub.handle(ob2.session_id, json.dumps({"type": "clutch", "engaged": True}), 0.0)
        assert not hub.clutch_engaged()

    def test_disconnect_while_clutched_stops_base(self):
        hub = make_hub()
        op = hub.connect()
        hub.handle(op.session_id, json.dumps({"type": "clutch", "engaged": True}), 0.0)
        hub.handle(op.session_id, json.dumps(pose_msg(1, 0.0, 0.0)), 0.0)
        hub.handle(op.session_id, json.dumps(pose_msg(2, 0.5, 0.0)), 0.0)
        hub.disconnect(op.session_id)
        d = hub.poll(now=0.0)
        assert d.stop == Stop("disconnect")
        assert d.target is None  # the half-applied drag is discarded


# --- closed-loop behavior through TeleopLoop ----------------------------------


def make_teleop(seed=0, noise_free=True, watchdog_s=0.25, gain=1.0):
    sim = SimConfig(seed=seed)
    if noise_free:
        sim = sim.noise_free()
    hub = TeleopHub(watchdog_s=watchdog_s, gain=gain)
    tl = TeleopLoop(
        default_base_config(), sim, ControllerGains(), hub, DriveMode.HOLONOMIC, Pose2()
    )
    sid = hub.connect(now=0.0).session_id
    hub.handle(sid, json.dumps({"type": "hello", "client_name": "test"}), 0.0)
    return tl, hub, sid


def send(hub, sid, obj, now):
    return hub.handle(sid, json.dumps(obj), now=now)


class TestTeleopLoop:
    def test_unclutched_pose_stream_never_moves_target(self):
        tl, hub, sid = make_teleop()
        start_target = tl.loop.target
        rng = random.Random(42)
        t_ms = 0
        for _ in range(1000):
            t_ms += rng.randint(1, 30)
            axis = [rng.gauss(0, 1) for _ in range(3)]
            n = math.sqrt(sum(a * a for a in axis)) or 1.0
            q = quat_about([a / n for a in axis], rng.uniform(-3, 3))
            send(
                hub,
                sid,
                pose_msg(t_ms, rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1), q),
                tl.time,
            )
            tl.tick()
            assert tl.loop.target == start_target
            assert tl.loop.prev_cmd == Twist2()
        p = tl.loop.odom.pose
        assert (p.x, p.y, p.theta) == (0.0, 0.0, 0.0)  # base never moved

    def test_clutch_drag_moves_target_exactly(self):
        tl, hub, sid = make_teleop()
        send(hub, sid, {"type": "clutch", "engaged": True}, tl.time)
        send(hub, sid, pose_msg(1, 0.25, 0.1, 0.3), tl.time)
        tl.tick()
        assert tl.loop.target == Pose2()  # anchor pose, no jump
        send(hub, sid, pose_msg(2, 0.35, 0.1, 0.3), tl.time)
        tl.tick()
        t = tl.loop.target
        assert abs(t.x - 0.1) < 1e-12
        assert abs(t.y) < 1e-12
        assert abs(t.theta) < 1e-12

    def test_clutch_gain_scales_drag(self):
        tl, hub, sid = make_teleop(gain=0.5)
        send(hub, sid, {"type": "clutch", "engaged": True}, tl.time)
        send(hub, sid, pose_msg(1, 0.0, 0.0), tl.time)
        send(hub, sid, pose_msg(2, 0.2, 0.0), tl.time)
        tl.tick()
        assert tl.loop.target.x == pytest.approx(0.1, abs=1e-12)

    def test_base_converges_to_dragged_target(self):
        tl, hub, sid = make_teleop()
        send(hub, sid, {"type": "clutch", "engaged": True}, tl.time)
        t_ms = 0
        for k in range(150):
            t_ms += 4
            x = 0.1 * min(k / 100.0, 1.0)
            send(hub, sid, pose_msg(t_ms, x, 0.0), tl.time)
            tl.tick()
        send(hub, sid, {"type": "clutch", "engaged": False}, tl.time)
        for _ in range(1500):
            tl.tick()
        p = tl.loop.odom.pose
        assert math.hypot(p.x - 0.1, p.y) < 0.006  # inside capture tolerance

    def test_watchdog_gap_stops_base_within_budget(self):
        tl, hub, sid = make_teleop()
        send(hub, sid, {"type": "clutch", "engaged": True}, tl.time)
        # drag a far target, streaming poses every tick, until the base
        # saturates at full speed
        t_ms = 0
        for k in range(300):
            t_ms += 4
            x = 0.0 if k == 0 else 5.0
            send(hub, sid, pose_msg(t_ms, x, 0.0), tl.time)
            tl.tick()
        last_msg = tl.time - tl.loop.dt  # sim time of the final pose
        assert abs(tl.loop.prev_cmd.vx) > 0.9  # saturated before the gap

        # silence begins; the watchdog must not fire before its threshold
        still_driving_at = last_msg + 0.2
        zero_at = None
        for _ in range(200):
            tl.tick()
            c = tl.loop.prev_cmd
            speed = max(abs(c.vx), abs(c.vy), abs(c.omega))
            if tl.time <= still_driving_at:
                assert speed > 0.5, "watchdog fired before its threshold"
            if speed == 0.0 and zero_at is None:
                zero_at = tl.time
        assert zero_at is not None, "base never stopped after the pose gap"
        # trip at the threshold, then the stop ramp must finish within 100 ms
        assert zero_at - last_msg <= 0.25 + 0.1
        assert not hub.clutch_engaged()  # trip forces re-clutching
        assert hub.watchdog_stopped

    def test_reclutch_after_trip_anchors_at_held_target(self):
        tl, hub, sid = make_teleop()
        send(hub, sid, {"type": "clutch", "engaged": True}, tl.time)
        send(hub, sid, pose_msg(1, 0.0, 0.0), tl.time)
        send(hub, sid, pose_msg(2, 2.0, 0.0), tl.time)
        for _ in range(300):  # drive briefly, then the silence trips the watchdog
            tl.tick()
        assert hub.watchdog_stopped
        held = tl.loop.target  # frozen at the odometry pose on trip
        send(hub, sid, {"type": "clutch", "engaged": True}, tl.time)
        send(hub, sid, pose_msg(3, 9.0, 9.0), tl.time)  # phone moved meanwhile
        tl.tick()
        assert tl.loop.target == held  # re-anchor, no jump toward old drag

    def test_mode_event_switches_controller(self):
        tl, hub, sid = make_teleop()
        send(hub, sid, {"type": "mode", "drive_mode": "differential"}, tl.time)
        tl.tick()
        assert tl.loop.mode == DriveMode.DIFFERENTIAL
        send(hub, sid, {"type": "mode", "drive_mode": "holonomic"}, tl.time)
        tl.tick()
        assert tl.loop.mode == DriveMode.HOLONOMIC

    def test_estop_freezes_and_forces_reclutch(self):
        tl, hub, sid = make_teleop()
        send(hub, sid, {"type": "clutch", "engaged": True}, tl.time)
        t_ms = 0
        for k in range(300):  # stream a far drag until full speed
            t_ms += 4
            send(hub, sid, pose_msg(t_ms, 0.0 if k == 0 else 3.0, 0.0), tl.time)
            tl.tick()
        assert abs(tl.loop.prev_cmd.vx) > 0.9
        send(hub, sid, {"type": "estop"}, tl.time)
        tl.tick()
        assert tl.estop
        assert not hub.clutch_engaged()  # e-stop declutches everyone
        for _ in range(30):  # 120 ms: enough for the stop ramp
            tl.tick()
        assert tl.loop.prev_cmd == Twist2()
        frozen = tl.loop.odom.pose
        assert tl.loop.target == frozen
        # still latched: pose traffic cannot move the base
        send(hub, sid, {"type": "clutch", "engaged": True}, tl.time)
        send(hub, sid, pose_msg(3, 0.0, 0.0), tl.time)
        send(hub, sid, pose_msg(4, 5.0, 0.0), tl.time)
        for _ in range(50):
            tl.tick()
        assert tl.loop.prev_cmd == Twist2()
        assert tl.loop.target == frozen

    def test_estop_release_requires_authority_then_resumes(self):
        tl, hub, sid = make_teleop()
        observer = hub.connect(now=tl.time).session_id
        send(hub, observer, {"type": "estop"}, tl.time)  # anyone may stop it
        tl.tick()
        assert tl.estop
        send(hub, observer, {"type": "estop_release"}, tl.time)
        tl.tick()
        assert tl.estop  # observers cannot release
        send(hub, sid, {"type": "estop_release"}, tl.time)
        tl.tick()
        assert not tl.estop
        # after release the operator re-clutches and drives again
        send(hub, sid, {"type": "clutch", "engaged": True}, tl.time)
        send(hub, sid, pose_msg(10, 0.0, 0.0), tl.time)
        send(hub, sid, pose_msg(11, 0.3, 0.0), tl.time)
        for _ in range(50):
            tl.tick()
        assert tl.loop.prev_cmd.vx > 0.0

    def test_episode_events_surface_to_host(self):
        from casterbase.teleop import EpisodeStart, EpisodeStop

        tl, hub, sid = make_teleop()
        send(hub, sid, {"type": "episode", "action": "start", "name": "demo"}, tl.time)
        tl.tick()
        assert tl.pending_episode == EpisodeStart("demo")
        tl.tick()
        assert tl.pending_episode is None  # events are edge-triggered
        send(hub, sid, {"type": "episode", "action": "stop"}, tl.time)
        tl.tick()
        assert tl.pending_episode == EpisodeStop()

    def test_commands_respect_limits_during_teleop(self):
        tl, hub, sid = make_teleop(noise_free=False)
        lim = tl.loop.base.limits
        send(hub, sid, {"type": "clutch", "engaged": True}, tl.time)
        t_ms = 0
        rng = random.Random(7)
        prev = Twist2()
        for _ in range(500):
            t_ms += 4
            send(
                hub,
                sid,
                pose_msg(t_ms, rng.uniform(-3, 3), rng.uniform(-3, 3)),
                tl.time,
            )
            tl.tick()
            c = tl.loop.prev_cmd
            assert math.hypot(c.vx, c.vy) <= lim.v_max + 1e-9
            assert abs(c.omega) <= lim.omega_max + 1e-9
            dt = tl.loop.dt
            assert abs(c.vx - prev.vx) <= lim.a_max * dt + 1e-9
            assert abs(c.vy - prev.vy) <= lim.a_max * dt + 1e-9
            assert abs(c.omega - prev.omega) <= lim.alpha_max * dt + 1e-9
            prev = c


def test_relative_compose_round_trip_matches_drag():
    # the clutch math is plain frame composition: target = ref ∘ (phone motion)
    ref_phone = Pose2(0.3, -0.4, 0.6)
    phone_now = Pose2(0.45, -0.35, 0.9)
    s = SessionState(
        session_id=1,
        clutch_engaged=True,
        ref_phone=ref_phone,
        ref_target=Pose2(1.0, 2.0, -0.5),
        gain=1.0,
    )
    expected = compose(Pose2(1.0, 2.0, -0.5), relative(ref_phone, phone_now))
    got = clutch_delta(s, phone_now)
    assert got.x == pytest.approx(expected.x, abs=1e-12)
    assert got.y == pytest.approx(expected.y, abs=1e-12)
    assert got.theta == pytest.approx(expected.theta, abs=1e-12)
