"""Error types shared across the package, one class per failure mode.

Each class carries a distinct CLI exit code so scripted callers can tell
failure modes apart without parsing stderr.
"""

from __future__ import annotations


class CasterbaseError(Exception):
    exit_code = 1


class ConfigError(CasterbaseError):
    """Configuration file or value rejected at load time."""

    exit_code = 2


class SingularOffset(ConfigError):
    """Caster longitudinal contact offset too close to zero for the closed-form
    steering solution (the steer axis passes through the contact point)."""

    exit_code = 3


class RankDeficient(CasterbaseError):
    """Stacked rolling-constraint matrix cannot observe all three base DOF."""

    exit_code = 4


class CommandLengthMismatch(CasterbaseError):
    """Motor command list length does not match the number of casters."""

    exit_code = 4


class TraceMismatch(CasterbaseError):
    """Pose traces to compare are not time-aligned."""

    exit_code = 5


class EpisodeFormatError(CasterbaseError):
    """Episode file malformed; reported with the offending line number."""

    exit_code = 5


class ProtocolError(CasterbaseError):
    """Malformed or out-of-order teleoperation message."""

    exit_code = 5


class DegenerateYaw(CasterbaseError):
    """Device forward axis is (numerically) vertical; planar yaw undefined."""

    exit_code = 5


class RunTimeout(CasterbaseError):
    """Closed-loop run exceeded its time budget without converging."""

    exit_code = 6


class PortInUse(CasterbaseError):
    """Requested service port is already bound."""

    exit_code = 7
