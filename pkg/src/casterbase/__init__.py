"""Powered-caster holonomic mobile base: kinematics, odometry, simulation,
control, and teleoperation."""

from .se2 import Pose2, Twist2, compose, exp, inverse, log, wrap_angle
from .casters import (
    BaseConfig,
    CasterGeometry,
    CasterJointState,
    MotorState,
    base_fk,
    base_ik,
    caster_ik,
    contact_point,
    default_base_config,
)
from .control import ControllerGains, DriveMode, Limits, limit_twist
from .config import AppConfig, default_config, load_config
from .errors import CasterbaseError
from .sim import SimConfig, Simulator

__version__ = "0.1.0"

__all__ = [
    "Pose2",
    "Twist2",
    "compose",
    "exp",
    "inverse",
    "log",
    "wrap_angle",
    "BaseConfig",
    "CasterGeometry",
    "CasterJointState",
    "MotorState",
    "base_fk",
    "base_ik",
    "caster_ik",
    "contact_point",
    "default_base_config",
    "ControllerGains",
    "DriveMode",
    "Limits",
    "limit_twist",
    "AppConfig",
    "default_config",
    "load_config",
    "SimConfig",
    "Simulator",
    "CasterbaseError",
    "__version__",
]
