"""Application configuration: JSON schema, strict loading, and defaults.

Unknown keys are rejected (with their path) so typos fail loudly; keys whose
names start with an underscore are reserved for comments in config files and
ignored. All module-level invariants (caster offsets, limits, gains, sim
bounds) are enforced at load by constructing the real objects.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .casters import BaseConfig, CasterGeometry, default_base_config
from .control import ControllerGains, Limits
from .errors import ConfigError
from .sim import SimConfig


@dataclass(frozen=True, slots=True)
class TeleopConfig:
    port: int = 8765
    gain: float = 1.0  # phone-to-base displacement scaling
    watchdog_ms: float = 250.0  # silence threshold while clutched
    stop_decay_s: float = 0.08  # ramp-to-zero time after watchdog/e-stop

    def __post_init__(self) -> None:
        if not 0 < self.port < 65536:
            raise ValueError("teleop.port must be in (0, 65536)")
        if self.gain <= 0.0:
            raise ValueError("teleop.gain must be > 0")
        if self.watchdog_ms <= 0.0:
            raise ValueError("teleop.watchdog_ms must be > 0")
        if not 0.0 < self.stop_decay_s <= self.watchdog_ms / 1000.0:
            raise ValueError("teleop.stop_decay_s must be in (0, watchdog_ms/1000]")


@dataclass(frozen=True, slots=True)
class PathsConfig:
    episode_dir: str = "episodes"
    report_dir: str = "reports"


@dataclass(frozen=True, slots=True)
class AppConfig:
    base: BaseConfig = field(default_factory=default_base_config)
    sim: SimConfig = SimConfig()
    gains: ControllerGains = ControllerGains()
    teleop: TeleopConfig = TeleopConfig()
    paths: PathsConfig = PathsConfig()

    @property
    def limits(self) -> Limits:
        return self.base.limits


def default_config() -> AppConfig:
    return AppConfig()


def _check_keys(d: dict, allowed: set[str], path: str) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{path or 'config'} must be a JSON object")
    cleaned = {k: v for k, v in d.items() if not k.startswith("_")}
    unknown = set(cleaned) - allowed
    if unknown:
        where = f" in {path}" if path else ""
        raise ConfigError(f"unknown config key(s){where}: {', '.join(sorted(unknown))}")
    return cleaned


def _build(cls, d: dict, path: str):
    try:
        return cls(**d)
    except TypeError as e:
        raise ConfigError(f"{path}: {e}") from e
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


_CASTER_KEYS = {
    "mount_radius",
    "mount_angle",
    "offset_x",
    "offset_y",
    "wheel_radius",
    "steer_ratio",
    "drive_ratio",
    "couple_ratio",
    "steer_encoder_offset",
}
_LIMIT_KEYS = {"v_max", "omega_max", "a_max", "alpha_max"}
_SIM_KEYS = {
    "dt",
    "slip_noise_std",
    "steer_noise_std",
    "encoder_counts_per_motor_rev",
    "abs_encoder_counts_per_rev",
    "seed",
    "quantize_encoders",
}
_GAIN_KEYS = {"k_pos", "k_theta", "pos_tol", "theta_tol", "k_rho", "k_alpha", "k_beta"}
_TELEOP_KEYS = {"port", "gain", "watchdog_ms", "stop_decay_s"}
_PATH_KEYS = {"episode_dir", "report_dir"}
_TOP_KEYS = {"base", "limits", "sim", "gains", "teleop", "paths"}
_BASE_KEYS = {"casters"}


def config_from_dict(raw: dict) -> AppConfig:
    """Build an AppConfig from parsed JSON, validating everything.

    Raises:
        ConfigError: unknown keys or out-of-range values (path included).
        SingularOffset: a caster with |offset_x| below the holonomy minimum,
            named by its index.
    """
    top = _check_keys(raw, _TOP_KEYS, "")

    limits = _build(Limits, _check_keys(top.get("limits", {}), _LIMIT_KEYS, "limits"), "limits")

    base_raw = _check_keys(top.get("base", {}), _BASE_KEYS, "base")
    if "casters" in base_raw:
        rows = base_raw["casters"]
        if not isinstance(rows, list):
            raise ConfigError("base.casters must be a list")
        casters = tuple(
            _build(
                CasterGeometry,
                _check_keys(row, _CASTER_KEYS, f"base.casters[{i}]"),
                f"base.casters[{i}]",
            )
            for i, row in enumerate(rows)
        )
        base = _build(BaseConfig, {"casters": casters, "limits": limits}, "base")
    else:
        base = default_base_config(limits=limits)

    return AppConfig(
        base=base,
        sim=_build(SimConfig, _check_keys(top.get("sim", {}), _SIM_KEYS, "sim"), "sim"),
        gains=_build(
            ControllerGains, _check_keys(top.get("gains", {}), _GAIN_KEYS, "gains"), "gains"
        ),
        teleop=_build(
            TeleopConfig, _check_keys(top.get("teleop", {}), _TELEOP_KEYS, "teleop"), "teleop"
        ),
        paths=_build(
            PathsConfig, _check_keys(top.get("paths", {}), _PATH_KEYS, "paths"), "paths"
        ),
    )


def load_config(path: str | Path) -> AppConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {p} is not valid JSON: {e}") from e
    return config_from_dict(raw)


def config_to_dict(cfg: AppConfig) -> dict:
    """Full round-trippable snapshot (episode metadata, config_request reply)."""
    return {
        "base": {
            "casters": [
                {
                    "mount_radius": g.mount_radius,
                    "mount_angle": g.mount_angle,
                    "offset_x": g.offset_x,
                    "offset_y": g.offset_y,
                    "wheel_radius": g.wheel_radius,
                    "steer_ratio": g.steer_ratio,
                    "drive_ratio": g.drive_ratio,
                    "couple_ratio": g.couple_ratio,
                    "steer_encoder_offset": g.steer_encoder_offset,
                }
                for g in cfg.base.casters
            ],
        },
        "limits": {
            "v_max": cfg.limits.v_max,
            "omega_max": cfg.limits.omega_max,
            "a_max": cfg.limits.a_max,
            "alpha_max": cfg.limits.alpha_max,
        },
        "sim": {
            "dt": cfg.sim.dt,
            "slip_noise_std": cfg.sim.slip_noise_std,
            "steer_noise_std": cfg.sim.steer_noise_std,
            "encoder_counts_per_motor_rev": cfg.sim.encoder_counts_per_motor_rev,
            "abs_encoder_counts_per_rev": cfg.sim.abs_encoder_counts_per_rev,
            "seed": cfg.sim.seed,
            "quantize_encoders": cfg.sim.quantize_encoders,
        },
        "gains": {
            "k_pos": cfg.gains.k_pos,
            "k_theta": cfg.gains.k_theta,
            "pos_tol": cfg.gains.pos_tol,
            "theta_tol": cfg.gains.theta_tol,
            "k_rho": cfg.gains.k_rho,
            "k_alpha": cfg.gains.k_alpha,
            "k_beta": cfg.gains.k_beta,
        },
        "teleop": {
            "port": cfg.teleop.port,
            "gain": cfg.teleop.gain,
            "watchdog_ms": cfg.teleop.watchdog_ms,
            "stop_decay_s": cfg.teleop.stop_decay_s,
        },
        "paths": {
            "episode_dir": cfg.paths.episode_dir,
            "report_dir": cfg.paths.report_dir,
        },
    }


def apply_noise_flag(sim: SimConfig, value: str) -> SimConfig:
    """Interpret the --noise flag: ``off`` (ideal sensors), ``default``
    (leave the config alone), or a slip-noise std that scales both noise
    sources proportionally."""
    if value == "default":
        return sim
    if value == "off":
        return sim.noise_free()
    try:
        std = float(value)
    except ValueError:
        raise ConfigError(f"--noise must be off, default, or a number; got {value!r}") from None
    if std < 0.0:
        raise ConfigError("--noise level must be >= 0")
    if std == 0.0:
        return sim.noise_free()
    defaults = SimConfig()
    return replace(
        sim,
        slip_noise_std=std,
        steer_noise_std=std * (defaults.steer_noise_std / defaults.slip_noise_std),
    )
