"""Session configuration loaded from INI files.

A config file describes one teleoperation session: input mode, control
rates, and the parameter blocks for every pipeline stage. Unknown
sections and unknown keys are hard errors rather than warnings, so a
typo cannot silently fall back to a default. Every value is range
checked at load time; a bad config never reaches the control loop.

Relative paths inside the file (chain files, reference library) resolve
against the directory containing the config file, so a session folder
can be moved around as a unit.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assets import chain_path, default_library_path
from .errors import ConfigError
from .haptics import HapticParams
from .ik import IKParams
from .coordination import NullspaceParams
from .retargeting import RETARGET_FRAMES, FilterParams
from .safety import WatchdogPolicy
from .simulator import PDGains

INPUT_MODES = ("vr", "leader_follower")

# Deferred: the per-mode default for ik.omega_q. Joint-space regularization
# toward the leader arm increment only makes sense when there is a leader arm.
_OMEGA_Q_BY_MODE = {"vr": 0.0, "leader_follower": 1.0}


@dataclass(frozen=True)
class HapticConfig:
    """Scalar haptics settings; expanded to per-joint arrays once the
    chain's joint count is known."""

    torque_constant: float = 1.0
    vibration_scale: float = 5.0
    vibration_tau: float = 0.05
    kinesthetic_gain: float = 1.0
    kinesthetic_cap: float = 5.0

    def __post_init__(self):
        if self.torque_constant <= 0:
            raise ValueError(f"torque_constant must be positive, got {self.torque_constant}")

    def to_params(self, dof: int) -> HapticParams:
        return HapticParams(
            torque_constants=np.full(dof, self.torque_constant),
            vibration_scale=self.vibration_scale,
            vibration_tau=self.vibration_tau,
            kinesthetic_gain=self.kinesthetic_gain,
            kinesthetic_cap=self.kinesthetic_cap,
        )


@dataclass(frozen=True)
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    decimation: int = 4

    def __post_init__(self):
        if not (1 <= self.port <= 65535):
            raise ValueError(f"port must be in 1..65535, got {self.port}")
        if self.decimation < 1:
            raise ValueError(f"decimation must be >= 1, got {self.decimation}")


@dataclass(frozen=True)
class SessionConfig:
    mode: str = "vr"
    dt: float = 0.004
    frame_mode: str = "world"
    left_chain: Path = field(default_factory=lambda: chain_path("left"))
    right_chain: Path = field(default_factory=lambda: chain_path("right"))
    reference_library: Path = field(default_factory=default_library_path)
    nullspace_enabled: bool = True
    filter_params: FilterParams = field(default_factory=FilterParams)
    ik_params: IKParams = field(default_factory=lambda: IKParams(omega_q=0.0))
    nullspace_params: NullspaceParams = field(default_factory=NullspaceParams)
    watchdog_policy: WatchdogPolicy = field(default_factory=WatchdogPolicy)
    pd_gains: PDGains = field(default_factory=PDGains)
    haptics: HapticConfig = field(default_factory=HapticConfig)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)

    def __post_init__(self):
        if self.mode not in INPUT_MODES:
            raise ValueError(f"mode must be one of {INPUT_MODES}, got {self.mode!r}")
        if self.frame_mode not in RETARGET_FRAMES:
            raise ValueError(
                f"frame_mode must be one of {RETARGET_FRAMES}, got {self.frame_mode!r}"
            )
        if not (self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")


# Schema: section -> key -> converter name. The converter names double as
# the error message vocabulary ("expects a float").
_SCHEMA = {
    "session": {
        "mode": "choice",
        "dt": "float",
        "frame_mode": "choice",
        "left_chain": "path",
        "right_chain": "path",
        "reference_library": "path",
    },
    "filter": {
        "alpha": "float",
        "max_linear_velocity": "float",
        "max_angular_velocity": "float",
    },
    "ik": {
        "omega_q": "float",
        "mu": "float",
        "max_step": "float",
        "tracking_gain": "float",
    },
    "nullspace": {
        "enabled": "bool",
        "k_n": "float",
        "mode": "choice",
        "attraction": "choice",
        "damping": "float",
    },
    "watchdog": {
        "max_joint_velocity": "float",
        "max_tick_jump": "float",
        "action": "choice",
        "cooldown_ticks": "int",
    },
    "pd": {"kp": "float", "kd": "float", "max_velocity": "float"},
    "haptics": {
        "torque_constant": "float",
        "vibration_scale": "float",
        "vibration_tau": "float",
        "kinesthetic_gain": "float",
        "kinesthetic_cap": "float",
    },
    "gateway": {"host": "str", "port": "int", "decimation": "int"},
}


class _Section:
    """One validated section: typed getters that consume the raw dict."""

    def __init__(self, name, raw):
        self.name = name
        self.raw = dict(raw)

    def _take(self, key, default):
        return self.raw.pop(key, default)

    def get_float(self, key, default):
        value = self._take(key, None)
        if value is None:
            return default
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key} expects a float, got {value!r}") from None

    def get_int(self, key, default):
        value = self._take(key, None)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key} expects an integer, got {value!r}") from None

    def get_bool(self, key, default):
        value = self._take(key, None)
        if value is None:
            return default
        lowered = str(value).strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"[{self.name}] {key} expects a boolean, got {value!r}")

    def get_str(self, key, default):
        value = self._take(key, None)
        return default if value is None else str(value).strip()

    def get_choice(self, key, default, choices):
        value = self.get_str(key, default)
        if value not in choices:
            raise ConfigError(
                f"[{self.name}] {key} must be one of {', '.join(choices)}, got {value!r}"
            )
        return value

    def get_path(self, key, default, base):
        value = self._take(key, None)
        if value is None:
            return default
        path = Path(str(value).strip())
        return path if path.is_absolute() else (base / path).resolve()

    def finish(self):
        if self.raw:
            extra = ", ".join(sorted(self.raw))
            raise ConfigError(f"[{self.name}] unknown keys: {extra}")


def _build(parser: configparser.ConfigParser, base: Path) -> SessionConfig:
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"[{section}] unknown keys: {key}")

    def sect(name):
        return _Section(name, parser[name] if parser.has_section(name) else {})

    s = sect("session")
    mode = s.get_choice("mode", "vr", INPUT_MODES)
    dt = s.get_float("dt", 0.004)
    frame_mode = s.get_choice("frame_mode", "world", RETARGET_FRAMES)
    left_chain = s.get_path("left_chain", chain_path("left"), base)
    right_chain = s.get_path("right_chain", chain_path("right"), base)
    library = s.get_path("reference_library", default_library_path(), base)
    s.finish()

    f = sect("filter")
    filter_params = _wrap(
        "filter",
        FilterParams,
        alpha=f.get_float("alpha", 0.3),
        max_linear_velocity=f.get_float("max_linear_velocity", 2.0),
        max_angular_velocity=f.get_float("max_angular_velocity", 6.0),
    )
    f.finish()

    i = sect("ik")
    ik_params = _wrap(
        "ik",
        IKParams,
        omega_q=i.get_float("omega_q", _OMEGA_Q_BY_MODE[mode]),
        mu=i.get_float("mu", 1e-2),
        max_step=i.get_float("max_step", 0.05),
        tracking_gain=i.get_float("tracking_gain", 1.0),
    )
    i.finish()

    n = sect("nullspace")
    nullspace_enabled = n.get_bool("enabled", True)
    nullspace_params = _wrap(
        "nullspace",
        NullspaceParams,
        k_n=n.get_float("k_n", 0.2),
        mode=n.get_choice("mode", "optimal_gain", ("optimal_gain", "fixed_gain")),
        attraction=n.get_choice("attraction", "reference", ("reference", "task_increment")),
        damping=n.get_float("damping", 1e-3),
    )
    n.finish()

    w = sect("watchdog")
    watchdog_policy = _wrap(
        "watchdog",
        WatchdogPolicy,
        max_joint_velocity=w.get_float("max_joint_velocity", 3.0),
        max_tick_jump=w.get_float("max_tick_jump", 0.1),
        trip_action=w.get_choice("action", "attenuate", ("attenuate", "halt")),
        cooldown_ticks=w.get_int("cooldown_ticks", 20),
    )
    w.finish()

    p = sect("pd")
    pd_gains = _wrap(
        "pd",
        PDGains,
        kp=p.get_float("kp", 20.0),
        kd=p.get_float("kd", 0.1),
        max_velocity=p.get_float("max_velocity", 2.0),
    )
    p.finish()

    h = sect("haptics")
    haptics = _wrap(
        "haptics",
        HapticConfig,
        torque_constant=h.get_float("torque_constant", 1.0),
        vibration_scale=h.get_float("vibration_scale", 5.0),
        vibration_tau=h.get_float("vibration_tau", 0.05),
        kinesthetic_gain=h.get_float("kinesthetic_gain", 1.0),
        kinesthetic_cap=h.get_float("kinesthetic_cap", 5.0),
    )
    h.finish()

    g = sect("gateway")
    gateway = _wrap(
        "gateway",
        GatewayConfig,
        host=g.get_str("host", "127.0.0.1"),
        port=g.get_int("port", 8765),
        decimation=g.get_int("decimation", 4),
    )
    g.finish()

    return _wrap(
        "session",
        SessionConfig,
        mode=mode,
        dt=dt,
        frame_mode=frame_mode,
        left_chain=left_chain,
        right_chain=right_chain,
        reference_library=library,
        nullspace_enabled=nullspace_enabled,
        filter_params=filter_params,
        ik_params=ik_params,
        nullspace_params=nullspace_params,
        watchdog_policy=watchdog_policy,
        pd_gains=pd_gains,
        haptics=haptics,
        gateway=gateway,
    )


def _wrap(section, cls, **kwargs):
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def parse_config(text: str, base: Path | str = ".") -> SessionConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"bad INI syntax: {exc}") from None
    return _build(parser, Path(base).resolve())


def load_config(path: Path | str) -> SessionConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return _build_from_text(text, path)


def _build_from_text(text, path):
    try:
        return parse_config(text, base=path.parent)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def default_config(mode: str = "vr") -> SessionConfig:
    """Built-in defaults; equivalent to loading an empty file."""
    return parse_config(f"[session]\nmode = {mode}\n")
