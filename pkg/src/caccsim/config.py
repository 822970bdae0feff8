"""JSON scenario configs.

Field names carry units (``_m``, ``_mps``, ``_s``, ...) because unit mix-ups
are the dominant hazard in this domain.  Parsing is strict: unknown keys are
rejected with their path, and canonicalization (fill defaults, sort keys) is
a fixed point under parse -> serialize -> parse.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

from .sim import (
    ActuatorSpec,
    ChannelSpec,
    DisturbanceEvent,
    LeadProfile,
    NoiseSpec,
    ScenarioConfig,
)


class ConfigError(ValueError):
    """Invalid configuration; carries the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _get(d: dict, key: str, default, path: str, kind=None):
    val = d.get(key, default)
    if kind is not None and val is not None and not isinstance(val, kind):
        raise ConfigError(f"{path}.{key}", f"expected {kind}, got {type(val).__name__}")
    return val


def _check_keys(d: dict, allowed, path: str):
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}", "unknown field")


_SCENARIO_KEYS = {
    "initial_distance_m": "d0",
    "initial_lead_speed_mps": "v_l0",
    "initial_ego_speed_mps": "v_e0",
    "speed_limit_mps": "v_max",
    "comfort_accel_max_mps2": "a_max",
    "comfort_accel_min_mps2": "a_min",
    "min_time_to_contact_s": "t_c_min",
    "worst_case_delay_s": "total_delay",
    "lead_braking_mps2": "a_l_brake",
    "ego_braking_mps2": "a_e_brake",
    "frequency_hz": "frequency",
    "duration_s": "duration",
}

_CONTROLLER_KEYS = ("mode", "horizon_steps", "q", "r", "slack_weight",
                    "disturbance_w", "prestabilize")
_CHANNEL_KEYS = ("delay_s", "loss_probability", "seed")
_ACTUATOR_KEYS = ("time_constant_s",)
_PROFILE_KEYS = ("initial_speed_mps", "segments")
_DISTURBANCE_KEYS = ("time_s", "target", "amplitude")
_NOISE_KEYS = ("enabled", "distance_std_m", "lead_speed_std_mps")
_TOP_KEYS = ("scenario", "controller", "lead_profile", "channel", "actuator",
             "disturbances", "noise")


def config_from_dict(data: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from a (possibly partial) config dict."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    _check_keys(data, _TOP_KEYS, "<root>")
    defaults = ScenarioConfig()
    kwargs: dict[str, Any] = {}

    scen = _get(data, "scenario", {}, "<root>", dict)
    _check_keys(scen, _SCENARIO_KEYS, "scenario")
    for json_key, attr in _SCENARIO_KEYS.items():
        if json_key in scen:
            val = scen[json_key]
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ConfigError(f"scenario.{json_key}", "expected a number")
            kwargs[attr] = float(val)

    ctl = _get(data, "controller", {}, "<root>", dict)
    _check_keys(ctl, _CONTROLLER_KEYS, "controller")
    if "mode" in ctl:
        if ctl["mode"] not in ("nominal", "robust"):
            raise ConfigError("controller.mode", f"must be 'nominal' or 'robust', got {ctl['mode']!r}")
        kwargs["mode"] = ctl["mode"]
    if "horizon_steps" in ctl:
        if not isinstance(ctl["horizon_steps"], int) or ctl["horizon_steps"] < 1:
            raise ConfigError("controller.horizon_steps", "expected a positive integer")
        kwargs["horizon"] = ctl["horizon_steps"]
    if "q" in ctl:
        kwargs["q"] = tuple(tuple(float(v) for v in row) for row in ctl["q"])
    if "r" in ctl:
        kwargs["r"] = tuple(tuple(float(v) for v in row) for row in ctl["r"])
    if "slack_weight" in ctl:
        kwargs["slack_weight"] = float(ctl["slack_weight"])
    if "disturbance_w" in ctl:
        w = ctl["disturbance_w"]
        if not isinstance(w, list) or len(w) != 3:
            raise ConfigError("controller.disturbance_w", "expected a 3-element list")
        kwargs["w_disturbance"] = tuple(float(v) for v in w)
    if "prestabilize" in ctl:
        if not isinstance(ctl["prestabilize"], bool):
            raise ConfigError("controller.prestabilize", "expected true/false")
        kwargs["prestabilize"] = ctl["prestabilize"]

    prof = _get(data, "lead_profile", None, "<root>", dict)
    if prof is not None:
        _check_keys(prof, _PROFILE_KEYS, "lead_profile")
        try:
            kwargs["profile"] = LeadProfile(
                initial_speed=float(prof.get("initial_speed_mps", defaults.profile.initial_speed)),
                breakpoints=tuple(
                    (float(t), float(a)) for t, a in prof.get("segments", defaults.profile.breakpoints)
                ),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError("lead_profile", str(exc)) from exc

    chan = _get(data, "channel", None, "<root>", dict)
    if chan is not None:
        _check_keys(chan, _CHANNEL_KEYS, "channel")
        try:
            kwargs["channel"] = ChannelSpec(
                delay=float(chan.get("delay_s", defaults.channel.delay)),
                loss_probability=float(chan.get("loss_probability", defaults.channel.loss_probability)),
                seed=int(chan.get("seed", defaults.channel.seed)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError("channel", str(exc)) from exc

    act = _get(data, "actuator", None, "<root>", dict)
    if act is not None:
        _check_keys(act, _ACTUATOR_KEYS, "actuator")
        try:
            kwargs["actuator"] = ActuatorSpec(
                time_constant=float(act.get("time_constant_s", defaults.actuator.time_constant))
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError("actuator", str(exc)) from exc

    if "disturbances" in data:
        evs = data["disturbances"]
        if not isinstance(evs, list):
            raise ConfigError("disturbances", "expected a list")
        out = []
        for i, ev in enumerate(evs):
            _check_keys(ev, _DISTURBANCE_KEYS, f"disturbances[{i}]")
            try:
                out.append(DisturbanceEvent(
                    time=float(ev["time_s"]),
                    target=str(ev["target"]),
                    amplitude=float(ev["amplitude"]),
                ))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"disturbances[{i}]", str(exc)) from exc
        kwargs["disturbances"] = tuple(out)

    noise = _get(data, "noise", None, "<root>", dict)
    if noise is not None:
        _check_keys(noise, _NOISE_KEYS, "noise")
        kwargs["noise"] = NoiseSpec(
            enabled=bool(noise.get("enabled", False)),
            d_std=float(noise.get("distance_std_m", 0.0)),
            v_l_std=float(noise.get("lead_speed_std_mps", 0.0)),
        )

    try:
        return ScenarioConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError("scenario", str(exc)) from exc


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Canonical (fully populated) dict form of a config."""
    return {
        "scenario": {json_key: getattr(cfg, attr) for json_key, attr in _SCENARIO_KEYS.items()},
        "controller": {
            "mode": cfg.mode,
            "horizon_steps": cfg.horizon,
            "q": [list(row) for row in cfg.q],
            "r": [list(row) for row in cfg.r],
            "slack_weight": cfg.slack_weight,
            "disturbance_w": list(cfg.w_disturbance),
            "prestabilize": cfg.prestabilize,
        },
        "lead_profile": {
            "initial_speed_mps": cfg.profile.initial_speed,
            "segments": [[t, a] for t, a in cfg.profile.breakpoints],
        },
        "channel": {
            "delay_s": cfg.channel.delay,
            "loss_probability": cfg.channel.loss_probability,
            "seed": cfg.channel.seed,
        },
        "actuator": {"time_constant_s": cfg.actuator.time_constant},
        "disturbances": [
            {"time_s": ev.time, "target": ev.target, "amplitude": ev.amplitude}
            for ev in cfg.disturbances
        ],
        "noise": {
            "enabled": cfg.noise.enabled,
            "distance_std_m": cfg.noise.d_std,
            "lead_speed_std_mps": cfg.noise.v_l_std,
        },
    }


def canonical_json(cfg: ScenarioConfig) -> str:
    return json.dumps(config_to_dict(cfg), sort_keys=True, indent=2) + "\n"


def config_digest(cfg: ScenarioConfig) -> str:
    """Stable hash of the canonicalized config."""
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:12]


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return config_from_dict(data)
