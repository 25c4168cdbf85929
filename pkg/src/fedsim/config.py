"""Flat JSON configuration with dotted section keys.

A config file is a single JSON object whose keys look like ``device.alpha``
or ``train.eta``.  Scalar device values broadcast across workers; lists give
per-worker values and must match ``train.num_workers``.  Unknown keys and
type mismatches are rejected with the offending key named, so sweep scripts
fail loudly on typos.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any

from .wireless import ChannelModel, DeviceModel

__all__ = [
    "ConfigError",
    "DEFAULTS",
    "load_config",
    "validate_config",
    "config_hash",
    "canonical_json",
    "devices_from_config",
    "channel_from_config",
    "energy_budgets_from_config",
]


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


_NUMBER = (int, float)


@dataclass(frozen=True)
class _Spec:
    kind: str
    default: Any
    choices: tuple = ()


DEFAULTS: dict[str, _Spec] = {
    "seed": _Spec("int", 0),
    # worker hardware; scalars broadcast, lists are per worker
    "device.alpha": _Spec("num_or_list", 2e-28),
    "device.c": _Spec("num_or_list", 20.0),
    "device.D": _Spec("num_or_list", 5e6),
    "device.f_min": _Spec("num_or_list", 0.3e9),
    "device.f_max": _Spec("num_or_list", 2e9),
    "device.P_min": _Spec("num_or_list", 0.0),
    "device.P_max": _Spec("num_or_list", 1.0),
    # shared uplink
    "channel.N0": _Spec("num", 1e-8),
    "channel.B": _Spec("num", 15e3),
    "channel.packet_bits": _Spec("num", 7850.0),
    # training process
    "train.num_workers": _Spec("int", 10),
    "train.mode": _Spec("str", "alg1", ("alg1", "alg2")),
    "train.plan": _Spec("str", "energy", ("energy", "perf", "full_power")),
    "train.eta": _Spec("num", 0.005),
    "train.T_total": _Spec("num", 50.0),
    "train.T_l": _Spec("latency", 0.15),
    "train.p_out_target": _Spec("outage", 0.1),
    "train.b": _Spec("num", 0.0),
    "train.p_min": _Spec("num", 1e-4),
    "train.energy_budget": _Spec("num_or_list", 100.0),
    "train.partition": _Spec("str", "iid", ("iid", "by_label")),
    "train.samples_per_worker": _Spec("int", 2000),
    "train.feature_scale": _Spec("num", 60.0),
    "train.eval_every": _Spec("int", 1),
    "train.batch_size": _Spec("opt_int", None),
    "train.replan": _Spec("str", "every_round", ("every_round", "once")),
    "train.allow_fallback": _Spec("bool", True),
    # data location
    "data.dir": _Spec("opt_str", None),
    "data.synthesize_if_missing": _Spec("bool", False),
    # sweep grids
    "sweep.kind": _Spec("str", "energy_grid", ("energy_grid", "latency", "stochastic")),
    "sweep.p_out_values": _Spec("num_list", [0.05, 0.1, 0.2]),
    "sweep.T_l_values": _Spec("num_list", [0.1, 0.15, 0.25]),
    "sweep.b_values": _Spec("num_list", [0.005, 0.01, 0.1]),
    "sweep.include_full_power": _Spec("bool", True),
    "sweep.seeds": _Spec("int_list", [0, 1, 2, 3, 4]),
    # analysis property suite
    "analyze.trials": _Spec("int", 100_000),
    "analyze.instances": _Spec("int", 20),
}


def _check_number(key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, _NUMBER):
        raise ConfigError(key, f"expected a number, got {value!r}")
    return float(value)


def _check_value(key: str, spec: _Spec, value: Any) -> Any:
    if spec.kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if spec.kind == "opt_int":
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer or null, got {value!r}")
        return value
    if spec.kind == "num":
        return _check_number(key, value)
    if spec.kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true/false, got {value!r}")
        return value
    if spec.kind == "str":
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        if spec.choices and value not in spec.choices:
            raise ConfigError(key, f"expected one of {list(spec.choices)}, got {value!r}")
        return value
    if spec.kind == "opt_str":
        if value is None or isinstance(value, str):
            return value
        raise ConfigError(key, f"expected a string or null, got {value!r}")
    if spec.kind == "num_or_list":
        if isinstance(value, list):
            return [_check_number(key, v) for v in value]
        return _check_number(key, value)
    if spec.kind == "num_list":
        if not isinstance(value, list) or not value:
            raise ConfigError(key, f"expected a non-empty list of numbers, got {value!r}")
        return [_check_number(key, v) for v in value]
    if spec.kind == "int_list":
        if not isinstance(value, list) or not value:
            raise ConfigError(key, f"expected a non-empty list of integers, got {value!r}")
        out = []
        for v in value:
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(key, f"expected integers, got {v!r}")
            out.append(v)
        return out
    if spec.kind == "latency":
        if value == "optimize":
            return value
        return _check_number(key, value)
    if spec.kind == "outage":
        if value == "from_b":
            return value
        if isinstance(value, list):
            return [_check_number(key, v) for v in value]
        return _check_number(key, value)
    raise AssertionError(f"unhandled spec kind {spec.kind}")


def validate_config(raw: dict) -> dict:
    """Fill defaults and type-check every entry; unknown keys are errors."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    cfg: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in DEFAULTS:
            raise ConfigError(key, "unknown key")
        cfg[key] = _check_value(key, DEFAULTS[key], value)
    for key, spec in DEFAULTS.items():
        cfg.setdefault(key, spec.default)

    if cfg["train.num_workers"] < 1:
        raise ConfigError("train.num_workers", "must be at least 1")
    if cfg["train.eta"] <= 0:
        raise ConfigError("train.eta", "must be positive")
    if cfg["train.T_total"] <= 0:
        raise ConfigError("train.T_total", "must be positive")
    if not (0 < cfg["train.p_min"] < 0.5):
        raise ConfigError("train.p_min", "must be in (0, 0.5)")
    if cfg["train.mode"] == "alg2" and cfg["train.b"] <= 0:
        raise ConfigError("train.b", "alg2 requires a positive b")
    if cfg["train.p_out_target"] == "from_b":
        if cfg["train.mode"] != "alg2":
            raise ConfigError("train.p_out_target", "'from_b' requires train.mode = alg2")
        if cfg["train.b"] <= 0:
            raise ConfigError("train.b", "'from_b' requires a positive b")
    if isinstance(cfg["train.T_l"], float) and cfg["train.T_l"] <= 0:
        raise ConfigError("train.T_l", "must be positive")
    if cfg["train.eval_every"] < 1:
        raise ConfigError("train.eval_every", "must be at least 1")
    if cfg["train.batch_size"] is not None and cfg["train.batch_size"] < 1:
        raise ConfigError("train.batch_size", "must be at least 1 (or null)")
    if cfg["train.samples_per_worker"] < 1:
        raise ConfigError("train.samples_per_worker", "must be at least 1")
    if cfg["train.feature_scale"] <= 0:
        raise ConfigError("train.feature_scale", "must be positive")
    return cfg


def load_config(path) -> dict:
    """Parse and validate a flat JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"not valid JSON: {exc}") from exc
    return validate_config(raw)


def canonical_json(obj) -> str:
    """Stable serialization: sorted keys, no extraneous whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    """Short stable digest of a validated config."""
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:12]


def _per_worker(cfg: dict, key: str, num_workers: int) -> list[float]:
    value = cfg[key]
    if isinstance(value, list):
        if len(value) != num_workers:
            raise ConfigError(
                key, f"list length {len(value)} != train.num_workers {num_workers}"
            )
        return list(value)
    return [value] * num_workers


def devices_from_config(cfg: dict) -> list[DeviceModel]:
    """Materialize one device model per worker, broadcasting scalars."""
    m = cfg["train.num_workers"]
    fields = {
        name: _per_worker(cfg, f"device.{name}", m)
        for name in ("alpha", "c", "D", "f_min", "f_max", "P_min", "P_max")
    }
    devices = []
    for i in range(m):
        try:
            devices.append(
                DeviceModel(
                    alpha=fields["alpha"][i],
                    c=fields["c"][i],
                    D=fields["D"][i],
                    f_min=fields["f_min"][i],
                    f_max=fields["f_max"][i],
                    P_max=fields["P_max"][i],
                    P_min=fields["P_min"][i],
                )
            )
        except ValueError as exc:
            raise ConfigError("device.*", f"worker {i}: {exc}") from exc
    return devices


def channel_from_config(cfg: dict) -> ChannelModel:
    try:
        return ChannelModel(
            N0=cfg["channel.N0"],
            B=cfg["channel.B"],
            packet_bits=cfg["channel.packet_bits"],
        )
    except ValueError as exc:
        raise ConfigError("channel.*", str(exc)) from exc


def energy_budgets_from_config(cfg: dict) -> list[float]:
    budgets = _per_worker(cfg, "train.energy_budget", cfg["train.num_workers"])
    if min(budgets) <= 0:
        raise ConfigError("train.energy_budget", "budgets must be positive")
    return budgets
