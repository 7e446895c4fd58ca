"""JSON experiment configuration: loading, overrides, validation."""

from __future__ import annotations

import copy
import itertools
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .env import ConfigurationError, ModelConfig, log_power, power
from .harness import ExperimentSpec
from .policies import PolicyDescriptor

DEFAULTS = {
    "run": {"replications": 100, "base_seed": 0, "oracle_replications": 1000,
            "record_trajectory": False},
    "output": {"directory": "results", "formats": ["csv", "json"]},
}


class ConfigError(ConfigurationError):
    """Schema or model-invariant violation in a configuration file."""


def schema() -> dict:
    text = resources.files("popbandit").joinpath("config.schema.json").read_text()
    return json.loads(text)


def _path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        parts += missing[:1]
    elif err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        parts += extra[:1]
    return ".".join(parts) or "<root>"


def load(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(raw: dict, dotted: str, value) -> dict:
    """Set ``raw[a][b]... = value`` for ``dotted = "a.b..."``; list indices allowed."""
    out = copy.deepcopy(raw)
    keys = dotted.split(".")
    node = out
    for k in keys[:-1]:
        if isinstance(node, list):
            node = node[int(k)]
        else:
            node = node.setdefault(k, {})
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value
    return out


def validate(raw: dict) -> dict:
    """Schema plus model-invariant checks; returns the config with defaults filled in."""
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(f"{_path(err)}: {err.message}")
    cfg = copy.deepcopy(raw)
    for section, defaults in DEFAULTS.items():
        cfg[section] = {**defaults, **cfg.get(section, {})}
    model = cfg["model"]
    if "m" in model and model["m"] != len(model["mu"]):
        raise ConfigError(f"model.m: {model['m']} does not match {len(model['mu'])} mu entries")
    if "alpha" in model and "externality" in model:
        raise ConfigError("model: give either alpha or externality, not both")
    build_model(model)  # model invariants (unique best arm, lengths)
    for i, p in enumerate(cfg["policies"]):
        try:
            PolicyDescriptor.from_dict(p)
        except ConfigurationError as exc:
            raise ConfigError(f"policies.{i}: {exc}") from None
    return cfg


def build_model(model: dict, horizon: int | None = None, alpha: float | None = None) -> ModelConfig:
    ext = model.get("externality")
    try:
        if alpha is not None:
            f = power(alpha)
        elif ext is None:
            f = power(model.get("alpha", 1.0))
        elif ext["name"] == "power":
            f = power(ext.get("alpha", 1.0))
        else:
            f = log_power(ext.get("epsilon", 0.1))
        return ModelConfig(model["mu"], model["theta"], horizon=horizon or model["horizon"],
                           externality=f)
    except ConfigurationError as exc:
        raise ConfigError(f"model: {exc}") from None


@dataclass(frozen=True)
class GridPoint:
    horizon: int
    alpha: float | None


def grid(cfg: dict, use_sweep: bool) -> list[GridPoint]:
    """Grid points; ``alpha=None`` keeps the model's own externality."""
    sw = (cfg["run"].get("sweep") or {}) if use_sweep else {}
    horizons = sw.get("horizon", [cfg["model"]["horizon"]])
    alphas = sw.get("alpha", [None])
    return [GridPoint(T, a) for a, T in itertools.product(alphas, horizons)]


def build_specs(cfg: dict, use_sweep: bool = False, backend: str | None = None) -> list[ExperimentSpec]:
    run = cfg["run"]
    specs = []
    for point in grid(cfg, use_sweep):
        model = build_model(cfg["model"], point.horizon, point.alpha)
        for p in cfg["policies"]:
            specs.append(ExperimentSpec(
                model, PolicyDescriptor.from_dict(p), run["replications"], run["base_seed"],
                run["oracle_replications"], run["record_trajectory"], backend))
    return specs


def output_dir(cfg: dict) -> Path:
    return Path(cfg["output"]["directory"])
