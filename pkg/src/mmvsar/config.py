"""Experiment configuration: JSON schema, defaults and content hash."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema

__all__ = [
    "EXPERIMENT_KINDS",
    "DEFAULTS",
    "CONFIG_SCHEMA",
    "ConfigError",
    "ExperimentConfig",
    "merge_defaults",
    "load_config",
    "config_from_dict",
    "config_hash",
]

EXPERIMENT_KINDS = ("ratio-histogram", "imaging-comparison", "subaperture-sweep",
                    "noise-sweep", "polarimetric", "bound-suite")


class ConfigError(ValueError):
    """Raised for unreadable or schema-violating configuration files."""


# Lengths in meters, grid quantities in resolution units (wavelength * L_o / A).
DEFAULTS: dict[str, Any] = {
    "schema": 1,
    "seed": 0,
    "geometry": {
        "A": 1500.0,
        "h": 8000.0,
        "westStandoff": 7000.0,
        "elementSpacing": 1.0,
        "frequency": 10e9,
        "c": 3.0e8,
        "includeEndpoint": True,
    },
    "segmentation": {"a": 300.0, "centerSpacing": 50.0, "nViews": None},
    "grid": {"extentUnits": 20.0, "spacingUnits": 0.25},
    "sensing": {"phaseMode": "exact", "includePhase": True, "referenceView": 0,
                "reflectivitySampling": "view"},
    "scene": {"scatterers": [], "recipe": None},
    "noise": {"sigmaFraction": 0.0, "seed": 0},
    "solver": {
        "epsilonPolicy": "known",
        "epsilonFactor": None,
        "sigmaHat": None,
        "innerTol": 1e-6,
        "feasibilityTol": 1e-4,
        "maxInnerIters": 20000,
        "maxOuterIters": 60,
    },
    "experiment": {
        "kind": "imaging-comparison",
        "trials": 250,
        "supportSizes": [9, 16, 36],
        "r": 0.5,
        "threshold": 0.1,
        "spacingUnits": [1.0, 3.0],
        "sigmaFractions": [0.0, 0.1],
        "subApertureLengths": [50.0, 70.0, 100.0],
        "smvView": None,
        "smvEpsilonFactor": 1.5,
        "modes": ["closed_form"],
        "restarts": 32,
        "clusterSeparationUnits": [5.0, 8.0],
        "clusterRadiusUnits": 0.5,
        "required": True,
    },
}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_complex = {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}]}
_window = {"enum": ["constant", "boxcar", "gaussian", "raisedCosine"]}

_scatterer = {
    "type": "object",
    "additionalProperties": False,
    "required": ["positionUnits"],
    "properties": {
        "positionUnits": _num,
        "amplitude": _complex,
        "window": _window,
        "visibilityCenter": _num,
        "visibilityWidth": _pos,
        "tensor": {"type": "array", "items": _complex, "minItems": 6, "maxItems": 6},
    },
}

_recipe = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type"],
    "properties": {
        "type": {"enum": ["random-line", "two-cluster", "anisotropic-six"]},
        "count": {"type": "integer", "minimum": 1},
        "spacingUnits": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
        "window": _window,
        "visibilityWidth": _pos,
        "amplitudeRange": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
        "windowOrder": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "isotropicSlot": {"type": "integer", "minimum": 0},
        "perCluster": {"type": "integer", "minimum": 1},
    },
}


def _block(props: dict, required=()) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props,
            "required": list(required)}


CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "experiment"],
    "properties": {
        "schema": {"const": 1},
        "seed": {"type": "integer", "minimum": 0},
        "geometry": _block({
            "A": _pos, "h": _pos, "westStandoff": _nonneg, "elementSpacing": _pos,
            "frequency": _pos, "c": _pos, "includeEndpoint": {"type": "boolean"},
        }),
        "segmentation": _block({
            "a": _pos, "centerSpacing": _pos,
            "nViews": {"oneOf": [{"type": "integer", "minimum": 1}, {"type": "null"}]},
        }),
        "grid": _block({"extentUnits": _pos, "spacingUnits": _pos}),
        "sensing": _block({
            "phaseMode": {"enum": ["exact", "linearized"]},
            "includePhase": {"type": "boolean"},
            "referenceView": {"type": "integer", "minimum": 0},
            "reflectivitySampling": {"enum": ["view", "antenna"]},
        }),
        "scene": _block({
            "scatterers": {"type": "array", "items": _scatterer},
            "recipe": {"oneOf": [_recipe, {"type": "null"}]},
        }),
        "noise": _block({"sigmaFraction": _nonneg, "seed": {"type": "integer", "minimum": 0}}),
        "solver": _block({
            "epsilonPolicy": {"enum": ["known", "sigma", "noiseless"]},
            "epsilonFactor": {"oneOf": [_pos, {"type": "null"}]},
            "sigmaHat": {"oneOf": [_pos, {"type": "null"}]},
            "innerTol": _pos, "feasibilityTol": _pos,
            "maxInnerIters": {"type": "integer", "minimum": 1},
            "maxOuterIters": {"type": "integer", "minimum": 1},
        }),
        "experiment": _block({
            "kind": {"enum": list(EXPERIMENT_KINDS)},
            "trials": {"type": "integer", "minimum": 1},
            "supportSizes": {"type": "array", "items": {"type": "integer", "minimum": 1},
                             "minItems": 1},
            "r": _pos,
            "threshold": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "spacingUnits": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
            "sigmaFractions": {"type": "array", "items": _nonneg, "minItems": 1},
            "subApertureLengths": {"type": "array", "items": _pos, "minItems": 1},
            "smvView": {"oneOf": [{"type": "integer", "minimum": 0}, {"type": "null"}]},
            "smvEpsilonFactor": {"type": "number", "exclusiveMinimum": 1},
            "modes": {"type": "array", "minItems": 1,
                      "items": {"enum": ["closed_form", "numeric_sup", "auto"]}},
            "restarts": {"type": "integer", "minimum": 1},
            "clusterSeparationUnits": {"type": "array", "items": _pos,
                                       "minItems": 2, "maxItems": 2},
            "clusterRadiusUnits": _pos,
            "required": {"type": "boolean"},
        }, required=["kind"]),
    },
}


def merge_defaults(user: dict, defaults: dict = DEFAULTS) -> dict:
    """Deep merge: user values override defaults; lists are replaced whole."""
    out = copy.deepcopy(defaults)
    for key, val in user.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = merge_defaults(val, out[key])
        else:
            out[key] = copy.deepcopy(val)
    return out


def config_hash(data: dict) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, no whitespace), 16 hex chars."""
    blob = json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration with defaults filled in.

    ``data`` is the merged dictionary; ``hash`` covers everything except the
    RNG seed, which is carried separately so seed overrides are visible.
    """

    data: dict
    hash: str
    seed: int
    source: str | None = None

    def __getitem__(self, key):
        return self.data[key]

    @property
    def kind(self) -> str:
        return self.data["experiment"]["kind"]

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        if seed is None:
            return self
        data = copy.deepcopy(self.data)
        data["seed"] = int(seed)
        return ExperimentConfig(data=data, hash=self.hash, seed=int(seed), source=self.source)


def _check(data: dict, schema_input: dict):
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(schema_input), key=lambda e: list(e.path))
    if errors:
        msgs = [f"{'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("; ".join(msgs))
    seg, geom = data["segmentation"], data["geometry"]
    if seg["a"] > geom["A"]:
        raise ConfigError("segmentation/a: sub-aperture longer than the aperture")
    if data["grid"]["spacingUnits"] > data["grid"]["extentUnits"]:
        raise ConfigError("grid/spacingUnits: larger than the grid extent")
    lo, hi = data["experiment"]["spacingUnits"]
    if lo > hi:
        raise ConfigError("experiment/spacingUnits: empty interval")
    sens = data["sensing"]
    if sens["reflectivitySampling"] == "antenna" and sens["phaseMode"] != "exact":
        raise ConfigError("sensing/reflectivitySampling: 'antenna' needs phaseMode 'exact'")
    if data["solver"]["epsilonPolicy"] == "sigma" and data["solver"]["sigmaHat"] is None:
        raise ConfigError("solver/sigmaHat: required by the 'sigma' epsilon policy")


def config_from_dict(user: dict, source: str | None = None) -> ExperimentConfig:
    if not isinstance(user, dict):
        raise ConfigError("configuration must be a JSON object")
    data = merge_defaults(user)
    _check(data, user)
    hashed = {k: v for k, v in data.items() if k != "seed"}
    return ExperimentConfig(data=data, hash=config_hash(hashed), seed=int(data["seed"]),
                            source=source)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        user = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return config_from_dict(user, source=str(path))
