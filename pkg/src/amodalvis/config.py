"""Run configuration: JSON file, schema-validated, defaults filled in.

One config drives every CLI subcommand; each section maps to one part of
the system. Unknown keys are rejected so typos fail before a run starts.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import jsonschema

DEFAULT_CONFIG: dict = {
    "data": {
        "train_dir": None,
        "test_dir": None,
    },
    "generate": {
        "height": 64,
        "width": 64,
        "num_frames": 16,
        "num_instances_min": 2,
        "num_instances_max": 5,
        "num_categories": 3,
        "size_min": 5.0,
        "size_max": 11.0,
        "speed_max": 3.0,
        "bounce": True,
        "noise_std": 4.0,
        "spawn_margin": 0.25,
        "num_videos": 20,
        "seed": 0,
    },
    "model": {
        "num_prototypes": 8,
        "embed_dim": 32,
        "num_categories": 3,
        "frame_height": 64,
        "frame_width": 64,
        "decoder_layers": 2,
        "dtype": "float64",
    },
    "clip": {
        "length": 3,
    },
    "samh": {
        "enabled": True,
        "layers": 2,
        "conv_layers": 4,
        "use_vspm": True,
        "use_aspm": True,
        "teacher_force_vspm": False,
        "aux_loss": False,
    },
    "update": {
        "softmax": True,
    },
    "loss": {
        "class_weight": 1.0,
        "visible_weight": 1.0,
        "amodal_weight": 1.0,
    },
    "train": {
        "learning_rate": 1e-3,
        "epochs": 3,
        "seed": 0,
        "checkpoint_interval": 200,
        "log_interval": 25,
    },
    "infer": {
        "score_threshold": 0.3,
    },
    "eval": {
        "tracking_geometry": "box",
    },
}

_SECTION_SCHEMAS = {
    "data": {
        "train_dir": {"type": ["string", "null"]},
        "test_dir": {"type": ["string", "null"]},
    },
    "generate": {
        "height": {"type": "integer", "minimum": 4},
        "width": {"type": "integer", "minimum": 4},
        "num_frames": {"type": "integer", "minimum": 1},
        "num_instances_min": {"type": "integer", "minimum": 1},
        "num_instances_max": {"type": "integer", "minimum": 1},
        "num_categories": {"type": "integer", "minimum": 1},
        "size_min": {"type": "number", "exclusiveMinimum": 0},
        "size_max": {"type": "number", "exclusiveMinimum": 0},
        "speed_max": {"type": "number", "minimum": 0},
        "bounce": {"type": "boolean"},
        "noise_std": {"type": "number", "minimum": 0},
        "spawn_margin": {"type": "number", "minimum": 0},
        "num_videos": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
    },
    "model": {
        "num_prototypes": {"type": "integer", "minimum": 1},
        "embed_dim": {"type": "integer", "minimum": 1},
        "num_categories": {"type": "integer", "minimum": 1},
        "frame_height": {"type": "integer", "minimum": 4},
        "frame_width": {"type": "integer", "minimum": 4},
        "decoder_layers": {"type": "integer", "minimum": 1},
        "dtype": {"enum": ["float32", "float64"]},
    },
    "clip": {
        "length": {"type": "integer", "minimum": 1},
    },
    "samh": {
        "enabled": {"type": "boolean"},
        "layers": {"type": "integer", "minimum": 0},
        "conv_layers": {"type": "integer", "minimum": 2},
        "use_vspm": {"type": "boolean"},
        "use_aspm": {"type": "boolean"},
        "teacher_force_vspm": {"type": "boolean"},
        "aux_loss": {"type": "boolean"},
    },
    "update": {
        "softmax": {"type": "boolean"},
    },
    "loss": {
        "class_weight": {"type": "number", "minimum": 0},
        "visible_weight": {"type": "number", "minimum": 0},
        "amodal_weight": {"type": "number", "minimum": 0},
    },
    "train": {
        "learning_rate": {"type": "number", "exclusiveMinimum": 0},
        "epochs": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "checkpoint_interval": {"type": "integer", "minimum": 1},
        "log_interval": {"type": "integer", "minimum": 1},
    },
    "infer": {
        "score_threshold": {"type": "number", "minimum": 0, "maximum": 1},
    },
    "eval": {
        "tracking_geometry": {"enum": ["box", "mask"]},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        section: {
            "type": "object",
            "additionalProperties": False,
            "properties": props,
        }
        for section, props in _SECTION_SCHEMAS.items()
    },
}


class ConfigError(Exception):
    """Raised for malformed or inconsistent run configurations."""


def merge_defaults(config: dict) -> dict:
    merged = copy.deepcopy(DEFAULT_CONFIG)
    for section, values in config.items():
        if section in merged and isinstance(values, dict):
            merged[section].update(values)
        else:
            merged[section] = values
    return merged


def validate_config(config: dict) -> dict:
    """Schema-check, fill defaults and cross-check a raw config dict."""
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from exc
    merged = merge_defaults(config)
    gen = merged["generate"]
    if gen["num_instances_min"] > gen["num_instances_max"]:
        raise ConfigError("generate.num_instances_min > num_instances_max")
    if gen["size_min"] > gen["size_max"]:
        raise ConfigError("generate.size_min > size_max")
    if merged["samh"]["conv_layers"] % 2:
        raise ConfigError("samh.conv_layers must be even")
    return merged


def load_config(path: str | Path) -> dict:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return validate_config(raw)


def config_hash(config: dict) -> str:
    """Stable digest of a merged config, for checkpoint compatibility."""
    return hashlib.sha256(
        json.dumps(config, sort_keys=True).encode()).hexdigest()
