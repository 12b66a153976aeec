"""TOML run configuration with validated keys and pipeline defaults.

Unknown sections or keys are rejected by name. Defaults encode the
shipping configuration: F-stride 100, ontology ["car", "truck"], 200
training epochs, and all augmentation filters off until configured.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

DEFAULTS: dict[str, dict[str, Any]] = {
    "extract": {"video": "", "frames": "", "fstride": 100, "out": "", "band": "rgb"},
    "pair": {"rgb": "", "lwir": "", "fused": "", "meta_overrides": ""},
    "masks": {"dir": ""},
    "transfer": {"mode": "bbox", "out": "dataset", "simplify_eps_px": 1.0,
                 "cal_lwir": "", "cal_fused": ""},
    "augment": {"ops": [], "blur.sigma": 2.0, "dog.sigma1": 1.0, "dog.sigma2": 2.0,
                "gaussthresh.block": 11, "gaussthresh.bias": 2.0},
    "assemble": {"ratios": [0.8, 0.2], "splits": ["train", "val"],
                 "ontology": ["car", "truck"], "seed": 0, "out": "yolo",
                 "epochs": 200, "model_tag": "yolov8s", "image_size": 640,
                 "mode": "bbox"},
    "train": {"command": ""},
    "run": {"stages": ["pair", "ingest-masks", "transfer", "assemble"], "out": "run"},
}


def _flatten(table: dict, prefix: str = "") -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for key, value in table.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, prefix=f"{name}."))
        else:
            flat[name] = value
    return flat


def load_config(path: str | Path | None = None) -> dict[str, dict[str, Any]]:
    """Parse and validate a TOML config, overlaying it on the defaults."""
    config = {section: dict(values) for section, values in DEFAULTS.items()}
    if path is None:
        return config
    raw = Path(path).read_bytes()
    try:
        parsed = tomllib.loads(raw.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}")
    for section, table in parsed.items():
        if section not in DEFAULTS:
            raise ConfigError("unknown section", key=section)
        if not isinstance(table, dict):
            raise ConfigError("expected a table", key=section)
        for key, value in _flatten(table).items():
            if key not in DEFAULTS[section]:
                raise ConfigError("unknown key", key=f"{section}.{key}")
            config[section][key] = value
    return config


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
