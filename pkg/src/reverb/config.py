"""Run configuration: flat key=value sections, diff-friendly.

Grammar (INI as read by configparser, no interpolation):

    [model]
    t_h = 8            ; horizons, feature dims, toggles (see SCHEMA)
    [train]
    lr = 3e-4
    [data]
    manifest = splits.txt
    [output]
    dir = runs/exp

Unknown sections or keys are rejected outright so typos cannot silently
fall back to defaults.  ``--set section.key=value`` overrides reuse the
same schema.  The config hash is the first 12 hex digits of a sha256
over the sorted canonical ``section.key=value`` lines, so any change of
any effective setting changes the hash.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import os

from .errors import ConfigError
from .model import ModelConfig

ENV_OUTPUT_DIR = "REVERB_OUTPUT_DIR"

_OPTIONAL_INT = "optional_int"

SCHEMA = {
    "model": {
        "t_h": int, "t_f": int, "m": int, "dt": float, "transform": str,
        "d": int, "k_g": int, "n_theta": int, "tf_layers": int,
        "tf_heads": int, "noise_dim": _OPTIONAL_INT,
        "use_linear": bool, "use_non": bool, "use_soc": bool,
        "kernel_r": bool, "kernel_g": bool, "per_step_partitions": bool,
    },
    "train": {
        "lr": float, "batch_size": int, "epochs": int, "seed": int,
        "checkpoint_every": int,
    },
    "data": {"manifest": str, "train_split": str, "eval_split": str},
    "output": {"dir": str},
}

_BOOL_WORDS = {
    "1": True, "true": True, "yes": True, "on": True,
    "0": False, "false": False, "no": False, "off": False,
}


@dataclasses.dataclass
class RunConfig:
    model: ModelConfig = dataclasses.field(default_factory=ModelConfig)
    lr: float = 3e-4
    batch_size: int = 1000
    epochs: int = 200
    seed: int = 1
    checkpoint_every: int = 50
    manifest: str = ""
    train_split: str = "train"
    eval_split: str = "test"
    output_dir: str = "runs/default"

    def validate(self) -> "RunConfig":
        self.model.validate()
        if self.lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint interval must be >= 1")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        return self


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def as_sections(cfg: RunConfig) -> dict:
    """Canonical nested dict of every effective setting, as strings."""
    m = cfg.model
    return {
        section: {key: _format(_read_field(cfg, m, section, key))
                  for key in sorted(keys)}
        for section, keys in SCHEMA.items()
    }


def _read_field(cfg: RunConfig, m: ModelConfig, section: str, key: str):
    if section == "model":
        return getattr(m, key)
    if section == "output":
        return cfg.output_dir
    return getattr(cfg, key)


def _hash_lines(lines) -> str:
    digest = hashlib.sha256("\n".join(sorted(lines)).encode("utf-8")).hexdigest()
    return digest[:12]


def config_hash(cfg: RunConfig) -> str:
    return _hash_lines(
        f"{section}.{key}={value}"
        for section, keys in as_sections(cfg).items()
        for key, value in keys.items()
    )


def model_hash(model: ModelConfig) -> str:
    """Hash of the model section alone; checkpoint compatibility key."""
    return _hash_lines(
        f"model.{key}={_format(getattr(model, key))}" for key in SCHEMA["model"]
    )


def dump_config(cfg: RunConfig) -> str:
    """INI text round-trippable through load_config."""
    out = [f"# config_hash={config_hash(cfg)}"]
    for section, keys in as_sections(cfg).items():
        out.append(f"[{section}]")
        out.extend(f"{key} = {value}" for key, value in keys.items())
        out.append("")
    return "\n".join(out)


def _convert(section: str, key: str, raw: str):
    kind = SCHEMA[section][key]
    raw = raw.strip()
    try:
        if kind is bool:
            word = raw.lower()
            if word not in _BOOL_WORDS:
                raise ValueError(raw)
            return _BOOL_WORDS[word]
        if kind is _OPTIONAL_INT:
            return None if raw == "" else int(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(
            f"[{section}] {key}: cannot read {raw!r} as "
            f"{'int' if kind is _OPTIONAL_INT else kind.__name__}"
        ) from None


def _apply(cfg: RunConfig, section: str, key: str, value):
    if section == "model":
        setattr(cfg.model, key, value)
    elif section == "output":
        cfg.output_dir = value
    else:
        setattr(cfg, key, value)


def load_config(path=None, overrides=()) -> RunConfig:
    """Build a RunConfig from an optional INI file plus --set overrides."""
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        unknown = []
        for section in parser.sections():
            if section not in SCHEMA:
                unknown.append(f"[{section}]")
                continue
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    unknown.append(f"[{section}] {key}")
                else:
                    _apply(cfg, section, key, _convert(section, key, raw))
        if unknown:
            raise ConfigError("unknown config keys: " + ", ".join(sorted(unknown)))
    for spec in overrides:
        if "=" not in spec or "." not in spec.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value: {spec!r}")
        dotted, raw = spec.split("=", 1)
        section, key = dotted.split(".", 1)
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown config key {section}.{key}")
        _apply(cfg, section, key, _convert(section, key, raw))
    return cfg.validate()


def resolve_output_dir(cfg: RunConfig, cli_value=None) -> str:
    """Priority: explicit CLI flag, then environment, then config."""
    if cli_value:
        return cli_value
    env = os.environ.get(ENV_OUTPUT_DIR)
    return env if env else cfg.output_dir
