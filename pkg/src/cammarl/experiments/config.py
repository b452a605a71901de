"""Experiment configuration: JSON in, validated settings out.

A config names an environment, a modeling mode, and the seeds to sweep;
everything else has defaults.  Validation errors name the offending field.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from cammarl import conformal, ppo
from cammarl.envs.core import ENV_NAMES, EnvSpec, validate_spec
from cammarl.modes import VALID_MODE_NAMES, ModelingMode
from cammarl.training import ConformalTrainConfig, TrainSettings

SCHEMA_VERSION = 1

DEFAULT_ENV_SPECS = {
    "cn": dict(agent_count=2, landmark_count=2),
    "lbf": dict(agent_count=2, food_count=4, grid_size=12, cooperative=True),
    "pressure_plate": dict(agent_count=4),
}


class ConfigError(ValueError):
    """Schema violation; the message names the field."""


@dataclass
class ExperimentConfig:
    env_spec: EnvSpec
    mode: ModelingMode
    seeds: list[int]
    episodes: int = 1000
    alpha: float = 0.1
    lambda_grid: list[float] = field(default_factory=lambda: list(conformal.DEFAULT_LAMBDA_GRID))
    update_interval: int = 2048
    ppo: ppo.PpoConfig = field(default_factory=ppo.PpoConfig)
    conformal: ConformalTrainConfig = field(default_factory=ConformalTrainConfig)
    out_dir: str = "runs"
    checkpoint_interval: int | None = None

    def train_settings(self) -> TrainSettings:
        return TrainSettings(
            env_spec=self.env_spec,
            mode=self.mode,
            episodes=self.episodes,
            alpha=self.alpha,
            lambda_grid=tuple(self.lambda_grid),
            update_interval=self.update_interval,
            ppo=self.ppo,
            conformal=self.conformal,
        )

    def to_json_dict(self) -> dict:
        blob = {
            "schema_version": SCHEMA_VERSION,
            "env": asdict(self.env_spec),
            "mode": self.mode.name,
            "seeds": list(self.seeds),
            "episodes": self.episodes,
            "alpha": self.alpha,
            "lambda_grid": list(self.lambda_grid),
            "update_interval": self.update_interval,
            "ppo": asdict(self.ppo),
            "conformal": asdict(self.conformal),
            "out_dir": self.out_dir,
            "checkpoint_interval": self.checkpoint_interval,
        }
        return blob

    def run_id(self) -> str:
        """Deterministic id: env, mode, and a digest of everything but out_dir."""
        blob = self.to_json_dict()
        blob.pop("out_dir")
        digest = hashlib.sha256(json.dumps(blob, sort_keys=True).encode()).hexdigest()[:8]
        return f"{self.env_spec.env_name}-{self.mode.name}-{digest}"


def _require(condition: bool, fieldname: str, message: str) -> None:
    if not condition:
        raise ConfigError(f"{fieldname}: {message}")


def _build_env_spec(env_blob) -> EnvSpec:
    if isinstance(env_blob, str):
        name = env_blob.strip().lower()
        _require(name in ENV_NAMES, "env", f"unknown environment {env_blob!r}; valid: {ENV_NAMES}")
        return EnvSpec(env_name=name, **DEFAULT_ENV_SPECS[name])
    if not isinstance(env_blob, dict):
        raise ConfigError("env: must be an environment name or an object")
    blob = dict(env_blob)
    name = blob.pop("name", blob.pop("env_name", None))
    _require(name in ENV_NAMES, "env.name", f"unknown environment {name!r}; valid: {ENV_NAMES}")
    merged = dict(DEFAULT_ENV_SPECS[name])
    valid_fields = set(EnvSpec.__dataclass_fields__) - {"env_name"}
    for key, value in blob.items():
        _require(key in valid_fields, f"env.{key}", "unknown field")
        merged[key] = value
    try:
        spec = EnvSpec(env_name=name, **merged)
        validate_spec(spec)
    except ValueError as exc:
        raise ConfigError(f"env: {exc}") from exc
    return spec


def _build_section(blob: dict, fieldname: str, cls):
    if not isinstance(blob, dict):
        raise ConfigError(f"{fieldname}: must be an object")
    valid = set(cls.__dataclass_fields__)
    for key in blob:
        _require(key in valid, f"{fieldname}.{key}", "unknown field")
    return cls(**blob)


def parse_config(blob: dict) -> ExperimentConfig:
    if not isinstance(blob, dict):
        raise ConfigError("config: top level must be a JSON object")
    unknown = set(blob) - {
        "schema_version", "env", "mode", "seeds", "episodes", "alpha", "lambda_grid",
        "update_interval", "ppo", "conformal", "out_dir", "checkpoint_interval",
    }
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown field")
    version = blob.get("schema_version", SCHEMA_VERSION)
    _require(version == SCHEMA_VERSION, "schema_version", f"expected {SCHEMA_VERSION}, got {version}")
    for required in ("env", "mode", "seeds"):
        _require(required in blob, required, "required field is missing")

    env_spec = _build_env_spec(blob["env"])
    try:
        mode = ModelingMode.parse(str(blob["mode"]))
    except ValueError as exc:
        raise ConfigError(f"mode: {exc}") from exc

    seeds = blob["seeds"]
    _require(isinstance(seeds, list) and len(seeds) > 0, "seeds", "must be a non-empty list")
    _require(all(isinstance(s, int) for s in seeds), "seeds", "entries must be integers")
    _require(len(set(seeds)) == len(seeds), "seeds", "entries must be distinct")

    alpha = float(blob.get("alpha", 0.1))
    _require(0.0 < alpha < 1.0, "alpha", f"must be in (0,1), got {alpha}")

    lambda_grid = blob.get("lambda_grid", list(conformal.DEFAULT_LAMBDA_GRID))
    _require(isinstance(lambda_grid, list) and len(lambda_grid) > 0,
             "lambda_grid", "must be a non-empty list")
    _require(all(isinstance(l, (int, float)) and l >= 0 for l in lambda_grid),
             "lambda_grid", "entries must be non-negative numbers")

    episodes = int(blob.get("episodes", 1000))
    _require(episodes >= 1, "episodes", f"must be >= 1, got {episodes}")
    update_interval = int(blob.get("update_interval", 2048))
    _require(update_interval >= 1, "update_interval", f"must be >= 1, got {update_interval}")

    try:
        ppo_cfg = _build_section(blob.get("ppo", {}), "ppo", ppo.PpoConfig)
        ppo_cfg.validate()
    except ValueError as exc:
        raise ConfigError(f"ppo: {exc}") from exc
    conformal_cfg = _build_section(blob.get("conformal", {}), "conformal", ConformalTrainConfig)

    checkpoint_interval = blob.get("checkpoint_interval")
    if checkpoint_interval is not None:
        checkpoint_interval = int(checkpoint_interval)
        _require(checkpoint_interval >= 1, "checkpoint_interval", "must be >= 1 or null")

    return ExperimentConfig(
        env_spec=env_spec,
        mode=mode,
        seeds=[int(s) for s in seeds],
        episodes=episodes,
        alpha=alpha,
        lambda_grid=[float(l) for l in lambda_grid],
        update_interval=update_interval,
        ppo=ppo_cfg,
        conformal=conformal_cfg,
        out_dir=str(blob.get("out_dir", "runs")),
        checkpoint_interval=checkpoint_interval,
    )


def load_config(path) -> ExperimentConfig:
    """Read, parse, and validate a JSON config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config: file not found: {path}")
    try:
        blob = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {path}: {exc}") from exc
    return parse_config(blob)
