"""Experiment configuration: a JSON file with one section per component.

Sections mirror the dataclasses they build (lattice, adapt, reward, episode,
train) plus sweep-level fields (targets, seeds, output_dir, log_cadence).
Missing keys fall back to component defaults; unknown keys are errors so
typos cannot silently revert a value to its default. All quantities use SI
units: meters, seconds, newtons, pascals, kg/m^3.

The canonical hash of a config is the SHA-256 of its canonical JSON form;
sweeps refuse to resume into an output directory written under a different
hash.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .env import EpisodeConfig, RewardConfig
from .lattice import LatticeSpec
from .muscles import AdaptConfig
from .ppo import TrainConfig
from .rods import MaterialParams

_SECTIONS = ("lattice", "adapt", "reward", "episode", "train")


@dataclass(frozen=True)
class ExperimentConfig:
    lattice: LatticeSpec = field(default_factory=LatticeSpec)
    adapt: AdaptConfig = field(default_factory=AdaptConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    targets: tuple[int, ...] = (1,)
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "out"
    log_cadence: int = 50

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if not self.targets:
            raise ValueError("targets must be non-empty")
        if not all(1 <= t <= 8 for t in self.targets):
            raise ValueError("targets must be corner indices in 1..8")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("targets must be distinct")
        if self.log_cadence < 1:
            raise ValueError("log_cadence must be at least 1")


def _build_dataclass(cls, data: dict, context: str):
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ValueError(f"unknown keys in {context}: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if cls is LatticeSpec and key in ("structural_material", "muscle_material"):
            value = _build_dataclass(MaterialParams, dict(value), f"{context}.{key}")
        kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ValueError("config root must be a JSON object")
    unknown = set(data) - set(_SECTIONS) - {"targets", "seeds", "output_dir", "log_cadence"}
    if unknown:
        raise ValueError(f"unknown keys in config: {sorted(unknown)}")
    kwargs = {}
    section_types = {
        "lattice": LatticeSpec,
        "adapt": AdaptConfig,
        "reward": RewardConfig,
        "episode": EpisodeConfig,
        "train": TrainConfig,
    }
    for name, cls in section_types.items():
        if name in data:
            section = data[name]
            if not isinstance(section, dict):
                raise ValueError(f"config section {name!r} must be an object")
            if cls is TrainConfig and "hidden" in section:
                section = {**section, "hidden": tuple(section["hidden"])}
            kwargs[name] = _build_dataclass(cls, dict(section), name)
    for name in ("targets", "seeds"):
        if name in data:
            kwargs[name] = tuple(data[name])
    for name in ("output_dir", "log_cadence"):
        if name in data:
            kwargs[name] = data[name]
    return ExperimentConfig(**kwargs)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except FileNotFoundError as err:
        # a missing path is a configuration mistake, not a runtime failure
        raise ValueError(f"config file not found: {path}") from err
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ValueError(f"config {path} is not valid JSON: {err}") from err
    return config_from_dict(data)


def config_to_dict(config: ExperimentConfig) -> dict:
    data = asdict(config)
    data["targets"] = list(config.targets)
    data["seeds"] = list(config.seeds)
    data["train"]["hidden"] = list(config.train.hidden)
    return data


def config_sha256(config: ExperimentConfig) -> str:
    """Hash identifying the experiment.

    total_episodes is a stopping criterion, not part of the experiment
    identity: raising it extends existing runs, so it stays out of the hash
    (checkpoint loading applies the same exception)."""
    data = config_to_dict(config)
    data["train"].pop("total_episodes")
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2) + "\n")
