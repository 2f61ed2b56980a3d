"""One JSON config document drives every command.

Schema (all keys optional; every omitted key takes the default shown by
``default_config()``; unknown keys are errors)::

    {
      "reward":     {"weights": [0.8, 0.1, 0.1],
                     "box_variants": {"BBox": "bonus", "Boundary": "plain"}},
      "advantage":  {<ArpoConfig fields>},
      "env":        {<EnvConfig fields>},
      "train":      {<TrainConfig fields except strategy and seed>},
      "strategies": ["GRPO", "ARPO"],
      "seeds":      [0, 1, 2, 3, 4]
    }
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from .advantage import STRATEGIES, ArpoConfig
from .errors import ConfigError, InputError
from .geometry import BoxVariant
from .rewards import DEFAULT_BOX_VARIANTS, SPATIAL_KINDS, RewardWeights, TaskKind
from .sim import EnvConfig, TrainConfig

_TRAIN_FILE_KEYS = tuple(f.name for f in fields(TrainConfig) if f.name not in ("strategy", "seed"))
_TOP_KEYS = ("reward", "advantage", "env", "train", "strategies", "seeds")


@dataclass(frozen=True)
class RewardConfig:
    weights: RewardWeights = RewardWeights()
    box_variants: Mapping[TaskKind, BoxVariant] = field(default_factory=lambda: dict(DEFAULT_BOX_VARIANTS))

    def to_dict(self) -> dict:
        w = self.weights
        return {
            "weights": [w.task, w.spatial, w.fmt],
            "box_variants": {k.value: v for k, v in self.box_variants.items()},
        }


@dataclass(frozen=True)
class Config:
    reward: RewardConfig = RewardConfig()
    advantage: ArpoConfig = ArpoConfig()
    env: EnvConfig = EnvConfig()
    train: TrainConfig = TrainConfig()
    strategies: tuple[str, ...] = ("GRPO", "ARPO")
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)

    def to_dict(self) -> dict:
        train = {k: getattr(self.train, k) for k in _TRAIN_FILE_KEYS}
        return {
            "reward": self.reward.to_dict(),
            "advantage": self.advantage.to_dict(),
            "env": {**asdict(self.env), "counts": dict(self.env.counts)},
            "train": train,
            "strategies": list(self.strategies),
            "seeds": list(self.seeds),
        }

    def with_seed(self, seed: int) -> "Config":
        """Shift the seed list to start at ``seed`` and reseed clustering."""
        return replace(
            self,
            seeds=tuple(seed + i for i in range(len(self.seeds))),
            advantage=replace(self.advantage, kmeans_seed=seed),
        )


def default_config() -> Config:
    return Config()


def _check_keys(section: str, data: Any, allowed) -> None:
    if not isinstance(data, Mapping):
        raise ConfigError(f"config section '{section}' must be an object")
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown config key '{section}.{key}'" if section else f"unknown config key '{key}'")


def _build(section: str, cls, data: Mapping) -> Any:
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"bad value in config section '{section}': {exc}") from None
    except InputError as exc:
        raise ConfigError(f"config section '{section}': {exc}") from None


def config_from_dict(data: Mapping[str, Any]) -> Config:
    _check_keys("", data, _TOP_KEYS)
    cfg = Config()

    if "reward" in data:
        sec = data["reward"]
        _check_keys("reward", sec, ("weights", "box_variants"))
        weights = cfg.reward.weights
        if "weights" in sec:
            w = sec["weights"]
            if not isinstance(w, list) or len(w) != 3:
                raise ConfigError("reward.weights must be a list of 3 numbers")
            try:
                weights = RewardWeights(*(float(x) for x in w))
            except (InputError, TypeError, ValueError) as exc:
                raise ConfigError(f"reward.weights: {exc}") from None
        variants = dict(cfg.reward.box_variants)
        for name, v in sec.get("box_variants", {}).items():
            try:
                kind = TaskKind.parse(name)
            except InputError:
                raise ConfigError(f"unknown config key 'reward.box_variants.{name}'") from None
            if kind not in SPATIAL_KINDS or v not in ("plain", "bonus"):
                raise ConfigError(f"reward.box_variants.{name} must be 'plain' or 'bonus' on a box task")
            variants[kind] = v
        cfg = replace(cfg, reward=RewardConfig(weights, variants))

    if "advantage" in data:
        _check_keys("advantage", data["advantage"], {f.name for f in fields(ArpoConfig)})
        cfg = replace(cfg, advantage=_build("advantage", ArpoConfig, data["advantage"]))

    if "env" in data:
        _check_keys("env", data["env"], {f.name for f in fields(EnvConfig)})
        cfg = replace(cfg, env=_build("env", EnvConfig, data["env"]))

    if "train" in data:
        _check_keys("train", data["train"], _TRAIN_FILE_KEYS)
        cfg = replace(cfg, train=_build("train", TrainConfig, data["train"]))

    if "strategies" in data:
        st = data["strategies"]
        if not isinstance(st, list) or not st or any(s not in STRATEGIES for s in st):
            raise ConfigError(f"strategies must be a nonempty list drawn from {list(STRATEGIES)}")
        cfg = replace(cfg, strategies=tuple(st))

    if "seeds" in data:
        sd = data["seeds"]
        if not isinstance(sd, list) or not sd or any(isinstance(s, bool) or not isinstance(s, int) for s in sd):
            raise ConfigError("seeds must be a nonempty list of integers")
        cfg = replace(cfg, seeds=tuple(sd))
    return cfg


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return default_config()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_dict(data)
