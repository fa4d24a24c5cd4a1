from __future__ import annotations

import hashlib
import json
from functools import lru_cache
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ConfigError

CONFIG_VERSION = 1

EMOTIONS = ("anger", "fear", "joy", "sadness")


class NetworkSettings(BaseModel):
    """Classifier preset; partial overrides keep the remaining defaults."""

    lstm_units: int = Field(default=128, gt=0)
    lstm_dropout: float = Field(default=0.5, ge=0.0, lt=1.0)
    conv_filters: int = Field(default=128, gt=0)
    kernel_size: int = Field(default=2, gt=0)
    post_pool_dropout: float = Field(default=0.5, ge=0.0, lt=1.0)
    trainable_embeddings: bool = False
    epochs: int = Field(default=10, gt=0)
    batch_size: int = Field(default=8, gt=0)


class RegressorNetworkSettings(NetworkSettings):
    lstm_units: int = Field(default=64, gt=0)
    lstm_dropout: float = Field(default=0.8, ge=0.0, lt=1.0)
    conv_filters: int = Field(default=64, gt=0)
    post_pool_dropout: float = Field(default=0.8, ge=0.0, lt=1.0)
    epochs: int = Field(default=15, gt=0)


class AdamSettings(BaseModel):
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class BoostingSettings(BaseModel):
    max_depth: int = Field(default=2, gt=0)
    learning_rate: float = Field(default=0.01, gt=0.0)
    n_estimators: int = Field(default=400, ge=0)
    reg_lambda: float = Field(default=1.0, ge=0.0)
    min_samples_leaf: int = Field(default=2, gt=0)
    excluded_sources: List[str] = Field(default_factory=list)


class FearBoostingSettings(BoostingSettings):
    max_depth: int = Field(default=5, gt=0)
    n_estimators: int = Field(default=300, ge=0)
    excluded_sources: List[str] = Field(default_factory=lambda: ["eipu"])


class Settings(BaseSettings):
    config_version: int = Field(default=CONFIG_VERSION, alias="CONFIG_VERSION")
    seed: int = Field(default=13, alias="SEED")
    log_level: str = Field(default="INFO", alias="LOG_LEVEL")
    database_url: str = Field(default="sqlite:///tweetaffect.sqlite3", alias="DATABASE_URL")
    max_seq_len: int = Field(default=64, gt=0, alias="MAX_SEQ_LEN")
    embedding_dim: int = Field(default=100, gt=0, alias="EMBEDDING_DIM")
    embedding_init_range: float = Field(default=0.05, gt=0.0, alias="EMBEDDING_INIT_RANGE")
    debug_checks: bool = Field(default=False, alias="DEBUG_CHECKS")

    eccu: NetworkSettings = Field(default_factory=NetworkSettings, alias="ECCU")
    eipu: RegressorNetworkSettings = Field(default_factory=RegressorNetworkSettings, alias="EIPU")
    eipu_epochs_by_emotion: Dict[str, int] = Field(
        default_factory=lambda: {"anger": 40}, alias="EIPU_EPOCHS_BY_EMOTION"
    )
    adam: AdamSettings = Field(default_factory=AdamSettings, alias="ADAM")

    fusion_c1: BoostingSettings = Field(default_factory=BoostingSettings, alias="FUSION_C1")
    fusion_c2: FearBoostingSettings = Field(default_factory=FearBoostingSettings, alias="FUSION_C2")
    fusion_preset_by_emotion: Dict[str, str] = Field(
        default_factory=lambda: {"anger": "c1", "fear": "c2", "joy": "c1", "sadness": "c1"},
        alias="FUSION_PRESET_BY_EMOTION",
    )

    shapley_samples: int = Field(default=2000, gt=0, alias="SHAPLEY_SAMPLES")
    ridge_alpha: float = Field(default=1.0, gt=0.0, alias="RIDGE_ALPHA")
    decision_threshold: float = Field(default=0.5, gt=0.0, lt=1.0, alias="DECISION_THRESHOLD")

    model_config = SettingsConfigDict(
        env_file=None,
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="ignore",
        populate_by_name=True,
    )

    @field_validator("config_version")
    @classmethod
    def _check_version(cls, value: int) -> int:
        if value != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {value}, expected {CONFIG_VERSION}")
        return value

    def eipu_epochs(self, emotion: Optional[str]) -> int:
        if emotion is not None and emotion in self.eipu_epochs_by_emotion:
            return self.eipu_epochs_by_emotion[emotion]
        return self.eipu.epochs

    def fusion_preset(self, emotion: Optional[str], name: Optional[str] = None) -> BoostingSettings:
        key = name or self.fusion_preset_by_emotion.get(emotion or "", "c1")
        if key == "c1":
            return self.fusion_c1
        if key == "c2":
            return self.fusion_c2
        raise ConfigError(f"unknown fusion preset {key!r}")


@lru_cache()
def get_settings(config_file: Optional[str] = None) -> Settings:
    """Return cached settings instance, optionally read from a key-value file."""
    try:
        return Settings(_env_file=config_file)  # type: ignore[call-arg]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_fingerprint(settings: Settings, vocab_hash: str = "", seed: Optional[int] = None) -> str:
    payload = {
        "settings": settings.model_dump(mode="json"),
        "vocab": vocab_hash,
        "seed": settings.seed if seed is None else seed,
    }
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]
