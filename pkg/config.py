"""
Configuration for the pose pipeline.

Process settings come from the environment (prefix SELFPOSE3D_) and .env;
training runs are configured by TrainConfig, read from a key-value file.
Uses Pydantic for settings management.
"""

import json
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Type

from dotenv import load_dotenv
from pydantic import Field
from pydantic.fields import FieldInfo
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from domain.errors import FormatError
from domain.models.training import (
    AugmentationConfig,
    GridConfig,
    HyperParams,
    LossConfig,
    ModelConfig,
    PseudoLabelConfig,
    RootTrainingConfig,
    StagesConfig,
    TrainingFlags,
)

# Load environment variables from .env file
load_dotenv()


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="SELFPOSE3D_", env_file=".env", extra="ignore")

    SEED: Optional[int] = Field(None, description="Overrides the seed of every command when set")


def parse_value(raw: str) -> Any:
    """JSON value when it parses, the bare string otherwise"""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def nest(flat: Mapping[str, Any]) -> Dict[str, Any]:
    """{"a.b": 1} -> {"a": {"b": 1}}"""
    out: Dict[str, Any] = {}
    for key, value in flat.items():
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise FormatError(f"config key {key} conflicts with scalar {part}")
            node = child
        node[parts[-1]] = value
    return out


def deep_merge(base: Dict[str, Any], top: Mapping[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, value in top.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def read_key_values(path: Path) -> Dict[str, Any]:
    """Flat {dotted_key: value} from `key = value` lines; `#` starts a comment line"""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise FormatError(f"cannot read config {path}: {e}") from e
    flat: Dict[str, Any] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{n}: expected `key = value`, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if not key:
            raise FormatError(f"{path}:{n}: empty key")
        flat[key] = parse_value(raw)
    return flat


class KeyValueConfigSource(PydanticBaseSettingsSource):
    """Settings source reading a TrainConfig key-value file"""

    def __init__(self, settings_cls: Type[BaseSettings], path: Path):
        super().__init__(settings_cls)
        self.path = Path(path)

    def get_field_value(self, field: FieldInfo, field_name: str) -> Tuple[Any, str, bool]:
        return None, field_name, False

    def __call__(self) -> Dict[str, Any]:
        return nest(read_key_values(self.path))


class TrainConfig(BaseSettings):
    """All knobs of a training run"""

    model_config = SettingsConfigDict(extra="forbid")

    seed: int = 0
    num_views: Optional[int] = Field(None, ge=2, description="Use only the first N cameras of the scene")
    grad_clip: float = Field(1.0, gt=0.0, description="Gradient-norm clipping threshold")
    checkpoint_every: int = Field(50, ge=1, description="Steps between intermediate checkpoints")
    stages: StagesConfig = Field(default_factory=StagesConfig)
    aug: AugmentationConfig = Field(default_factory=AugmentationConfig)
    hyper: HyperParams = Field(default_factory=HyperParams)
    loss: LossConfig = Field(default_factory=LossConfig)
    pseudo: PseudoLabelConfig = Field(default_factory=PseudoLabelConfig)
    root: RootTrainingConfig = Field(default_factory=RootTrainingConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    train: TrainingFlags = Field(default_factory=TrainingFlags)

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings,)

    @classmethod
    def from_file(cls, path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> "TrainConfig":
        """Loads a config file and applies dotted-key overrides on top"""
        data: Dict[str, Any] = KeyValueConfigSource(cls, path)() if path is not None else {}
        if overrides:
            data = deep_merge(data, nest(overrides))
        return cls(**data)

    def to_key_values(self) -> str:
        """The fully resolved config in the key-value file format"""
        lines = []

        def walk(prefix: str, value: Any) -> None:
            if isinstance(value, dict):
                for k, v in value.items():
                    walk(f"{prefix}.{k}" if prefix else k, v)
            else:
                lines.append(f"{prefix} = {json.dumps(value)}")

        walk("", self.model_dump(mode="json", by_alias=True))
        return "\n".join(lines) + "\n"


settings = Settings()
