from functools import lru_cache
from pathlib import Path
from typing import Optional, Type, TypeVar, Union

import yaml
from pydantic import BaseModel, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from headwayrl import __version__
from headwayrl.core.exceptions import ConfigError

ModelT = TypeVar("ModelT", bound=BaseModel)


class Settings(BaseSettings):
    """
    Process-wide settings, loaded from environment variables prefixed with
    ``HEADWAYRL_`` (for example ``HEADWAYRL_LOG=DEBUG``).
    """
    model_config = SettingsConfigDict(
        env_prefix="HEADWAYRL_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # Logging
    LOG: str = "INFO"
    LOG_FILE: Optional[str] = None

    # Run defaults, overridable per command with --seed / --jobs
    DEFAULT_SEED: int = 7
    JOBS: int = 1

    # Stamped into every run manifest
    ARTIFACT_VERSION: str = __version__


@lru_cache()
def get_settings() -> Settings:
    """
    Returns the settings instance, cached for the lifetime of the process.
    """
    return Settings()


settings = get_settings()


def load_yaml_config(path: Union[str, Path], model: Type[ModelT]) -> ModelT:
    """
    Load a YAML file and validate it against ``model``.

    Raises:
        ConfigError: the file is missing, is not YAML, or fails validation.
            The message names the file and every offending field.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: file not found")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: not valid YAML ({e})") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    try:
        return model.model_validate(raw)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"{path}: schema error: {problems}") from e
