"""Configuration management using pydantic-settings."""

from pathlib import Path

from pydantic import ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from .exceptions import ConfigurationError
from .models import SimConfig


class Settings(BaseSettings):
    """Runtime settings for the simulator."""

    model_config = SettingsConfigDict(
        env_prefix="QBC_SIM_",
        env_file=".env",
        env_file_encoding="utf-8",
    )

    # Maximum number of sessions executing at once
    parallelism: int = 4

    log_level: str = "WARNING"

    # Directory for transcript dumps when --transcripts is not given
    transcript_dir: str | None = None

    # Seed used when neither the config file nor the CLI sets one
    default_seed: int = 20240601


def get_settings() -> Settings:
    """Get application settings."""
    return Settings()


def load_sim_config(path: str | Path | None, **overrides) -> SimConfig:
    """Load a SimConfig JSON document and apply top-level overrides.

    Raises:
        ConfigurationError: If the file is unreadable or fails validation.
    """
    data: dict = {}
    if path is not None:
        try:
            raw = Path(path).expanduser().read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigurationError(f"Cannot read config file {path}: {e}") from e
        try:
            data = SimConfig.model_validate_json(raw).model_dump()
        except ValidationError as e:
            raise ConfigurationError(f"Invalid config file {path}: {e}") from e
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SimConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}") from e
