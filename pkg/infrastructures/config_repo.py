import json
import os
from typing import Optional

from models import RunConfig
from shared import DEFAULT_CONFIG_PATH, ConfigError, RepositoryError


class ConfigRepo:
    """Run configs as strict JSON; a missing path means the shipped default config."""

    def __init__(self, default_path: str = DEFAULT_CONFIG_PATH):
        self.default_path = default_path

    def load(self, file_path: Optional[str] = None) -> RunConfig:
        file_path = file_path or self.default_path
        if not file_path or not os.path.exists(file_path):
            if file_path == self.default_path:
                return RunConfig()
            raise ConfigError(f"config file not found: {file_path}")
        try:
            with open(file_path, 'r') as file_reader:
                data = json.load(file_reader)
        except json.JSONDecodeError as error:
            raise ConfigError(f"config {file_path} is not valid JSON: {error}")
        except OSError as error:
            raise RepositoryError(f"cannot read config {file_path}: {error}")
        return RunConfig.from_dict(data)

    def save(self, file_path: str, cfg: RunConfig) -> str:
        try:
            with open(file_path, 'w') as file_writer:
                json.dump(cfg.to_dict(), file_writer, indent=2, sort_keys=True)
        except OSError as error:
            raise RepositoryError(f"cannot write config {file_path}: {error}")
        return file_path
