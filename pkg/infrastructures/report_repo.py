import hashlib
import json
import os
from typing import Any, Dict, Iterable

from shared import FILE_PATH_ROOT, RepositoryError


def canonical_json(payload: Any) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(',', ':')).encode('utf-8')


def digest_of(payload: Any) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, compact separators)."""
    return hashlib.sha256(canonical_json(payload)).hexdigest()


def file_digest(file_paths: Iterable[str]) -> str:
    """SHA-256 over the bytes of the files, in the given order."""
    sha = hashlib.sha256()
    for file_path in file_paths:
        try:
            with open(file_path, 'rb') as file_reader:
                for block in iter(lambda: file_reader.read(1 << 16), b''):
                    sha.update(block)
        except OSError as error:
            raise RepositoryError(f"cannot read {file_path} for digest: {error}")
    return sha.hexdigest()


class ReportRepo:
    """JSON reports and text tables under one output directory."""

    def __init__(self, output_dir: str = FILE_PATH_ROOT + 'runs'):
        self.output_dir = output_dir

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def ensure_dir(self) -> None:
        try:
            os.makedirs(self.output_dir, exist_ok=True)
        except OSError as error:
            raise RepositoryError(f"cannot create output directory {self.output_dir}: {error}")

    def save_json(self, name: str, payload: Dict) -> str:
        self.ensure_dir()
        file_path = self.path(name)
        try:
            with open(file_path, 'w') as file_writer:
                json.dump(payload, file_writer, indent=2, sort_keys=True)
                file_writer.write('\n')
        except (OSError, TypeError) as error:
            raise RepositoryError(f"cannot write report {file_path}: {error}")
        return file_path

    def save_text(self, name: str, text: str) -> str:
        self.ensure_dir()
        file_path = self.path(name)
        try:
            with open(file_path, 'w') as file_writer:
                file_writer.write(text)
        except OSError as error:
            raise RepositoryError(f"cannot write {file_path}: {error}")
        return file_path

    @staticmethod
    def load_json(file_path: str) -> Any:
        try:
            with open(file_path, 'r') as file_reader:
                return json.load(file_reader)
        except FileNotFoundError:
            raise RepositoryError(f"file not found: {file_path}")
        except (OSError, json.JSONDecodeError) as error:
            raise RepositoryError(f"cannot read {file_path}: {error}")
