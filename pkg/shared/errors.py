class PatchTriageError(Exception):
    """Base of every error the pipeline raises on purpose; carries a CLI exit code."""
    exit_code = 1


class InvalidArgumentError(PatchTriageError, ValueError):
    exit_code = 2


class ConfigError(PatchTriageError):
    exit_code = 2


class PreconditionError(PatchTriageError):
    exit_code = 2


class RepositoryError(PatchTriageError):
    exit_code = 3


class NotComputableError(PatchTriageError):
    exit_code = 4


class NoLungError(NotComputableError):
    pass
