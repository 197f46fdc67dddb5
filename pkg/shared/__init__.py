from .constants import FILE_PATH_ROOT, DEFAULT_CONFIG_PATH
from .errors import (PatchTriageError,
                     InvalidArgumentError,
                     ConfigError,
                     PreconditionError,
                     RepositoryError,
                     NotComputableError,
                     NoLungError)
from .logs import configure_logging
from .parallel import resolve_threads, set_threads, get_threads, ordered_map, chunked
