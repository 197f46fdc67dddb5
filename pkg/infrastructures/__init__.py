from .image_repo import ImageRepo
from .dataset_repo import DatasetRepo
from .checkpoint_repo import CheckpointRepo
from .report_repo import ReportRepo, digest_of, file_digest, canonical_json
from .config_repo import ConfigRepo
