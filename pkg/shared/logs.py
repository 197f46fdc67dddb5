import logging

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def configure_logging(verbosity: int = 0) -> None:
    """Install a single stream handler on the root logger.

    verbosity < 0 -> WARNING, 0 -> INFO, > 0 -> DEBUG
    """
    if verbosity < 0:
        level = logging.WARNING
    elif verbosity == 0:
        level = logging.INFO
    else:
        level = logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
