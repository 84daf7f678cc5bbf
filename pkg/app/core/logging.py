import logging
from pathlib import Path

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: str = "INFO") -> None:
    """Configure basic logging if not already configured.

    - Sets root logger to the given level with a simple format
    - Keeps httpx request logs at WARNING so run logs stay readable
    """
    root_logger = logging.getLogger()
    if not root_logger.handlers:
        logging.basicConfig(level=level, format=LOG_FORMAT)
    else:
        root_logger.setLevel(level)
    logging.getLogger("httpx").setLevel(logging.WARNING)


def attach_run_log(path: Path) -> logging.Handler:
    """Mirror ``app`` loggers into a run's log file until the handler is detached."""
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(path, encoding="utf-8")
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger = logging.getLogger("app")
    logger.addHandler(handler)
    if logger.getEffectiveLevel() > logging.INFO:
        logger.setLevel(logging.INFO)
    return handler


def detach_run_log(handler: logging.Handler) -> None:
    logging.getLogger("app").removeHandler(handler)
    handler.close()
