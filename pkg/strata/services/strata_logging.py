import logging
import sys
from datetime import datetime

LOG_FORMAT = "%(asctime)s.%(msecs)03d [%(levelname)s] %(name)s: %(message)s"


def _console_handler(settings) -> logging.Handler:
    # stdout carries command output
    return logging.StreamHandler(stream=sys.stderr)


def _file_handler(settings) -> logging.Handler:
    settings.log_dir.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now().replace(microsecond=0).isoformat()
    return logging.FileHandler(filename=settings.log_dir / f"{stamp}.log")


HANDLERS = {
    "console": (_console_handler,),
    "file": (_file_handler,),
    "both": (_console_handler, _file_handler),
}


def setup_logger(settings) -> logging.Logger:
    """Configures the "strata" logger from settings.log_level and settings.log_output."""
    logger = logging.getLogger("strata")
    logger.setLevel(settings.log_level)
    formatter = logging.Formatter(fmt=LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")
    handlers = [make(settings) for make in HANDLERS[settings.log_output]]
    for handler in handlers:
        handler.setFormatter(formatter)
    logger.handlers = handlers
    logger.propagate = False
    return logger
