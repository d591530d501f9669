from __future__ import annotations

import functools
import logging
import traceback
import uuid
from logging.handlers import RotatingFileHandler

import settings
from errors import CCHError

_initialized = False


def get_logger(name: str = "cch") -> logging.Logger:
    """Configure the root handlers once (console + rotating file) and return `name`."""
    global _initialized
    logger = logging.getLogger(name)
    if _initialized:
        return logger

    root = logging.getLogger()
    root.setLevel(logging.DEBUG)

    # Console
    c = logging.StreamHandler()
    c.setLevel(getattr(logging, settings.log_level(), logging.INFO))
    c.setFormatter(logging.Formatter("[%(asctime)s] %(levelname)s %(name)s: %(message)s",
                                     datefmt="%H:%M:%S"))
    root.addHandler(c)

    # Rotating file
    try:
        log_dir = settings.log_dir()
        log_dir.mkdir(parents=True, exist_ok=True)
        f = RotatingFileHandler(log_dir / "cch.log", maxBytes=1_000_000, backupCount=5,
                                encoding="utf-8")
        f.setLevel(logging.DEBUG)
        f.setFormatter(logging.Formatter(
            "[%(asctime)s] %(levelname)s %(name)s: %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S"
        ))
        root.addHandler(f)
    except OSError as e:
        logger.warning("File logging disabled: %s", e)

    _initialized = True
    return logger


def cli_try(fn):
    """
    Decorator for CLI commands: solver errors are logged with a short error id
    and turned into their documented exit code; anything else exits 1.
    """
    logger = logging.getLogger("commands")

    @functools.wraps(fn)
    def wrapper(*args, **kwargs) -> int:
        try:
            return fn(*args, **kwargs)
        except CCHError as e:
            err_id = uuid.uuid4().hex[:8]
            logger.error("Command %s failed [%s] (exit %d): %s",
                         fn.__name__, err_id, e.exit_code, e)
            return e.exit_code
        except Exception as e:
            err_id = uuid.uuid4().hex[:8]
            logger.error("Command %s crashed [%s]: %s\n%s",
                         fn.__name__, err_id, e, traceback.format_exc())
            return 1
    return wrapper
