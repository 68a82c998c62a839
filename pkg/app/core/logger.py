import logging

from rich.console import Console
from rich.logging import RichHandler

from app.core.config import settings

logger = logging.getLogger("app")


def configure_logging(level: str = settings.LOG_LEVEL) -> logging.Logger:
    """Attach a rich handler to the shared logger (idempotent)."""
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=False)
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)
    logger.setLevel(level.upper())
    logger.propagate = False
    return logger
