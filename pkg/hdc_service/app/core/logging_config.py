import logging
import sys

_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
_DETERMINISTIC_FORMAT = "%(levelname)s %(name)s: %(message)s"


def configure_logging(level: str = "INFO", deterministic: bool = False) -> None:
    """Instala un unico handler en stderr para el paquete `app`."""
    root = logging.getLogger("app")
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(_DETERMINISTIC_FORMAT if deterministic else _FORMAT))
    root.addHandler(handler)
    root.setLevel(level.upper())
    root.propagate = False
