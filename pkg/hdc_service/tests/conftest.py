import numpy as np
import pytest

from app.core.constants import load_seed_constants
from app.models.hypervector import Geometry
from app.services.encoder_service import EncoderContext


@pytest.fixture(scope="session")
def constants():
    return load_seed_constants()


@pytest.fixture(scope="session")
def geometry():
    return Geometry()


@pytest.fixture(scope="session")
def ctx(geometry, constants):
    return EncoderContext(geometry, constants)


@pytest.fixture(scope="session")
def ctx_small(constants):
    """Datapath de 512 bit para pruebas rapidas."""
    return EncoderContext(Geometry(d=512, k=1, am_rows=8), constants)


@pytest.fixture(scope="session")
def ctx_folded(constants):
    return EncoderContext(Geometry(d=1024, k=2, am_rows=32), constants)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def reset_app_logger():
    import logging

    logger = logging.getLogger("app")
    handlers, level, propagate = list(logger.handlers), logger.level, logger.propagate
    yield
    logger.handlers[:] = handlers
    logger.setLevel(level)
    logger.propagate = propagate
