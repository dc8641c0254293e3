import os
import tempfile
from pathlib import Path

import numpy as np
import pytest

# keep logs, ledger and results of CLI tests out of the working tree
_SANDBOX = tempfile.mkdtemp(prefix="xlmimo-tests-")
os.environ.setdefault("XLMIMO_LOG_DIR", os.path.join(_SANDBOX, "logs"))
os.environ.setdefault("XLMIMO_LEDGER_PATH", os.path.join(_SANDBOX, "runs.db"))
os.environ.setdefault("XLMIMO_OUTPUT_DIR", os.path.join(_SANDBOX, "results"))

from xlmimo.array_geometry import collocated_ula  # noqa: E402

LAMBDA = 0.125
SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def lam():
    return LAMBDA


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def ula():
    """Collocated ULA factory at λ = 0.125 m, centred on the origin along y."""
    def make(num_elements, wavelength=LAMBDA, **kwargs):
        return collocated_ula(num_elements, wavelength, **kwargs)
    return make


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR
