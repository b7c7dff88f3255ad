import json
from pathlib import Path

import numpy as np
import pytest

from rtemvdr.scenario import build_covariance, reference_scenario

FIXTURES = Path(__file__).parent / "fixtures"
_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def regression():
    return json.loads((FIXTURES / "regression.json").read_text())


@pytest.fixture(scope="session")
def ref_scenario():
    return reference_scenario()


@pytest.fixture(scope="session")
def ref_sigma(ref_scenario):
    return build_covariance(ref_scenario)


def random_hpd(rng, N, floor=0.1):
    A = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    return A @ A.conj().T / N + floor * np.eye(N)


class AcceptanceLog:
    """Collects one verdict line per acceptance criterion."""

    def record(self, tag, passed, detail):
        line = f"{tag} {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[tag] = line
        print(line)
        return passed


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for tag in sorted(_ACCEPTANCE, key=lambda k: int(k[1:])):
            terminalreporter.write_line(_ACCEPTANCE[tag])
