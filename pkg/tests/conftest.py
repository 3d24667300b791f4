import json
import math

import pytest

from eplab import TimeGrid, exponential_scenario

# canonical decaying-mass case used throughout: q = 0.4, so
# omega^2 = tau0 + q^2/4 = 0.05 with tau0 = 0.01
OMEGA = math.sqrt(0.05)
TAU0 = 0.01
Q = 0.4


@pytest.fixture(scope="session")
def exp_scenario():
    return exponential_scenario(1.0, OMEGA, TAU0)


@pytest.fixture()
def adaptive_grid():
    return TimeGrid(0.0, 10.0, abs_tol=1e-12, rel_tol=1e-12, samples=1001)


@pytest.fixture()
def scenario_json(tmp_path):
    """Write the canonical scenario to a JSON file and return its path."""
    doc = {
        "mass": {"kind": "exponential", "m0": 1.0, "q": Q},
        "omega": OMEGA,
        "tau": {"kind": "monomial", "value": TAU0},
        "sigma0": 1.0,
        "sigma_dot0": 0.2,
        "grid": {"t0": 0.0, "t1": 10.0, "abs_tol": 1e-12, "rel_tol": 1e-12},
        "solver": "rk45_adaptive",
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc, indent=1))
    return path
