import numpy as np
import pytest

from jjcircuit.config import load_config
from jjcircuit.netlist import parse_netlist
from jjcircuit.units import CHARGE_ENERGY

try:
    from importlib.resources import files
except ImportError:  # pragma: no cover
    from importlib_resources import files

DATA = files("jjcircuit") / "data"

LC = """
cap C 1 0 50
ind L 1 0 400
"""

RF_SQUID = """
jj J 1 0 30 cj=4
ind L 1 0 400 flux=0.3
cap C 1 0 10
"""

FLUX_QUBIT = """
jj J1 1 0 60 cj=4
jj J2 1 2 60 cj=4
jj J3 2 3 42 cj=3
ind Lg 3 0 20 flux=0.48
cap C1 1 0 1
cap C2 2 0 1
cap C3 3 0 2
"""

# two capacitively coupled transmons, detuned by about 2.6 GHz (dispersive regime)
TRANSMON_PAIR = """
jj J1 1 0 20 cj=2
cap C1 1 0 58
jj J2 2 0 35 cj=2
cap C2 2 0 58
cap Cc 1 2 1
qoff 1 0.1
qoff 2 -0.2
"""

# valid non-canonical transform of FLUX_QUBIT: S columns are the node
# displacements of one oscillator and two integer Josephson modes
FLUX_QUBIT_S = np.array([[0.5, 1, 1], [0.25, 0, 1], [1, 0, 0]])

JPSQ_TRUNCATIONS = {"l": 3, "p": 3, "delta": 4, "R": 2, "L": 2, "J": 5, "I": 2}


def transmon_netlist(ec: float, ratio: float, qoff: float = 0.0) -> str:
    """Grounded transmon with charging energy ec (GHz, single-electron) and E_J/E_C = ratio."""
    c = CHARGE_ENERGY / (8 * ec)
    return f"jj J 1 0 {ratio * ec} cj=0\ncap C 1 0 {c}\nqoff 1 {qoff}\n"


def flux_qubit_user_transform():
    return {"names": ["O", "Ja", "Jb"], "kinds": ["oscillator", "josephson", "josephson"],
            "rows": np.linalg.inv(FLUX_QUBIT_S).tolist()}


@pytest.fixture
def lc():
    return parse_netlist(LC)


@pytest.fixture
def rf_squid():
    return parse_netlist(RF_SQUID)


@pytest.fixture
def flux_qubit():
    return parse_netlist(FLUX_QUBIT)


@pytest.fixture(scope="session")
def jpsq_config():
    return load_config(DATA / "jpsq.yaml")


# acceptance criterion number -> printed PASS/FAIL line
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
