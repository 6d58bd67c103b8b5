import pytest

from vortexslit.kinematics import BesselBeam, TransverseVector
from vortexslit.vortex import smearing_for

ACCEPTANCE_LINES = []


def fig3_beams(two_m2=13):
    b1 = BesselBeam.from_energy(2100.0, 200.0, 1, sigma=10.0)
    b2 = BesselBeam.from_kz(-b1.kz, 100.0, two_m2, sigma=5.0)
    return b1, b2


@pytest.fixture(scope="session")
def beams():
    return fig3_beams()


@pytest.fixture(scope="session")
def smearing(beams):
    return smearing_for(beams, 7)


@pytest.fixture(scope="session")
def k1p():
    return TransverseVector(500.0, 0.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
