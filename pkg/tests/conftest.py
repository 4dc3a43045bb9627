import pytest
from hypothesis import HealthCheck, settings

from fresqo.models import SystemParams, Variant, laser_at_first_excited, make_model
from fresqo.sensors import SensorEngine

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def om_small():
    """Strongly coupled optomechanical model at a reduced truncation."""
    p = laser_at_first_excited(SystemParams(0.0, omega_b=2.0, g0=1.0, omega_drive=0.1))
    return make_model(Variant.OM_FULL, p, cavity_dim=4, phonon_dim=5)


@pytest.fixture(scope="session")
def om_engine(om_small):
    return SensorEngine(om_small, 0.5)


@pytest.fixture(scope="session")
def kerr_small():
    p = laser_at_first_excited(SystemParams(0.0, omega_b=2.0, g0=1.0, omega_drive=0.5))
    return make_model(Variant.KERR_DRIVEN, p, cavity_dim=6)


@pytest.fixture(scope="session")
def coherent_model():
    """Driven empty cavity: the steady state is a coherent state."""
    p = SystemParams(delta_a=0.3, omega_b=2.0, g0=0.0, omega_drive=0.05)
    return make_model(Variant.KERR_DRIVEN, p, cavity_dim=6)


def rel(a, b):
    return abs(a - b) / abs(b)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion and fail the test on FAIL."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def report(n: int, ok: bool, detail: str):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[n] = line
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
