import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ssrkit.models import FockBasisSpec, build_fermion_boson_model, build_two_component_model

settings.register_profile(
    "ssrkit", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("ssrkit")


@pytest.fixture(scope="session")
def fermion_boson():
    """L=2, one or two fermions, at most one boson (dim 9)."""
    return build_fermion_boson_model(
        FockBasisSpec(sites=2, fermion_counts=frozenset({1, 2}), max_total_bosons=1))


@pytest.fixture(scope="session")
def two_component():
    return build_two_component_model(4, 1, potential=[0.0, 0.3, 0.1, 0.5, 0.2, 0.0, 0.4, 0.1])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_state(dim, rng):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


# -- acceptance reporting -------------------------------------------------------

_ACCEPTANCE = pytest.StashKey[dict]()
N_CRITERIA = 12


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = {}


@pytest.fixture
def acceptance(request):
    """Record one criterion outcome: ``acceptance(number, title, passed, detail)``."""
    log = request.config.stash[_ACCEPTANCE]

    def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
        log[number] = (title, bool(passed), detail)
        print(f"\n[acceptance {number:2d}] {'PASS' if passed else 'FAIL'} {title}: {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_ACCEPTANCE, {})
    ran = any("test_acceptance" in str(getattr(r, "nodeid", ""))
              for reps in terminalreporter.stats.values() for r in reps)
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, N_CRITERIA + 1):
        title, passed, detail = log.get(k, ("not recorded", False, "test errored or was skipped"))
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {title}  ({detail})")
