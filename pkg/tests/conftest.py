import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kerr_epr import epr_entangler, kerr_sagnac
from kerr_epr.quadrature_core import db_to_variance, make_squeezed

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

V_S = db_to_variance(3.9)
V_P = db_to_variance(4.1)


def squeezed(v_plus, v_minus=None, carrier=1.0, label="m0"):
    return make_squeezed(v_plus, 1.0 / v_plus if v_minus is None else v_minus, 0.0, carrier, label)


@pytest.fixture(scope="session")
def headline_state():
    return epr_entangler.entangle(squeezed(V_S, label="s"), squeezed(V_P, label="p"),
                                  epr_entangler.EntanglerParams.ideal())


@pytest.fixture(scope="session")
def calibrated_p():
    base = kerr_sagnac.SagnacParams(reflectivity=0.90)
    cal = kerr_sagnac.calibrate_kappa(base, 110.0, V_P)
    return cal, cal.params(base)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
