import numpy as np
import pytest

from fresqo.correlators import expectation, g2_blind, g2_blind_zero, spectrum_resolvent
from fresqo.errors import InvalidDimensionError, UndefinedCorrelationError
from fresqo.fock import embed, mode_operator
from fresqo.liouvillian import build_liouvillian, steady_state
from fresqo.models import SystemParams, Variant, collapse_operators, hamiltonian, laser_at_first_excited, make_model
from fresqo.sensors import mean_field, target_operator


def solve(model):
    L = build_liouvillian(hamiltonian(model), collapse_operators(model))
    return L, steady_state(L)


@pytest.fixture(scope="module")
def coherent():
    m = make_model(Variant.KERR_DRIVEN, SystemParams(0.5, 2.0, 0.0, 0.1), 6)
    return (m,) + solve(m)


@pytest.fixture(scope="module")
def om_weak():
    p = laser_at_first_excited(SystemParams(0.0, 2.0, 0.1, 0.1))
    m = make_model(Variant.OM_FULL, p)
    return (m,) + solve(m)


def test_expectation_basics(coherent):
    m, L, rho = coherent
    a = target_operator(m, "a")
    assert expectation(rho, a) == pytest.approx(-0.1 / (0.5j + 0.5), abs=1e-10)
    vac = np.zeros((6, 6))
    vac[0, 0] = 1
    assert expectation(vac, a.dag() @ a) == 0
    with pytest.raises(InvalidDimensionError):
        expectation(np.eye(3), a)


def test_thermal_phonon_statistics():
    m = make_model(Variant.OM_FULL, SystemParams(0.0, 2.0, 0.0, 0.0, n_th=0.1), 2, 14)
    L, rho = solve(m)
    b = embed(mode_operator("annihilate", 14), 1, m.space)
    assert expectation(rho, b.dag() @ b).real == pytest.approx(0.1, rel=1e-8)
    assert g2_blind_zero(rho, b) == pytest.approx(2.0, rel=1e-6)


def test_coherent_g2_flat(coherent):
    m, L, rho = coherent
    vals = g2_blind(L, rho, target_operator(m, "a"), np.linspace(0, 10, 21))
    assert np.max(np.abs(vals - 1)) < 1e-6


def test_blind_g2_weak_coupling(om_weak):
    m, L, rho = om_weak
    assert g2_blind_zero(rho, target_operator(m, "a")) == pytest.approx(0.99, abs=0.01)


def test_blind_g2_factorizes_at_long_delay(om_weak):
    m, L, rho = om_weak
    vals = g2_blind(L, rho, target_operator(m, "a"), [0.0, 20.0, 200.0])
    assert vals[0] == pytest.approx(g2_blind_zero(rho, target_operator(m, "a")), rel=1e-10)
    assert abs(vals[2] - 1) < 1e-4
    assert np.all(vals >= 0)


def test_dark_system_undefined():
    m = make_model(Variant.KERR_DRIVEN, SystemParams(0.5, 2.0, 0.0, 0.0), 4)
    L, rho = solve(m)
    with pytest.raises(UndefinedCorrelationError):
        g2_blind_zero(rho, target_operator(m, "a"))
    with pytest.raises(UndefinedCorrelationError):
        g2_blind(L, rho, target_operator(m, "a"), [0.0])


def test_coherent_spectrum_is_filter_lorentzian(coherent):
    m, L, rho = coherent
    gamma = 0.2
    w = np.linspace(-2, 2, 41)
    s = spectrum_resolvent(L, rho, target_operator(m, "a"), w, gamma).values
    alpha2 = abs(mean_field(m, rho)) ** 2
    lor = alpha2 / np.pi * (gamma / 2) / ((gamma / 2) ** 2 + w ** 2)
    assert np.allclose(s, lor, rtol=1e-8, atol=1e-14)


def test_spectrum_integral_is_population():
    p = laser_at_first_excited(SystemParams(0.0, 2.0, 1.0, 0.5))
    m = make_model(Variant.KERR_DRIVEN, p, 8)
    L, rho = solve(m)
    a = target_operator(m, "a")
    w = np.concatenate([-np.geomspace(400, 1e-4, 600), [0.0], np.geomspace(1e-4, 400, 600)])
    s = spectrum_resolvent(L, rho, a, w, 0.05).values
    total = np.trapezoid(s, w)
    assert total == pytest.approx(expectation(rho, a.dag() @ a).real, rel=0.05)


def test_sidebands_and_positivity():
    p = laser_at_first_excited(SystemParams(0.0, 2.0, 0.5, 0.1))
    m = make_model(Variant.OM_FULL, p, 4, 6)
    L, rho = solve(m)
    w = np.linspace(-3, 3, 41)
    s = spectrum_resolvent(L, rho, target_operator(m, "a"), w, 0.05).values
    assert s.min() > -1e-12 * s.max()
    for w0 in (-2.0, 2.0):
        k = int(np.argmin(np.abs(w - w0)))
        assert s[k] > s[k - 1] and s[k] > s[k + 1]


def test_fluctuation_removes_elastic_peak(om_weak):
    m, L, rho = om_weak
    alpha = mean_field(m, rho)
    sa = spectrum_resolvent(L, rho, target_operator(m, "a"), [0.0], 0.05).values[0]
    sd = spectrum_resolvent(L, rho, target_operator(m, "da", alpha), [0.0], 0.05).values[0]
    assert sa > 10 * sd


def test_spectrum_rejects_bad_width(coherent):
    m, L, rho = coherent
    with pytest.raises(ValueError):
        spectrum_resolvent(L, rho, target_operator(m, "a"), [0.0], 0.0)
