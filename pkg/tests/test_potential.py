import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elslab import potential as P
from elslab.errors import DomainError, PreconditionError


def _U_oracle(rho, r, D):
    # Green's function form: U(r) = int_0^inf rho(s) s^(D-1) max(r, s)^(2-D) ds / (D-2)
    k = lambda s: rho(s) * s ** (D - 1) * max(r, s) ** (2 - D) / (D - 2)
    pts = sorted({0, 0.9, 1, r, 10 * max(r, 1)})
    return float(mp.quad(lambda s: k(float(s)), pts + [mp.inf]))


# --- oracles first ---------------------------------------------------------


@pytest.mark.parametrize("key,D,r", [
    ("model:alpha=4", 3, 0.5), ("model:alpha=4", 3, 7.0), ("model:alpha=3", 4, 2.0),
    ("model:alpha=5,blend=1", 3, 0.95), ("perturbed:D=4,amp=1", 4, 3.0),
    ("smooth", 3, 0.0), ("smooth", 5, 2.5),
])
def test_newtonian_potential_against_green_function(key, D, r):
    pot = P.parse_potential(key)
    assert P.newtonian_potential(pot, r, D) == pytest.approx(_U_oracle(pot.rho_scalar, r, D), rel=1e-9)


def test_newtonian_potential_closed_value():
    # rho = 1 inside, r^-4 outside, D = 3: U(1) = m(1) + T(1) = 1/3 + 1/2
    assert P.newtonian_potential(P.model(4.0), 1.0, 3) == pytest.approx(5.0 / 6.0, rel=1e-14)


def test_newtonian_potential_solves_poisson():
    pot, D = P.smooth(), 3
    r = np.linspace(0.5, 5.0, 10)
    h = 1e-3
    U = lambda x: P.newtonian_potential(pot, x, D)
    lap = (U(r + h) - 2 * U(r) + U(r - h)) / h**2 + (D - 1) / r * (U(r + h) - U(r - h)) / (2 * h)
    assert np.allclose(-lap, pot.rho(r), rtol=1e-5, atol=0)


def test_Hrho_values():
    assert P.check_Hrho(P.model(4.0)).value == pytest.approx(1.0, rel=1e-10)  # 1/2 + 1/2
    assert P.check_Hrho(P.smooth()).value == pytest.approx(0.5, rel=1e-10)
    assert not P.check_Hrho(P.model(2.0)).finite
    assert not P.check_Hrho(P.model(1.5)).finite


@pytest.mark.parametrize("key,D", [("model:alpha=4", 3), ("model:alpha=3.5", 4),
                                   ("perturbed:D=3,amp=0.5", 3), ("smooth", 3)])
def test_closed_mass_and_tail_match_quadrature(key, D):
    pot = P.parse_potential(key)
    g = pot.rho_scalar
    for r in (0.3, 1.0, 4.0):
        m = float(mp.quad(lambda t: t ** (D - 1) * g(float(t)), [0, min(r, 1), r]))
        T = float(mp.quad(lambda t: t * g(float(t)), [r, max(r, 1), mp.inf]))
        assert P.mass(pot, r, D) == pytest.approx(m, rel=1e-10)
        assert P.tail_rho(pot, r) == pytest.approx(T, rel=1e-10)


def test_blend_is_c1_at_one():
    pot = P.model(5.0, blend=True)
    h = 1e-7
    assert pot.rho_scalar(1 - h) == pytest.approx(1.0, abs=1e-6)
    left = (pot.rho_scalar(1.0) - pot.rho_scalar(1 - h)) / h
    assert left == pytest.approx(-5.0, rel=1e-4)


# --- ellipsoid criterion ---------------------------------------------------


@pytest.mark.parametrize("D,a", [(3, 0.8), (4, 0.9), (5, 1.0), (4, 0.6)])
def test_mean_curvature_sign_flip_location(D, a):
    crit = a * a * (2 * D - 2)
    for level in (0.1, 1.0, 10.0):
        assert P.mean_curvature_margin(P.EllipsoidPotential(a, crit - 1e-6, D), level) > 0
        assert P.mean_curvature_margin(P.EllipsoidPotential(a, crit + 1e-6, D), level) < 0


@given(st.integers(3, 6), st.floats(2.1, 12.0), st.floats(1e-2, 1e2))
@settings(max_examples=30, deadline=None)
def test_radial_margin_closed_form(D, alpha, level):
    pot = P.EllipsoidPotential(1.0, alpha, D)
    m, th, prof = P.mean_curvature_margin(pot, level, 64, return_profile=True)
    r = level ** (-1.0 / alpha)
    assert np.allclose(prof, (2 * D - 2 - alpha) / r, rtol=1e-8, atol=1e-12)


def test_criterion_matches_margin_on_sweep():
    rows = P.sweep_rows([(0.8, 2.5, 3), (0.8, 2.6, 3), (0.9, 4.8, 4), (0.9, 4.92, 4)], samples=200)
    for a, al, D, mm, holds in rows:
        assert holds == (mm >= -1e-9)


# --- failure modes ---------------------------------------------------------


def test_validation():
    with pytest.raises(DomainError):
        P.EllipsoidPotential(1.2, 3.0, 3)
    with pytest.raises(DomainError):
        P.EllipsoidPotential(0.5, 2.0, 3)
    with pytest.raises(DomainError):
        P.parse_potential("nope")
    with pytest.raises(DomainError):
        P.newtonian_potential(P.model(4.0), 1.0, 2)
    with pytest.raises(PreconditionError):
        P.newtonian_potential(P.model(2.0), 1.0, 3)
    with pytest.raises(PreconditionError):
        P.newtonian_potential(P.constant(1.0), 1.0, 3)
