import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import els
from elslab import bounds as B
from elslab import nonlinearity as N
from elslab import potential as P
from elslab.errors import DomainError, InapplicableError
from elslab.shooting import RadialSolution, Indeterminate

GRID = np.geomspace(0.05, 1e3, 600)


def _c2():
    return float(mp.sqrt(3) / 3 * mp.beta(mp.mpf(1) / 6, mp.mpf(1) / 2))


# --- oracles first ---------------------------------------------------------


@given(st.sampled_from([3, 4, 5]), st.floats(-2.0, 2.0))
@settings(max_examples=20, deadline=None)
def test_radial_laplacian_exact_on_quadratics(D, c):
    r = np.geomspace(0.5, 20, 80)
    lap = B.radial_laplacian(r, r**2 + c * r, D)
    # Delta (r^2 + c r) = 2D + c (D-1)/r
    assert np.allclose(lap, 2 * D + c * (D - 1) / r[1:-1], rtol=1e-9)


@pytest.mark.parametrize("beta", [2.0, 5.0, math.inf])
def test_w_beta_closed_form_for_square(beta):
    # with fbar = u^2: int_w^beta ds/s^2 = U gives w = 1/(U + 1/beta)
    nl, pot = N.power(2), P.model(4.0)
    rep = B.subsolution_w_beta(nl, pot, beta, GRID, 3, nl_bar=nl)
    U = P.newtonian_potential(pot, GRID, 3)
    assert np.allclose(rep.primal, 1 / (U + 1 / beta), rtol=1e-9)
    assert rep.verdict


@pytest.mark.parametrize("key", ["power:p=2", "power:p=3", "exponential", "oscillating"])
def test_w_beta_subsolution_and_ordering(key):
    nl, pot = N.parse_nonlinearity(key), P.model(4.0)
    ws = []
    for beta in (2.0, 5.0, math.inf):
        rep = B.subsolution_w_beta(nl, pot, beta, GRID, 3)
        assert rep.verdict, rep.meta
        ws.append(rep.primal)
    assert np.all(ws[0] <= ws[1]) and np.all(ws[1] <= ws[2])


def test_implicit_lower_bound_on_exact_solution(exact_p2):
    rep = B.implicit_lower_bound(exact_p2, N.power(2), P.model(4.0))
    assert rep.verdict
    # on r >= 1: int_{6r^2}^inf ds/s^2 = 1/(6 r^2) and U = 4/(3 r) - 1/(2 r^2)
    sel = rep.grid >= 1
    r = rep.grid[sel]
    assert np.allclose(rep.primal[sel], 1 / (6 * r**2), rtol=1e-6)
    assert np.allclose(rep.bound[sel], 4 / (3 * r) - 1 / (2 * r**2), rtol=1e-10)


def test_largest_gamma_c_closed_form(exact_p2):
    # Phi(6 r^2) r = c2 / sqrt(6) exactly for the explicit solution
    c = B.largest_gamma_c(exact_p2, N.power(2), 4.0)
    assert c == pytest.approx(_c2() / math.sqrt(6), rel=1e-6)


@pytest.mark.parametrize("c", [0.3, 0.5, 0.9])
def test_gamma_bound_and_ratio(exact_p2, c):
    rep = B.gamma_bound(exact_p2, N.power(2), 4.0, c)
    assert rep.verdict
    # Gamma = (c2 / c)^2 r^2, so Gamma / u = (c2 / c)^2 / 6
    assert rep.meta["ratio_tail"] == pytest.approx((_c2() / c) ** 2 / 6, rel=1e-7)


def test_gamma_bound_detects_violation(exact_p2):
    # 10 u exceeds Gamma = (c2/c)^2 r^2 ~ 21.8 r^2 for c = 0.9
    big = RadialSolution(exact_p2.r, 10 * exact_p2.u, 10 * exact_p2.du, Indeterminate("scaled"),
                         3, 60.0, 120.0, 1.0)
    rep = B.gamma_bound(big, N.power(2), 4.0, 0.9)
    assert not rep.verdict and np.nanmin(rep.margin) < 0


def test_gamma_nondecreasing(exact_p2):
    G = B.gamma_bound(exact_p2, N.power(2), 4.0, 0.9).bound
    assert np.all(np.diff(G[np.isfinite(G)]) > 0)


def test_sandwich_for_bounded_solution():
    from elslab.shooting import ShootingConfig, find_bounded
    nl, pot = N.power(2), P.model(4.0)
    sol = find_bounded(nl, pot, 1.0, ShootingConfig(r_max=100, r0=0.0), 3)
    r = sol.r[sol.r > 0]
    w = B.subsolution_w_beta(nl, pot, 1.0, r, 3).primal
    u = sol.u[sol.r > 0]
    assert np.all(w <= u + 1e-9) and np.all(u <= 1.0 + 1e-9)


@pytest.mark.parametrize("u1", [2.0, 6.0])
def test_w_infinity_below_entire_large_solution(u1):
    sol = els(2, 4.0, u1)
    w = B.subsolution_w_beta(N.power(2), P.model(4.0), math.inf, sol.r, 3).primal
    assert np.all(w <= sol.u + 1e-9)


@pytest.mark.parametrize("p", [2.0, 3.0, 5.0])
def test_fiddgr_power_constant(p):
    # (f(u)/u) Phi(u)^2 is the constant Phi(1)^2 for pure powers
    out = B.fiddgr_check(N.power(p), u_hi=1e4, n=41)
    assert out["holds"]
    assert np.allclose(out["product"], N.phi(N.power(p), 1.0) ** 2, rtol=1e-9)


def test_energy_vanishes_for_cubic():
    # u = sqrt(2) r, rho = r^-4: u'^2/rho = 2 r^4 = 2 F(u)
    sol = els(3, 4.0, math.sqrt(2))
    rep = B.energy_P_radial(sol, P.model(4.0), N.power(3), 1.0)
    assert rep.verdict and rep.meta["max_rel_P"] < 1e-6


def test_energy_vanishes_on_exact_solution(exact_p2):
    rep = B.energy_P_radial(exact_p2, P.model(4.0), N.power(2), 1.0)
    assert rep.verdict
    assert rep.meta["max_rel_P"] < 1e-6
    assert rep.meta["C_R"] == pytest.approx(72.0, rel=1e-8)


# --- failure modes ---------------------------------------------------------


def test_energy_rejects_decreasing_weight():
    sol = els(2, 5.0, 1.0)
    with pytest.raises(InapplicableError):
        B.energy_P_radial(sol, P.model(5.0), N.power(2), 1.0)


def test_energy_rejects_perturbed_weight():
    r = np.geomspace(1, 10, 20)
    sol = RadialSolution(r, r**2, 2 * r, Indeterminate("synthetic"), 3, 1.0, 2.0, 1.0)
    with pytest.raises(InapplicableError):
        B.energy_P_radial(sol, P.perturbed(3, 1.0), N.power(2), 1.0)


def test_bound_validation(exact_p2):
    with pytest.raises(DomainError):
        B.gamma_bound(exact_p2, N.power(2), 4.0, -1.0)
    with pytest.raises(DomainError):
        B.gamma_bound(exact_p2, N.power(2), 4.0, 1.0)
    with pytest.raises(DomainError):
        B.gamma_bound(exact_p2, N.power(2), 2.0, 1.0)
    with pytest.raises(InapplicableError):
        B.implicit_lower_bound(exact_p2, N.oscillating(), P.model(4.0))
    with pytest.raises(InapplicableError):
        B.fiddgr_check(N.oscillating())
    with pytest.raises(DomainError):
        B.energy_P_radial(exact_p2, P.model(4.0), N.power(2), 1e6)
