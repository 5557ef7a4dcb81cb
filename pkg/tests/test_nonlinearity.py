import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elslab import nonlinearity as N
from elslab.errors import DomainError, OutOfRangeError


# --- oracles first ---------------------------------------------------------


def test_ko_power_closed_forms():
    for p, lower in [(2, 1.0), (3, 1.0), (2.5, 4.0), (5, 0.5)]:
        exact = 2 * math.sqrt(p + 1) * lower ** ((1 - p) / 2) / (p - 1)
        assert N.ko_integral(N.power(p), lower).value == pytest.approx(exact, rel=1e-9)
    assert abs(N.ko_integral(N.power(2), 1.0).value - 2 * math.sqrt(3)) < 1e-8


def test_ko_divergent_for_linear_and_sublinear():
    for p in (1.0, 0.5):
        assert not N.ko_integral(N.power(p), 1.0).finite


def test_ko_exponential_against_mpmath():
    oracle = mp.quad(lambda s: 1 / mp.sqrt(mp.expm1(s) - s), [1, 10, 50, mp.inf])
    assert N.ko_integral(N.exponential(), 1.0).value == pytest.approx(float(oracle), rel=1e-8)


def _phi_power_exact(p, u):
    # t = u x, then y = x^-(p+1): Phi = sqrt(p+1)/(p+1) B(1/2 - 1/(p+1), 1/2) u^((1-p)/2)
    q = mp.mpf(p) + 1
    return float(mp.sqrt(q) / q * mp.beta(mp.mpf(1) / 2 - 1 / q, mp.mpf(1) / 2)
                 * mp.mpf(u) ** ((1 - mp.mpf(p)) / 2))


@pytest.mark.parametrize("p,u", [(2, 1.0), (2, 37.0), (3, 0.3), (1.5, 2.0), (5, 10.0)])
def test_phi_power_against_beta_function(p, u):
    assert N.phi(N.power(p), u) == pytest.approx(_phi_power_exact(p, u), rel=1e-11)


def test_phi_exponential_against_mpmath():
    # t = u + s^2 with F(t) - F(u) = e^u expm1(s^2) - s^2 written without cancellation
    u = mp.mpf(2)
    g = lambda s: 2 * s / mp.sqrt(mp.exp(u) * mp.expm1(s * s) - s * s)
    oracle = mp.quad(g, [0, 0.5, 1, 2, 4, mp.inf])
    assert N.phi(N.exponential(), 2.0) == pytest.approx(float(oracle), rel=1e-9)


def test_phi_overflow_is_reported():
    with pytest.raises(OutOfRangeError):
        N.phi(N.exponential(), 800.0)


def test_logquartic_extension_is_c1_and_F_consistent():
    nl = N.logquartic()
    e = math.e
    assert nl.f(e - 1e-9) == pytest.approx(nl.f(e + 1e-9), rel=1e-7)
    assert nl.fprime(e - 1e-12) == pytest.approx(nl.fprime(e + 1e-12), rel=1e-9)
    for u in (0.5, e, 4.0, 50.0):
        num = float(mp.quad(lambda t: nl.f(float(t)), [0, min(u, e), u]))
        assert nl.F_closed(u) == pytest.approx(num, rel=1e-10)


def test_oscillating_F_closed_matches_quadrature():
    nl = N.oscillating()
    for u in (1.0, 7.5, 30.0):
        num = float(mp.quad(lambda t: t * t * (1 + mp.cos(t)), mp.linspace(0, u, 12)))
        assert nl.F_closed(u) == pytest.approx(num, rel=1e-11)


# --- properties ------------------------------------------------------------


@given(st.floats(1.1, 6.0), st.floats(1e-3, 1e4))
@settings(max_examples=40, deadline=None)
def test_F_inverse_round_trip(p, u):
    nl = N.power(p)
    assert N.F_inverse(nl, N.eval_F(nl, u)) == pytest.approx(u, rel=1e-9)


@given(st.floats(1e-2, 300.0))
@settings(max_examples=25, deadline=None)
def test_F_inverse_numeric_round_trip(u):
    nl = N.shifted(N.exponential(), 0.0)
    nl = N.with_tolerance(nl, F_inv_closed=None)
    assert N.F_inverse(nl, N.eval_F(nl, u)) == pytest.approx(u, rel=1e-9)


@given(st.sampled_from([1.5, 2.0, 3.0]), st.floats(0.5, 1e3))
@settings(max_examples=25, deadline=None)
def test_phi_inverse_round_trip(p, u):
    nl = N.power(p)
    assert N.phi_inverse(nl, N.phi(nl, u)) == pytest.approx(u, rel=1e-8)


@pytest.mark.parametrize("key", ["power:p=2", "power:p=3", "exponential"])
def test_phi_strictly_decreasing(key):
    nl = N.parse_nonlinearity(key)
    vals = [N.phi(nl, u) for u in np.geomspace(0.5, 300.0, 25)]
    assert np.all(np.diff(vals) < 0)


def test_envelope_is_nondecreasing_majorant_and_strict():
    nl = N.oscillating()
    env = N.monotone_envelope(nl)
    t = np.linspace(0.0, 120.0, 6001)
    fb = np.array([env.f(x) for x in t])
    f = np.array([nl.f(x) for x in t])
    assert np.all(fb >= f - 1e-9 * np.maximum(1.0, f))
    assert np.all(np.diff(fb[t > 0]) > 0)
    assert env.nondecreasing


def test_increasing_majorant_selection():
    p2 = N.power(2)
    assert N.increasing_majorant(p2) is p2
    maj = N.increasing_majorant(N.oscillating())
    assert maj.f(5.0) == pytest.approx(50.0)


@pytest.mark.parametrize("M", [2.0, 10.0, 40.0])
def test_sup_f_bounds_the_maximum(M):
    grid = np.linspace(0, M, 200001)
    true_max = np.max(grid**2 * (1 + np.cos(grid)))
    assert N.sup_f(N.oscillating(), M) >= true_max
    assert N.sup_f(N.power(3), M) == pytest.approx(M**3)


def test_tail_inverter_power():
    # int_w^beta ds / s^2 = 1/w - 1/beta
    inv = N.TailInverter(N.power(2), 5.0)
    for target in (0.01, 0.1, 0.19):
        assert inv.solve(target) == pytest.approx(1.0 / (target + 0.2), rel=1e-9)


def test_check_invariants_catalog():
    for key in ["power:p=2", "exponential", "logquartic", "oscillating"]:
        assert N.parse_nonlinearity(key).check_invariants()


# --- failure modes ---------------------------------------------------------


def test_domain_errors():
    with pytest.raises(DomainError):
        N.power(-1.0)
    with pytest.raises(DomainError):
        N.parse_nonlinearity("nope")
    with pytest.raises(DomainError):
        N.phi(N.oscillating(), 1.0)  # M = inf: Phi is not monotone anywhere
    with pytest.raises(DomainError):
        N.F_inverse(N.power(2), -1.0)
    with pytest.raises(OutOfRangeError):
        N.phi_inverse(N.power(2), -1.0)


def test_parse_shifted_key():
    nl = N.parse_nonlinearity("shifted:base=oscillating,tk=3.14159")
    assert nl.params["tk"] == pytest.approx(3.14159)
    assert nl.f(1.0) == pytest.approx(N.oscillating().f(4.14159))
