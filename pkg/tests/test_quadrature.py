import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elslab.quadrature import integrate_to_infinity, loglog_slope


@given(st.floats(1.2, 4.0), st.floats(0.5, 20.0))
@settings(max_examples=25, deadline=None)
def test_power_tail_matches_closed_form(k, a):
    res = integrate_to_infinity(lambda s: s**-k, a)
    assert res.finite
    assert res.value == pytest.approx(a ** (1 - k) / (k - 1), rel=1e-8)


def test_slow_tail_is_divergent():
    for k in (1.0, 0.8):
        assert not integrate_to_infinity(lambda s: s**-k, 1.0).finite


def test_log_corrected_tail_is_flagged_unconverged():
    # int_e^inf ds / (s log(s)^2) = 1; the power-law tail model cannot certify it
    res = integrate_to_infinity(lambda s: 1.0 / (s * math.log(s) ** 2), math.e)
    assert res.finite and not res.converged
    assert res.value == pytest.approx(1.0, rel=1e-2)


def test_loglog_slope_of_power():
    assert loglog_slope(lambda s: 3 * s**-2.5, 1.0, 1e4) == pytest.approx(-2.5, abs=1e-12)
    assert math.isnan(loglog_slope(lambda s: 0.0, 1.0, 10.0))
