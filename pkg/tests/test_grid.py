import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fraclattice import DomainError, make_grid


def test_horizon_and_virtual_time():
    g = make_grid(4, 0.5, 16, 0.7, 1.0)
    assert g.horizon == 2.0
    assert g.virtual_time(4) == 1.0


def test_virtual_time_sqrt_spacing():
    g = make_grid(10, 0.1, 100, 0.5, 1.0)
    assert g.virtual_time(1) == pytest.approx(0.1, abs=1e-15)
    assert g.virtual_time(100) == pytest.approx(1.0, abs=1e-15)


def test_shallow_depth_rejected():
    with pytest.raises(DomainError):
        make_grid(10, 0.1, 5, 0.5, 1.0)


@pytest.mark.parametrize("kw", [
    {"hurst": 0.0}, {"hurst": 1.0}, {"hurst": 1.5}, {"eps": 0.0}, {"eps": -1.0},
    {"sigma": 0.0}, {"eps": math.inf},
])
def test_invalid_parameters(kw):
    args = {"n_steps": 4, "eps": 1.0, "depth": 16, "hurst": 0.5, "sigma": 1.0, **kw}
    with pytest.raises(DomainError):
        make_grid(**args)


def test_default_depth_is_n_squared():
    assert make_grid(7, 1.0, hurst=0.6).depth == 49


@given(
    n=st.integers(1, 50),
    eps=st.floats(1e-3, 10.0),
    extra=st.integers(0, 50),
)
def test_uniform_tau_squared_spacing(n, eps, extra):
    g = make_grid(n, eps, n + extra, 0.6)
    tau = g.virtual_times
    diffs = np.diff(tau**2)
    np.testing.assert_allclose(diffs, eps**2, rtol=1e-12)
    assert np.all(np.diff(tau) > 0)
    assert g.real_time(n) == pytest.approx(g.horizon, rel=1e-15)
