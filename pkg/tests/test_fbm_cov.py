import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fraclattice import DimensionError, DomainError, make_grid
from fraclattice.fbm_cov import (
    CovarianceMatrix,
    increment_cov,
    increment_cov_asymptote,
    increment_cov_matrix,
    partial_sum_cov,
    path_cov,
    truncation_error,
)


class TestPathCov:
    def test_brownian_is_min(self):
        assert path_cov(2, 3, 0.5, 1.0) == pytest.approx(2.0)

    def test_variance(self):
        assert path_cov(1, 1, 0.75, 2.0) == pytest.approx(4.0)

    def test_unequal_times(self):
        assert path_cov(1, 2, 0.75, 1.0) == pytest.approx(math.sqrt(2), rel=1e-12)

    def test_negative_time_rejected(self):
        with pytest.raises(DomainError):
            path_cov(-1, 2, 0.5)

    @given(s=st.floats(0, 50), t=st.floats(0, 50), h=st.floats(0.5, 0.99))
    def test_nonnegative_for_persistent_regime(self, s, t, h):
        assert path_cov(s, t, h) >= -1e-12

    @given(s=st.floats(0.01, 10), t=st.floats(0.01, 10), a=st.floats(0.1, 10),
           h=st.floats(0.05, 0.95))
    def test_self_similarity(self, s, t, a, h):
        lhs = path_cov(a * s, a * t, h)
        rhs = a ** (2 * h) * path_cov(s, t, h)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12 * a ** (2 * h) * max(s, t) ** (2 * h))


class TestIncrementCov:
    def test_brownian_increments_independent(self):
        assert increment_cov(1, 1.0, 0.5) == pytest.approx(0.0, abs=1e-15)

    def test_lag_zero(self):
        assert increment_cov(0, 0.5, 0.7) == pytest.approx(0.5**1.4, rel=1e-12)
        assert 0.5**1.4 == pytest.approx(0.37893, abs=5e-6)

    def test_asymptote_at_lag_8(self):
        exact = increment_cov(8, 1.0, 0.7)
        approx = 0.7 * 0.4 * 8 ** (-0.6)
        assert increment_cov_asymptote(8, 1.0, 0.7) == pytest.approx(approx, rel=1e-12)
        assert abs(exact - approx) / exact < 0.02

    def test_two_step_matrix(self):
        c = increment_cov_matrix(make_grid(2, 1.0, 4, 0.7)).entries
        off = 0.5 * (2**1.4 - 2)
        np.testing.assert_allclose(c, [[1, off], [off, 1]], rtol=1e-12)
        assert off == pytest.approx(0.31951, abs=5e-6)

    def test_brownian_matrix_diagonal(self):
        c = increment_cov_matrix(make_grid(3, 0.25, 9, 0.5, 2.0)).entries
        np.testing.assert_allclose(c, np.eye(3) * 0.25 * 4.0, atol=1e-15)

    @pytest.mark.parametrize("h", [0.1, 0.3, 0.5, 0.7, 0.95])
    def test_psd(self, h):
        cov = increment_cov_matrix(make_grid(64, 0.1, 64, h))
        assert cov.is_symmetric()
        assert cov.min_eig_ratio() >= -1e-10

    @pytest.mark.parametrize("h", [0.2, 0.5, 0.8])
    def test_telescoping_identity(self, h):
        g = make_grid(64, 0.3, 64, h)
        s = partial_sum_cov(increment_cov_matrix(g).entries)
        t = g.times
        exact = path_cov(t[:, None], t[None, :], h)
        np.testing.assert_allclose(s, exact, rtol=1e-10, atol=1e-12)


class TestTruncationError:
    def test_exact_model_has_no_error(self):
        g = make_grid(32, 0.5, 32, 0.7)
        delta = truncation_error(increment_cov_matrix(g), g)
        assert delta < 1e-12 * g.horizon**1.4

    def test_zero_model_gives_full_variance(self):
        g = make_grid(16, 1.0, 16, 0.7)
        delta = truncation_error(np.zeros((16, 16)), g)
        assert delta == pytest.approx(path_cov(16.0, 16.0, 0.7), rel=1e-14)

    def test_dimension_mismatch(self):
        g = make_grid(16, 1.0, 16, 0.7)
        with pytest.raises(DimensionError):
            truncation_error(np.zeros((8, 8)), g)


def test_covariance_csv_roundtrip(tmp_path):
    import csv

    cov = CovarianceMatrix(np.array([[1.0, 0.25], [0.25, 2.0]]))
    path = tmp_path / "c.csv"
    with open(path, "w") as fh:
        cov.write_csv(fh)
    rows = list(csv.DictReader(open(path)))
    assert list(rows[0]) == ["i", "j", "value"]
    back = np.zeros((2, 2))
    for r in rows:
        back[int(r["i"]), int(r["j"])] = float(r["value"])
    np.testing.assert_array_equal(back, cov.entries)
