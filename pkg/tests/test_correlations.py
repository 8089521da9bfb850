import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscar.correlations import (
    compute,
    corr,
    deviation_corr,
    pairwise_corr,
    partial_corr,
    residualize,
)
from oscar.errors import DegenerateProfile, LengthMismatch, ZeroVariance

from _oracles import oracle_deviation, oracle_pairwise, oracle_partial


def _pc(a, b, c):
    return partial_corr(a, b, c).rho


def _dc(a, b, c):
    return deviation_corr(a, b, c).rho


def test_pearson_hand_value():
    # cov = 4, each variance sums to 5 -> 4 / 5
    assert corr([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)


def test_residualize_hand_value():
    # slope 0.8, intercept 0.5, worked out from the normal equations
    e = residualize(np.array([1.0, 2, 3, 4]), np.array([1.0, 3, 2, 4]))
    np.testing.assert_allclose(e, [-0.3, -0.9, 0.9, 0.3], atol=1e-12)


def test_partial_corr_hand_value():
    rho = _pc(
        np.array([1.0, 2, 3, 4]),
        np.array([2.0, 1, 4, 3]),
        np.array([1.0, 3, 2, 4]),
    )
    assert rho == pytest.approx(1.0, abs=1e-12)


def test_deviation_corr_hand_values():
    a = np.array([1.0, 2, 3, 4])
    c = np.array([1.0, 3, 2, 4])
    assert _dc(a, np.array([2.0, 1, 4, 3]), c) == pytest.approx(
        1.0, abs=1e-12
    )
    assert _dc(a, np.array([1.0, 2, 3, 4]), c) == pytest.approx(
        0.6, abs=1e-12
    )


def test_matches_exact_rational_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        a, b, c = rng.normal(size=(3, 10))
        assert pairwise_corr(a, b).rho == pytest.approx(
            oracle_pairwise(a, b), abs=1e-12
        )
        assert _pc(a, b, c) == pytest.approx(
            oracle_partial(a, b, c), abs=1e-12
        )
        assert _dc(a, b, c) == pytest.approx(
            oracle_deviation(a, b, c), abs=1e-12
        )


def test_spearman_equals_pearson_on_ranks():
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=(2, 20))
    from scipy.stats import rankdata

    assert corr(x, y, "spearman") == pytest.approx(
        corr(rankdata(x), rankdata(y), "pearson"), abs=1e-12
    )


def test_residual_orthogonal_to_regressor():
    rng = np.random.default_rng(11)
    for _ in range(20):
        x, c = rng.normal(size=(2, 15))
        e = residualize(x, c)
        assert abs(e.sum()) < 1e-9
        assert abs(e @ (c - c.mean())) < 1e-9


def test_residualize_constant_regressor_centers():
    x = np.array([1.0, 2, 3, 4])
    np.testing.assert_allclose(
        residualize(x, np.full(4, 7.0)), x - x.mean(), atol=1e-12
    )


def test_zero_variance_raises():
    with pytest.raises(ZeroVariance):
        corr(np.full(5, 2.0), np.arange(5.0))
    with pytest.raises(ZeroVariance):
        corr(np.arange(5.0), np.full(5, 2.0))


def test_exact_fit_residual_is_degenerate():
    c = np.array([1.0, 3, 2, 4, 5])
    with pytest.raises(DegenerateProfile):
        partial_corr(2.0 * c + 1.0, np.array([2.0, 1, 4, 3, 5]), c)


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        pairwise_corr(np.arange(4.0), np.arange(5.0))


def test_too_short_input():
    with pytest.raises(LengthMismatch):
        partial_corr(np.arange(3.0), np.arange(3.0), np.array([1.0, 3, 2]))


def test_compute_dispatcher_roles():
    a = np.array([1.0, 2, 3, 4])
    b = np.array([2.0, 1, 4, 3])
    c = np.array([1.0, 3, 2, 4])
    res = compute("partial", a, b, c, "pearson", ("TS", "SA", "BA"))
    assert res.kind == "partial"
    assert res.roles == ("TS", "SA", "BA")
    assert res.rho == pytest.approx(1.0, abs=1e-12)
    res = compute("pairwise", a, b, None, "pearson", ("TS", "SA"))
    assert res.rho == pytest.approx(pairwise_corr(a, b).rho, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-1e3, max_value=1e3, allow_nan=False),
        min_size=5,
        max_size=12,
    )
)
def test_pearson_bounded(xs):
    x = np.asarray(xs)
    rng = np.random.default_rng(len(xs))
    y = rng.normal(size=x.size)
    try:
        rho = corr(x, y)
    except ZeroVariance:
        # only (near-)constant inputs may be rejected
        assert np.ptp(x) <= 1e-6 * (1.0 + np.abs(x).max())
    else:
        assert -1.0 - 1e-12 <= rho <= 1.0 + 1e-12
