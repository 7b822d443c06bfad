import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lpvi.space import (
    DualFunctional,
    GaugeFunction,
    SpaceMismatch,
    SpacePoint,
    dual_norm,
    duality_defects_rows,
    duality_identity_defects,
    gauge_duality_map,
    normalized_duality_map,
    p_norm,
    pairing,
)

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)
exponents = st.sampled_from([1.5, 2.0, 3.0, 1.1, 4.7])


def vectors(min_size=1, max_size=16):
    return st.integers(min_size, max_size).flatmap(lambda n: arrays(np.float64, n, elements=finite))


def test_rejects_bad_exponents_and_coordinates():
    for p in (1.0, 0.5, math.inf, -2.0):
        with pytest.raises(ValueError):
            SpacePoint([1.0], p)
    with pytest.raises(ValueError):
        SpacePoint([1.0, math.nan], 2.0)
    with pytest.raises(ValueError):
        SpacePoint([math.inf], 2.0)


def test_mismatched_spaces_do_not_mix():
    with pytest.raises(SpaceMismatch):
        SpacePoint([1, 2], 2.0) - SpacePoint([1, 2], 3.0)
    with pytest.raises(SpaceMismatch):
        SpacePoint([1, 2], 2.0) + SpacePoint([1, 2, 3], 2.0)
    with pytest.raises(SpaceMismatch):
        pairing(SpacePoint([1, 2], 3.0), DualFunctional([1, 2], 2.0))


def test_point_is_immutable():
    x = SpacePoint([1.0, 2.0], 2.0)
    with pytest.raises(ValueError):
        x.coords[0] = 5.0


@pytest.mark.parametrize("coords,p,expected", [
    ([3, 4], 2.0, 5.0),
    ([0, 0], 2.0, 0.0),
    ([0, 0], 3.0, 0.0),
])
def test_p_norm_trivial(coords, p, expected):
    assert p_norm(SpacePoint(coords, p)) == expected


def test_p_norm_cube_root_of_two_against_mpmath():
    mpmath.mp.dps = 40
    exact = mpmath.root(2, 3)
    got = p_norm(SpacePoint([1, 1], 3.0))
    assert abs(got - float(exact)) <= 1e-15
    assert got == pytest.approx(1.259921, abs=1e-6)


def test_pairing_examples():
    assert pairing(SpacePoint([1, 2], 2.0), DualFunctional([3, 4], 2.0)) == 11.0
    assert pairing(SpacePoint([0, 0], 3.0), DualFunctional([7, -2], 1.5)) == 0.0
    x = SpacePoint([1, 1], 3.0)
    assert pairing(x, normalized_duality_map(x)) == pytest.approx(2 ** (2 / 3), rel=1e-14)


def test_duality_identity_in_hilbert_space():
    f = normalized_duality_map(SpacePoint([3, 4], 2.0))
    np.testing.assert_allclose(f.coords, [3, 4], rtol=1e-15)
    assert f.q == 2.0


def test_duality_of_zero():
    f = normalized_duality_map(SpacePoint([0, 0, 0], 3.0))
    assert np.all(f.coords == 0)


def test_duality_p3_closed_form_checked_with_mpmath():
    mpmath.mp.dps = 40
    f = normalized_duality_map(SpacePoint([1, 1], 3.0))
    expected = float(mpmath.power(2, mpmath.mpf(-1) / 3))
    np.testing.assert_allclose(f.coords, [expected, expected], rtol=1e-15)
    # defining identities, evaluated independently in high precision
    fx = [mpmath.mpf(float(c)) for c in f.coords]
    pair = sum(fx)
    norm_f = mpmath.power(sum(mpmath.power(abs(c), mpmath.mpf(3) / 2) for c in fx), mpmath.mpf(2) / 3)
    assert abs(pair - mpmath.power(2, mpmath.mpf(2) / 3)) < 1e-14
    assert abs(norm_f - mpmath.root(2, 3)) < 1e-14


def test_gauge_examples():
    x = SpacePoint([3, 4], 2.0)
    j = gauge_duality_map(x, GaugeFunction.power(2.0))
    np.testing.assert_allclose(j.coords, [15, 20], rtol=1e-14)
    # mu(5) = 25: <x, j> = ||x|| ||j|| = 125
    assert pairing(x, j) == pytest.approx(125.0, rel=1e-14)
    assert dual_norm(j) == pytest.approx(25.0, rel=1e-14)
    zero = gauge_duality_map(SpacePoint([0, 0], 3.0), GaugeFunction.power(2.0))
    assert np.all(zero.coords == 0)


@settings(max_examples=200, deadline=None)
@given(vectors(), exponents)
def test_identity_gauge_is_the_normalized_map(v, p):
    x = SpacePoint(v, p)
    a = gauge_duality_map(x, GaugeFunction.identity()).coords
    b = normalized_duality_map(x).coords
    assert np.array_equal(a, b)


# lam * x is exact only for normal floats; a scaled subnormal already
# carries ~1e-12 relative rounding before J is applied
normal = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_subnormal=False)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 16).flatmap(lambda n: arrays(np.float64, n, elements=normal)),
       exponents, st.floats(min_value=1e-3, max_value=1e3))
def test_homogeneity(v, p, lam):
    x = SpacePoint(v, p)
    lhs = normalized_duality_map(lam * x).coords
    rhs = lam * normalized_duality_map(x).coords
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-300)


@settings(max_examples=300, deadline=None)
@given(vectors(), exponents)
def test_defining_identities(v, p):
    d_pair, d_norm = duality_identity_defects(SpacePoint(v, p))
    assert d_pair <= 1e-9 and d_norm <= 1e-9


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 16).flatmap(lambda n: st.tuples(arrays(np.float64, n, elements=finite),
                                                     arrays(np.float64, n, elements=finite))),
       exponents)
def test_holder(pair, p):
    xv, fv = pair
    x = SpacePoint(xv, p)
    f = DualFunctional(fv, x.q)
    assert abs(pairing(x, f)) <= p_norm(x) * dual_norm(f) * (1 + 1e-12) + 1e-12


def test_rows_helper_matches_pointwise(rng):
    X = rng.standard_normal((50, 7)) * 10 ** rng.uniform(-3, 3, (50, 1))
    X[3] = 0.0
    for p in (1.5, 3.0):
        for g in (None, GaugeFunction.power(2.0)):
            a, b = duality_defects_rows(X, p, g)
            for i in range(len(X)):
                ea, eb = duality_identity_defects(SpacePoint(X[i], p), g)
                assert a[i] == pytest.approx(ea, abs=1e-15)
                assert b[i] == pytest.approx(eb, abs=1e-15)


def test_gauge_validation():
    assert GaugeFunction.from_callable(lambda t: t ** 0.5).kind == "oracle"
    assert GaugeFunction.from_callable(math.log1p).sampled_validity()[0]
    with pytest.raises(ValueError, match="mu\\(0\\)"):
        GaugeFunction.from_callable(lambda t: t + 1.0)
    with pytest.raises(ValueError, match="increasing"):
        GaugeFunction.from_callable(lambda t: math.sin(t) * t)
    with pytest.raises(ValueError, match="divergence"):
        GaugeFunction.from_callable(lambda t: t / (1.0 + t))
    with pytest.raises(ValueError):
        GaugeFunction.power(0.0)


def test_oracle_gauge_matches_power_gauge():
    x = SpacePoint([1.0, -2.0, 0.5], 3.0)
    a = gauge_duality_map(x, GaugeFunction.from_callable(lambda t: t * t)).coords
    b = gauge_duality_map(x, GaugeFunction.power(2.0)).coords
    np.testing.assert_allclose(a, b, rtol=1e-15)
