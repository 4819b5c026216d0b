import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spotvol.errors import BadExponent, GridTooCoarse, LevelTooFine
from spotvol.wavelets import (
    FAMILIES,
    CoefficientSet,
    analyze,
    besov_norm,
    daubechies_filter,
    evaluate,
    gram_matrix,
    make_basis,
    synthesize,
)


@pytest.fixture(scope="module")
def haar():
    return make_basis("haar")


@pytest.mark.parametrize("taps", [2, 4, 6, 8])
def test_filter_conditions(taps):
    h = daubechies_filter(taps)
    assert h.sum() == pytest.approx(math.sqrt(2), abs=1e-12)
    for shift in range(0, taps, 2):
        expect = 1.0 if shift == 0 else 0.0
        assert np.dot(h[: taps - shift], h[shift:]) == pytest.approx(expect, abs=1e-12)


def test_db2_filter_values():
    r3 = math.sqrt(3)
    expect = np.array([1 + r3, 3 + r3, 3 - r3, 1 - r3]) / (4 * math.sqrt(2))
    np.testing.assert_allclose(daubechies_filter(4), expect, atol=1e-14)


@pytest.mark.parametrize("family", FAMILIES)
def test_mother_integrals_and_norms(family):
    b = make_basis(family)
    x = b.table_x
    dx = x[1] - x[0]
    # rectangle rule on the dyadic table is exact for these refinable functions up to table error
    assert np.sum(b.phi_table) * dx == pytest.approx(1.0, abs=1e-8)
    assert abs(np.sum(b.psi_table) * dx) < 1e-8
    assert math.sqrt(np.sum(b.phi_table**2) * dx) == pytest.approx(1.0, abs=1e-6)
    assert math.sqrt(np.sum(b.psi_table**2) * dx) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("family,moments", [("daubechies-4", 2), ("daubechies-6", 3), ("daubechies-8", 4)])
def test_vanishing_moments(family, moments):
    b = make_basis(family)
    x = b.table_x
    dx = x[1] - x[0]
    for r in range(moments):
        assert abs(np.sum(x**r * b.psi_table) * dx) < 1e-6


def test_haar_point_values(haar):
    assert evaluate(haar, 0, 0, [0.25])[0] == 1.0
    assert evaluate(haar, 0, 0, [0.75])[0] == -1.0
    assert evaluate(haar, 2, 1, [0.3])[0] == pytest.approx(2.0)


@pytest.mark.parametrize("family", ["haar", "daubechies-4"])
def test_outside_support_is_zero(family):
    b = make_basis(family)
    level, k = 5, 3
    width = b.support / 2**level
    t = np.linspace(0, 1, 2001)
    outside = (t < k / 2**level - 1e-12) | (t > k / 2**level + width + 1e-12)
    assert np.all(evaluate(b, level, k, t[outside]) == 0.0)


def test_level_cardinality():
    b = make_basis("daubechies-4")
    for level in range(7):
        assert b.level_matrix(level, np.linspace(0, 1, 17)).shape == (2**level, 17)


def test_level_too_fine():
    with pytest.raises(LevelTooFine):
        make_basis("haar").level_matrix(15, [0.5])


def test_single_scaling_coefficient_is_one(haar):
    c = CoefficientSet(0, 0, np.array([1.0]))
    np.testing.assert_allclose(synthesize(c, haar, np.linspace(0, 1, 101, endpoint=False)), 1.0)


def test_zero_coefficients_give_zero():
    b = make_basis("daubechies-6")
    c = CoefficientSet(2, 4, np.zeros(4))
    assert np.all(synthesize(c, b, np.linspace(0, 1, 65)) == 0.0)


@pytest.mark.parametrize("family", FAMILIES)
def test_gram_orthonormal_to_level_6(family):
    G = gram_matrix(make_basis(family), 0, 6)
    assert np.max(np.abs(G - np.eye(len(G)))) <= 1e-6


def test_analyze_single_wavelet(haar):
    N = 2**12
    f = evaluate(haar, 2, 1, np.arange(N) / N)
    c = analyze(f, haar, 0, 5)
    assert c.detail[2][1] == pytest.approx(1.0, abs=1e-8)
    c.detail[2][1] = 0.0
    assert np.max(np.abs(c.scaling)) <= 1e-8
    assert max(np.max(np.abs(d)) for d in c.detail.values()) <= 1e-8


def test_analyze_constant(haar):
    c = analyze(np.ones(2**10), haar, 0, 5)
    assert c.scaling[0] == pytest.approx(1.0, abs=1e-12)
    assert max(np.max(np.abs(d)) for d in c.detail.values()) <= 1e-10


def test_haar_linear_function_closed_form(haar):
    # <t, psi_{3k}> = -2^(-3l/2 - 2) at l = 3; midpoint rule integrates t exactly on each piece
    N = 2**14
    t = (np.arange(N) + 0.5) / N
    rows = haar.level_matrix(3, (np.arange(N)) / N)
    coeff = rows @ t / N
    np.testing.assert_allclose(coeff, -(2.0 ** (-3 * 3 / 2 - 2)), atol=1e-12)


def test_analyze_grid_checked(haar):
    with pytest.raises(GridTooCoarse):
        analyze(np.ones(100), haar, 0, 2)
    with pytest.raises(GridTooCoarse):
        analyze(np.ones(64), haar, 0, 3)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=64, max_size=64))
def test_haar_round_trip_step_functions(values):
    # f piecewise constant on dyadic intervals of length 2^-6 lies in the span up to level 5
    haar = make_basis("haar")
    f = np.repeat(np.asarray(values), 2**10 // 64)
    grid = np.arange(f.size) / f.size
    c = analyze(f, haar, 0, 5)
    assert np.max(np.abs(synthesize(c, haar, grid) - f)) <= 1e-10
    # Parseval on the span
    energy = np.sum(c.scaling**2) + sum(np.sum(d**2) for d in c.detail.values())
    assert math.sqrt(energy) == pytest.approx(math.sqrt(np.mean(f**2)), abs=1e-6)


def test_daubechies_round_trip_in_span():
    b = make_basis("daubechies-4")
    rng = np.random.default_rng(3)
    coeffs = CoefficientSet(2, 4, rng.standard_normal(4), {lev: rng.standard_normal(2**lev) for lev in (2, 3, 4)})
    N = 2**16
    f = synthesize(coeffs, b, np.arange(N) / N)
    back = analyze(f, b, 2, 4)
    # D4 is only Hoelder ~0.55, so the rectangle rule limits accuracy, not the basis
    np.testing.assert_allclose(back.scaling, coeffs.scaling, atol=5e-5)
    for lev in back.levels:
        np.testing.assert_allclose(back.detail[lev], coeffs.detail[lev], atol=5e-5)


def test_coefficient_json_round_trip():
    c = CoefficientSet(1, 3, np.array([0.5, -0.25]), {3: np.linspace(-1, 1, 8)}, tau=0.4)
    back = CoefficientSet.from_json(c.to_json())
    assert back.tau == 0.4
    np.testing.assert_array_equal(back.detail[3], c.detail[3])
    np.testing.assert_array_equal(back.kept[3], np.abs(c.detail[3]) >= 0.4)


def test_thresholded_monotone():
    rng = np.random.default_rng(0)
    c = CoefficientSet(0, 4, np.zeros(1), {lev: rng.standard_normal(2**lev) for lev in range(5)})
    prev = None
    for tau in (0.1, 0.5, 1.0, 2.0):
        kept = c.thresholded(tau).kept
        if prev is not None:
            for lev in c.levels:
                assert np.all(prev[lev] | ~kept[lev])
        prev = kept


def test_besov_single_term():
    c = CoefficientSet(0, 5, np.zeros(1), {4: np.eye(16)[3]})
    assert besov_norm(c, 0.5, 2) == pytest.approx(4.0)
    s, pi, l0 = 1.5, 3.0, 2
    c = CoefficientSet(l0, 4, np.zeros(4), {l0: np.eye(4)[1]})
    assert besov_norm(c, s, pi) == pytest.approx(2 ** (l0 * (s + 0.5 - 1 / pi)))


def test_besov_zero_and_bad_pi():
    c = CoefficientSet(0, 3, np.zeros(1))
    assert besov_norm(c, 1.0, 2.0) == 0.0
    with pytest.raises(BadExponent):
        besov_norm(c, 1.0, 0.0)
