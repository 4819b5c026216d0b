import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spotvol.errors import BadBlockCount, DegenerateKernel, InvalidDomain, NotAntisymmetric
from spotvol.kernels import kernel_from_function, make_kernel, weight_table

STEP_BAR = math.sqrt(2.0 / 3.0)
SINE_BAR = math.sqrt(3.0) / math.pi


@pytest.fixture(scope="module", params=["step", "sine"])
def kernel(request):
    return make_kernel(request.param)


def test_closed_form_bar_lambda():
    assert make_kernel("step").bar_lambda == pytest.approx(STEP_BAR, abs=1e-12)
    assert make_kernel("sine").bar_lambda == pytest.approx(SINE_BAR, abs=1e-12)


def test_norms(kernel):
    prof = kernel.profiles()
    assert abs(prof.Lambda_l2() - 1.0) < 1e-8
    assert abs(prof.LambdaBar_l2() - 1.0) < 1e-8


def test_step_norms():
    k = make_kernel("step")
    assert k.l2_norm == pytest.approx(math.sqrt(2.0), rel=1e-12)
    assert k.normalized_l2_norm == pytest.approx(math.sqrt(3.0), rel=1e-12)
    assert k.sup_norm == 1.0


def test_profile_endpoints(kernel):
    prof = kernel.profiles()
    assert abs(prof.Lambda(0.0)) < 1e-12
    assert abs(prof.Lambda(2.0)) < 1e-12


def test_lambda_squared_symmetric(kernel):
    u = np.linspace(0, 2, 401)
    L = kernel.profiles().Lambda
    np.testing.assert_allclose(L(u) ** 2, L(2 - u) ** 2, atol=1e-10)


@pytest.mark.parametrize("m", [4, 16])
def test_lambdabar_splits_into_two_windows(kernel, m):
    prof = kernel.profiles()
    for i in (2, m // 2, m):
        s = np.linspace((i - 1) / m, i / m, 200)[1:]
        lhs = prof.LambdaBar(m * s - (i - 1)) ** 2
        rhs = prof.Lambda(m * s - (i - 2)) ** 2 + prof.Lambda(m * s - (i - 1)) ** 2
        np.testing.assert_allclose(lhs, rhs, atol=1e-8)


@pytest.mark.parametrize("m", [4, 16, 64])
def test_rescaled_profile_norm(kernel, m):
    # ||Lambda(m . - (i-2))||_{L2[0,1]} = m^(-1/2); substitution u = m s - (i-2)
    from scipy.integrate import quad

    L = kernel.profiles().Lambda
    i = m // 2 + 1
    val, _ = quad(lambda s: float(L(m * s - (i - 2))) ** 2, (i - 2) / m, i / m, points=[(i - 1) / m], epsabs=1e-14)
    assert math.sqrt(val) == pytest.approx(m**-0.5, abs=1e-8)


def test_renormalized_is_idempotent(kernel):
    assert kernel.renormalized().bar_lambda == pytest.approx(1.0, abs=1e-10)


def test_zero_kernel_is_degenerate():
    with pytest.raises(DegenerateKernel):
        kernel_from_function(lambda t: np.zeros_like(t), (0.0,))


def test_symmetric_kernel_rejected():
    with pytest.raises(NotAntisymmetric):
        kernel_from_function(lambda t: np.ones_like(t), (0.0,))


def test_tabulated_kernel_matches_builtin():
    tab = make_kernel({"family": "tabulated", "breakpoints": [0, 1, 1, 2], "values": [1, 1, -1, -1]})
    assert tab.bar_lambda == pytest.approx(STEP_BAR, abs=1e-10)


def test_tabulated_domain_checked():
    with pytest.raises(InvalidDomain):
        make_kernel({"family": "tabulated", "breakpoints": [0, 1.5], "values": [1, -1]})


def test_tabulated_triangle():
    # lambda(t) = 1 - t is antisymmetric about 1; int_0^s = s - s^2/2
    tri = make_kernel({"family": "tabulated", "breakpoints": [0, 2], "values": [1, -1]})
    from scipy.integrate import quad

    oracle = math.sqrt(2 * quad(lambda s: (s - s * s / 2) ** 2, 0, 1)[0])
    assert tri.bar_lambda == pytest.approx(oracle, rel=1e-10)


def test_unknown_kernel_name():
    with pytest.raises(ValueError):
        make_kernel("gauss")


def test_weight_table_hand_example():
    k = make_kernel("step")
    idx, w, _ = weight_table(k, 8, 2).block_weights(2)
    np.testing.assert_array_equal(idx, np.arange(1, 9))
    expect = 0.25 * math.sqrt(1.5) * np.array([1, 1, 1, -1, -1, -1, -1, 0])
    np.testing.assert_allclose(w, expect, atol=1e-15)


def test_weight_table_window_is_right_closed():
    wt = weight_table(make_kernel("sine"), 12, 3)
    idx, _, _ = wt.block_weights(3)
    # j/n in (1/3, 1] -> j = 5..12
    np.testing.assert_array_equal(idx, np.arange(5, 13))


def test_weight_riemann_cancellation():
    k = make_kernel("step")
    n, m = 1000, 10
    wt = weight_table(k, n, m)
    bound = 2 * (m / n) * k.sup_norm / k.bar_lambda
    for i in range(2, m + 1):
        assert abs(wt.block_weights(i)[1].sum()) <= bound + 1e-15


def test_weight_table_bad_block_count():
    k = make_kernel("step")
    with pytest.raises(BadBlockCount):
        weight_table(k, 100, 1)
    with pytest.raises(BadBlockCount):
        weight_table(k, 100, 101)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(8, 400), m=st.integers(2, 40))
def test_weight_table_squared_weights(n, m):
    if m > n:
        return
    wt = weight_table(make_kernel("sine"), n, m)
    np.testing.assert_allclose(wt.sq_weight, wt.weight**2 / 2, rtol=1e-14)
    assert np.all((wt.block >= 2) & (wt.block <= m))
