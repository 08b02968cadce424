import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multistable import AlphaFunction
from multistable.alpha import AlphaDomainError
from multistable.charfn import (CFQuery, InsufficientSamplesError, cf_distance, cf_increment_LI,
                                cf_LF_joint, cf_LI_joint, cf_LI_marginal, ecf,
                                increment_independence_check, lf_inner_integral)
from multistable.series import sample_paths
from multistable.stable import sample_stable_oracle, stable_levy_joint_cf

# int_0^inf (1 - cos(sum_j a_j y^(-1/alpha_j))) dy, split at y = 1. The part over y > 1
# is by mpmath at 30 digits (v = 1/y, then v = s^20 to regularise the endpoint). The
# part over y < 1 is by composite 40-point Gauss-Legendre in z = y^(-1/min alpha) out
# to z = 1e6 plus the leading integration-by-parts term beyond; the neglected next
# order is below 2e-15.
INNER_REFERENCE = [
    ((0.8, -0.5), (1.3, 1.6), 0.41369877598802474 + 0.079545514324515872051),
    ((2.0, 1.5), (0.7, 1.5), 1.0163725370872925 + 5.6514233814452173483),
    ((-0.3, 3.0), (1.1, 1.9), 1.462154553735518 + 81.492923168761616518),
    ((0.3, -1.0, 2.0), (0.6, 1.0, 1.8), 1.166969874756566 + 15.087305186533544782),
    ((0.01, -2.0), (1.2, 1.5), 1.4616229629563635 + 5.5947319347725148406),
]


def affine_exponent(a0, a1, theta, lo, hi):
    """int_lo^hi |theta|^(a0 + a1 s) ds in closed form."""
    lt = np.log(abs(theta))
    return abs(theta) ** a0 * (np.exp(a1 * hi * lt) - np.exp(a1 * lo * lt)) / (a1 * lt)


# -- independent increments ------------------------------------------------------------------

def test_LI_constant_integrand():
    assert cf_LI_joint(AlphaFunction.constant(1.5), CFQuery([1.0], [1.0])).value == pytest.approx(
        np.exp(-1), rel=1e-14)


def test_LI_exponential_integrand():
    # alpha(s) = 1 + s reaches 2 at s = 1, so the same integrand is checked on [0, 0.9]
    with pytest.raises(AlphaDomainError):
        AlphaFunction.affine(1.0, 1.0)
    alpha = AlphaFunction.affine(1.0, 1.0, horizon=0.9)
    res = cf_LI_marginal(alpha, 0.9, 2.0)
    assert res.value.real == pytest.approx(np.exp(-2 * (2 ** 0.9 - 1) / np.log(2)), rel=1e-12)
    assert res.value.imag == 0.0
    assert res.quadrature_error_estimate < 1e-10


@pytest.mark.parametrize("t1,t2,theta", [(0.2, 0.9, 1.7), (0.0, 0.5, -2.5), (0.4, 1.0, 0.3)])
def test_LI_cancelling_pair(t1, t2, theta):
    alpha = AlphaFunction.affine(1.2, 0.3)
    val = cf_LI_joint(alpha, CFQuery([t1, t2], [theta, -theta])).value.real
    assert val == pytest.approx(np.exp(-affine_exponent(1.2, 0.3, theta, t1, t2)), rel=1e-12)
    assert cf_increment_LI(alpha, t1, t2, theta) == pytest.approx(val, rel=1e-15)


def test_LI_marginal_examples():
    alpha = AlphaFunction.affine(1.2, 0.3)
    assert cf_LI_marginal(alpha, 0.6, 0.0).value == 1.0
    assert cf_LI_marginal(AlphaFunction.constant(1.2), 1.0, 1.0).value.real == pytest.approx(
        np.exp(-1), rel=1e-14)
    assert cf_LI_marginal(AlphaFunction.constant(1.0, horizon=2.0), 2.0, 3.0).value.real == \
        pytest.approx(np.exp(-6), rel=1e-13)


def test_query_validation():
    with pytest.raises(ValueError):
        CFQuery([], [])
    with pytest.raises(ValueError):
        CFQuery([0.5, 0.6], [1.0])
    with pytest.raises(ValueError):
        cf_LI_joint(AlphaFunction.constant(1.5), CFQuery([1.5], [1.0]))


queries = st.integers(1, 4).flatmap(lambda m: st.tuples(
    st.lists(st.floats(0.0, 1.0), min_size=m, max_size=m),
    st.lists(st.floats(-4.0, 4.0), min_size=m, max_size=m)))


@settings(max_examples=80, deadline=None)
@given(queries, st.floats(0.3, 1.9))
def test_LI_matches_stable_joint_cf_at_constant_alpha(q, level):
    times, thetas = q
    val = cf_LI_joint(AlphaFunction.constant(level), CFQuery(times, thetas)).value
    assert val.imag == 0.0
    assert val.real == pytest.approx(stable_levy_joint_cf(level, times, thetas), rel=1e-10, abs=1e-14)


@settings(max_examples=80, deadline=None)
@given(queries)
def test_LI_real_and_bounded(q):
    val = cf_LI_joint(AlphaFunction.sinusoidal(1.3, 0.4, 1.5), CFQuery(*q)).value
    assert val.imag == 0.0 and 0.0 <= val.real <= 1.0


@settings(max_examples=30, deadline=None)
@given(st.floats(-5.0, 5.0))
def test_LI_marginal_non_increasing_in_time(theta):
    alpha = AlphaFunction.sinusoidal(1.2, 0.5, 2.0)
    vals = [cf_LI_marginal(alpha, t, theta).value.real for t in np.linspace(0, 1, 41)]
    assert np.all(np.diff(vals) <= 1e-15)


@pytest.mark.slow
def test_LI_increment_cf_matches_simulation():
    alpha = AlphaFunction.affine(1.2, 0.3)
    paths = sample_paths("LI", alpha, [0.3, 0.8], 20_000, 3000, seed=41)
    inc = paths[:, 1] - paths[:, 0]
    for theta in (-2.0, -0.5, 1.0, 3.0):
        exact = cf_increment_LI(alpha, 0.3, 0.8, theta)
        assert abs(ecf(inc, np.array([theta])).value - exact) <= 3 / np.sqrt(inc.size)


# -- field based ------------------------------------------------------------------------------

@pytest.mark.parametrize("amps,alphas,expected", INNER_REFERENCE)
def test_inner_integral_references(amps, alphas, expected):
    val, err = lf_inner_integral(np.array(amps), np.array(alphas))
    assert val == pytest.approx(expected, rel=1e-11)
    assert err < 1e-10


@pytest.mark.parametrize("u", [0.4, 1.0, 1.3, 1.9])
@pytest.mark.parametrize("a", [0.1, 1.0, 7.5])
def test_inner_integral_single_exponent(u, a):
    from multistable.stable import c_alpha
    val, _ = lf_inner_integral(np.array([a]), np.array([u]))
    assert val == pytest.approx(a ** u / c_alpha(u), rel=1e-10)


@pytest.mark.parametrize("u", [0.5, 1.3, 1.8])
def test_inner_integral_nearly_equal_exponents(u):
    # numerically separate exponents approach the single-exponent closed form
    from multistable.stable import c_alpha
    val, err = lf_inner_integral(np.array([0.9, 0.6]), np.array([u, u * (1 + 1e-9)]))
    assert val == pytest.approx(1.5 ** u / c_alpha(u), rel=1e-7)
    assert err < 1e-9


def test_inner_integral_tiny_amplitudes():
    from multistable.stable import c_alpha
    val, err = lf_inner_integral(np.array([1e-300, 2.0]), np.array([1.2, 1.5]))
    assert val == pytest.approx(2.0 ** 1.5 / c_alpha(1.5), rel=1e-10)
    val, err = lf_inner_integral(np.array([1.0, -1.0]), np.array([1.3, 1.3 + 1e-9]))
    assert 0.0 <= val < 1e-9 and err < 1e-10


def test_LF_zero_thetas():
    alpha = AlphaFunction.affine(1.2, 0.3)
    assert cf_LF_joint(alpha, CFQuery([0.2, 0.6, 1.0], [0.0, 0.0, 0.0])).value == 1.0


@pytest.mark.parametrize("alpha", [AlphaFunction.affine(1.2, 0.3),
                                   AlphaFunction.sinusoidal(1.0, 0.6, 3.0),
                                   AlphaFunction.constant(0.5)])
@pytest.mark.parametrize("theta", [-3.0, 0.2, 1.0, 2.5])
def test_LF_fixed_time_marginal(alpha, theta):
    a = float(alpha(0.7))
    res = cf_LF_joint(alpha, CFQuery([0.7], [theta]))
    assert abs(res.value.real - np.exp(-0.7 * abs(theta) ** a)) <= 1e-6
    assert res.value.imag == 0.0


@pytest.mark.parametrize("times,thetas", [([0.3, 0.8], [1.0, -2.0]), ([0.5, 0.5], [0.7, 0.4]),
                                          ([1.0, 0.1], [-1.5, 2.5])])
def test_LF_two_times_constant_alpha(times, thetas):
    alpha = AlphaFunction.constant(1.35)
    order = np.argsort(times)
    t1, t2 = np.asarray(times)[order]
    th1, th2 = np.asarray(thetas)[order]
    exact = np.exp(-t1 * abs(th1 + th2) ** 1.35 - (t2 - t1) * abs(th2) ** 1.35)
    lf = cf_LF_joint(alpha, CFQuery(times, thetas)).value.real
    li = cf_LI_joint(alpha, CFQuery(times, thetas)).value.real
    assert lf == pytest.approx(exact, abs=1e-8)
    assert lf == pytest.approx(li, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(queries, st.floats(0.4, 1.9))
def test_LF_equals_LI_at_constant_alpha(q, level):
    alpha = AlphaFunction.constant(level)
    lf = cf_LF_joint(alpha, CFQuery(*q)).value
    li = cf_LI_joint(alpha, CFQuery(*q)).value
    assert abs(lf - li) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(queries)
def test_LF_real_and_bounded(q):
    val = cf_LF_joint(AlphaFunction.affine(1.2, 0.3), CFQuery(*q)).value
    assert val.imag == 0.0 and 0.0 <= val.real <= 1.0


def test_LF_differs_from_LI_for_varying_alpha():
    alpha = AlphaFunction.affine(0.8, 1.0)
    q = CFQuery([0.3, 1.0], [2.0, -1.0])
    assert abs(cf_LF_joint(alpha, q).value - cf_LI_joint(alpha, q).value) > 1e-3


# -- empirical CFs ---------------------------------------------------------------------------

def test_ecf_degenerate_and_single_sample():
    assert ecf(np.zeros(50), np.array([2.3])).value == 1.0
    res = ecf(np.array([0.7]), np.array([1.9]))
    assert res.value == pytest.approx(np.exp(1j * 1.9 * 0.7), rel=1e-15)
    assert res.quadrature_error_estimate == 3.0


def test_ecf_joint_query():
    y = np.array([[0.1, 0.4], [1.0, -2.0]])
    q = CFQuery([0.5, 1.0], [2.0, -1.0])
    expected = np.mean(np.exp(1j * (y @ np.array([2.0, -1.0]))))
    assert ecf(y, q).value == pytest.approx(expected, rel=1e-15)


def test_ecf_empty():
    with pytest.raises(InsufficientSamplesError):
        ecf(np.zeros(0), np.array([1.0]))


def test_ecf_oracle_samples():
    x = sample_stable_oracle(1.7, 1.0, np.random.default_rng(42), 100_000)
    assert abs(ecf(x, np.array([1.0])).value - np.exp(-1)) <= 0.01


def test_cf_distance_calibration():
    grid = np.linspace(-3, 3, 21)
    x = sample_stable_oracle(1.5, 1.0, np.random.default_rng(43), 100_000)
    assert cf_distance(lambda th: np.exp(-np.abs(th[:, 0]) ** 1.5), x, grid) <= 0.015
    assert cf_distance(lambda th: np.ones(len(th)), np.zeros(10), grid) == 0.0


def test_cf_distance_detects_mismatch():
    grid = np.linspace(-3, 3, 21)
    x = sample_stable_oracle(1.2, 1.0, np.random.default_rng(44), 100_000)
    assert cf_distance(lambda th: np.exp(-np.abs(th[:, 0]) ** 1.8), x, grid) > 0.1


def test_cf_distance_empty_grid():
    with pytest.raises(ValueError):
        cf_distance(lambda th: np.ones(len(th)), np.zeros(3), np.zeros((0, 1)))


# -- increment independence --------------------------------------------------------------------

@pytest.mark.slow
def test_LI_increments_factorise():
    rep = increment_independence_check(AlphaFunction.affine(1.2, 0.3), "LI",
                                       [(0.0, 0.5), (0.5, 1.0)], 20_000, 2000, seed=45)
    assert rep.passed, rep.to_dict()


@pytest.mark.slow
def test_LF_constant_alpha_increments_factorise():
    rep = increment_independence_check(AlphaFunction.constant(1.4), "LF",
                                       [(0.0, 0.5), (0.5, 1.0)], 20_000, 2000, seed=46)
    assert rep.passed, rep.to_dict()


@pytest.mark.parametrize("incs", [[(0.0, 1.0), (0.0, 0.5)], [(0.0, 0.6), (0.5, 1.0)],
                                  [(0.2, 0.2), (0.5, 1.0)], [(0.0, 1.0)]])
def test_independence_needs_disjoint_increments(incs):
    with pytest.raises(ValueError):
        increment_independence_check(AlphaFunction.constant(1.4), "LI", incs, 100)


def test_independence_needs_samples():
    with pytest.raises(InsufficientSamplesError):
        increment_independence_check(AlphaFunction.constant(1.4), "LI",
                                     [(0.0, 0.5), (0.5, 1.0)], 1)


def test_report_serialises_with_pass_key():
    values = np.cumsum(np.random.default_rng(0).standard_normal((500, 3)), axis=1)
    values[:, 0] = 0.0
    rep = increment_independence_check(AlphaFunction.constant(1.4), "LI",
                                       [(0.0, 0.5), (0.5, 1.0)], 500, values=values)
    d = rep.to_dict()
    assert set(d) >= {"test", "statistic", "threshold", "pass"}
    assert d["threshold"] == pytest.approx(3 / np.sqrt(500))
