import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multistable.alpha import (AlphaDomainError, AlphaFunction, UnsupportedDerivativeError,
                               eval_alpha, eval_alpha_deriv)


def test_affine_value():
    assert eval_alpha(AlphaFunction.affine(1.2, 0.3), 0.5) == pytest.approx(1.35, abs=1e-15)


def test_constant_value_and_derivative():
    f = AlphaFunction.constant(1.5)
    assert eval_alpha(f, 0.1) == 1.5
    assert eval_alpha(f, 0.9) == 1.5
    assert eval_alpha_deriv(f, 0.4) == 0.0


def test_sinusoidal_value_and_derivative():
    f = AlphaFunction.sinusoidal(1.5, 0.3)
    assert eval_alpha(f, 0.25) == pytest.approx(1.8, abs=1e-15)
    assert eval_alpha_deriv(f, 0.0) == pytest.approx(0.6 * np.pi, rel=1e-15)


def test_affine_derivative():
    f = AlphaFunction.affine(1.2, 0.3)
    assert np.all(eval_alpha_deriv(f, np.linspace(0, 1, 11)) == 0.3)


@pytest.mark.parametrize("t", [-0.01, 1.01, np.nan])
def test_outside_domain_raises(t):
    with pytest.raises(AlphaDomainError):
        eval_alpha(AlphaFunction.affine(1.2, 0.3), t)


@pytest.mark.parametrize("build", [
    lambda: AlphaFunction.constant(2.0),
    lambda: AlphaFunction.constant(0.0),
    lambda: AlphaFunction.affine(1.0, 1.0),
    lambda: AlphaFunction.sinusoidal(1.8, 0.3),
    lambda: AlphaFunction.affine(1.2, 0.3, bounds=(1.2, 1.4)),
    lambda: AlphaFunction.constant(1.5, bounds=(1.0, 2.0)),
])
def test_bounds_violations_rejected(build):
    with pytest.raises(AlphaDomainError):
        build()


def test_linear_table_has_no_derivative():
    f = AlphaFunction.table([0.0, 0.5, 1.0], [1.2, 1.6, 1.3], interpolation="linear")
    assert eval_alpha(f, 0.25) == pytest.approx(1.4)
    with pytest.raises(UnsupportedDerivativeError):
        eval_alpha_deriv(f, 0.25)


def test_pchip_table_is_shape_preserving():
    knots = [0.0, 0.3, 0.6, 1.0]
    values = [1.2, 1.7, 1.7, 1.4]
    f = AlphaFunction.table(knots, values)
    t = np.linspace(0, 1, 10_001)
    v = f(t)
    assert v.min() >= 1.2 - 1e-15 and v.max() <= 1.7 + 1e-15
    assert f.bounds == (1.2, 1.7)


def test_from_config_round_trip():
    block = {"kind": "sinusoidal", "a0": 1.4, "amplitude": 0.2, "frequency": 2.0}
    f = AlphaFunction.from_config(block, horizon=2.0)
    g = AlphaFunction.from_config(f.to_config(), horizon=2.0)
    t = np.linspace(0, 2, 101)
    assert np.array_equal(f(t), g(t))


def test_from_config_rejects_unknown_kind():
    with pytest.raises(ValueError):
        AlphaFunction.from_config({"kind": "cubic", "a0": 1.0})


def _check_range_and_derivative(f):
    t = np.linspace(0.0, f.horizon, 10_000)
    v = f(t)
    assert f.c <= v.min() and v.max() <= f.d
    h = 1e-5
    inner = t[(t > h) & (t < f.horizon - h)]
    if f.kind == "user-table":
        # a C1 cubic has second-derivative jumps at knots; a difference straddling one
        # carries an O(h) error that says nothing about the stored derivative
        near = np.min(np.abs(inner[:, None] - f.params["knots"][None, :]), axis=1) < 2 * h
        inner = inner[~near]
    fd = (f(inner + h) - f(inner - h)) / (2 * h)
    exact = f.deriv(inner)
    assert np.all(np.abs(exact - fd) <= 1e-6 * (1 + np.abs(exact)))


levels = st.floats(0.1, 1.9)


@st.composite
def alpha_functions(draw):
    kind = draw(st.sampled_from(["constant", "affine", "sinusoidal", "table"]))
    horizon = draw(st.floats(0.25, 4.0))
    lo = draw(levels)
    hi = draw(st.floats(lo, 1.9))
    if kind == "constant":
        return AlphaFunction.constant(lo, horizon)
    if kind == "affine":
        a0, a1 = (lo, (hi - lo) / horizon) if draw(st.booleans()) else (hi, (lo - hi) / horizon)
        return AlphaFunction.affine(a0, a1, horizon)
    if kind == "sinusoidal":
        mid, amp = 0.5 * (lo + hi), 0.5 * (hi - lo)
        freq = draw(st.floats(0.1, 3.0))
        phase = draw(st.floats(-np.pi, np.pi))
        return AlphaFunction.sinusoidal(mid, amp, freq, phase, horizon)
    n = draw(st.integers(2, 8))
    vals = draw(st.lists(st.floats(lo, hi), min_size=n, max_size=n))
    return AlphaFunction.table(np.linspace(0, horizon, n), vals)


@settings(max_examples=60, deadline=None)
@given(alpha_functions())
def test_range_and_derivative_invariants(f):
    _check_range_and_derivative(f)


@settings(max_examples=40, deadline=None)
@given(alpha_functions())
def test_exact_range_matches_dense_scan(f):
    lo, hi = f.exact_range()
    v = f(np.linspace(0.0, f.horizon, 200_001))
    assert lo <= v.min() + 1e-12 and v.max() <= hi + 1e-12
    assert v.min() - lo < 1e-6 and hi - v.max() < 1e-6
