import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from multistable import AlphaFunction
from multistable.series import (EmptyDrawError, Kernel, KernelBoundError, SeriesDraw, TimeGrid,
                                arrivals_from_increments, draw_batch, draw_series, li_jumps,
                                li_values, min_kernel, partial_sum_convergence, sample_paths,
                                simulate_general_fkl, simulate_LF_fkl, simulate_LI_fkl,
                                simulate_LI_poisson, truncation_tail_bound, zero_kernel,
                                indicator_kernel)
from multistable.stable import c_alpha_pow, sample_stable_oracle

GRID = TimeGrid.uniform(1.0, 101)


def single_term(arrival, location, sign=1.0, horizon=1.0):
    return SeriesDraw([arrival], [location], [sign], horizon)


# -- draws ---------------------------------------------------------------------------

def test_arrivals_are_cumulative_sums():
    assert np.allclose(arrivals_from_increments([0.5, 1.0, 0.2]), [0.5, 1.5, 1.7], rtol=0, atol=1e-15)


def test_arrival_rate():
    draw = draw_batch(3, np.arange(1000), 1000)
    assert abs(np.mean(draw.arrivals[:, -1] / 1000) - 1) <= 0.1


def test_sign_balance():
    draw = draw_batch(4, np.arange(10_000), 1)
    assert abs(draw.signs.mean()) <= 0.03


def test_empty_draw_rejected():
    with pytest.raises(EmptyDrawError):
        draw_series(0, 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 500), st.floats(0.1, 10.0),
       st.integers(0, 1000))
def test_draw_invariants_and_reproducibility(seed, n, horizon, path_id):
    draw = draw_series(seed, n, horizon, path_id)
    draw.validate()
    again = draw_series(seed, n, horizon, path_id)
    for name in ("arrivals", "locations", "signs"):
        assert np.array_equal(getattr(draw, name), getattr(again, name))


def test_batch_rows_match_single_draws():
    batch = draw_batch(11, [0, 5, 9], 64, 2.0)
    for k, pid in enumerate([0, 5, 9]):
        single = draw_series(11, 64, 2.0, pid)
        assert np.array_equal(batch.arrivals[k], single.arrivals)
        assert np.array_equal(batch.locations[k], single.locations)
        assert np.array_equal(batch.signs[k], single.signs)


def test_streams_are_distinct():
    a = draw_series(1, 50, path_id=0)
    b = draw_series(1, 50, path_id=1)
    c = draw_series(2, 50, path_id=0)
    assert not np.array_equal(a.arrivals, b.arrivals)
    assert not np.array_equal(a.arrivals, c.arrivals)


# -- independent-increments series -----------------------------------------------------

def test_single_term_LI_path():
    path = simulate_LI_fkl(single_term(1.0, 0.3), AlphaFunction.constant(1.0), GRID)
    expected = np.where(GRID.points >= 0.3, 2 / np.pi, 0.0)
    assert np.allclose(path.values, expected, rtol=1e-15, atol=0)


def test_LI_zero_before_first_location(affine_alpha):
    draw = draw_series(5, 200)
    t = np.linspace(0, draw.locations.min(), 20, endpoint=False)
    assert np.all(li_values(draw, affine_alpha, t) == 0.0)


def test_LI_jump_structure(affine_alpha):
    draw = draw_series(6, 300)
    order = np.argsort(draw.locations)
    locs = draw.locations[order]
    jumps = li_jumps(draw, affine_alpha)[order]
    before = li_values(draw, affine_alpha, np.nextafter(locs, -np.inf))
    after = li_values(draw, affine_alpha, locs)
    assert np.allclose(after - before, jumps, rtol=1e-9, atol=1e-12)
    # constant strictly between consecutive locations
    mids = 0.5 * (locs[:-1] + locs[1:])
    assert np.array_equal(li_values(draw, affine_alpha, mids), after[:-1])


def test_LI_jump_sizes_formula(affine_alpha):
    draw = draw_series(7, 100, 2.0)
    alpha = AlphaFunction.affine(1.2, 0.15, 2.0)
    a = 1.2 + 0.15 * draw.locations
    expected = c_alpha_pow(a) * draw.signs * (draw.arrivals / 2.0) ** (-1 / a)
    assert np.allclose(li_jumps(draw, alpha), expected, rtol=1e-13)


@pytest.mark.slow
def test_LI_marginal_cf_constant_alpha():
    alpha = AlphaFunction.constant(1.5)
    x = sample_paths("LI", alpha, [1.0], 20_000, 5000, seed=21)[:, 0]
    th = np.linspace(-3, 3, 21)
    gap = np.abs(np.exp(1j * np.outer(th, x)).mean(axis=1) - np.exp(-np.abs(th) ** 1.5))
    assert gap.max() <= 0.03


# -- field-based series --------------------------------------------------------------

@pytest.mark.parametrize("level", [0.7, 1.0, 1.45])
def test_LF_equals_LI_bitwise_at_constant_alpha(level):
    alpha = AlphaFunction.constant(level)
    draw = draw_series(8, 500)
    assert np.array_equal(simulate_LF_fkl(draw, alpha, GRID).values,
                          simulate_LI_fkl(draw, alpha, GRID).values)


def test_single_term_LF_path():
    alpha = AlphaFunction.affine(1.0, 0.5)
    path = simulate_LF_fkl(single_term(2.0, 0.0), alpha, GRID)
    a = 1 + GRID.points / 2
    assert np.allclose(path.values, c_alpha_pow(a) * 2.0 ** (-1 / a), rtol=1e-14)


def test_LF_zero_at_origin(affine_alpha):
    draw = draw_series(9, 100)
    assert simulate_LF_fkl(draw, affine_alpha, GRID).values[0] == 0.0


@pytest.mark.slow
def test_LF_fixed_time_cf(affine_alpha):
    x = sample_paths("LF", affine_alpha, [0.7], 20_000, 5000, seed=22)[:, 0]
    th = np.linspace(-3, 3, 21)
    gap = np.abs(np.exp(1j * np.outer(th, x)).mean(axis=1) - np.exp(-0.7 * np.abs(th) ** 1.41))
    assert gap.max() <= 0.03


def test_horizon_mismatch_rejected(affine_alpha):
    with pytest.raises(ValueError):
        simulate_LI_fkl(draw_series(0, 10, 2.0), affine_alpha, GRID)


# -- Poisson representation ----------------------------------------------------------

@pytest.mark.slow
def test_poisson_marginal_cf():
    alpha = AlphaFunction.constant(1.2)
    x = sample_paths("LI_poisson", alpha, [1.0], 20_000, 5000, seed=23)[:, 0]
    assert abs(np.mean(np.exp(1j * x)) - np.exp(-1)) <= 0.02


def test_poisson_empty_is_zero(affine_alpha):
    path = simulate_LI_poisson(0, affine_alpha, GRID, 0)
    assert np.all(path.values == 0.0)


@pytest.mark.slow
def test_poisson_and_series_agree_in_law(affine_alpha):
    a = sample_paths("LI", affine_alpha, [1.0], 10_000, 5000, seed=24)[:, 0]
    b = sample_paths("LI_poisson", affine_alpha, [1.0], 10_000, 5000, seed=24)[:, 0]
    assert stats.ks_2samp(a, b).pvalue > 0.01


# -- general kernel ------------------------------------------------------------------

def test_indicator_kernel_reproduces_LF(affine_alpha):
    draw = draw_series(10, 400)
    assert np.array_equal(simulate_general_fkl(draw, affine_alpha, indicator_kernel(), GRID).values,
                          simulate_LF_fkl(draw, affine_alpha, GRID).values)


def test_min_kernel_single_term():
    path = simulate_general_fkl(single_term(1.0, 0.4), AlphaFunction.constant(1.0), min_kernel(),
                                GRID)
    assert np.allclose(path.values, 2 / np.pi * np.minimum(GRID.points, 0.4), rtol=1e-15, atol=0)


def test_zero_kernel(affine_alpha):
    path = simulate_general_fkl(draw_series(1, 100), affine_alpha, zero_kernel(), GRID)
    assert np.all(path.values == 0.0)


def test_kernel_bound_violation(affine_alpha):
    bad = Kernel(lambda t, x: 3.0 * np.ones_like(x), 1.0, lambda x: np.zeros_like(x))
    with pytest.raises(KernelBoundError):
        simulate_general_fkl(draw_series(1, 10), affine_alpha, bad, GRID)
    with pytest.raises(KernelBoundError):
        bad.check(1.0)


def test_builtin_kernels_pass_their_checks(affine_alpha):
    for make in (indicator_kernel, min_kernel, zero_kernel):
        assert np.isfinite(make().check(1.0, affine_alpha))


# -- determinism -----------------------------------------------------------------------

@pytest.mark.parametrize("process", ["LI", "LF", "LI_poisson"])
def test_paths_independent_of_chunking_and_threads(affine_alpha, process):
    t = np.linspace(0, 1, 9)
    a = sample_paths(process, affine_alpha, t, 40, 300, seed=3, chunk=7, threads=1)
    b = sample_paths(process, affine_alpha, t, 40, 300, seed=3, chunk=16, threads=3)
    assert np.array_equal(a, b)


def test_batch_equals_single_path_evaluation(affine_alpha):
    t = np.linspace(0, 1, 17)
    batch = sample_paths("LF", affine_alpha, t, 5, 200, seed=4)
    for k in range(5):
        single = simulate_LF_fkl(draw_series(4, 200, path_id=k), affine_alpha, TimeGrid(t))
        assert np.array_equal(batch[k], single.values)


@pytest.mark.slow
def test_constant_alpha_marginals_match_oracle():
    alpha = AlphaFunction.constant(1.3)
    x = sample_paths("LI", alpha, [1.0], 10_000, 5000, seed=25)[:, 0]
    y = sample_paths("LF", alpha, [1.0], 10_000, 5000, seed=25)[:, 0]
    assert np.array_equal(x, y)
    z = sample_stable_oracle(1.3, 1.0, np.random.default_rng(26), 10_000)
    assert stats.ks_2samp(x, z).pvalue > 0.01


# -- truncation and partial sums -----------------------------------------------------------

def test_truncation_tail_bound_holds_on_event():
    alpha = AlphaFunction.constant(0.8, bounds=(0.7, 0.9))
    t = np.linspace(0, 1, 65)
    n, big = 256, 4096
    checked = 0
    for pid in range(20):
        draw = draw_series(30, big, path_id=pid)
        idx = np.arange(n + 1, big + 1)
        if not np.all(draw.arrivals[n:] >= idx / 2):
            continue
        head = SeriesDraw(draw.arrivals[:n], draw.locations[:n], draw.signs[:n])
        gap = np.max(np.abs(li_values(draw, alpha, t) - li_values(head, alpha, t)))
        assert gap <= truncation_tail_bound(alpha, n)
        checked += 1
    assert checked > 0


def test_truncation_bound_needs_small_d(affine_alpha):
    with pytest.raises(ValueError):
        truncation_tail_bound(affine_alpha, 100)


def test_partial_sums_decay_for_small_alpha():
    alpha = AlphaFunction.constant(0.8)
    draws = [draw_series(31, 8192, path_id=k) for k in range(10)]
    rep = partial_sum_convergence(draws, alpha, [256, 4096])
    assert np.all(rep.median_gaps[1] < rep.median_gaps[0])


def test_partial_sums_vanish_without_signs(affine_alpha):
    draws = [draw_series(32, 512, path_id=k) for k in range(3)]
    rep = partial_sum_convergence(draws, affine_alpha, [16, 64, 256], zero_signs=True)
    assert np.all(rep.gaps == 0.0)


def test_partial_sums_reject_short_draws(affine_alpha):
    with pytest.raises(ValueError):
        partial_sum_convergence([draw_series(0, 100)], affine_alpha, [64])
    with pytest.raises(ValueError):
        partial_sum_convergence([draw_series(0, 100)], affine_alpha, [16, 8])


def test_time_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid([0.0, 0.5, 0.5])
    with pytest.raises(ValueError):
        TimeGrid.uniform(1.0, 1)
