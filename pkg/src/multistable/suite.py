"""The numerical and statistical checks run by ``multistable check`` and the test suite.

Every function returns a :class:`~multistable.charfn.CheckReport` (or a small report
object for the purely informational diagnostics) and is deterministic given its seed.
"""
from __future__ import annotations

import time

import numpy as np
from scipy import stats

from .alpha import AlphaFunction
from .charfn import (CFQuery, CheckReport, InsufficientSamplesError, cf_LF_joint, cf_LI_joint,
                     cf_distance, increment_independence_check)
from .decomp import (compute_A_field, decompose_LI, field_decomposition, integrator_probe,
                     martingale_jump_bound, random_simple_predictable, total_variation)
from .localize import analytic_tangent_check, tangent_check
from .series import (ORACLE_STREAM, SeriesDraw, TimeGrid, draw_batch, draw_series, lf_values,
                     li_jumps, li_values, partial_sum_convergence, sample_paths, stream_rngs)
from .stable import c_alpha, c_alpha_quad, sample_stable_oracle

DEFAULT_ALPHA = {"kind": "affine", "a0": 1.2, "a1": 0.3}
CF_THETAS = np.linspace(-3.0, 3.0, 21)


def default_alpha() -> AlphaFunction:
    return AlphaFunction.from_config(DEFAULT_ALPHA)


def _require(n, what="statistical checks"):
    if n < 2:
        raise InsufficientSamplesError(f"insufficient samples: {what} need at least 2, got {n}")


def _oracle_rng(seed: int, k: int = 0) -> np.random.Generator:
    return stream_rngs(seed, k, ORACLE_STREAM, 1)[0]


# -- normalisation constant -------------------------------------------------------------

def check_c_alpha(us=np.round(np.arange(0.1, 1.95, 0.1), 10), tol: float = 1e-8) -> CheckReport:
    """Quadrature of the defining sine integral against the closed form."""
    start = time.perf_counter()
    gaps = [abs(c_alpha_quad(u) - float(c_alpha(u))) for u in us]
    at_one = abs(float(c_alpha(1.0)) - 2.0 / np.pi)
    elapsed = time.perf_counter() - start
    worst = max(gaps)
    return CheckReport("c_alpha_closed_vs_quadrature", worst, tol,
                       worst <= tol and at_one <= 1e-10,
                       {"u": [float(u) for u in us], "gap_at_one": at_one, "seconds": elapsed})


# -- characteristic functions --------------------------------------------------------------

def check_marginal_cf(alpha: AlphaFunction, process: str = "LI", t: float = 1.0,
                      n_paths: int = 20_000, n_terms: int = 5000, seed: int = 0,
                      threshold: float = 0.03, thetas=CF_THETAS,
                      analytic_alpha: AlphaFunction | None = None, values=None,
                      threads: int = 1) -> CheckReport:
    """sup over the theta grid of |ecf - analytic| for the marginal at ``t``.

    ``analytic_alpha`` replaces alpha on the analytic side only (mismatch test mode).
    """
    _require(n_paths)
    ref = analytic_alpha or alpha
    if values is None:
        values = sample_paths(process, alpha, [t], n_paths, n_terms, seed, threads=threads)[:, 0]

    def exact(th):
        if process == "LF":
            return np.array([cf_LF_joint(ref, CFQuery([t], v)).value.real for v in th])
        return np.array([cf_LI_joint(ref, CFQuery([t], v)).value.real for v in th])

    dist = cf_distance(exact, values, thetas)
    return CheckReport(f"marginal_cf_{process}", dist, threshold, dist <= threshold,
                       {"t": t, "n_paths": n_paths, "n_terms": n_terms,
                        "mismatched_alpha": analytic_alpha is not None})


def check_representation_ks(alpha: AlphaFunction, t: float = 1.0, n_paths: int = 10_000,
                            n_terms: int = 5000, seed: int = 0, p_min: float = 0.01,
                            fkl=None, poisson=None, threads: int = 1) -> CheckReport:
    """Two-sample KS between the Poisson and series simulators of L_I at ``t``."""
    _require(n_paths)
    if fkl is None:
        fkl = sample_paths("LI", alpha, [t], n_paths, n_terms, seed, threads=threads)[:, 0]
    if poisson is None:
        poisson = sample_paths("LI_poisson", alpha, [t], n_paths, n_terms, seed,
                               threads=threads)[:, 0]
    res = stats.ks_2samp(fkl, poisson)
    return CheckReport("representation_ks", res.pvalue, p_min, res.pvalue > p_min,
                       {"ks_statistic": float(res.statistic), "t": t, "n_paths": n_paths})


def check_lf_fixed_time(alpha: AlphaFunction, t: float = 0.7, n_paths: int = 10_000,
                        n_terms: int = 5000, seed: int = 0, p_min: float = 0.01,
                        cf_tol: float = 1e-6, thetas=(0.1, 0.5, 1.0, 2.0, 3.0),
                        threads: int = 1) -> list:
    """L_F(t) against alpha(t)-stable samples (KS) and the analytic marginal CF."""
    _require(n_paths)
    a_t = float(alpha(t))
    lf = sample_paths("LF", alpha, [t], n_paths, n_terms, seed, threads=threads)[:, 0]
    oracle = sample_stable_oracle(a_t, t, _oracle_rng(seed), n_paths)
    res = stats.ks_2samp(lf, oracle)
    gap = max(abs(cf_LF_joint(alpha, CFQuery([t], [th])).value.real
                  - np.exp(-t * abs(th) ** a_t)) for th in thetas)
    return [CheckReport("lf_fixed_time_ks", res.pvalue, p_min, res.pvalue > p_min,
                        {"t": t, "alpha_t": a_t, "ks_statistic": float(res.statistic)}),
            CheckReport("lf_fixed_time_cf", gap, cf_tol, gap <= cf_tol, {"t": t})]


def check_independence(alpha: AlphaFunction, process: str = "LI", n_paths: int = 20_000,
                       n_terms: int = 5000, seed: int = 0, increments=((0.0, 0.5), (0.5, 1.0)),
                       values=None, threads: int = 1) -> CheckReport:
    _require(n_paths)
    T = alpha.horizon
    incs = [(a * T, b * T) for a, b in increments] if T != 1.0 else list(increments)
    return increment_independence_check(alpha, process, incs, n_paths, n_terms, seed,
                                        values=values, threads=threads)


# -- decompositions -------------------------------------------------------------------------

def check_reconstruction(alpha: AlphaFunction, n_draws: int = 100, n_terms: int = 2000,
                         grid_points: int = 257, seed: int = 0) -> CheckReport:
    """a_part + m_part == L_I bit for bit, both split rules, every draw and grid point."""
    grid = TimeGrid.uniform(alpha.horizon, grid_points)
    mismatches = 0
    for k in range(n_draws):
        draw = draw_series(seed, n_terms, alpha.horizon, k)
        for rule in ("magnitude", "alternate"):
            res = decompose_LI(draw, alpha, grid, rule)
            mismatches += int(np.count_nonzero(res.a_path.values + res.m_path.values
                                               != res.total.values))
    return CheckReport("decomposition_reconstruction", mismatches, 0, mismatches == 0,
                       {"n_draws": n_draws, "grid_points": grid_points})


def martingale_part(alpha: AlphaFunction, times, n_paths: int, n_terms: int, seed: int,
                    chunk: int = 128):
    """M'(t) over many paths and the number of Gamma_i < 1 terms per path."""
    times = np.asarray(times, dtype=float)
    vals, counts = [], []
    for lo in range(0, n_paths, chunk):
        draw = draw_batch(seed, np.arange(lo, min(n_paths, lo + chunk)), n_terms, alpha.horizon)
        first = draw.arrivals < 1.0
        vals.append(li_values(draw, alpha, times, split=first, select=~first))
        counts.append(first.sum(axis=1))
    return np.concatenate(vals), np.concatenate(counts)


def check_martingale_mean(alpha: AlphaFunction, n_paths: int = 20_000, n_terms: int = 5000,
                          seed: int = 0, n_se: float = 3.0) -> list:
    """Mean of M'(t) at T/4, T/2, T within ``n_se`` standard errors of 0; A' count ~ Poisson(1)."""
    _require(n_paths)
    T = alpha.horizon
    times = np.array([T / 4, T / 2, T])
    vals, counts = martingale_part(alpha, times, n_paths, n_terms, seed)
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(n_paths)
    z = np.abs(mean) / se
    count_mean = float(counts.mean())
    count_se = float(counts.std(ddof=1) / np.sqrt(n_paths))
    jump_max = 0.0
    bound = martingale_jump_bound(alpha)
    for k in range(min(n_paths, 50)):
        d = draw_series(seed, n_terms, T, k)
        j = np.abs(li_jumps(d, alpha))[d.arrivals >= 1.0]
        jump_max = max(jump_max, float(j.max()) if j.size else 0.0)
    return [CheckReport("martingale_mean", float(z.max()), n_se, bool(np.all(z <= n_se)),
                        {"times": times.tolist(), "mean": mean.tolist(), "se": se.tolist()}),
            CheckReport("drift_term_count", abs(count_mean - T), n_se * count_se,
                        abs(count_mean - T) <= n_se * count_se,
                        {"mean_count": count_mean, "expected": T}),
            CheckReport("martingale_jump_bound", jump_max, bound, jump_max <= bound, {})]


def check_field_decomposition(alpha: AlphaFunction, n_draws: int = 20, n_terms: int = 10_000,
                              grid_points: int = 1001, seed: int = 0,
                              rel_tol: float = 1e-2) -> list:
    """sup_t |L_F - (A + L_I)| / (1 + sup|L_F|) per draw; constant-alpha degeneracy."""
    grid = TimeGrid.uniform(alpha.horizon, grid_points)
    worst = 0.0
    for k in range(n_draws):
        draw = draw_series(seed, n_terms, alpha.horizon, k)
        res = field_decomposition(draw, alpha, grid)
        lf = res.total.values
        worst = max(worst, res.reconstruction_gap / (1.0 + np.max(np.abs(lf))))
    flat = AlphaFunction.constant(float(alpha(0.0)), alpha.horizon)
    exact = True
    for k in range(min(n_draws, 5)):
        draw = draw_series(seed, n_terms, alpha.horizon, k)
        res = field_decomposition(draw, flat, grid)
        exact &= bool(np.all(res.a_path.values == 0.0)
                      and np.array_equal(res.total.values, res.m_path.values))
    return [CheckReport("field_decomposition", worst, rel_tol, worst <= rel_tol,
                        {"n_draws": n_draws, "n_terms": n_terms, "grid_points": grid_points}),
            CheckReport("field_decomposition_constant_alpha", 0.0 if exact else 1.0, 0.0, exact, {})]


def variation_under_refinement(alpha: AlphaFunction, n_draws: int = 5, n_terms: int = 10_000,
                               grids=(1001, 10_001), seed: int = 0, rel_tol: float = 0.01):
    """Relative TV change of the field drift A (thresholded) and TV growth of M' (reported)."""
    coarse, fine = (TimeGrid.uniform(alpha.horizon, g) for g in grids)
    a_change, m_ratio = [], []
    for k in range(n_draws):
        draw = draw_series(seed, n_terms, alpha.horizon, k)
        tv_a = [total_variation(compute_A_field(draw, alpha, g)) for g in (coarse, fine)]
        a_change.append(abs(tv_a[1] - tv_a[0]) / tv_a[1] if tv_a[1] else 0.0)
        tv_m = [total_variation(decompose_LI(draw, alpha, g).m_path) for g in (coarse, fine)]
        m_ratio.append(tv_m[1] / tv_m[0])
    worst = max(a_change)
    return CheckReport("field_drift_variation", worst, rel_tol, worst <= rel_tol,
                       {"grids": list(grids), "martingale_tv_ratio": m_ratio,
                        "d": alpha.d})


# -- tangency, integrator probe, series convergence ------------------------------------------

def check_tangency(alpha: AlphaFunction, process: str, u: float = 0.5,
                   r_values=(0.2, 0.05, 0.0125), n_paths: int = 20_000, n_terms: int = 2000,
                   seed: int = 0, threads: int = 1):
    rep = tangent_check(process, alpha, u, r_values, n_paths=n_paths, n_terms=n_terms,
                        seed=seed, threads=threads)
    worst_step = float(np.max(np.diff(rep.distances_cv)))
    return CheckReport(f"tangency_{process}", worst_step, 0.0, rep.passed,
                       {"rows": rep.to_dicts(), "limit_distance": rep.details["limit_distance"]}), rep


def check_tangency_analytic(alpha: AlphaFunction, u: float = 0.5, r: float = 1e-4,
                            tol: float = 1e-3) -> CheckReport:
    return analytic_tangent_check(alpha, u, r, tol=tol)


def good_integrator_probe(alpha: AlphaFunction, n_draws: int = 1000, n_integrands: int = 1000,
                          n_terms: int = 1000, grid_points: int = 129, p: float = 1.7,
                          ks=(2.0, 4.0, 8.0, 16.0), seed: int = 0, skip_first: bool = True):
    """Tail fit of elementary integrals of L_F; ``skip_first`` drops the i = 1 series term."""
    grid = TimeGrid.uniform(alpha.horizon, grid_points)
    rng = _oracle_rng(seed, 1)
    xis = [random_simple_predictable(rng, grid) for _ in range(n_integrands)]
    rows = []
    for lo in range(0, n_draws, 128):
        draw = draw_batch(seed, np.arange(lo, min(n_draws, lo + 128)), n_terms, alpha.horizon)
        if skip_first:
            draw = SeriesDraw(draw.arrivals[:, 1:], draw.locations[:, 1:], draw.signs[:, 1:],
                              draw.horizon)
        rows.append(lf_values(draw, alpha, grid.points))
    probe = integrator_probe(np.concatenate(rows), grid, xis, p, ks)
    probe.details = {"skip_first": skip_first, "n_terms": n_terms, "grid_points": grid_points}
    return probe


def series_convergence(alpha: AlphaFunction, n_draws: int = 20, exponents=range(10, 15),
                       seed: int = 0, n_grid: int = 257):
    n_list = [2 ** k for k in exponents]
    draws = [draw_series(seed, 2 * n_list[-1], alpha.horizon, k) for k in range(n_draws)]
    rep = partial_sum_convergence(draws, alpha, n_list, n_grid)
    return CheckReport("partial_sum_monotone", float(np.max(np.diff(rep.median_gaps, axis=0))),
                       0.0, all(rep.monotone), rep.to_dict()), rep


# -- aggregated suite ---------------------------------------------------------------------------

def run_suite(alpha: AlphaFunction, n_paths: int = 20_000, n_terms: int = 5000, seed: int = 0,
              analytic_alpha: AlphaFunction | None = None, cf_threshold: float = 0.03,
              ks_p_min: float = 0.01, n_se: float = 3.0, tangency_u: float | None = None,
              tangency_r=(0.2, 0.05, 0.0125), threads: int = 1, log=None) -> list:
    """CF match, representation equivalence, reconstruction, independence, tangency and
    martingale mean; returns the list of reports."""
    _require(n_paths)
    T = alpha.horizon
    say = log or (lambda msg: None)
    reports = []
    times = np.array([T / 2, T])
    say("simulating independent-increments paths")
    li = sample_paths("LI", alpha, times, n_paths, n_terms, seed, threads=threads)
    poisson = sample_paths("LI_poisson", alpha, [T], n_paths, n_terms, seed, threads=threads)[:, 0]
    reports.append(check_marginal_cf(alpha, "LI", T, n_paths, n_terms, seed, cf_threshold,
                                     analytic_alpha=analytic_alpha, values=li[:, 1]))
    reports.append(check_marginal_cf(alpha, "LI_poisson", T, n_paths, n_terms, seed, cf_threshold,
                                     analytic_alpha=analytic_alpha, values=poisson))
    reports.append(check_representation_ks(alpha, T, n_paths, n_terms, seed, ks_p_min,
                                           fkl=li[:, 1], poisson=poisson))
    say("decomposition reconstruction")
    reports.append(check_reconstruction(alpha, n_draws=min(100, n_paths), seed=seed))
    say("increment independence")
    values = np.concatenate([np.zeros((n_paths, 1)), li], axis=1)
    reports.append(increment_independence_check(alpha, "LI", [(0.0, T / 2), (T / 2, T)], n_paths,
                                                n_terms, seed, values=values))
    say("tangency")
    u = T / 2 if tangency_u is None else tangency_u
    reports.append(check_tangency_analytic(alpha, u))
    for proc in ("LI", "LF"):
        reports.append(check_tangency(alpha, proc, u, tangency_r, n_paths, min(n_terms, 2000),
                                      seed, threads)[0])
    say("martingale mean")
    reports.extend(check_martingale_mean(alpha, n_paths, n_terms, seed, n_se))
    return reports
