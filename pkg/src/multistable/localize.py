"""Tangency of the multistable motions to alpha(u)-stable Levy motion.

At a base time u the rescaled increments

    X_r(t) = (Y(u + r t) - Y(u)) / r^(1/alpha(u))

should approach a standard symmetric alpha(u)-stable Levy motion as r -> 0.

The Monte Carlo check splits the Poisson points into those over [0, u] and those
over the window (u, u + r t_max], each simulated by its own series (exact in law).
The window series reuses one draw for every r by rescaling its locations, so the
samples X_r converge pathwise to a limit sample X_0 that does not depend on r. Besides
the raw distance sup|ecf(X_r) - phi| the report carries the control-variate
estimate sup|ecf(X_r) - ecf(X_0)|, which removes the sampling noise shared by all r.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .alpha import AlphaFunction
from .charfn import CheckReport, InsufficientSamplesError, ecf_grid
from .series import (TANGENT_BASE_STREAM, TANGENT_WINDOW_STREAM, SeriesDraw, _at_times,
                     draw_batch, lf_values, li_values, series_terms)
from .stable import c_alpha_pow, stable_levy_joint_cf

DEFAULT_THETAS = (-3.0, -2.0, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.0, 3.0)
DEFAULT_PROBE_TIMES = (0.5, 1.0)


class ProbeRangeError(ValueError):
    pass


def _validate(alpha: AlphaFunction, u: float, r_values, probe_times):
    T = alpha.horizon
    if not 0.0 < u < T:
        raise ProbeRangeError(f"base time u must lie in (0, {T})")
    r = np.asarray(r_values, dtype=float)
    if r.ndim != 1 or r.size == 0 or np.any(r <= 0) or np.any(np.diff(r) >= 0):
        raise ValueError("r values must be positive and strictly decreasing")
    probes = np.asarray(probe_times, dtype=float)
    if probes.ndim != 1 or probes.size == 0 or np.any(probes <= 0) or np.any(np.diff(probes) <= 0):
        raise ValueError("probe times must be positive and strictly increasing")
    if u + r[0] * probes[-1] > T * (1 + 1e-12):
        raise ProbeRangeError(f"probe u + r t = {u + r[0] * probes[-1]} leaves [0, {T}]")
    return r, probes


# -- analytic check (independent increments) ---------------------------------------------

def rescaled_increment_exponent(alpha: AlphaFunction, u: float, r: float, t: float,
                                theta: float) -> float:
    """int_u^{u+rt} |theta r^(-1/alpha(u))|^alpha(s) ds: minus the log-CF of X_r(t)."""
    scaled = abs(theta) * r ** (-1.0 / float(alpha(u)))
    if scaled == 0.0:
        return 0.0
    # substitute s = u + r tau to keep the integration range O(1)
    val, _ = integrate.quad(lambda tau: scaled ** alpha(u + r * tau), 0.0, t,
                            epsabs=0.0, epsrel=1e-12, limit=200)
    return r * val


def tangent_log_cf_ratio(alpha: AlphaFunction, u: float, r: float, t: float,
                         theta: float) -> float:
    """Ratio of the rescaled-increment log-CF to the limiting t |theta|^alpha(u)."""
    return rescaled_increment_exponent(alpha, u, r, t, theta) / (t * abs(theta) ** float(alpha(u)))


def analytic_tangent_check(alpha: AlphaFunction, u: float, r: float = 1e-4,
                           thetas=(0.25, 0.5, 1.0, 2.0, 3.0), times=(0.5, 1.0),
                           tol: float = 1e-3) -> CheckReport:
    _validate(alpha, u, [r], times)
    worst = max(abs(tangent_log_cf_ratio(alpha, u, r, t, th) - 1.0)
                for t in times for th in thetas)
    return CheckReport("tangent_analytic_LI", worst, tol, worst <= tol,
                       {"u": u, "r": r, "thetas": list(thetas), "times": list(times)})


# -- Monte Carlo check -----------------------------------------------------------------------

@dataclass
class TangentReport:
    process: str
    u: float
    r_values: list
    distances: list
    distances_cv: list
    band: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dicts(self) -> list:
        return [{"process": self.process, "u": self.u, "r": r, "distance": d,
                 "distance_cv": dc, "band": self.band, "pass": self.passed}
                for r, d, dc in zip(self.r_values, self.distances, self.distances_cv)]


def _limit_values(window: SeriesDraw, alpha_u: float, t_max: float, probes):
    """X_0: the alpha(u)-stable series built from the window draw's (Gamma, U, gamma)."""
    log_y = np.log(window.arrivals / t_max)
    jumps = series_terms(c_alpha_pow(alpha_u), window.signs, log_y, alpha_u)
    rows = int(np.prod(window.arrivals.shape[:-1]))
    return _at_times(probes, window.locations * t_max, window.arrivals < 1.0, rows,
                     lambda sl: jumps[..., None, :])


def tangent_samples(process_kind: str, alpha: AlphaFunction, u: float, r_values, probe_times,
                    n_paths: int, n_terms: int = 2000, seed: int = 0, chunk: int = 128,
                    threads: int = 1):
    """Rescaled increment samples per r, shape (n_paths, m), and the limit samples X_0."""
    r_values, probes = _validate(alpha, u, r_values, probe_times)
    if process_kind not in ("LI", "LF"):
        raise ValueError(f"tangency is checked for LI and LF, not {process_kind!r}")
    alpha_u = float(alpha(u))
    t_max = probes[-1]
    T = alpha.horizon

    def run(block):
        window = draw_batch(seed, block, n_terms, 1.0, TANGENT_WINDOW_STREAM)
        base = (draw_batch(seed, block, n_terms, u, TANGENT_BASE_STREAM)
                if process_kind == "LF" else None)
        out = []
        for r in r_values:
            w = r * t_max
            wd = SeriesDraw(window.arrivals, np.minimum(u + w * window.locations, T),
                            window.signs, w)
            times = np.minimum(u + r * probes, T)
            if process_kind == "LI":
                inc = li_values(wd, alpha, times)
            else:
                at = lf_values(base, alpha, np.concatenate([[u], times]))
                inc = lf_values(wd, alpha, times) + (at[:, 1:] - at[:, :1])
            out.append(inc / r ** (1.0 / alpha_u))
        out.append(_limit_values(window, alpha_u, t_max, probes))
        return np.stack(out)

    ids = np.arange(n_paths)
    blocks = [ids[i:i + chunk] for i in range(0, n_paths, chunk)]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    allv = np.concatenate(parts, axis=1)
    return {float(r): allv[k] for k, r in enumerate(r_values)}, allv[-1]


def tangent_check(process_kind: str, alpha: AlphaFunction, u: float,
                  r_values=(0.2, 0.05, 0.0125), probe_times=DEFAULT_PROBE_TIMES,
                  n_paths: int = 20_000, n_terms: int = 2000, seed: int = 0,
                  thetas=DEFAULT_THETAS, threads: int = 1) -> TangentReport:
    """CF sup-distances of rescaled increments to the alpha(u)-stable joint CF, per r.

    ``passed`` is the trend flag: the control-variate distances are non-increasing as
    r decreases.
    """
    if n_paths < 2:
        raise InsufficientSamplesError("insufficient samples for a tangency check")
    samples, limit = tangent_samples(process_kind, alpha, u, r_values, probe_times, n_paths,
                                     n_terms, seed, threads=threads)
    probes = np.asarray(probe_times, dtype=float)
    th1 = np.asarray(thetas, dtype=float)
    grid = np.stack(np.meshgrid(*([th1] * probes.size), indexing="ij"), axis=-1)
    grid = grid.reshape(-1, probes.size)
    alpha_u = float(alpha(u))
    exact = stable_levy_joint_cf(alpha_u, probes, grid)
    ecf_limit = ecf_grid(limit, grid)
    dist, dist_cv = [], []
    for r in samples:
        e = ecf_grid(samples[r], grid)
        dist.append(float(np.max(np.abs(e - exact))))
        dist_cv.append(float(np.max(np.abs(e - ecf_limit))))
    # slack absorbs rounding when X_r and X_0 coincide (constant alpha)
    passed = bool(np.all(np.diff(dist_cv) <= 1e-12))
    band = 3.0 / np.sqrt(n_paths)
    details = {"alpha_u": alpha_u, "probe_times": probes.tolist(), "n_terms": n_terms,
               "limit_distance": float(np.max(np.abs(ecf_limit - exact)))}
    return TangentReport(process_kind, float(u), [float(r) for r in samples], dist, dist_cv,
                         band, passed, details)
