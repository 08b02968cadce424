"""Truncated series simulation of multistable Levy motions.

All simulators share one term layout. For a draw (Gamma_i, V_i, gamma_i) on [0, T]
put ``y_i = Gamma_i / T`` (the points of a unit-intensity Poisson process on
[0, T] x R_+, ordered by magnitude). Then

* independent increments:  L_I(t) = sum_i h(alpha(V_i)) gamma_i y_i^(-1/alpha(V_i)) 1{V_i <= t}
* field based:             L_F(t) = h(alpha(t)) sum_i gamma_i y_i^(-1/alpha(t)) 1{V_i <= t}
* general kernel:          X(t)   = h(alpha(t)) sum_i gamma_i y_i^(-1/alpha(t)) f(t, V_i)

with ``h(u) = C_u^(1/u)``. Every sum is split in two blocks, the large terms
(Gamma_i < 1) and the rest; each block is reduced over the full index axis with the
inactive terms zeroed, and the two block sums are added last. Fixing this order is what makes the decompositions in
:mod:`multistable.decomp` reconstruct paths bit for bit, and makes L_F and L_I
identical bit for bit when alpha is constant.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .alpha import AlphaFunction
from .stable import c_alpha_pow

FKL_STREAM = 0
POISSON_STREAM = 1
ORACLE_STREAM = 2
TANGENT_BASE_STREAM = 3
TANGENT_WINDOW_STREAM = 4

PROCESS_KINDS = ("LI", "LF", "GENERAL")

_CHUNK_ELEMENTS = 2_000_000


class EmptyDrawError(ValueError):
    pass


class KernelBoundError(ValueError):
    pass


def stream_rngs(seed: int, path_id: int, tag: int, n: int) -> list[np.random.Generator]:
    """``n`` independent generators for one path; ``tag`` separates simulators."""
    ss = np.random.SeedSequence(seed, spawn_key=(tag, path_id))
    return [np.random.default_rng(s) for s in ss.spawn(n)]


def arrivals_from_increments(increments) -> np.ndarray:
    return np.cumsum(np.asarray(increments, dtype=float), axis=-1)


@dataclass(frozen=True, eq=False)
class SeriesDraw:
    """One realisation of (Gamma_i, V_i, gamma_i), i = 1..N, on [0, horizon].

    Arrays may carry a leading batch axis (see :func:`draw_batch`).
    """

    arrivals: np.ndarray
    locations: np.ndarray
    signs: np.ndarray
    horizon: float = 1.0
    seed: int | None = None
    path_id: int | np.ndarray = 0

    def __post_init__(self):
        for name in ("arrivals", "locations", "signs"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.arrivals.shape == self.locations.shape == self.signs.shape):
            raise ValueError("arrivals, locations and signs must share a shape")
        if self.arrivals.shape[-1] == 0:
            raise EmptyDrawError("a series draw needs at least one term")

    @property
    def n_terms(self) -> int:
        return self.arrivals.shape[-1]

    @property
    def log_magnitudes(self) -> np.ndarray:
        """log(Gamma_i / T)."""
        return np.log(self.arrivals / self.horizon)

    def ref(self) -> dict:
        pid = self.path_id.tolist() if isinstance(self.path_id, np.ndarray) else self.path_id
        return {"seed": self.seed, "n_terms": self.n_terms, "horizon": self.horizon, "path_id": pid}

    def row(self, k: int) -> "SeriesDraw":
        pid = self.path_id[k] if isinstance(self.path_id, np.ndarray) else self.path_id
        return SeriesDraw(self.arrivals[k], self.locations[k], self.signs[k], self.horizon,
                          self.seed, int(pid))

    def validate(self):
        """Check the structural invariants; raises ``ValueError`` on failure."""
        g = self.arrivals
        if np.any(g <= 0) or np.any(np.diff(g, axis=-1) <= 0):
            raise ValueError("arrivals must be positive and strictly increasing")
        if np.any(self.locations < 0) or np.any(self.locations > self.horizon):
            raise ValueError("locations must lie in [0, T]")
        if np.any(np.abs(self.signs) != 1):
            raise ValueError("signs must be +-1")


def draw_series(seed: int, n_terms: int, horizon: float = 1.0, path_id: int = 0,
                stream: int = FKL_STREAM) -> SeriesDraw:
    """Draw (Gamma, V, gamma) from three independent sub-streams of ``(seed, path_id)``."""
    if n_terms < 1:
        raise EmptyDrawError("n_terms must be >= 1")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    r_arr, r_loc, r_sign = stream_rngs(seed, path_id, stream, 3)
    arrivals = arrivals_from_increments(r_arr.standard_exponential(n_terms))
    locations = r_loc.uniform(0.0, horizon, n_terms)
    signs = 2.0 * r_sign.integers(0, 2, n_terms) - 1.0
    return SeriesDraw(arrivals, locations, signs, horizon, seed, path_id)


def draw_batch(seed: int, path_ids, n_terms: int, horizon: float = 1.0,
               stream: int = FKL_STREAM) -> SeriesDraw:
    """Stack per-path draws; row k is bit-identical to ``draw_series(seed, N, T, path_ids[k])``."""
    path_ids = np.asarray(path_ids, dtype=np.int64)
    rows = [draw_series(seed, n_terms, horizon, int(p), stream) for p in path_ids]
    return SeriesDraw(np.stack([r.arrivals for r in rows]),
                      np.stack([r.locations for r in rows]),
                      np.stack([r.signs for r in rows]), horizon, seed, path_ids)


# -- grids, paths, kernels -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TimeGrid:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        if pts.size == 0 or np.any(np.diff(pts) <= 0) or pts[0] < 0:
            raise ValueError("time grid must be non-empty, strictly increasing and >= 0")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, horizon: float, n_points: int) -> "TimeGrid":
        if n_points < 2:
            raise ValueError("a uniform grid needs at least 2 points")
        return cls(np.linspace(0.0, horizon, n_points))

    def __len__(self):
        return self.points.size

    def check_within(self, horizon: float):
        if self.points[-1] > horizon:
            raise ValueError(f"grid extends past the horizon {horizon}")


@dataclass(frozen=True, eq=False)
class PathSample:
    grid: TimeGrid
    values: np.ndarray
    process_kind: str
    draw_ref: dict = field(default_factory=dict)

    def __add__(self, other: "PathSample") -> np.ndarray:
        return self.values + other.values


@dataclass(frozen=True)
class Kernel:
    """Kernel f(t, x) for the general series process.

    ``evaluate(t, x)`` receives a scalar time and an array of locations. ``variation``
    maps locations x to the total variation of u -> f(u, x) on [0, T].
    """

    evaluate: Callable[[float, np.ndarray], np.ndarray]
    bound: float
    variation: Callable[[np.ndarray], np.ndarray]
    p_exponent: float = 1.7
    name: str = "custom"

    def check(self, horizon: float, alpha: AlphaFunction | None = None, n: int = 201):
        """Numerically verify the bound and the p-th moment of the variation profile."""
        if alpha is not None and not alpha.d < self.p_exponent < 2:
            raise ValueError(f"p_exponent must lie in (d, 2) = ({alpha.d}, 2)")
        ts = np.linspace(0.0, horizon, n)
        xs = np.linspace(0.0, horizon, n)
        vals = np.stack([self.evaluate(t, xs) for t in ts])
        if np.max(np.abs(vals)) > self.bound * (1 + 1e-12):
            raise KernelBoundError(f"|f| exceeds declared bound {self.bound}")
        moment = np.trapezoid(np.abs(self.variation(xs)) ** self.p_exponent, xs)
        if not np.isfinite(moment):
            raise ValueError("variation profile has an infinite p-th moment")
        return moment


def indicator_kernel(horizon: float = 1.0, p_exponent: float = 1.7) -> Kernel:
    """f(t, x) = 1{x <= t}: reduces the general process to L_F."""
    return Kernel(lambda t, x: (np.asarray(x) <= t).astype(float), 1.0,
                  lambda x: np.ones_like(np.asarray(x, dtype=float)), p_exponent, "indicator")


def min_kernel(horizon: float = 1.0, p_exponent: float = 1.7) -> Kernel:
    """f(t, x) = min(t, x); u -> min(u, x) has total variation x on [0, T]."""
    return Kernel(lambda t, x: np.minimum(t, np.asarray(x, dtype=float)), float(horizon),
                  lambda x: np.asarray(x, dtype=float), p_exponent, "min")


def zero_kernel(horizon: float = 1.0, p_exponent: float = 1.7) -> Kernel:
    return Kernel(lambda t, x: np.zeros_like(np.asarray(x, dtype=float)), 0.0,
                  lambda x: np.zeros_like(np.asarray(x, dtype=float)), p_exponent, "zero")


BUILTIN_KERNELS = {"indicator": indicator_kernel, "min": min_kernel, "zero": zero_kernel}


# -- shared summation machinery --------------------------------------------------

def series_terms(scale, signs, log_mag, alpha_vals):
    """(scale * sign) * y^(-1/alpha); the single expression every simulator uses."""
    return (scale * signs) * np.exp(-log_mag / alpha_vals)


def split_mask(draw: SeriesDraw, rule="magnitude", alpha: AlphaFunction | None = None):
    """Boolean mask of the first summation block.

    ``magnitude``: Gamma_i < 1. ``alternate``: alpha(V_i) < 1/i. An explicit boolean
    array is passed through.
    """
    if isinstance(rule, np.ndarray):
        return rule.astype(bool)
    if rule == "magnitude":
        return draw.arrivals < 1.0
    if rule == "alternate":
        index = np.arange(1, draw.n_terms + 1, dtype=float)
        return alpha(draw.locations) < 1.0 / index
    raise ValueError(f"unknown split rule {rule!r}")


def block_sum(terms, first):
    """Sum over the last axis as (sum of the first block) + (sum of the rest).

    Masked-out entries are replaced by zeros, so every block sum runs over the full
    axis in index order and the floating-point result depends only on the values.
    """
    return (np.add.reduce(np.where(first, terms, 0.0), axis=-1)
            + np.add.reduce(np.where(first, 0.0, terms), axis=-1))


def _time_chunks(n_times: int, row_size: int):
    step = max(1, _CHUNK_ELEMENTS // max(row_size, 1))
    for lo in range(0, n_times, step):
        yield slice(lo, min(n_times, lo + step))


def _at_times(times, locations, first, n_rows, make_terms):
    """Evaluate block sums of ``make_terms(sl)`` restricted to {V_i <= t} per time."""
    out = np.empty(locations.shape[:-1] + times.shape)
    for sl in _time_chunks(times.size, n_rows * locations.shape[-1]):
        active = locations[..., None, :] <= times[sl][:, None]
        terms = np.where(active, make_terms(sl), 0.0)
        out[..., sl] = block_sum(terms, first[..., None, :])
    return out


def _rows(draw: SeriesDraw) -> int:
    return int(np.prod(draw.arrivals.shape[:-1], dtype=np.int64))


def li_jumps(draw: SeriesDraw, alpha: AlphaFunction) -> np.ndarray:
    """Jump of L_I at V_i: h(alpha(V_i)) gamma_i (Gamma_i/T)^(-1/alpha(V_i))."""
    a = alpha(draw.locations)
    return series_terms(c_alpha_pow(a), draw.signs, draw.log_magnitudes, a)


def li_values(draw: SeriesDraw, alpha: AlphaFunction, times, split="magnitude", select=None):
    """L_I at ``times``; ``select`` restricts the sum to a boolean subset of terms."""
    times = np.asarray(times, dtype=float)
    jumps = li_jumps(draw, alpha)
    if select is not None:
        jumps = np.where(select, jumps, 0.0)
    first = split_mask(draw, split, alpha)
    return _at_times(times, draw.locations, first, _rows(draw),
                     lambda sl: jumps[..., None, :])


def lf_values(draw: SeriesDraw, alpha: AlphaFunction, times, split="magnitude"):
    """L_F at ``times`` (diagonal evaluation with exponent alpha(t))."""
    times = np.asarray(times, dtype=float)
    a_t = alpha(times)
    h_t = c_alpha_pow(a_t)
    first = split_mask(draw, split, alpha)
    signs = draw.signs[..., None, :]
    logy = draw.log_magnitudes[..., None, :]

    def terms(sl):
        return series_terms(h_t[sl][:, None], signs, logy, a_t[sl][:, None])

    return _at_times(times, draw.locations, first, _rows(draw), terms)


def general_values(draw: SeriesDraw, alpha: AlphaFunction, kernel: Kernel, times,
                   split="magnitude"):
    """General kernel process at ``times``."""
    times = np.asarray(times, dtype=float)
    a_t = alpha(times)
    h_t = c_alpha_pow(a_t)
    first = split_mask(draw, split, alpha)
    logy = draw.log_magnitudes
    out = np.empty(draw.locations.shape[:-1] + times.shape)
    for j, t in enumerate(times):
        f = np.asarray(kernel.evaluate(t, draw.locations), dtype=float)
        if np.any(np.abs(f) > kernel.bound * (1 + 1e-12)):
            raise KernelBoundError(f"kernel exceeds its bound {kernel.bound} at t={t}")
        terms = series_terms(h_t[j], draw.signs, logy, a_t[j]) * f
        out[..., j] = block_sum(terms, first)
    return out


def _check_inputs(draw: SeriesDraw, alpha: AlphaFunction, grid: TimeGrid):
    if abs(draw.horizon - alpha.horizon) > 1e-12 * max(1.0, alpha.horizon):
        raise ValueError(f"draw horizon {draw.horizon} differs from alpha horizon {alpha.horizon}")
    grid.check_within(draw.horizon)


def simulate_LI_fkl(draw: SeriesDraw, alpha: AlphaFunction, grid: TimeGrid,
                    split="magnitude") -> PathSample:
    _check_inputs(draw, alpha, grid)
    return PathSample(grid, li_values(draw, alpha, grid.points, split), "LI", draw.ref())


def simulate_LF_fkl(draw: SeriesDraw, alpha: AlphaFunction, grid: TimeGrid) -> PathSample:
    _check_inputs(draw, alpha, grid)
    return PathSample(grid, lf_values(draw, alpha, grid.points), "LF", draw.ref())


def simulate_general_fkl(draw: SeriesDraw, alpha: AlphaFunction, kernel: Kernel,
                         grid: TimeGrid) -> PathSample:
    _check_inputs(draw, alpha, grid)
    return PathSample(grid, general_values(draw, alpha, kernel, grid.points), "GENERAL",
                      draw.ref())


# -- Poisson representation -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PoissonPoints:
    """Points (X, Y) of the Poisson measure restricted to [0, T] x {|y| <= R}."""

    positions: np.ndarray
    magnitudes: np.ndarray
    signs: np.ndarray
    horizon: float


def draw_poisson_points(seed: int, mean_count: float, horizon: float = 1.0,
                        path_id: int = 0) -> PoissonPoints:
    """Poisson window sampler: count ~ Poisson(mean_count), then uniform scatter.

    The window is [0, T] x [0, R] in |y| with R = mean_count / T, so the intensity is
    Lebesgue measure; magnitudes are returned sorted increasingly.
    """
    r_count, r_pos, r_mag, r_sign = stream_rngs(seed, path_id, POISSON_STREAM, 4)
    n = int(r_count.poisson(mean_count)) if mean_count > 0 else 0
    reach = mean_count / horizon
    positions = r_pos.uniform(0.0, horizon, n)
    magnitudes = np.sort(r_mag.uniform(0.0, reach, n))
    signs = 2.0 * r_sign.integers(0, 2, n) - 1.0
    return PoissonPoints(positions, magnitudes, signs, horizon)


def poisson_values(points: PoissonPoints, alpha: AlphaFunction, times):
    times = np.asarray(times, dtype=float)
    if points.magnitudes.size == 0:
        return np.zeros(times.shape)
    a = alpha(points.positions)
    jumps = series_terms(c_alpha_pow(a), points.signs, np.log(points.magnitudes), a)
    first = points.magnitudes < 1.0
    return _at_times(times, points.positions, first, 1, lambda sl: jumps[None, :])


def simulate_LI_poisson(seed: int, alpha: AlphaFunction, grid: TimeGrid, n_terms: float,
                        path_id: int = 0) -> PathSample:
    """L_I from its Poisson representation with on average ``n_terms`` points."""
    grid.check_within(alpha.horizon)
    pts = draw_poisson_points(seed, n_terms, alpha.horizon, path_id)
    ref = {"seed": seed, "n_terms": n_terms, "horizon": alpha.horizon, "path_id": path_id,
           "representation": "poisson"}
    return PathSample(grid, poisson_values(pts, alpha, grid.points), "LI", ref)


# -- many paths --------------------------------------------------------------------

def sample_paths(process: str, alpha: AlphaFunction, times, n_paths: int, n_terms: int,
                 seed: int, kernel: Kernel | None = None, first_path: int = 0,
                 chunk: int = 128, threads: int = 1) -> np.ndarray:
    """Values of ``n_paths`` independent paths at ``times``; shape (n_paths, len(times)).

    ``process`` is ``LI``, ``LF``, ``GENERAL`` or ``LI_poisson``. Path k uses
    ``path_id = first_path + k``, so results do not depend on ``chunk`` or ``threads``.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    horizon = alpha.horizon
    ids = np.arange(first_path, first_path + n_paths)

    def run(block):
        if process == "LI_poisson":
            return np.stack([poisson_values(draw_poisson_points(seed, n_terms, horizon, int(p)),
                                            alpha, times) for p in block])
        draw = draw_batch(seed, block, n_terms, horizon)
        if process == "LI":
            return li_values(draw, alpha, times)
        if process == "LF":
            return lf_values(draw, alpha, times)
        if process == "GENERAL":
            if kernel is None:
                raise ValueError("process GENERAL needs a kernel")
            return general_values(draw, alpha, kernel, times)
        raise ValueError(f"unknown process {process!r}")

    blocks = [ids[i:i + chunk] for i in range(0, n_paths, chunk)]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    if not parts:
        return np.zeros((0, times.size))
    return np.concatenate(parts, axis=0)


# -- diagnostics -------------------------------------------------------------------

def truncation_tail_bound(alpha: AlphaFunction, n_terms: int) -> float:
    """Deterministic sup-norm bound on the L_I / L_F series tail beyond ``n_terms``.

    Valid when d < 1 and on the event Gamma_i >= i/2 for all i > n_terms (and
    n_terms >= 2T): sum_{i>N} (i/2T)^(-1/d) <= (2T)^(1/d) N^(1-1/d) / (1/d - 1).
    """
    d, T = alpha.d, alpha.horizon
    if d >= 1:
        raise ValueError("the deterministic tail bound needs d < 1")
    grid = np.linspace(alpha.c, alpha.d, 257)
    sup_scale = float(np.max(c_alpha_pow(grid)))
    k = (2.0 * T) ** (1.0 / d) / (1.0 / d - 1.0)
    return k * n_terms ** (1.0 - 1.0 / d) * sup_scale


@dataclass
class ConvergenceReport:
    """sup-norm gaps |S_2N - S_N| of the partial sums D_N^(k) for both weight families.

    ``gaps`` has shape (n_draws, len(n_list), 2); family 0 weights terms by 1 and
    family 1 by log Gamma_i.
    """

    n_list: list
    gaps: np.ndarray
    median_gaps: np.ndarray
    monotone: tuple
    burn_in: int = 0

    def to_dict(self) -> dict:
        return {"n_list": list(self.n_list), "median_gaps": self.median_gaps.tolist(),
                "monotone": list(self.monotone), "burn_in": self.burn_in}


def partial_sum_convergence(draws, alpha: AlphaFunction, n_list, n_grid: int = 257,
                            burn_in: int = 0, zero_signs: bool = False) -> ConvergenceReport:
    """Uniform-convergence diagnostic for D_N(s) = sum_{i<=N} gamma_i U_i Gamma_i^(-1/alpha(s)) 1{V_i < s}.

    Each draw must hold at least ``2 * max(n_list)`` terms.
    """
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    s = np.linspace(0.0, alpha.horizon, n_grid)
    inv_a = 1.0 / alpha(s)
    gaps = np.zeros((len(draws), len(n_list), 2))
    for k, draw in enumerate(draws):
        if draw.n_terms < 2 * n_list[-1]:
            raise ValueError("draws are too short for the requested N values")
        signs = np.zeros(draw.n_terms) if zero_signs else draw.signs
        log_g = np.log(draw.arrivals)
        for j, n in enumerate(n_list):
            blk = slice(n, 2 * n)
            order = np.argsort(draw.locations[blk], kind="stable")
            locs = draw.locations[blk][order]
            lg = log_g[blk][order]
            sg = signs[blk][order]
            # strict indicator V_i < s
            counts = np.searchsorted(locs, s, side="left")
            base = sg[None, :] * np.exp(-inv_a[:, None] * lg[None, :])
            for fam, weight in enumerate((np.ones_like(lg), lg)):
                csum = np.concatenate([np.zeros((s.size, 1)), np.cumsum(base * weight, axis=1)],
                                      axis=1)
                vals = csum[np.arange(s.size), counts]
                gaps[k, j, fam] = np.max(np.abs(vals))
    med = np.median(gaps, axis=0)
    tail = med[burn_in:]
    monotone = tuple(bool(np.all(np.diff(tail[:, fam]) <= 0)) for fam in range(2))
    return ConvergenceReport(n_list, gaps, med, monotone, burn_in)
