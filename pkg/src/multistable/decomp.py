"""Drift/martingale splits of the independent-increments motion and the field drift.

* magnitude split: A' collects the terms with Gamma_i < 1, M' the rest.
* alternate split: A_1 collects the terms with alpha(V_i) < 1/i (ties go to M_1).
* field drift: L_F(t) = A(t) + L_I(t) with
  A(t) = int_0^t sum_i gamma_i g_i'(s) 1{V_i < s} ds,  g_i(t) = h(alpha(t)) (Gamma_i/T)^(-1/alpha(t)).

The two splits reuse the block summation order of :mod:`multistable.series`, so
``a_part + m_part`` reproduces the reference path bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .alpha import AlphaFunction
from .series import (PathSample, SeriesDraw, TimeGrid, _check_inputs, lf_values, li_jumps,
                     li_values, split_mask)
from .stable import c_alpha, c_alpha_pow, c_alpha_pow_dlog

SPLIT_RULES = ("magnitude", "alternate")

_GAUSS16 = np.polynomial.legendre.leggauss(16)
_GAUSS8 = np.polynomial.legendre.leggauss(8)
_CHUNK_ELEMENTS = 2_000_000


class QuadratureFailure(RuntimeError):
    pass


class OffGridError(ValueError):
    pass


@dataclass
class DecompositionResult:
    a_path: PathSample
    m_path: PathSample
    rule: str
    total: PathSample | None = None
    a_terms: np.ndarray | None = None
    error_estimate: float = 0.0

    @property
    def reconstruction_gap(self) -> float:
        """sup over the grid of |total - (a_part + m_part)|."""
        return float(np.max(np.abs(self.total.values - (self.a_path.values + self.m_path.values))))

    def to_csv_rows(self):
        t = self.a_path.grid.points
        tot = self.total.values if self.total is not None else self.a_path.values + self.m_path.values
        return [(float(ti), float(x), float(a), float(m))
                for ti, x, a, m in zip(t, tot, self.a_path.values, self.m_path.values)]


# -- splits of L_I --------------------------------------------------------------------

def _split(draw: SeriesDraw, alpha: AlphaFunction, grid: TimeGrid, rule: str):
    _check_inputs(draw, alpha, grid)
    first = split_mask(draw, rule, alpha)
    t = grid.points
    a_vals = li_values(draw, alpha, t, split=first, select=first)
    m_vals = li_values(draw, alpha, t, split=first, select=~first)
    total = li_values(draw, alpha, t, split=first)
    ref = draw.ref()
    return DecompositionResult(PathSample(grid, a_vals, "A", ref), PathSample(grid, m_vals, "M", ref),
                               rule, PathSample(grid, total, "LI", ref), np.flatnonzero(first))


def decompose_LI_magnitude(draw: SeriesDraw, alpha: AlphaFunction,
                           grid: TimeGrid) -> DecompositionResult:
    """A' = terms with Gamma_i < 1 (finitely many, Poisson(1) of them), M' = the rest.

    The total equals ``simulate_LI_fkl(draw, alpha, grid)`` exactly.
    """
    return _split(draw, alpha, grid, "magnitude")


def decompose_LI_alternate(draw: SeriesDraw, alpha: AlphaFunction,
                           grid: TimeGrid) -> DecompositionResult:
    """A_1 = terms with alpha(V_i) < 1/i (at most ceil(1/c) of them), M_1 = the rest.

    The total equals ``simulate_LI_fkl(draw, alpha, grid, split="alternate")`` exactly.
    """
    return _split(draw, alpha, grid, "alternate")


def decompose_LI(draw, alpha, grid, rule="magnitude") -> DecompositionResult:
    if rule not in SPLIT_RULES:
        raise ValueError(f"unknown split rule {rule!r}; expected one of {SPLIT_RULES}")
    return _split(draw, alpha, grid, rule)


def martingale_jump_bound(alpha: AlphaFunction, n: int = 2001) -> float:
    """sup over b in [c, d] of h(b) T^(1/b): bounds every jump of M' (Gamma_i >= 1)."""
    b = np.linspace(alpha.c, alpha.d, n)
    return float(np.max(c_alpha_pow(b) * alpha.horizon ** (1.0 / b)))


# -- field drift -----------------------------------------------------------------------

def _log_y(i_gamma, horizon):
    g = np.asarray(i_gamma, dtype=float)
    if np.any(g <= 0):
        raise ValueError("arrival values must be positive")
    return np.log(g / horizon)


def g_eval(i_gamma, alpha: AlphaFunction, t):
    """g(t) = h(alpha(t)) (Gamma/T)^(-1/alpha(t))."""
    ly = _log_y(i_gamma, alpha.horizon)
    a = alpha(t)
    return c_alpha_pow(a) * np.exp(-ly / a)


def g_deriv(i_gamma, alpha: AlphaFunction, t):
    """dg/dt = g(t) alpha'(t) [dlog h/du (alpha(t)) + log(Gamma/T) / alpha(t)^2]."""
    ly = _log_y(i_gamma, alpha.horizon)
    a = alpha(t)
    g = c_alpha_pow(a) * np.exp(-ly / a)
    return g * alpha.deriv(t) * (c_alpha_pow_dlog(a) + ly / (a * a))


def _drift_density(s, log_y, weights, alpha):
    """sum_j weights[j] g_j'(s) for each s; ``weights`` may be (n_s, N) or (N,)."""
    a = alpha(s)
    da = alpha.deriv(s)
    e = np.exp(-np.outer(1.0 / a, log_y))
    w = np.broadcast_to(weights, e.shape)
    s0 = np.einsum("ij,ij->i", e, w)
    s1 = np.einsum("ij,ij->i", e, w * log_y)
    return da * c_alpha_pow(a) * (c_alpha_pow_dlog(a) * s0 + s1 / (a * a))


def _gauss_cells(lo, hi, rule):
    x, w = rule
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    return nodes, half[:, None] * w[None, :]


def _taylor_order(spread: float) -> int | None:
    """Smallest K with spread^(K+1)/(K+1)! below 1e-17, or None when the expansion is unsuitable."""
    if spread > 1.0:
        return None
    term, k = spread, 0
    while term > 1e-17:
        k += 1
        term *= spread / (k + 1)
    return k


def _full_cell_integrals(alpha, t, log_y, signs, locs, rules):
    """For each grid cell (t_k, t_k+1] and each rule: int sum_{V_i < t_k} gamma_i g_i'(s) ds.

    Within a cell y^(-b(s)) = y^(-b_0) exp(-(b(s) - b_0) log y) with b = 1/alpha and b_0
    taken at the midpoint; the exponential is expanded in powers of log y, so each cell
    needs a single exponential per term plus moments of log y.
    """
    n_cells = t.size - 1
    out = np.zeros((len(rules), n_cells))
    if n_cells == 0 or log_y.size == 0:
        return out
    l_max = float(np.max(np.abs(log_y)))
    step = max(1, _CHUNK_ELEMENTS // max(1, log_y.size))
    for lo in range(0, n_cells, step):
        sl = slice(lo, min(n_cells, lo + step))
        left, right = t[:-1][sl], t[1:][sl]
        mid = 0.5 * (left + right)
        b0 = 1.0 / alpha(mid)
        weights = (locs[None, :] < left[:, None]) * signs[None, :]
        cells = [_gauss_cells(left, right, r) for r in rules]
        b_nodes = [1.0 / alpha(nodes) for nodes, _ in cells]
        spread = max(float(np.max(np.abs(bn - b0[:, None]))) for bn in b_nodes) * l_max
        order = _taylor_order(spread)
        if order is None:
            for r, (nodes, wts) in enumerate(cells):
                n_nodes = nodes.shape[1]
                w = np.repeat(weights, n_nodes, axis=0)
                dens = _drift_density(nodes.ravel(), log_y, w, alpha).reshape(nodes.shape)
                out[r, sl] = np.sum(dens * wts, axis=1)
            continue
        powers = log_y[:, None] ** np.arange(order + 2)[None, :]
        moments = (weights * np.exp(-np.outer(b0, log_y))) @ powers
        fact = np.cumprod(np.concatenate([[1.0], np.arange(1, order + 1)]))
        for r, (nodes, wts) in enumerate(cells):
            delta = -(b_nodes[r] - b0[:, None])
            coef = delta[..., None] ** np.arange(order + 1) / fact
            s0 = np.einsum("cnk,ck->cn", coef, moments[:, :order + 1])
            s1 = np.einsum("cnk,ck->cn", coef, moments[:, 1:order + 2])
            a = alpha(nodes)
            dens = (alpha.deriv(nodes) * c_alpha_pow(a)
                    * (c_alpha_pow_dlog(a) * s0 + s1 / (a * a)))
            out[r, sl] = np.sum(dens * wts, axis=1)
    return out


def _term_integrals(alpha, lo, hi, log_y, rule):
    """int_lo^hi g_i'(s) ds per term (no sign), one Gauss rule."""
    nodes, wts = _gauss_cells(lo, hi, rule)
    a = alpha(nodes)
    ly = log_y[:, None]
    g = c_alpha_pow(a) * np.exp(-ly / a)
    dens = g * alpha.deriv(nodes) * (c_alpha_pow_dlog(a) + ly / (a * a))
    return np.sum(dens * wts, axis=1)


def _partial_cell_integrals(alpha, t, log_y, signs, locs, tol):
    """For each term: int_{V_i}^{t_next(i)} gamma_i g_i'(s) ds, t_next = first grid point > V_i."""
    k = np.searchsorted(t, locs, side="right")  # V_i < t[k]; k == len(t) means no later grid point
    inside = np.flatnonzero(k < t.size)
    res = np.zeros(locs.size)
    if inside.size == 0:
        return k, res
    lo, hi, ly = locs[inside], t[k[inside]], log_y[inside]
    r16 = _term_integrals(alpha, lo, hi, ly, _GAUSS16)
    r8 = _term_integrals(alpha, lo, hi, ly, _GAUSS8)
    bad = np.abs(r16 - r8) > tol
    if np.any(bad):
        mid = 0.5 * (lo[bad] + hi[bad])
        halves = (_term_integrals(alpha, lo[bad], mid, ly[bad], _GAUSS16)
                  + _term_integrals(alpha, mid, hi[bad], ly[bad], _GAUSS16))
        if np.any(np.abs(halves - r16[bad]) > np.maximum(tol, 1e-6 * np.abs(r16[bad]))):
            raise QuadratureFailure("field drift quadrature failed on a partial cell")
        r16[bad] = halves
    res[inside] = signs[inside] * r16
    return k, res


def _internal_grid(alpha: AlphaFunction, t: np.ndarray):
    """Grid used for integration: contains 0, ``t`` and any table knots; cells no wider
    than min(T/256, 0.02 / sup|alpha'|). Returns the points and the positions of ``t``."""
    T = alpha.horizon
    width = T / 256.0
    slope = alpha.sup_abs_deriv()
    if slope > 0:
        width = min(width, 0.02 / slope)
    n = int(np.ceil(t[-1] / width)) + 1
    pts = np.union1d(np.union1d(np.linspace(0.0, t[-1], max(n, 2)), t), [0.0])
    if alpha.kind == "user-table":
        knots = alpha.params["knots"]
        pts = np.union1d(pts, knots[(knots > 0) & (knots < t[-1])])
    return pts, np.searchsorted(pts, t)


def compute_A_field(draw: SeriesDraw, alpha: AlphaFunction, grid: TimeGrid,
                    tol: float = 1e-9) -> PathSample:
    """Field drift A on the grid by cellwise Gauss-Legendre quadrature.

    Cells are bounded by the points of an integration grid (the requested grid,
    refined where it is coarse relative to alpha') and by the V_i. Each full cell
    carries the terms already active at its left end; every term also contributes
    its partial cell from V_i to the next point. A 16-point rule is compared with an
    8-point rule per cell and cells whose difference exceeds ``tol`` are bisected once.
    """
    _check_inputs(draw, alpha, grid)
    if draw.arrivals.ndim != 1:
        raise ValueError("compute_A_field takes a single draw")
    if alpha.is_constant:
        return PathSample(grid, np.zeros(len(grid)), "A_field", draw.ref())
    t, pick = _internal_grid(alpha, grid.points)
    log_y = draw.log_magnitudes
    signs, locs = draw.signs, draw.locations

    full16, full8 = _full_cell_integrals(alpha, t, log_y, signs, locs, (_GAUSS16, _GAUSS8))
    bad = np.flatnonzero(np.abs(full16 - full8) > tol)
    for j in bad:
        mid = 0.5 * (t[j] + t[j + 1])
        halves = np.array([t[j], mid, t[j + 1]])
        active = locs < t[j]
        sub = _full_cell_integrals(alpha, halves, log_y[active], signs[active],
                                   np.full(active.sum(), -np.inf), (_GAUSS16,))[0]
        if abs(sub.sum() - full16[j]) > max(tol, 1e-6 * abs(full16[j])):
            raise QuadratureFailure(f"field drift quadrature failed on cell ({t[j]}, {t[j + 1]}]")
        full16[j] = sub.sum()

    k, partial = _partial_cell_integrals(alpha, t, log_y, signs, locs, tol)
    # increment over cell (t_{j-1}, t_j]: full cell part + partial cells of the V_i inside it
    incr = np.zeros(t.size)
    incr[1:] = full16
    inside = k < t.size
    np.add.at(incr, k[inside], partial[inside])
    values = np.cumsum(incr)[pick]
    return PathSample(grid, values, "A_field", draw.ref())


def field_drift_closed(draw: SeriesDraw, alpha: AlphaFunction, times) -> np.ndarray:
    """Telescoped form A(t) = sum_i gamma_i (g_i(t) - g_i(V_i)) 1{V_i <= t} (an oracle)."""
    times = np.asarray(times, dtype=float)
    return lf_values(draw, alpha, times) - li_values(draw, alpha, times)


def field_decomposition(draw: SeriesDraw, alpha: AlphaFunction, grid: TimeGrid,
                        tol: float = 1e-9) -> DecompositionResult:
    """L_F = A + L_I on the grid; the result carries L_F as ``total``."""
    a = compute_A_field(draw, alpha, grid, tol)
    ref = draw.ref()
    li = PathSample(grid, li_values(draw, alpha, grid.points), "LI", ref)
    lf = PathSample(grid, lf_values(draw, alpha, grid.points), "LF", ref)
    return DecompositionResult(a, li, "field_drift", lf)


# -- path functionals --------------------------------------------------------------------

def total_variation(path) -> float:
    v = path.values if isinstance(path, PathSample) else np.asarray(path, dtype=float)
    return float(np.sum(np.abs(np.diff(v, axis=-1)), axis=-1))


@dataclass(frozen=True)
class SimplePredictable:
    """xi = xi_0 1{0} + sum_k xi_k 1_(s_k, t_k] with ordered disjoint blocks and |xi_k| <= 1."""

    blocks: tuple
    xi0: float = 0.0

    def __post_init__(self):
        blocks = tuple((float(s), float(t), float(x)) for s, t, x in self.blocks)
        prev = 0.0
        for s, t, x in blocks:
            if not (prev <= s < t):
                raise ValueError("blocks must satisfy 0 <= s_1 < t_1 <= s_2 < ...")
            if abs(x) > 1.0:
                raise ValueError("block values must satisfy |xi_k| <= 1")
            prev = t
        if abs(self.xi0) > 1.0:
            raise ValueError("|xi_0| must be <= 1")
        object.__setattr__(self, "blocks", blocks)


def _grid_index(points, x):
    k = int(np.searchsorted(points, x))
    for j in (k - 1, k):
        if 0 <= j < points.size and abs(points[j] - x) <= 1e-12 * max(1.0, abs(x)):
            return j
    raise OffGridError(f"block endpoint {x} is not a grid point")


def simple_predictable_integral(path: PathSample, xi: SimplePredictable) -> float:
    """xi_0 Y_0 + sum_k xi_k (Y_{t_k} - Y_{s_k}); endpoints must sit on the grid."""
    pts, v = path.grid.points, path.values
    total = xi.xi0 * v[..., 0] if pts[0] == 0.0 else 0.0
    for s, t, x in xi.blocks:
        total = total + x * (v[..., _grid_index(pts, t)] - v[..., _grid_index(pts, s)])
    return total


def random_simple_predictable(rng: np.random.Generator, grid: TimeGrid,
                              max_blocks: int = 8) -> SimplePredictable:
    """Random blocks on grid points ending at the last grid time, values +-1."""
    pts = grid.points
    n = int(rng.integers(1, max_blocks + 1))
    n = min(n, (pts.size - 1) // 2 or 1)
    cut = np.sort(rng.choice(np.arange(pts.size - 1), size=2 * n - 1, replace=False))
    ends = np.concatenate([pts[cut], [pts[-1]]])
    blocks = [(ends[2 * k], ends[2 * k + 1], float(rng.choice([-1.0, 1.0]))) for k in range(n)]
    return SimplePredictable(tuple(blocks))


def _integral_matrix(grid: TimeGrid, xis) -> np.ndarray:
    """W with I(xi_j) = sum_k W[j, k] Y(t_k) for paths on ``grid``."""
    w = np.zeros((len(xis), grid.points.size))
    for j, xi in enumerate(xis):
        if grid.points[0] == 0.0:
            w[j, 0] += xi.xi0
        for s, t, x in xi.blocks:
            w[j, _grid_index(grid.points, t)] += x
            w[j, _grid_index(grid.points, s)] -= x
    return w


@dataclass
class IntegratorProbe:
    p: float
    ks: list
    empirical_tail: list
    fitted_c: list
    n_integrands: int
    n_draws: int
    details: dict = field(default_factory=dict)

    def to_dicts(self) -> list:
        return [{"K": k, "empirical_tail": e, "fitted_C": c, "p": self.p}
                for k, e, c in zip(self.ks, self.empirical_tail, self.fitted_c)]


def integrator_probe(values: np.ndarray, grid: TimeGrid, xis, p: float = 1.7,
                     ks=(2.0, 4.0, 8.0, 16.0)) -> IntegratorProbe:
    """Tail fit of P(|I_Y(xi)| > K) K^p over every (path, integrand) pair.

    ``values`` holds path values on ``grid`` with shape (n_draws, len(grid)).
    """
    w = _integral_matrix(grid, xis)
    ints = np.abs(np.asarray(values, dtype=float) @ w.T).ravel()
    tails = [float(np.mean(ints > k)) for k in ks]
    fitted = [tl * k ** p for tl, k in zip(tails, ks)]
    return IntegratorProbe(p, [float(k) for k in ks], tails, fitted, len(xis), values.shape[0])


# -- Levy measure -------------------------------------------------------------------------

def levy_measure_LI(alpha: AlphaFunction, x, z):
    """Unnormalised density |z|^(-alpha(x)-1)."""
    z = np.asarray(z, dtype=float)
    if np.any(z == 0):
        raise ValueError("the Levy density is undefined at z = 0")
    return np.abs(z) ** (-alpha(x) - 1.0)


def levy_measure_LI_normalized(alpha: AlphaFunction, x, z):
    """Jump intensity of the simulated motion: (alpha C_alpha / 2) |z|^(-alpha-1).

    With this factor the CF exponent is exactly |theta|^alpha(x).
    """
    a = alpha(x)
    return 0.5 * a * c_alpha(a) * levy_measure_LI(alpha, x, z)


def expected_jump_count(alpha: AlphaFunction, level: float = 1.0, t: float | None = None) -> float:
    """Expected number of jumps with |size| > level on [0, t]: int_0^t C_alpha(x) level^(-alpha(x)) dx."""
    t = alpha.horizon if t is None else t
    val, _ = integrate.quad(lambda x: c_alpha(alpha(x)) * level ** (-alpha(x)), 0.0, t,
                            epsabs=1e-13, epsrel=1e-12)
    return val


def big_jump_counts(draw: SeriesDraw, alpha: AlphaFunction, level: float = 1.0) -> np.ndarray:
    """Number of L_I jumps exceeding ``level`` in absolute value, per draw."""
    return np.sum(np.abs(li_jumps(draw, alpha)) > level, axis=-1)
