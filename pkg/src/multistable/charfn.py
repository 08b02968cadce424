"""Characteristic functions of the two multistable Levy motions.

Analytic joint CFs:

* independent increments  E exp(i sum_j theta_j L_I(t_j)) = exp(-int |sum_j theta_j 1{s <= t_j}|^alpha(s) ds)
* field based             E exp(i sum_j theta_j L_F(t_j)) = exp(-int_0^T int_0^inf (1 - cos phi_x(y)) dy dx)

with phi_x(y) = sum_{j: t_j >= x} theta_j C_j^(1/alpha_j) y^(-1/alpha_j) and alpha_j = alpha(t_j).
In both cases the x-integrand only changes at the query times, so the outer
integral is a finite sum over the cells of the partition induced by the sorted times.

Also: the empirical CF, sup-distances between empirical and analytic CFs, and the
increment factorisation check.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .alpha import AlphaFunction
from .series import sample_paths
from .stable import c_alpha, c_alpha_pow


class QuadratureError(RuntimeError):
    def __init__(self, message, estimate):
        super().__init__(f"{message} (error estimate {estimate:.3g})")
        self.estimate = estimate


class InsufficientSamplesError(ValueError):
    pass


@dataclass(frozen=True)
class CFQuery:
    times: np.ndarray
    thetas: np.ndarray

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        thetas = np.atleast_1d(np.asarray(self.thetas, dtype=float))
        if times.ndim != 1 or times.shape != thetas.shape or times.size == 0:
            raise ValueError("a CF query needs m >= 1 matching times and thetas")
        if np.any(times < 0):
            raise ValueError("query times must be >= 0")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "thetas", thetas)

    @property
    def m(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class CFResult:
    value: complex
    quadrature_error_estimate: float = 0.0


@dataclass
class CheckReport:
    """Outcome of one statistical or numerical check."""

    test: str
    statistic: float
    threshold: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"test": self.test, "statistic": float(self.statistic),
               "threshold": float(self.threshold), "pass": bool(self.passed)}
        if self.details:
            out["details"] = self.details
        return out


def _cells(times):
    """Sorted distinct times and the cell lengths of (t_(k-1), t_(k)], t_(0) = 0."""
    ts = np.unique(times)
    lengths = np.diff(np.concatenate([[0.0], ts]))
    return ts, lengths


def _check_query(alpha: AlphaFunction, q: CFQuery):
    if np.any(q.times > alpha.horizon):
        raise ValueError(f"query times must lie in [0, {alpha.horizon}]")


# -- independent increments ------------------------------------------------------

def cf_LI_joint(alpha: AlphaFunction, q: CFQuery, max_error: float = 1e-8) -> CFResult:
    _check_query(alpha, q)
    ts, lengths = _cells(q.times)
    lo = np.concatenate([[0.0], ts[:-1]])
    exponent, err = 0.0, 0.0
    for k, t_k in enumerate(ts):
        s_k = abs(float(np.sum(q.thetas[q.times >= t_k])))
        if lengths[k] == 0.0 or s_k == 0.0:
            continue
        # cells too short to matter (e.g. subnormal widths) only enter the error estimate
        worst = alpha.d if s_k > 1.0 else alpha.c
        log_bound = np.log(lengths[k]) + worst * np.log(s_k)
        if log_bound <= np.log(1e-16):
            err += float(np.exp(log_bound))
            continue
        val, e = integrate.quad(lambda s: s_k ** alpha(s), lo[k], t_k,
                                epsabs=1e-13, epsrel=1e-12, limit=200)
        exponent += val
        err += e
    value = np.exp(-exponent)
    estimate = value * err
    if estimate > max_error:
        raise QuadratureError("independent-increments CF quadrature did not converge", estimate)
    return CFResult(complex(value, 0.0), estimate)


def cf_LI_marginal(alpha: AlphaFunction, t: float, theta: float, **kw) -> CFResult:
    return cf_LI_joint(alpha, CFQuery([t], [theta]), **kw)


# -- field based -----------------------------------------------------------------

_GL_NODES = {n: np.polynomial.legendre.leggauss(n) for n in (16, 24)}
_NODE_RATIO = 1.02


def lf_inner_integral(amplitudes, alphas, tol: float = 1e-11, max_chunks: int = 2_000_000):
    """int_0^inf (1 - cos(sum_j a_j y^(-1/alpha_j))) dy and an error estimate.

    For a single exponent the exact value is |a|^alpha / C_alpha.
    """
    amps = np.asarray(amplitudes, dtype=float)
    alps = np.asarray(alphas, dtype=float)
    # merge equal exponents, drop vanishing amplitudes
    uniq = np.unique(alps)
    merged = np.array([amps[alps == u].sum() for u in uniq])
    keep = merged != 0.0
    uniq, merged = uniq[keep], merged[keep]
    if uniq.size == 0:
        return 0.0, 0.0
    if uniq.size == 1:
        return float(abs(merged[0]) ** uniq[0] / c_alpha(uniq[0])), 0.0

    bound = _small_phase_bound(merged, uniq)
    if bound <= tol:
        return 0.0, bound
    head, head_err = _head_integral(merged, uniq, tol, max_chunks)
    tail, tail_err = _tail_integral(merged, uniq, tol)
    return head + tail, head_err + tail_err


def _small_phase_bound(amps, alps):
    """Upper bound of the inner integral from 1 - cos x <= min(2, x^2 / 2).

    With A = sum |a_j|, |phi| <= A y^(-1/alpha_min) on (0, 1) and A y^(-1/alpha_max) beyond.
    """
    a_sum = float(np.sum(np.abs(amps)))
    lo, hi = float(alps[0]), float(alps[-1])
    return 4.0 * (0.5 * a_sum) ** lo / (2.0 - lo) + 0.5 * a_sum ** 2 * hi / (2.0 - hi)


def _tail_integral(amps, alps, tol):
    """int_1^inf (1 - cos phi(y)) dy via v = 1/y and an algebraic weight at v = 0."""
    betas = 1.0 / alps
    b_min = betas.min()

    def f(v):
        v = np.asarray(v, dtype=float)
        r = 0.5 * np.sum(amps[:, None] * v[None, :] ** (betas - b_min)[:, None], axis=0)
        half_phase = r * v ** b_min
        return 2.0 * (np.sinc(half_phase / np.pi) * r) ** 2

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        val, err = integrate.quad(lambda v: float(f(np.atleast_1d(v))[0]), 0.0, 1.0,
                                  weight="alg", wvar=(2.0 * b_min - 2.0, 0.0),
                                  epsabs=0.01 * tol, epsrel=1e-13, limit=400)
    if caught:
        # quadpack flags its own estimate as unreliable; never report less than tol
        err = max(err, tol)
    return val, err


class _Phase:
    """Phi(z) = a z + sum_j a_j z^(g_j) (g_j < 1) and the weight w(z) = alpha z^(-alpha-1).

    ``u = w / Phi'`` and ``v = u' / Phi'`` are the amplitudes left by two integrations
    by parts of int w cos(Phi).
    """

    def __init__(self, a_star, alpha_star, others, gam):
        self.a, self.alpha = a_star, alpha_star
        self.c, self.g = others, gam

    def _powsum(self, coef, expo, z):
        return np.sum(coef[:, None] * z[None, :] ** expo[:, None], axis=0)

    def phase(self, z):
        return self.a * z + self._powsum(self.c, self.g, z)

    def d1(self, z):
        return self.a + self._powsum(self.c * self.g, self.g - 1.0, z)

    def d2(self, z):
        return self._powsum(self.c * self.g * (self.g - 1.0), self.g - 2.0, z)

    def slope_bound(self, lo, hi):
        """Upper bound of |Phi'| on each cell [lo, hi].

        Every power term is monotone, so |Phi'| stays below its larger endpoint value
        plus the variation of each term across the cell.
        """
        ends = np.maximum(np.abs(self.d1(lo)), np.abs(self.d1(hi)))
        coef = np.abs(self.c * self.g)
        drift = (self._powsum(coef, self.g - 1.0, lo) - self._powsum(coef, self.g - 1.0, hi))
        return ends + drift

    def weight(self, z):
        return self.alpha * z ** (-self.alpha - 1.0)

    def ibp_terms(self, z):
        w, p1, p2 = self.weight(z), self.d1(z), self.d2(z)
        u = w / p1
        du = (-(self.alpha + 1.0) * w / z * p1 - w * p2) / (p1 * p1)
        return u, du / p1

    def boundary(self, z):
        """u sin(Phi) + v cos(Phi): antiderivative of w cos(Phi) up to int v' cos(Phi)."""
        u, v = self.ibp_terms(z)
        ph = self.phase(z)
        return u * np.sin(ph) + v * np.cos(ph)


def _gauss_sum(ph: _Phase, edges):
    lo, hi = edges[:-1], edges[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    sums = []
    for n in (16, 24):
        x, w = _GL_NODES[n]
        z = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        vals = (np.cos(ph.phase(z)) * ph.weight(z)).reshape(lo.size, n)
        sums.append(float(np.sum(half * (vals @ w))))
    return sums[1], abs(sums[1] - sums[0])


def _head_integral(amps, alps, tol, max_chunks):
    """int_0^1 (1 - cos phi(y)) dy = 1 - int_1^inf cos(Phi(z)) w(z) dz.

    z = y^(-1/alpha_min) makes the dominant phase linear. On a geometric grid of
    [1, Z], stretches where the twice-integrated-by-parts remainder is negligible
    are skipped exactly through the boundary terms; the rest (around stationary
    points of Phi, and near z = 1) is summed by Gauss rules on sub-half-period chunks.
    Beyond Z the remainder is either closed by parts or, when the weight tail is
    already below tolerance, dropped.
    """
    order = np.argsort(alps)
    amps, alps = amps[order], alps[order]
    a_star, alpha_star = amps[0], alps[0]
    if a_star < 0:
        amps = -amps
        a_star = -a_star
    ph = _Phase(a_star, alpha_star, amps[1:], alpha_star / alps[1:])

    # past z_dom every lower power moves the slope by at most a_star / (2 n)
    n_other = ph.c.size
    log_dom = max(0.0, float(np.max((np.log(2.0 * n_other * np.abs(ph.c * ph.g))
                                     - np.log(a_star)) / (1.0 - ph.g))))
    log_cap = np.log(4.0 / tol) / alpha_star  # int_cap^inf w <= tol / 4
    eps = 0.25 * tol
    if log_dom >= log_cap:
        z_end, close_by_parts = float(np.exp(log_cap)), False
    else:
        z_end, close_by_parts = max(float(np.exp(log_dom)), 2.0), True
        while abs(ph.ibp_terms(np.array([z_end]))[1][0]) > eps:
            z_end *= 2.0
            if np.log(z_end) >= log_cap:
                z_end, close_by_parts = float(np.exp(log_cap)), False
                break

    n_nodes = max(2, int(np.ceil(np.log(z_end) / np.log(_NODE_RATIO))) + 1)
    nodes = np.geomspace(1.0, z_end, n_nodes)
    d1 = ph.d1(nodes)
    # a node sitting on a stationary point gives v = inf/nan, which just blocks skipping
    with np.errstate(divide="ignore", invalid="ignore"):
        _, v = ph.ibp_terms(nodes)
    small = np.abs(v) <= 1e-2 * eps
    same_sign = np.sign(d1[:-1]) == np.sign(d1[1:])
    skip = small[:-1] & small[1:] & same_sign

    body, err = 0.0, 0.0
    budget = max_chunks
    k = 0
    while k < skip.size:
        j = k
        while j < skip.size and skip[j] == skip[k]:
            j += 1
        a, b = nodes[k], nodes[j]
        if skip[k]:
            bd = ph.boundary(np.array([a, b]))
            body += bd[1] - bd[0]
            err += float(np.sum(np.abs(np.diff(v[k:j + 1]))))
        else:
            cells = nodes[k:j + 1]
            widths = np.pi / ph.slope_bound(cells[:-1], cells[1:])
            counts = np.ceil(np.diff(cells) / widths).astype(np.int64)
            if counts.sum() > budget:
                # give up on this stretch; its absolute contribution is bounded by int w
                err += a ** -alpha_star - b ** -alpha_star
            else:
                budget -= int(counts.sum())
                edges = np.concatenate(
                    [np.linspace(lo, hi, n + 1)[:-1] for lo, hi, n in zip(cells[:-1], cells[1:], counts)]
                    + [cells[-1:]])
                val, e = _gauss_sum(ph, edges)
                body += val
                err += e
        k = j

    zz = np.array([z_end])
    if close_by_parts:
        body -= ph.boundary(zz)[0]
        err += abs(ph.ibp_terms(zz)[1][0])
    else:
        err += z_end ** -alpha_star
    return 1.0 - body, err


def cf_LF_joint(alpha: AlphaFunction, q: CFQuery, tol: float = 1e-11,
                max_error: float = 1e-6) -> CFResult:
    _check_query(alpha, q)
    ts, lengths = _cells(q.times)
    a_j = alpha(q.times)
    amp = q.thetas * c_alpha_pow(a_j)
    exponent, err = 0.0, 0.0
    for k, t_k in enumerate(ts):
        if lengths[k] == 0.0:
            continue
        active = q.times >= t_k
        val, e = lf_inner_integral(amp[active], a_j[active], tol)
        exponent += lengths[k] * val
        err += lengths[k] * e
    value = np.exp(-exponent)
    estimate = value * err
    if estimate > max_error:
        raise QuadratureError("field-based CF quadrature did not converge", estimate)
    return CFResult(complex(value, 0.0), estimate)


def cf_joint(process: str, alpha: AlphaFunction, q: CFQuery, **kw) -> CFResult:
    if process in ("LI", "independent"):
        return cf_LI_joint(alpha, q, **kw)
    if process in ("LF", "field_based"):
        return cf_LF_joint(alpha, q, **kw)
    raise ValueError(f"no analytic CF for process {process!r}")


def cf_increment_LI(alpha: AlphaFunction, s: float, t: float, theta: float) -> float:
    """E exp(i theta (L_I(t) - L_I(s))) = exp(-int_s^t |theta|^alpha(u) du)."""
    q = CFQuery([s, t], [-theta, theta])
    return cf_LI_joint(alpha, q).value.real


# -- empirical CFs -----------------------------------------------------------------

def _as_joint(samples):
    y = np.asarray(samples, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[0] == 0:
        raise InsufficientSamplesError("empirical CF needs at least one sample")
    return y


def _as_theta_grid(theta_grid, m):
    th = np.asarray(theta_grid, dtype=float)
    if th.ndim <= 1 and m == 1:
        th = th.reshape(-1, 1)
    if th.ndim == 1:
        th = th[None, :]
    if th.shape[-1] != m:
        raise ValueError("theta vectors must match the sample dimension")
    return th


def ecf_grid(samples, theta_grid) -> np.ndarray:
    """Empirical CF (1/M) sum_k exp(i <theta, y_k>) for every theta vector in the grid."""
    y = _as_joint(samples)
    th = _as_theta_grid(theta_grid, y.shape[1])
    out = np.empty(th.shape[0], dtype=complex)
    step = max(1, 4_000_000 // y.shape[0])
    for lo in range(0, th.shape[0], step):
        phase = y @ th[lo:lo + step].T
        out[lo:lo + step] = np.exp(1j * phase).mean(axis=0)
    return out


def ecf(samples, q: CFQuery | np.ndarray) -> CFResult:
    """Empirical CF at one query; the error estimate is 3 / sqrt(M)."""
    thetas = q.thetas if isinstance(q, CFQuery) else np.atleast_1d(q)
    y = _as_joint(samples)
    val = ecf_grid(y, thetas[None, :])[0]
    return CFResult(complex(val), 3.0 / np.sqrt(y.shape[0]))


def cf_distance(analytic: Callable, samples, theta_grid) -> float:
    """sup over the grid of |ecf - analytic|; ``analytic`` maps (K, m) thetas to (K,) values."""
    y = _as_joint(samples)
    th = _as_theta_grid(theta_grid, y.shape[1])
    if th.shape[0] == 0:
        raise ValueError("theta grid is empty")
    exact = np.asarray(analytic(th))
    return float(np.max(np.abs(ecf_grid(y, th) - exact.reshape(-1))))


def analytic_cf_on_grid(process: str, alpha: AlphaFunction, times, theta_grid) -> np.ndarray:
    """Analytic joint CF values for each theta vector at fixed ``times``."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    th = _as_theta_grid(theta_grid, times.size)
    return np.array([cf_joint(process, alpha, CFQuery(times, v)).value.real for v in th])


# -- increment factorisation ---------------------------------------------------------

DEFAULT_INDEPENDENCE_THETAS = (-1.5, -0.75, -0.25, 0.25, 0.75, 1.5)


def _check_disjoint(increments):
    incs = [(float(a), float(b)) for a, b in increments]
    if len(incs) < 2:
        raise ValueError("need at least two increments")
    for a, b in incs:
        if not b > a:
            raise ValueError(f"increment ({a}, {b}] is empty")
    ordered = sorted(incs)
    for (a0, b0), (a1, b1) in zip(ordered, ordered[1:]):
        if a1 < b0:
            raise ValueError(f"increments ({a0}, {b0}] and ({a1}, {b1}] overlap")
    return incs


def increment_independence_check(alpha: AlphaFunction, process_kind: str, increments,
                                 n_samples: int, n_terms: int = 2000, seed: int = 0,
                                 thetas=DEFAULT_INDEPENDENCE_THETAS, threads: int = 1,
                                 values: np.ndarray | None = None) -> CheckReport:
    """Compare the joint ECF of disjoint increments with the product of marginal ECFs.

    ``values`` may supply pre-simulated path values at the sorted increment endpoints.
    Passes when the sup gap over the theta product grid is within 3 / sqrt(M).
    """
    incs = _check_disjoint(increments)
    if n_samples < 2:
        raise InsufficientSamplesError("insufficient samples for an independence check")
    ends = np.unique(np.array(incs).ravel())
    if values is None:
        values = sample_paths(process_kind, alpha, ends, n_samples, n_terms, seed,
                              threads=threads)
    idx = {t: k for k, t in enumerate(ends)}
    d = np.stack([values[:, idx[b]] - values[:, idx[a]] for a, b in incs], axis=1)
    th1 = np.asarray(thetas, dtype=float)
    grid = np.stack(np.meshgrid(*([th1] * d.shape[1]), indexing="ij"), axis=-1)
    grid = grid.reshape(-1, d.shape[1])
    joint = ecf_grid(d, grid)
    marg = [ecf_grid(d[:, k], th1) for k in range(d.shape[1])]
    prod = np.ones(grid.shape[0], dtype=complex)
    for k in range(d.shape[1]):
        pos = np.searchsorted(th1, grid[:, k]) if np.all(np.diff(th1) > 0) else None
        prod *= marg[k][pos] if pos is not None else np.array(
            [marg[k][np.flatnonzero(th1 == v)[0]] for v in grid[:, k]])
    gap = float(np.max(np.abs(joint - prod)))
    threshold = 3.0 / np.sqrt(n_samples)
    return CheckReport(f"increment_independence_{process_kind}", gap, threshold,
                       gap <= threshold,
                       {"increments": incs, "n_samples": n_samples, "n_terms": n_terms})
