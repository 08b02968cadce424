"""Symmetric stable building blocks.

The normalisation constant

    C_u = ( int_0^inf x^(-u) sin(x) dx )^(-1),     0 < u < 2,

makes ``C_u^(1/u) * sum_i gamma_i Gamma_i^(-1/u)`` a standard symmetric u-stable
variable with characteristic function ``exp(-|theta|^u)``.

Two independent routes are provided. :func:`c_alpha_quad` integrates the defining
oscillatory integral half-period by half-period and accelerates the alternating
tail. :func:`c_alpha` uses the closed form obtained by integration by parts,

    int_0^inf x^(-u) sin x dx = Gamma(1-u) cos(pi u / 2) = (pi/2) Gamma(2-u) sinc((1-u)/2),

where the last expression has no removable singularity at ``u = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special


class StableDomainError(ValueError):
    pass


def _check_u(u):
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0.0)) or np.any(~(u < 2.0)):
        raise StableDomainError("stability index must lie in the open interval (0, 2)")
    return u


def _sine_integral_closed(u):
    # (pi/2) Gamma(2-u) sinc((1-u)/2) == Gamma(1-u) cos(pi u/2), regular at u = 1
    return 0.5 * np.pi * special.gamma(2.0 - u) * np.sinc(0.5 * (1.0 - u))


def c_alpha(u, method: str = "closed"):
    """Normalisation constant C_u for u in (0, 2).

    ``method="quadrature"`` evaluates the defining integral numerically (scalar only).
    """
    if method == "quadrature":
        if np.ndim(u):
            return np.array([c_alpha_quad(v) for v in np.ravel(u)]).reshape(np.shape(u))
        return c_alpha_quad(u)
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    u = _check_u(u)
    return 1.0 / _sine_integral_closed(u)


def log_c_alpha(u):
    u = _check_u(u)
    return -(np.log(0.5 * np.pi) + special.gammaln(2.0 - u) + np.log(np.sinc(0.5 * (1.0 - u))))


def _pi_cot_minus_inv(x):
    """pi cot(pi x) - 1/x, stable near x = 0 (|x| < 1)."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    xs = np.where(small, 0.5, x)
    direct = np.pi / np.tan(np.pi * xs) - 1.0 / xs
    p2 = np.pi ** 2
    series = -x * (p2 / 3.0 + x * x * (p2 * p2 / 45.0 + x * x * 2.0 * p2 ** 3 / 945.0))
    return np.where(small, series, direct)


def dlog_c_alpha(u):
    """d/du log C_u, from the digamma form of the closed expression."""
    u = _check_u(u)
    x = 0.5 * (1.0 - u)
    # log sinc(x) = log sin(pi x) - log(pi x); its x-derivative is pi cot(pi x) - 1/x
    return special.digamma(2.0 - u) + 0.5 * _pi_cot_minus_inv(x)


def c_alpha_pow(u):
    """C_u^(1/u): the scale applied to every series term with exponent u."""
    u = _check_u(u)
    return np.exp(log_c_alpha(u) / u)


def c_alpha_pow_dlog(u):
    """d/du log(C_u^(1/u)) = dlog C_u / u - log C_u / u^2."""
    u = _check_u(u)
    return dlog_c_alpha(u) / u - log_c_alpha(u) / (u * u)


# -- quadrature oracle ---------------------------------------------------------

def alternating_sum(terms) -> float:
    """Sum of (-1)^k a_k for a completely monotone sequence a_0, a_1, ...

    Cohen, Rodriguez Villegas and Zagier's acceleration; ``terms`` holds the first n
    values and the error decays like 5.8^-n.
    """
    a = list(terms)
    n = len(a)
    d = (3.0 + math.sqrt(8.0)) ** n
    d = 0.5 * (d + 1.0 / d)
    b, c, s = -1.0, -d, 0.0
    for k in range(n):
        c = b - c
        s += c * a[k]
        b = (k + n) * (k - n) * b / ((k + 0.5) * (k + 1.0))
    return s / d


def oscillatory_tail(weight, start: float, n_terms: int = 24) -> float:
    """int_start^inf weight(x) * sin(x - start) dx for a completely monotone weight.

    Splits at multiples of pi after ``start`` and sums the alternating half-period
    integrals with :func:`alternating_sum`.
    """
    def half_period(k):
        lo = start + k * np.pi
        val, _ = integrate.quad(lambda y: weight(lo + y) * np.sin(y), 0.0, np.pi,
                                epsabs=0.0, epsrel=1e-13, limit=200)
        return val

    return alternating_sum([half_period(k) for k in range(n_terms)])


def sine_integral_quad(u: float) -> float:
    """int_0^inf x^(-u) sin x dx by half-period splitting (0 < u < 2)."""
    u = float(_check_u(u))
    # [0, pi]: x^(-u) sin x = x^(1-u) * sinc(x/pi); the QAWS rule takes the x^(1-u) factor
    head, _ = integrate.quad(lambda x: np.sinc(x / np.pi), 0.0, np.pi, weight="alg",
                             wvar=(1.0 - u, 0.0),
                             epsabs=0.0, epsrel=1e-13, limit=200)
    # on [pi, inf) sin x = -sin(x - pi)
    tail = -oscillatory_tail(lambda x: x ** (-u), np.pi)
    return head + tail


def c_alpha_quad(u: float) -> float:
    """C_u by direct quadrature of the defining integral."""
    return 1.0 / sine_integral_quad(u)


def one_minus_cos_integral(u: float) -> float:
    """int_0^inf (1 - cos z) z^(-u-1) dz by quadrature (0 < u < 2).

    Satisfies u * int = 1 / C_u (one-sided normalisation).
    """
    u = float(_check_u(u))

    def smooth(z):
        # (1 - cos z) / z^2 written without cancellation
        h = np.sinc(z / (2.0 * np.pi))
        return 0.5 * h * h

    head, _ = integrate.quad(smooth, 0.0, np.pi, weight="alg", wvar=(1.0 - u, 0.0),
                             epsabs=0.0, epsrel=1e-13, limit=200)
    plain_tail = np.pi ** (-u) / u
    # int_pi^inf cos(z) z^(-u-1) dz: cos z = sin(z - 3pi/2) past 3pi/2
    w = lambda z: z ** (-u - 1.0)
    first, _ = integrate.quad(lambda z: np.cos(z) * w(z), np.pi, 1.5 * np.pi,
                              epsabs=0.0, epsrel=1e-13)
    cos_tail = first + oscillatory_tail(w, 1.5 * np.pi)
    return head + plain_tail - cos_tail


# -- characteristic functions and sampling -------------------------------------

@dataclass(frozen=True)
class StableParams:
    """Symmetric alpha-stable Levy motion at time ``scale_time``: CF exp(-t |theta|^alpha)."""

    alpha: float
    scale_time: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise StableDomainError(f"alpha must be in (0, 2), got {self.alpha}")
        if not self.scale_time >= 0.0:
            raise StableDomainError(f"scale_time must be >= 0, got {self.scale_time}")


def stable_cf(p: StableParams, theta):
    return np.exp(-p.scale_time * np.abs(np.asarray(theta, dtype=float)) ** p.alpha)


def stable_levy_joint_cf(alpha: float, times, thetas):
    """Joint CF of (L(t_1), ..., L(t_m)) for standard symmetric alpha-stable Levy motion.

    ``thetas`` may carry leading batch dimensions; its last axis matches ``times``.
    """
    times = np.asarray(times, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    order = np.argsort(times, kind="stable")
    ts = times[order]
    th = thetas[..., order]
    # on (t_(k-1), t_(k)] the active coefficients are those with t_j >= s
    tail_sums = np.cumsum(th[..., ::-1], axis=-1)[..., ::-1]
    lengths = np.diff(np.concatenate([[0.0], ts]))
    return np.exp(-np.sum(lengths * np.abs(tail_sums) ** alpha, axis=-1))


def sample_stable_oracle(alpha: float, scale_time: float, rng: np.random.Generator, size=None):
    """Symmetric alpha-stable samples with CF exp(-scale_time |theta|^alpha).

    Chambers-Mallows-Stuck transform of a uniform angle and a unit exponential;
    alpha = 1 uses the Cauchy branch tan(V).
    """
    if not 0.0 < alpha < 2.0:
        raise StableDomainError(f"alpha must be in (0, 2), got {alpha}")
    if not scale_time > 0.0:
        raise StableDomainError("scale_time must be positive")
    v = rng.uniform(-0.5 * np.pi, 0.5 * np.pi, size)
    w = rng.standard_exponential(size)
    if alpha == 1.0:
        x = np.tan(v)
    else:
        x = (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
             * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))
    return scale_time ** (1.0 / alpha) * x

