"""Time-varying stability index alpha(t) on [0, T].

An :class:`AlphaFunction` is immutable once built. Every constructor checks that
the function stays inside its declared bounds ``(c, d)`` with ``0 < c <= d < 2``;
downstream tail bounds and series truncation estimates rely on those bounds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy.interpolate import PchipInterpolator

KINDS = ("constant", "affine", "sinusoidal", "user-table")

_SCAN_POINTS = 10_001


class AlphaDomainError(ValueError):
    """Raised when alpha is evaluated outside [0, T] or built with bad bounds."""


class UnsupportedDerivativeError(NotImplementedError):
    """Raised when the derivative is requested from a non-C1 table interpolant."""


def _as_times(t) -> np.ndarray:
    return np.asarray(t, dtype=float)


@dataclass(frozen=True, eq=False)
class AlphaFunction:
    """Deterministic stability index alpha: [0, T] -> [c, d] subset of (0, 2).

    Use the class methods (:meth:`constant`, :meth:`affine`, :meth:`sinusoidal`,
    :meth:`table`) or :meth:`from_config` rather than the raw constructor.

    Parameters
    ----------
    kind : str
        One of ``constant``, ``affine``, ``sinusoidal``, ``user-table``.
    params : mapping
        Kind-specific coefficients.
    horizon : float
        The right end ``T`` of the time domain.
    bounds : (float, float), optional
        Declared range ``(c, d)``. Defaults to the exact range over [0, T].
    """

    kind: str
    params: Mapping[str, Any]
    horizon: float = 1.0
    bounds: tuple[float, float] | None = None
    _interp: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown alpha kind {self.kind!r}; expected one of {KINDS}")
        if not self.horizon > 0:
            raise AlphaDomainError(f"horizon must be positive, got {self.horizon}")
        params = dict(self.params)
        object.__setattr__(self, "params", params)
        if self.kind == "user-table":
            knots = np.asarray(params["knots"], dtype=float)
            values = np.asarray(params["values"], dtype=float)
            if knots.ndim != 1 or knots.shape != values.shape or knots.size < 2:
                raise ValueError("user-table alpha needs matching 1-d knots/values, at least 2")
            if np.any(np.diff(knots) <= 0):
                raise ValueError("user-table knots must be strictly increasing")
            if knots[0] > 0 or knots[-1] < self.horizon:
                raise ValueError("user-table knots must cover [0, T]")
            interpolation = params.get("interpolation", "pchip")
            if interpolation == "pchip":
                interp = PchipInterpolator(knots, values, extrapolate=False)
            elif interpolation == "linear":
                interp = None
            else:
                raise ValueError(f"unknown interpolation {interpolation!r}")
            params["knots"], params["values"] = knots, values
            params["interpolation"] = interpolation
            object.__setattr__(self, "_interp", interp)

        lo, hi = self.exact_range()
        bounds = self.bounds if self.bounds is not None else (lo, hi)
        c, d = float(bounds[0]), float(bounds[1])
        if not (0.0 < c <= d < 2.0):
            raise AlphaDomainError(f"declared bounds must satisfy 0 < c <= d < 2, got ({c}, {d})")
        if lo < c or hi > d:
            raise AlphaDomainError(
                f"alpha ranges over [{lo:.6g}, {hi:.6g}], outside declared bounds ({c}, {d})"
            )
        object.__setattr__(self, "bounds", (c, d))

    # -- construction helpers -------------------------------------------------

    @classmethod
    def constant(cls, value: float, horizon: float = 1.0, bounds=None) -> "AlphaFunction":
        return cls("constant", {"a0": float(value)}, horizon, bounds)

    @classmethod
    def affine(cls, a0: float, a1: float, horizon: float = 1.0, bounds=None) -> "AlphaFunction":
        """alpha(t) = a0 + a1 * t."""
        return cls("affine", {"a0": float(a0), "a1": float(a1)}, horizon, bounds)

    @classmethod
    def sinusoidal(cls, a0: float, amplitude: float, frequency: float = 1.0,
                   phase: float = 0.0, horizon: float = 1.0, bounds=None) -> "AlphaFunction":
        """alpha(t) = a0 + amplitude * sin(2 pi frequency t + phase)."""
        params = {"a0": float(a0), "amplitude": float(amplitude),
                  "frequency": float(frequency), "phase": float(phase)}
        return cls("sinusoidal", params, horizon, bounds)

    @classmethod
    def table(cls, knots, values, horizon: float | None = None, interpolation: str = "pchip",
              bounds=None) -> "AlphaFunction":
        knots = np.asarray(knots, dtype=float)
        horizon = float(knots[-1]) if horizon is None else horizon
        params = {"knots": knots, "values": values, "interpolation": interpolation}
        return cls("user-table", params, horizon, bounds)

    @classmethod
    def from_config(cls, block: Mapping[str, Any], horizon: float = 1.0) -> "AlphaFunction":
        """Build from a config table such as ``{kind = "affine", a0 = 1.2, a1 = 0.3}``.

        Keys per kind: constant ``a0``; affine ``a0, a1``; sinusoidal ``a0, amplitude``
        and optional ``frequency, phase``; user-table ``knots, values`` and optional
        ``interpolation``. ``c`` and ``d`` optionally declare bounds.
        """
        block = dict(block)
        kind = block.pop("kind", None)
        bounds = None
        if "c" in block or "d" in block:
            bounds = (block.pop("c"), block.pop("d"))
        if kind == "constant":
            return cls.constant(block["a0"], horizon, bounds)
        if kind == "affine":
            return cls.affine(block["a0"], block["a1"], horizon, bounds)
        if kind == "sinusoidal":
            return cls.sinusoidal(block["a0"], block["amplitude"], block.get("frequency", 1.0),
                                  block.get("phase", 0.0), horizon, bounds)
        if kind == "user-table":
            return cls.table(block["knots"], block["values"], horizon,
                             block.get("interpolation", "pchip"), bounds)
        raise ValueError(f"unknown alpha kind {kind!r}; expected one of {KINDS}")

    def to_config(self) -> dict:
        out = {"kind": self.kind}
        for key, val in self.params.items():
            out[key] = val.tolist() if isinstance(val, np.ndarray) else val
        out["c"], out["d"] = self.bounds
        return out

    # -- evaluation -----------------------------------------------------------

    @property
    def c(self) -> float:
        return self.bounds[0]

    @property
    def d(self) -> float:
        return self.bounds[1]

    @property
    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "affine":
            return self.params["a1"] == 0.0
        if self.kind == "sinusoidal":
            return self.params["amplitude"] == 0.0
        return bool(np.all(self.params["values"] == self.params["values"][0]))

    def _check_domain(self, t: np.ndarray):
        if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > self.horizon):
            raise AlphaDomainError(f"time outside [0, {self.horizon}]")

    def __call__(self, t):
        t = _as_times(t)
        self._check_domain(t)
        return self._value(t)

    def deriv(self, t):
        """alpha'(t)."""
        t = _as_times(t)
        self._check_domain(t)
        return self._deriv(t)

    def _value(self, t: np.ndarray):
        p = self.params
        if self.kind == "constant":
            return np.full_like(t, p["a0"]) if t.ndim else np.float64(p["a0"])
        if self.kind == "affine":
            return p["a0"] + p["a1"] * t
        if self.kind == "sinusoidal":
            return p["a0"] + p["amplitude"] * np.sin(2 * np.pi * p["frequency"] * t + p["phase"])
        if self._interp is None:
            return np.interp(t, p["knots"], p["values"])
        return self._interp(t)

    def _deriv(self, t: np.ndarray):
        p = self.params
        if self.kind == "constant":
            return np.zeros_like(t) if t.ndim else np.float64(0.0)
        if self.kind == "affine":
            return np.full_like(t, p["a1"]) if t.ndim else np.float64(p["a1"])
        if self.kind == "sinusoidal":
            w = 2 * np.pi * p["frequency"]
            return p["amplitude"] * w * np.cos(w * t + p["phase"])
        if self._interp is None:
            raise UnsupportedDerivativeError(
                "piecewise-linear alpha table is not C1; use interpolation='pchip'")
        return self._interp.derivative()(t)

    def sup_abs_deriv(self) -> float:
        """sup over [0, T] of |alpha'| (exact for built-in kinds, grid scan for tables)."""
        p = self.params
        if self.kind == "constant":
            return 0.0
        if self.kind == "affine":
            return abs(p["a1"])
        if self.kind == "sinusoidal":
            return abs(p["amplitude"]) * 2 * np.pi * abs(p["frequency"])
        grid = np.linspace(0.0, self.horizon, _SCAN_POINTS)
        return float(np.max(np.abs(self.deriv(grid))))

    def exact_range(self) -> tuple[float, float]:
        """Range of alpha over [0, T].

        Interval arithmetic for the built-in kinds (endpoints plus interior critical
        points); for tables, the knot values (PCHIP does not overshoot) merged with a
        dense grid scan.
        """
        T = self.horizon
        p = self.params
        if self.kind == "constant":
            return p["a0"], p["a0"]
        if self.kind == "affine":
            ends = (p["a0"], p["a0"] + p["a1"] * T)
            return min(ends), max(ends)
        if self.kind == "sinusoidal":
            w, ph = 2 * np.pi * p["frequency"], p["phase"]
            pts = [0.0, T]
            if w != 0.0:
                # sin(w t + ph) is extremal where w t + ph = pi/2 + k pi
                k_lo = np.ceil(((min(0.0, w * T)) + ph - np.pi / 2) / np.pi)
                k_hi = np.floor(((max(0.0, w * T)) + ph - np.pi / 2) / np.pi)
                for k in np.arange(k_lo, k_hi + 1):
                    tk = (np.pi / 2 + k * np.pi - ph) / w
                    if 0.0 <= tk <= T:
                        pts.append(float(tk))
            vals = self._value(np.asarray(pts))
            return float(vals.min()), float(vals.max())
        grid = np.linspace(0.0, T, _SCAN_POINTS)
        vals = np.concatenate([self._value(grid), p["values"][(p["knots"] >= 0) & (p["knots"] <= T)]])
        return float(vals.min()), float(vals.max())

    def with_horizon(self, horizon: float) -> "AlphaFunction":
        return AlphaFunction(self.kind, self.params, horizon, self.bounds)


def eval_alpha(f: AlphaFunction, t):
    return f(t)


def eval_alpha_deriv(f: AlphaFunction, t):
    return f.deriv(t)
