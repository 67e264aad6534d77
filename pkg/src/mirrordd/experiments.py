"""Parameter sweeps and lifetime curves built on :mod:`mirrordd.rates` and
:mod:`mirrordd.dynamics`.

Tables are plain ``dict[str, np.ndarray]`` with a fixed column order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import rates
from .dynamics import emission_rate
from .errors import DomainError, NoCrossingError

SWEEP_COLUMNS = ("xi", "orientation", "re_gamma_ab", "delta_mir")
LIFETIME_COLUMNS = ("t", "p", "I", "I0", "ratio")

_BACKENDS = {
    "default": lambda cfg, tol: rates.gamma_ab(cfg),
    "quadrature": rates.gamma_ab_quadrature,
    "angular": rates.gamma_ab_angular,
}


@dataclass(frozen=True)
class SweepSpec:
    """``orientations`` are values of ``|d.x|``; both dipoles share the orientation."""

    xi_min: float = 0.1
    xi_max: float = 20.0
    n_points: int = 400
    spacing: str = "log"
    orientations: tuple[float, ...] = (0.0, 0.5, 0.75, 1.0)
    coupling: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.xi_min < self.xi_max or not math.isfinite(self.xi_max):
            raise DomainError(f"need 0 < xi_min < xi_max, got {self.xi_min}, {self.xi_max}")
        if int(self.n_points) < 2:
            raise DomainError(f"n_points must be >= 2, got {self.n_points}")
        if self.spacing not in ("linear", "log"):
            raise DomainError(f"spacing must be 'linear' or 'log', got {self.spacing!r}")
        if not self.orientations:
            raise DomainError("orientation list is empty")
        for c in self.orientations:
            if not 0.0 <= c <= 1.0:
                raise DomainError(f"orientation |d.x| must lie in [0, 1], got {c}")
        if not 0.0 <= self.coupling <= 1.0:
            raise DomainError(f"coupling t_a*r_b must lie in [0, 1], got {self.coupling}")

    def xi_grid(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.xi_min, self.xi_max, int(self.n_points))
        return np.linspace(self.xi_min, self.xi_max, int(self.n_points))


def sweep_xi(spec: SweepSpec, backend: str = "default", tol: float = rates.DEFAULT_TOL) -> dict[str, np.ndarray]:
    """One row per (xi, orientation), ordered by xi then orientation."""
    try:
        evaluate = _BACKENDS[backend]
    except KeyError:
        raise DomainError(f"unknown backend {backend!r}; expected one of {sorted(_BACKENDS)}") from None
    mirror = rates.AsymmetricMirror.from_coupling(spec.coupling)
    dipoles = [(c, rates.DipoleOrientation.in_plane(c)) for c in sorted(spec.orientations)]
    rows = []
    for xi in spec.xi_grid():
        for c, d in dipoles:
            g = evaluate(rates.GeometryConfig(float(xi), d, d, mirror), tol)
            rows.append((float(xi), c, g.real, g.imag))
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    return {name: arr[:, k] for k, name in enumerate(SWEEP_COLUMNS)}


def orientation_extremes(table: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """For each distinct xi: orientation with the largest and with the smallest |gamma_ab|."""
    xi = table["xi"]
    mag = np.hypot(table["re_gamma_ab"], table["delta_mir"])
    xs = np.unique(xi)
    arg_max = np.empty(xs.size)
    arg_min = np.empty(xs.size)
    for k, x in enumerate(xs):
        sel = xi == x
        o, m = table["orientation"][sel], mag[sel]
        arg_max[k] = o[np.argmax(m)]
        arg_min[k] = o[np.argmin(m)]
    return xs, arg_max, arg_min


def envelope_decay_exponent(xi: np.ndarray, magnitude: np.ndarray, window: float = 2.0 * math.pi) -> float:
    """Log-log slope of the upper envelope of an oscillating, decaying curve.

    The envelope is the maximum over consecutive windows of width ``window``
    in xi (one oscillation period by default).
    """
    xi = np.asarray(xi, dtype=float)
    magnitude = np.asarray(magnitude, dtype=float)
    order = np.argsort(xi)
    xi, magnitude = xi[order], magnitude[order]
    bins = np.floor((xi - xi[0]) / window).astype(int)
    px, py = [], []
    for b in np.unique(bins):
        sel = bins == b
        if sel.sum() < 2:
            continue
        k = np.argmax(magnitude[sel])
        px.append(xi[sel][k])
        py.append(magnitude[sel][k])
    if len(px) < 2:
        raise DomainError("xi range too short for an envelope fit")
    slope, _ = np.polyfit(np.log(px), np.log(py), 1)
    return float(slope)


@dataclass(frozen=True)
class LifetimeSpec:
    """``n_steps`` is the number of time samples on ``[0, t_max]``."""

    p_list: tuple[float, ...] = (0.05, 0.1, 0.2)
    re_gamma: float = 0.05
    t_max: float = 5.0
    n_steps: int = 500

    def __post_init__(self):
        if not self.p_list:
            raise DomainError("p_list is empty")
        for p in self.p_list:
            if not 0.0 < p < 1.0:
                raise DomainError(f"each p must lie in (0, 1), got {p}")
        if not -1.0 < self.re_gamma < 1.0:
            raise DomainError(f"re_gamma must lie in (-1, 1), got {self.re_gamma}")
        if not (self.t_max > 0.0 and math.isfinite(self.t_max)):
            raise DomainError(f"t_max must be > 0, got {self.t_max}")
        if int(self.n_steps) < 2:
            raise DomainError(f"n_steps must be >= 2, got {self.n_steps}")

    def t_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, int(self.n_steps))


def emission_ratio(re_gamma: float, t, gamma_free: float = 1.0):
    """``I(t)/I0(t)``, independent of p."""
    t = np.asarray(t, dtype=float)
    return np.cosh(re_gamma * t) - (re_gamma / gamma_free) * np.sinh(re_gamma * t)


def lifetime_curves(spec: LifetimeSpec) -> dict[str, np.ndarray]:
    """Rows ordered by t then p."""
    t = spec.t_grid()
    ps = sorted(spec.p_list)
    cols = {name: [] for name in LIFETIME_COLUMNS}
    curves = [(p, emission_rate(p, spec.re_gamma, t), emission_rate(p, 0.0, t)) for p in ps]
    ratio = emission_ratio(spec.re_gamma, t)
    for k, tk in enumerate(t):
        for p, i_int, i_free in curves:
            cols["t"].append(tk)
            cols["p"].append(p)
            cols["I"].append(i_int[k])
            cols["I0"].append(i_free[k])
            cols["ratio"].append(ratio[k])
    return {name: np.array(v, dtype=float) for name, v in cols.items()}


def ratio_crossing_time(re_gamma: float, gamma_free: float = 1.0) -> float:
    """Positive time at which ``I/I0`` returns to one: ``2 artanh(R/gamma) / R``."""
    r = float(re_gamma)
    if r == 0.0:
        raise NoCrossingError("without interaction the ratio is identically one")
    k = r / gamma_free
    if not -1.0 < k < 1.0:
        raise DomainError(f"|re_gamma| must be < gamma_free, got {r}")
    return 2.0 * math.atanh(k) / r


def ratio_crossing_time_numeric(re_gamma: float, gamma_free: float = 1.0) -> float:
    """Root of ``I/I0 - 1`` by bracketing, independent of the closed form."""
    r = float(re_gamma)
    if r == 0.0:
        raise NoCrossingError("without interaction the ratio is identically one")
    if not -1.0 < r / gamma_free < 1.0:
        raise DomainError(f"|re_gamma| must be < gamma_free, got {r}")

    def excess(t):
        y = r * t
        return 2.0 * math.sinh(0.5 * y) ** 2 - (r / gamma_free) * math.sinh(y)

    lo, hi = 1.0 / gamma_free, 2.0 / gamma_free
    while excess(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise NoCrossingError("no crossing found")
    return brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
