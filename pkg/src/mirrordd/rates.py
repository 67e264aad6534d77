"""Mirror-mediated cross-coupling rate between two atoms.

Everything is dimensionless: rates are in units of the single-atom free-space
decay rate and distances in units of 1/k0. The cross-coupling rate between atom
``a`` and the mirror image of atom ``b`` is returned as a Python ``complex``
whose real part modifies the collective decay rates and whose imaginary part is
the level shift.

Three independent evaluation routes are provided:

* :func:`gamma_ab_closed` -- elementary closed form (ill-conditioned for small xi),
* :func:`gamma_ab_series` -- Maclaurin series in xi of the 1-D integral,
* :func:`gamma_ab_quadrature` -- adaptive quadrature of the 1-D integral over
  ``u = -cos(theta)``,
* :func:`gamma_ab_angular` -- quadrature of the original angular double integral
  with the explicit transverse polarisation basis.

:func:`gamma_ab` picks the series below :data:`SERIES_THRESHOLD` and the
closed form above it.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import quadrature
from .errors import DomainError, MirrorConstraintError, UnphysicalRateError

SERIES_THRESHOLD = 0.5
SERIES_MAX_XI = 2.0
DEFAULT_TOL = 1e-10
STOKES_TOL = 1e-12

# number of equally spaced azimuth samples; the azimuthal integrand is a
# trigonometric polynomial of degree 2, so any count >= 3 is exact
_N_PHI = 8


@dataclass(frozen=True)
class DipoleOrientation:
    """Unit dipole direction; ``d1`` is the component along the mirror normal."""

    d1: float
    d2: float
    d3: float

    def __post_init__(self):
        comps = (self.d1, self.d2, self.d3)
        for c in comps:
            if isinstance(c, complex) or np.iscomplexobj(c):
                raise DomainError("dipole components must be real")
        norm = math.sqrt(sum(float(c) ** 2 for c in comps))
        if not math.isfinite(norm) or norm == 0.0:
            raise DomainError(f"cannot normalise dipole vector {comps}")
        object.__setattr__(self, "d1", float(self.d1) / norm)
        object.__setattr__(self, "d2", float(self.d2) / norm)
        object.__setattr__(self, "d3", float(self.d3) / norm)

    @classmethod
    def from_vector(cls, v) -> "DipoleOrientation":
        d1, d2, d3 = v
        return cls(d1, d2, d3)

    @classmethod
    def in_plane(cls, normal_projection: float) -> "DipoleOrientation":
        """Dipole in the x-y plane with ``|d . x| = normal_projection``."""
        c = float(normal_projection)
        if not 0.0 <= c <= 1.0:
            raise DomainError(f"|d.x| must lie in [0, 1], got {c}")
        return cls(c, math.sqrt(max(0.0, 1.0 - c * c)), 0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.d1, self.d2, self.d3])

    def dot(self, other: "DipoleOrientation") -> float:
        return self.d1 * other.d1 + self.d2 * other.d2 + self.d3 * other.d3


@dataclass(frozen=True)
class AsymmetricMirror:
    """Mirror smooth on one side and rough on the other.

    ``r_a``/``r_b`` are the angle-averaged reflection rates seen from atom a's
    and atom b's side; the transmission rates are ``1 - r``.
    """

    r_a: float
    r_b: float

    def __post_init__(self):
        for name in ("r_a", "r_b"):
            r = getattr(self, name)
            if isinstance(r, complex):
                raise MirrorConstraintError(f"{name} must be real for an asymmetric mirror")
            if not 0.0 <= r <= 1.0:
                raise MirrorConstraintError(f"0 <= {name} <= 1 violated: {name} = {r}")

    @property
    def t_a(self) -> float:
        return 1.0 - self.r_a

    @property
    def t_b(self) -> float:
        return 1.0 - self.r_b

    @classmethod
    def from_rates(cls, t_a: float, r_b: float) -> "AsymmetricMirror":
        if not 0.0 <= t_a <= 1.0:
            raise MirrorConstraintError(f"0 <= t_a <= 1 violated: t_a = {t_a}")
        return cls(1.0 - t_a, r_b)

    @classmethod
    def from_coupling(cls, coupling: float) -> "AsymmetricMirror":
        """Mirror with ``t_a * r_b == coupling`` (``r_b = 1``)."""
        return cls.from_rates(coupling, 1.0)


@dataclass(frozen=True)
class SymmetricMirror:
    """Mirror smooth on both sides, with complex amplitude coefficients."""

    r_a: complex
    t_a: complex
    r_b: complex
    t_b: complex

    def __post_init__(self):
        for side in ("a", "b"):
            r = complex(getattr(self, "r_" + side))
            t = complex(getattr(self, "t_" + side))
            if abs(abs(r) ** 2 + abs(t) ** 2 - 1.0) > STOKES_TOL:
                raise MirrorConstraintError(
                    f"|r_{side}|^2 + |t_{side}|^2 = 1 violated "
                    f"(got {abs(r) ** 2 + abs(t) ** 2!r})"
                )
        residue = _stokes_residue(self)
        if abs(residue) > STOKES_TOL:
            raise MirrorConstraintError(
                f"r_a* t_b + t_a* r_b = 0 violated (|residue| = {abs(residue):.3e})"
            )


MirrorSpec = Union[AsymmetricMirror, SymmetricMirror]


def _stokes_residue(m: SymmetricMirror) -> complex:
    return complex(m.r_a).conjugate() * m.t_b + complex(m.t_a).conjugate() * m.r_b


def coupling_prefactor(mirror: MirrorSpec) -> complex:
    """Amplitude factor multiplying the cross-coupling rate.

    ``t_a r_b`` for an asymmetric mirror, ``r_a* t_b + t_a* r_b`` (which the
    energy-conservation relations force to zero) for a symmetric one.
    """
    if isinstance(mirror, AsymmetricMirror):
        return complex(mirror.t_a * mirror.r_b)
    if isinstance(mirror, SymmetricMirror):
        return _stokes_residue(mirror)
    raise TypeError(f"unsupported mirror type {type(mirror).__name__}")


@dataclass(frozen=True)
class GeometryConfig:
    xi: float
    dipole_a: DipoleOrientation
    dipole_b: DipoleOrientation
    mirror: MirrorSpec

    def __post_init__(self):
        xi = self.xi
        if isinstance(xi, complex) or not math.isfinite(xi) or xi <= 0.0:
            raise DomainError(f"effective distance xi must be finite and > 0, got {xi!r}")


def _weights(cfg: GeometryConfig) -> tuple[float, float, complex]:
    a, b = cfg.dipole_a, cfg.dipole_b
    normal = a.d1 * b.d1
    transverse = a.d2 * b.d2 + a.d3 * b.d3
    scale = 3.0 / 16.0 * coupling_prefactor(cfg.mirror)
    return normal, transverse, scale


def _check_xi(xi: float) -> None:
    if not xi > 0.0:
        raise DomainError(f"effective distance xi must be > 0, got {xi!r}")


def gamma_ab_closed(cfg: GeometryConfig) -> complex:
    _check_xi(cfg.xi)
    normal, transverse, scale = _weights(cfg)
    xi = cfg.xi
    e = cmath.exp(1j * xi)
    inv_i = 1.0 / (1j * xi)  # 1/(i xi)
    inv2 = 1.0 / (xi * xi)
    inv_i3 = inv_i * inv2  # 1/(i xi^3)
    t_part = 2.0 * e * (inv_i + inv2 - inv_i3) - inv_i + 2.0 * inv_i3
    n_part = -2.0 * (2.0 * e * (inv2 - inv_i3) + inv_i + 2.0 * inv_i3)
    return complex(scale * (transverse * t_part + normal * n_part))


def gamma_ab_series(cfg: GeometryConfig) -> complex:
    """Maclaurin series of the 1-D integral, for xi <= SERIES_MAX_XI.

    Uses ``int_0^1 u^n e^{i xi u} du = sum_k (i xi)^k / (k! (n + k + 1))``.
    """
    xi = cfg.xi
    _check_xi(xi)
    if xi > SERIES_MAX_XI:
        raise DomainError(f"series evaluation limited to xi <= {SERIES_MAX_XI}, got {xi}")
    normal, transverse, scale = _weights(cfg)
    total = 0j
    term = 1.0 + 0j  # (i xi)^k / k!
    k = 0
    while True:
        lo, hi = 1.0 / (k + 1), 1.0 / (k + 3)
        total += term * (2.0 * normal * (lo - hi) + transverse * (lo + hi))
        k += 1
        term *= 1j * xi / k
        if abs(term) < 1e-18:
            break
    return complex(scale * total)


def gamma_ab(cfg: GeometryConfig) -> complex:
    """Cross-coupling rate via the series (xi <= threshold) or the closed form."""
    if cfg.xi <= SERIES_THRESHOLD:
        return gamma_ab_series(cfg)
    return gamma_ab_closed(cfg)


def gamma_ab_quadrature(cfg: GeometryConfig, tol: float = DEFAULT_TOL) -> complex:
    if not tol > 0.0:
        raise DomainError(f"tolerance must be > 0, got {tol}")
    normal, transverse, scale = _weights(cfg)
    xi = cfg.xi

    def integrand(u):
        u2 = u * u
        return np.exp(1j * xi * u) * (2.0 * normal * (1.0 - u2) + transverse * (1.0 + u2))

    res = quadrature.integrate(integrand, 0.0, 1.0, epsabs=tol, epsrel=tol)
    return complex(scale * res.value)


def gamma_ab_angular(cfg: GeometryConfig, tol: float = DEFAULT_TOL) -> complex:
    """Double integral over emission directions into the half space behind atom b.

    theta runs over (pi/2, pi) with adaptive quadrature; the azimuth is summed
    with the periodic trapezoid rule. The normalisation is 3/(16 pi) so that
    the result coincides with the 1-D form.
    """
    if not tol > 0.0:
        raise DomainError(f"tolerance must be > 0, got {tol}")
    da = cfg.dipole_a.as_array()
    db = cfg.dipole_b.as_array()
    scale = 3.0 / (16.0 * math.pi) * coupling_prefactor(cfg.mirror)
    xi = cfg.xi
    phi = 2.0 * math.pi * np.arange(_N_PHI) / _N_PHI
    cphi, sphi = np.cos(phi), np.sin(phi)
    e1 = np.stack([np.zeros_like(phi), sphi, -cphi], axis=-1)  # (n_phi, 3)
    e1_sum = (e1 @ da) * (e1 @ db)

    def integrand(theta):
        ct = np.cos(theta)[:, None]
        st = np.sin(theta)[:, None]
        e2 = np.stack(
            [np.broadcast_to(st, (len(theta), _N_PHI)), -cphi * ct, -sphi * ct], axis=-1
        )
        pol = e1_sum + (e2 @ da) * (e2 @ db)  # (n_theta, n_phi)
        azimuthal = pol.sum(axis=1) * (2.0 * math.pi / _N_PHI)
        return np.exp(-1j * xi * ct[:, 0]) * st[:, 0] * azimuthal

    res = quadrature.integrate(integrand, 0.5 * math.pi, math.pi, epsabs=tol, epsrel=tol)
    return complex(scale * res.value)


def gamma_ba(gamma_ab_value: complex) -> complex:
    return complex(gamma_ab_value).conjugate()


def collective_rates(gamma_ab_value: complex, gamma_free: float = 1.0) -> tuple[float, float]:
    """Decay rates ``(gamma_plus, gamma_minus)`` of the states ``|+>`` and ``|->``."""
    re = complex(gamma_ab_value).real
    if not math.isfinite(re) or abs(re) >= gamma_free:
        raise UnphysicalRateError(
            f"|Re(gamma_ab)| must be < gamma_free = {gamma_free}, got {re}"
        )
    return gamma_free + re, gamma_free - re


def level_shift(gamma_ab_value: complex) -> float:
    return complex(gamma_ab_value).imag
