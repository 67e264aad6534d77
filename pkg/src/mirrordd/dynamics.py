"""Open-system dynamics of the two atoms.

States live in the product basis ``|11>, |12>, |21>, |22>`` (first label atom a,
``1`` ground, ``2`` excited). Dynamics are computed in the frame rotating at the
atomic transition frequency with hbar = 1; time is in units of 1/gamma_free when
``gamma_free == 1``.

The no-jump Hamiltonian is

    H_cond = (Delta/2) (L+^dag L+ - L-^dag L-)
             - (i/2) (gamma_plus L+^dag L+ + gamma_minus L-^dag L-)

with ``L± = (sigma_a^- ± sigma_b^-)/sqrt(2)`` and ``Delta = Im(gamma_ab)``, and
the reset term is ``gamma_plus L+ rho L+^dag + gamma_minus L- rho L-^dag``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq

from .errors import DomainError, IntegrationError
from .rates import collective_rates

_SM = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |1><2|
_I2 = np.eye(2, dtype=complex)
SIGMA_A = np.kron(_SM, _I2)
SIGMA_B = np.kron(_I2, _SM)

KET_11 = np.array([1, 0, 0, 0], dtype=complex)
KET_12 = np.array([0, 1, 0, 0], dtype=complex)
KET_21 = np.array([0, 0, 1, 0], dtype=complex)
KET_22 = np.array([0, 0, 0, 1], dtype=complex)
KET_PLUS = (KET_12 + KET_21) / math.sqrt(2.0)
KET_MINUS = (KET_12 - KET_21) / math.sqrt(2.0)

# columns: |11>, |+>, |->, |22>
COLLECTIVE_BASIS = np.stack([KET_11, KET_PLUS, KET_MINUS, KET_22], axis=1)
POPULATION_CHANNELS = ("pop_11", "pop_plus", "pop_minus", "pop_22")


@dataclass(frozen=True)
class LindbladGenerator:
    gamma_free: float
    gamma_ab: complex
    gamma_plus: float
    gamma_minus: float
    l_plus: np.ndarray
    l_minus: np.ndarray
    h_cond: np.ndarray

    @property
    def level_shift(self) -> float:
        return complex(self.gamma_ab).imag

    @property
    def jump_channels(self) -> tuple[tuple[float, np.ndarray], ...]:
        return ((self.gamma_plus, self.l_plus), (self.gamma_minus, self.l_minus))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Time derivative of ``rho``."""
        h = self.h_cond
        out = -1j * (h @ rho - rho @ h.conj().T)
        for rate, op in self.jump_channels:
            out += rate * (op @ rho @ op.conj().T)
        return out

    @cached_property
    def superoperator(self) -> np.ndarray:
        """16x16 matrix acting on row-major ``rho.reshape(16)``."""
        eye = np.eye(4)
        h = self.h_cond
        s = -1j * np.kron(h, eye) + 1j * np.kron(eye, h.conj())
        for rate, op in self.jump_channels:
            s = s + rate * np.kron(op, op.conj())
        return s

    def conditional_propagator(self, t: float) -> np.ndarray:
        return expm(-1j * self.h_cond * t)


def build_generator(gamma_ab: complex, gamma_free: float = 1.0) -> LindbladGenerator:
    gamma_ab = complex(gamma_ab)
    g_plus, g_minus = collective_rates(gamma_ab, gamma_free)
    l_plus = (SIGMA_A + SIGMA_B) / math.sqrt(2.0)
    l_minus = (SIGMA_A - SIGMA_B) / math.sqrt(2.0)
    n_plus = l_plus.conj().T @ l_plus
    n_minus = l_minus.conj().T @ l_minus
    shift = 0.5 * gamma_ab.imag * (n_plus - n_minus)
    h_cond = shift - 0.5j * (g_plus * n_plus + g_minus * n_minus)
    return LindbladGenerator(
        gamma_free=float(gamma_free),
        gamma_ab=gamma_ab,
        gamma_plus=g_plus,
        gamma_minus=g_minus,
        l_plus=l_plus,
        l_minus=l_minus,
        h_cond=h_cond,
    )


@dataclass(frozen=True)
class InitialState:
    """Named initial preparations of the two atoms.

    ``kind`` is one of ``plus``, ``minus``, ``doubly_excited``, ``ground`` or
    ``mixture``; the latter excites each atom independently with probability ``p``.
    """

    kind: str
    p: float | None = None

    KINDS = ("plus", "minus", "doubly_excited", "ground", "mixture")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown initial state {self.kind!r}; expected one of {self.KINDS}")
        if self.kind == "mixture":
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise DomainError(f"mixture needs 0 <= p <= 1, got {self.p}")
        elif self.p is not None:
            raise DomainError(f"p only applies to the mixture state, not {self.kind!r}")

    @classmethod
    def product_mixture(cls, p: float) -> "InitialState":
        return cls("mixture", float(p))

    def components(self) -> list[tuple[float, np.ndarray]]:
        """Incoherent decomposition as ``(weight, ket)`` pairs."""
        if self.kind == "plus":
            return [(1.0, KET_PLUS)]
        if self.kind == "minus":
            return [(1.0, KET_MINUS)]
        if self.kind == "doubly_excited":
            return [(1.0, KET_22)]
        if self.kind == "ground":
            return [(1.0, KET_11)]
        p = self.p
        return [
            ((1.0 - p) ** 2, KET_11),
            (p * (1.0 - p), KET_12),
            (p * (1.0 - p), KET_21),
            (p * p, KET_22),
        ]

    def density_matrix(self) -> np.ndarray:
        rho = np.zeros((4, 4), dtype=complex)
        for w, ket in self.components():
            rho += w * np.outer(ket, ket.conj())
        return rho


@dataclass
class TimeSeries:
    """Observables sampled on a time grid; ``stderr`` holds Monte Carlo errors."""

    t: np.ndarray
    channels: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"t": self.t}
        cols.update(self.channels)
        cols.update({"se_" + k: v for k, v in self.stderr.items()})
        return cols


def check_density_matrix(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise DomainError(f"density matrix must be 4x4, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > 1e-12:
        raise DomainError(f"density matrix trace is {np.trace(rho).real!r}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise DomainError("density matrix has a negative eigenvalue")
    return rho


def _as_rho(state) -> np.ndarray:
    if isinstance(state, InitialState):
        return state.density_matrix()
    arr = np.asarray(state, dtype=complex)
    if arr.ndim == 1:
        arr = arr / np.linalg.norm(arr)
        return np.outer(arr, arr.conj())
    return check_density_matrix(arr)


def check_time_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise DomainError("time grid must be a non-empty 1-D array")
    if t[0] != 0.0:
        raise DomainError(f"time grid must start at 0, got {t[0]}")
    if np.any(np.diff(t) <= 0.0) or not np.all(np.isfinite(t)):
        raise DomainError("time grid must be finite and strictly increasing")
    return t


def collective_populations(rho: np.ndarray) -> np.ndarray:
    """Diagonal of ``rho`` in the collective basis, for one or a stack of matrices."""
    v = COLLECTIVE_BASIS
    return np.real(np.einsum("ki,...kl,li->...i", v.conj(), rho, v))


def _observables(rhos: np.ndarray) -> dict[str, np.ndarray]:
    pops = collective_populations(rhos)
    out = {name: pops[:, k] for k, name in enumerate(POPULATION_CHANNELS)}
    coh = np.einsum("k,nkl,l->n", KET_PLUS.conj(), rhos, KET_MINUS)
    out["re_coh_pm"] = coh.real
    out["im_coh_pm"] = coh.imag
    return out


def _step_propagators(t: np.ndarray, make) -> list[np.ndarray]:
    cache: dict[float, np.ndarray] = {}
    props = []
    for dt in np.diff(t):
        key = float(dt)
        if key not in cache:
            cache[key] = make(key)
        props.append(cache[key])
    return props


def evolve_master(gen: LindbladGenerator, rho0, t_grid) -> TimeSeries:
    """Exact propagation of the full master equation on ``t_grid``."""
    t = check_time_grid(t_grid)
    rho = _as_rho(rho0)
    sup = gen.superoperator
    props = _step_propagators(t, lambda dt: expm(sup * dt))
    vec = rho.reshape(16)
    out = np.empty((t.size, 4, 4), dtype=complex)
    out[0] = rho
    for k, prop in enumerate(props, start=1):
        vec = prop @ vec
        if not np.all(np.isfinite(vec)):
            raise IntegrationError(f"non-finite state at t = {t[k]}")
        out[k] = vec.reshape(4, 4)
    ch = _observables(out)
    ch["trace"] = np.real(np.einsum("nii->n", out))
    return TimeSeries(t, ch)


def evolve_conditional(gen: LindbladGenerator, state, t_grid) -> TimeSeries:
    """No-emission evolution. ``P0`` is the unnormalised trace; the population
    channels are those of the renormalised conditional state."""
    t = check_time_grid(t_grid)
    rho = _as_rho(state)
    props = _step_propagators(t, gen.conditional_propagator)
    out = np.empty((t.size, 4, 4), dtype=complex)
    out[0] = rho
    for k, u in enumerate(props, start=1):
        rho = u @ rho @ u.conj().T
        if not np.all(np.isfinite(rho)):
            raise IntegrationError(f"non-finite state at t = {t[k]}")
        out[k] = rho
    norm = np.real(np.einsum("nii->n", out))
    with np.errstate(invalid="ignore", divide="ignore"):
        ch = _observables(out / norm[:, None, None])
    ch["P0"] = norm
    return TimeSeries(t, ch)


def _rates(p: float, gamma_ab: complex, gamma_free: float):
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    return collective_rates(gamma_ab, gamma_free)


def survival_probability(p: float, gamma_ab: complex, t, gamma_free: float = 1.0):
    """Probability of no photon emission in ``(0, t)`` after incoherent excitation."""
    gp, gm = _rates(p, gamma_ab, gamma_free)
    t = np.asarray(t, dtype=float)
    return (
        (1 - p) ** 2
        + (1 - p) * p * (np.exp(-gp * t) + np.exp(-gm * t))
        + p * p * np.exp(-2.0 * gamma_free * t)
    )


def first_emission_density(p: float, gamma_ab: complex, t, gamma_free: float = 1.0):
    """``-dP0/dt`` in closed form."""
    gp, gm = _rates(p, gamma_ab, gamma_free)
    t = np.asarray(t, dtype=float)
    return (1 - p) * p * (gp * np.exp(-gp * t) + gm * np.exp(-gm * t)) + 2.0 * p * p * gamma_free * np.exp(
        -2.0 * gamma_free * t
    )


def emission_rate(p: float, gamma_ab: complex, t, gamma_free: float = 1.0):
    """Photon emission rate to first order in ``p``."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    r = complex(gamma_ab).real
    t = np.asarray(t, dtype=float)
    return 2.0 * p * (gamma_free * np.cosh(r * t) - r * np.sinh(r * t)) * np.exp(-gamma_free * t)


# ---------------------------------------------------------------------------
# quantum-jump Monte Carlo

SEED_MASK = (1 << 64) - 1


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent Philox stream for trajectory ``index`` of run ``seed``."""
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class _JumpModel:
    eigvals: np.ndarray  # diagonal of H_cond in the collective basis
    rates: tuple[float, float]
    ops: tuple[np.ndarray, np.ndarray]  # jump operators in the collective basis
    kets: tuple[np.ndarray, ...]  # initial kets in the collective basis
    weights: np.ndarray

    @classmethod
    def build(cls, gen: LindbladGenerator, initial: InitialState) -> "_JumpModel":
        v = COLLECTIVE_BASIS
        h = v.conj().T @ gen.h_cond @ v
        off = h - np.diag(np.diag(h))
        if np.max(np.abs(off)) > 1e-12:
            raise IntegrationError("conditional Hamiltonian is not diagonal in the collective basis")
        comps = initial.components()
        return cls(
            eigvals=np.diag(h).copy(),
            rates=(gen.gamma_plus, gen.gamma_minus),
            ops=(v.conj().T @ gen.l_plus @ v, v.conj().T @ gen.l_minus @ v),
            kets=tuple(v.conj().T @ k for _, k in comps),
            weights=np.array([w for w, _ in comps]),
        )


def _run_trajectory(model: _JumpModel, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Per-grid-point observables of one trajectory: four populations and the
    no-jump indicator."""
    out = np.empty((t.size, 5))
    if len(model.kets) == 1:
        c = model.kets[0].copy()
    else:
        c = model.kets[rng.choice(len(model.kets), p=model.weights / model.weights.sum())].copy()
    decay = -2.0 * model.eigvals.imag
    t_now = 0.0
    j = 0
    no_jump = 1.0
    while j < t.size:
        w = np.abs(c) ** 2
        u = rng.random()
        floor = w[decay <= 0.0].sum()
        if u <= floor:
            tau = math.inf
        else:
            def excess(s):
                return float(w @ np.exp(-decay * s)) - u

            hi = 1.0
            while excess(hi) > 0.0:
                hi *= 2.0
            tau = brentq(excess, 0.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        t_jump = t_now + tau
        k = j + int(np.searchsorted(t[j:], t_jump, side="right"))
        if k > j:
            dt = t[j:k] - t_now
            amp = c[None, :] * np.exp(-1j * model.eigvals[None, :] * dt[:, None])
            pops = np.abs(amp) ** 2
            out[j:k, :4] = pops / pops.sum(axis=1, keepdims=True)
            out[j:k, 4] = no_jump
            j = k
        if j >= t.size:
            break
        c = c * np.exp(-1j * model.eigvals * tau)
        c /= np.linalg.norm(c)
        branch = [op @ c for op in model.ops]
        probs = np.array([r * np.vdot(b, b).real for r, b in zip(model.rates, branch)])
        pick = 0 if rng.random() * probs.sum() < probs[0] else 1
        c = branch[pick] / math.sqrt(probs[pick] / model.rates[pick])
        t_now = t_jump
        no_jump = 0.0
    return out


def _run_chunk(args) -> np.ndarray:
    model, t, seed, start, stop = args
    return np.stack([_run_trajectory(model, t, trajectory_rng(seed, i)) for i in range(start, stop)])


def mc_trajectories(
    gen: LindbladGenerator,
    initial: InitialState,
    t_grid,
    n_traj: int,
    seed: int,
    workers: int = 1,
    chunk_size: int = 1000,
) -> TimeSeries:
    """Quantum-jump unravelling; returns ensemble means and standard errors.

    Trajectory ``i`` draws from ``trajectory_rng(seed, i)`` and the ensemble is
    reduced in index order, so the output does not depend on ``workers``.
    """
    if int(n_traj) < 1:
        raise DomainError(f"n_traj must be >= 1, got {n_traj}")
    n_traj = int(n_traj)
    t = check_time_grid(t_grid)
    model = _JumpModel.build(gen, initial)
    bounds = [(s, min(s + chunk_size, n_traj)) for s in range(0, n_traj, chunk_size)]
    tasks = [(model, t, seed, s, e) for s, e in bounds]

    s1 = np.zeros((t.size, 5))
    s2 = np.zeros((t.size, 5))

    def reduce(chunks):
        nonlocal s1, s2
        for chunk in chunks:
            for x in chunk:
                s1 += x
                s2 += x * x

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reduce(pool.map(_run_chunk, tasks))
    else:
        reduce(map(_run_chunk, tasks))

    mean = s1 / n_traj
    if n_traj > 1:
        var = np.maximum(s2 - n_traj * mean * mean, 0.0) / (n_traj - 1)
        se = np.sqrt(var / n_traj)
    else:
        se = np.zeros_like(mean)
    names = POPULATION_CHANNELS + ("P0",)
    return TimeSeries(
        t,
        {name: mean[:, k] for k, name in enumerate(names)},
        {name: se[:, k] for k, name in enumerate(names)},
    )
