"""GRW-type collapse dynamics with flash and matter-density ontologies.

Locations are a finite set of labels.  The no-flash propagator is

    W_t = exp(-i H t / hbar - (1/2) sum_x Lambda(x) t),   t >= 0,

and the joint density of the first n flashes is
``|Lambda(x_n)^1/2 W_{t_n - t_{n-1}} ... Lambda(x_1)^1/2 W_{t_1} psi|^2``
(per location mass, per unit time).
"""
from __future__ import annotations

import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import expm

from . import kernels
from .belljump import DT_GUARD, DtGuardWarning, derive_seed, make_rng
from .hilbert import HBAR, DomainError, as_operator, as_state, commutator_norm, require_hermitian
from .models import Model
from .superselection import build_mixture

PSD_TOL = 1e-10
COND_LIMIT = 1e8


@dataclass(frozen=True)
class FlashRateFamily:
    """Positive operators Lambda(x), one per location label."""

    locations: tuple
    operators: np.ndarray
    square_roots: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        ops = np.asarray(self.operators, dtype=complex)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise DomainError("operators must have shape (n_locations, dim, dim)")
        if len(self.locations) != ops.shape[0]:
            raise DomainError("one operator per location is required")
        roots = np.empty_like(ops)
        for k, lam in enumerate(ops):
            lam = require_hermitian(lam, tol=PSD_TOL, what=f"Lambda({self.locations[k]!r})")
            w, v = np.linalg.eigh(lam)
            if w.min() < -PSD_TOL:
                raise DomainError(f"Lambda({self.locations[k]!r}) is not positive "
                                  f"(min eigenvalue {w.min():.3g})")
            roots[k] = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
        ops.setflags(write=False)
        roots.setflags(write=False)
        object.__setattr__(self, "locations", tuple(self.locations))
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "square_roots", roots)

    @classmethod
    def from_mapping(cls, ops: dict) -> "FlashRateFamily":
        return cls(tuple(ops), np.array([as_operator(o) for o in ops.values()]))

    @property
    def dim(self) -> int:
        return self.operators.shape[1]

    def __len__(self) -> int:
        return len(self.locations)

    def index(self, label) -> int:
        try:
            return self.locations.index(label)
        except ValueError:
            raise DomainError(f"unknown flash location {label!r}") from None

    def total(self) -> np.ndarray:
        return self.operators.sum(axis=0)

    def max_total_rate(self) -> float:
        return float(np.linalg.eigvalsh(self.total()).max())

    def root_error(self) -> float:
        sq = self.square_roots @ self.square_roots
        return float(np.max(np.abs(sq - self.operators)))


class GRWDynamics:
    """Non-unitary propagators W_t for one (H, Lambda) pair, cached per t."""

    def __init__(self, h, lam: FlashRateFamily, hbar: float = HBAR):
        h = require_hermitian(h, what="Hamiltonian")
        if h.shape[0] != lam.dim:
            raise DomainError(f"Hamiltonian dim {h.shape[0]} != Lambda dim {lam.dim}")
        self.h = h
        self.lam = lam
        self.hbar = hbar
        self.generator = -1j * h / hbar - 0.5 * lam.total()
        w, v = np.linalg.eig(self.generator)
        self._eig = None
        if np.linalg.cond(v) < COND_LIMIT:
            self._eig = (w, v, np.linalg.inv(v))
        self._cache: dict[float, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.h.shape[0]

    def w(self, t: float, cache: bool = True) -> np.ndarray:
        t = float(t)
        if t < 0:
            raise DomainError(f"W_t is only defined for t >= 0 (got t={t})")
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        if t == 0:
            out = np.eye(self.dim, dtype=complex)
        elif self._eig is not None:
            w, v, vinv = self._eig
            out = (v * np.exp(w * t)) @ vinv
        else:
            out = expm(self.generator * t)
        if cache and len(self._cache) < 4096:
            self._cache[t] = out
        return out

    def propagate(self, psi, t: float) -> np.ndarray:
        return self.w(t) @ np.asarray(psi, dtype=complex)


def grw_propagate(psi, h, lam: FlashRateFamily, t: float, hbar: float = HBAR) -> np.ndarray:
    """W_t psi (unnormalized)."""
    return GRWDynamics(h, lam, hbar).propagate(as_state(psi, normalized=False), t)


def _flash_indices(lam: FlashRateFamily, flashes) -> tuple[list[int], list[float]]:
    locs, times = [], []
    prev = 0.0
    for k, (x, t) in enumerate(flashes):
        t = float(t)
        if t < prev or (k > 0 and t == prev):
            raise DomainError("flash times must be non-negative and strictly increasing")
        locs.append(lam.index(x))
        times.append(t)
        prev = t
    return locs, times


def flash_joint_density(psi, h, lam: FlashRateFamily, flashes: Sequence[tuple], hbar: float = HBAR,
                        dynamics: GRWDynamics | None = None) -> float:
    """Joint density of the first n flashes at the given (location, time) points."""
    dyn = dynamics or GRWDynamics(h, lam, hbar)
    phi = as_state(psi)
    locs, times = _flash_indices(lam, flashes)
    t_prev = 0.0
    for x, t in zip(locs, times):
        phi = lam.square_roots[x] @ dyn.propagate(phi, t - t_prev)
        t_prev = t
    return float(np.real(np.vdot(phi, phi)))


# -- batched exact densities on a grid ----------------------------------------

class FlashGrid:
    """All flash sequences of length <= n_max on a (location, time) grid.

    Walks the sequence tree depth first; each node holds the unnormalized
    vectors of several initial states at once so that densities for psi and
    for every mixture member are produced together.
    """

    def __init__(self, dyn: GRWDynamics, times: Sequence[float], locations: Sequence[int] | None = None,
                 chunk: int = 256):
        self.dyn = dyn
        self.times = np.asarray(times, dtype=float)
        if self.times.ndim != 1 or self.times.size == 0:
            raise DomainError("need a non-empty time grid")
        if np.any(self.times < 0) or np.any(np.diff(self.times) <= 0):
            raise DomainError("grid times must be non-negative and strictly increasing")
        self.loc = np.arange(len(dyn.lam)) if locations is None else np.asarray(locations, dtype=int)
        self.roots = dyn.lam.square_roots[self.loc]
        self.chunk = chunk
        T = self.times.size
        # wtab[a, j] = W(t_j - s_a); row T is the origin s = 0
        starts = np.append(self.times, 0.0)
        self.wtab = np.zeros((T + 1, T, dyn.dim, dyn.dim), dtype=complex)
        self.valid = np.zeros((T + 1, T), dtype=bool)
        for a, s in enumerate(starts):
            for j, t in enumerate(self.times):
                if t > s or (a == T and t >= s):
                    self.wtab[a, j] = dyn.w(t - s)
                    self.valid[a, j] = True

    @property
    def n_points(self) -> int:
        return self.loc.size * self.times.size

    def _children(self, vecs: np.ndarray, tidx: np.ndarray):
        # vecs (r, c, d); result rows enumerate (row, j, x) with j valid
        moved = np.einsum("rjab,rcb->rjca", self.wtab[tidx], vecs)
        flashed = np.einsum("xab,rjcb->rjxca", self.roots, moved)
        r, T, X, c, d = flashed.shape
        mask = np.repeat(self.valid[tidx][:, :, None], X, axis=2)
        jj = np.broadcast_to(np.arange(T)[None, :, None], (r, T, X))
        xx = np.broadcast_to(np.arange(X)[None, None, :], (r, T, X))
        return flashed[mask], jj[mask], xx[mask]

    def walk(self, states: np.ndarray, n_max: int, visit: Callable[[int, np.ndarray], None]) -> int:
        """Call ``visit(depth, vecs)`` for every batch of nodes; returns the node count."""
        states = np.asarray(states, dtype=complex)
        root = states[None, :, :]
        return self._walk(root, np.array([self.times.size]), 1, n_max, visit)

    def _walk(self, vecs, tidx, depth, n_max, visit) -> int:
        count = 0
        for lo in range(0, vecs.shape[0], self.chunk):
            kids, jj, _ = self._children(vecs[lo:lo + self.chunk], tidx[lo:lo + self.chunk])
            if kids.shape[0] == 0:
                continue
            visit(depth, kids)
            count += kids.shape[0]
            if depth < n_max:
                count += self._walk(kids, jj, depth + 1, n_max, visit)
        return count


def flash_density_table(psi, dyn: GRWDynamics, times: Sequence[float]) -> np.ndarray:
    """First-flash densities on the grid, shape (n_locations, n_times)."""
    phi = as_state(psi)
    out = np.empty((len(dyn.lam), len(times)))
    for j, t in enumerate(times):
        v = np.einsum("xab,b->xa", dyn.lam.square_roots, dyn.propagate(phi, t))
        out[:, j] = np.sum(np.abs(v) ** 2, axis=1)
    return out


def first_flash_bin_probabilities(psi, dyn: GRWDynamics, edges: Sequence[float],
                                  epsabs: float = 1e-12) -> tuple[np.ndarray, float]:
    """Probability of a first flash at x inside each time bin, and of none by edges[-1]."""
    phi = as_state(psi)
    roots = dyn.lam.square_roots

    def dens(t):
        v = np.einsum("xab,b->xa", roots, dyn.w(t, cache=False) @ phi)
        return np.sum(np.abs(v) ** 2, axis=1)

    edges = np.asarray(edges, dtype=float)
    if edges[0] != 0 or np.any(np.diff(edges) <= 0):
        raise DomainError("bin edges must start at 0 and increase")
    probs = np.empty((len(dyn.lam), edges.size - 1))
    for b in range(edges.size - 1):
        probs[:, b] = quad_vec(dens, edges[b], edges[b + 1], epsabs=epsabs, epsrel=1e-10)[0]
    tail = dyn.propagate(phi, edges[-1])
    return probs, float(np.real(np.vdot(tail, tail)))


# -- sampling -----------------------------------------------------------------

@dataclass(frozen=True)
class FlashHistory:
    flashes: tuple[tuple[object, float], ...]
    horizon: float
    terminal_unnormalized_state: np.ndarray = field(repr=False, compare=False, default=None)
    seed: int | None = None

    def __post_init__(self):
        prev = -np.inf
        for _, t in self.flashes:
            if not (t > prev and t <= self.horizon):
                raise ValueError("flash times must increase strictly and stay within the horizon")
            prev = t

    def __len__(self) -> int:
        return len(self.flashes)

    @property
    def first(self) -> tuple[object, float] | None:
        return self.flashes[0] if self.flashes else None


class FlashSampler:
    """Stepped flash process for one (H, Lambda, psi, horizon, dt).

    Per step the flash-free probability is ``|W_dt phi|^2 / |phi|^2``
    exactly; a flash location is weighted by ``|Lambda(x)^1/2 W_dt/2 phi|^2``
    and its time is uniform within the step.
    """

    def __init__(self, dyn: GRWDynamics, psi, horizon: float, dt: float, warn: bool = True):
        if horizon <= 0 or dt <= 0:
            raise DomainError("horizon and dt must be positive")
        self.dyn = dyn
        self.psi = as_state(psi)
        self.n_steps = max(1, int(round(horizon / dt)))
        self.dt = horizon / self.n_steps
        self.horizon = float(horizon)
        rate = dyn.lam.max_total_rate()
        if warn and rate * self.dt > DT_GUARD:
            warnings.warn(f"max total flash rate * dt = {rate * self.dt:.3g} exceeds {DT_GUARD}; "
                          "reduce dt", DtGuardWarning, stacklevel=2)
        self.w_step = dyn.w(self.dt)
        self.w_half = dyn.w(self.dt / 2)

    def uniforms(self, seed: int, max_flashes: int) -> tuple[np.ndarray, np.ndarray]:
        rng = make_rng(seed)
        return rng.random((self.n_steps, 2)), rng.random(max_flashes)

    def sample(self, n: int, seed: int, max_flashes: int = 64) -> list[FlashHistory]:
        if n < 1:
            raise DomainError("need n >= 1")
        seeds = [derive_seed(seed, i) for i in range(n)]
        u = np.empty((n, self.n_steps, 2))
        jitter = np.empty((n, max_flashes))
        for i, s in enumerate(seeds):
            u[i], jitter[i] = self.uniforms(s, max_flashes)
        steps, locs, counts, final = kernels.sample_flash_steps(
            self.w_step, self.w_half, self.dyn.lam.square_roots, self.psi, u, max_flashes)
        bad = np.flatnonzero(counts < 0)
        if bad.size:
            raise FloatingPointError(f"history {int(bad[0])}: state norm underflow after a flash")
        out = []
        labels = self.dyn.lam.locations
        for i in range(n):
            m = min(int(counts[i]), max_flashes)
            flashes = tuple((labels[int(locs[i, k])], float((steps[i, k] + jitter[i, k]) * self.dt))
                            for k in range(m))
            out.append(FlashHistory(flashes, self.horizon, final[i], seeds[i]))
        return out

    def first_flash_arrays(self, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        """(location index or -1, time or inf) of the first flash per history."""
        hist = self.sample(n, seed, max_flashes=1)
        idx = np.array([self.dyn.lam.index(h.flashes[0][0]) if h.flashes else -1 for h in hist])
        t = np.array([h.flashes[0][1] if h.flashes else np.inf for h in hist])
        return idx, t


def sample_flashes(psi, h, lam: FlashRateFamily, horizon: float, dt: float, seed: int,
                   hbar: float = HBAR, max_flashes: int = 1024) -> FlashHistory:
    """One flash history; equals history 0 of ``FlashSampler.sample(n, seed)``."""
    sampler = FlashSampler(GRWDynamics(h, lam, hbar), psi, horizon, dt)
    return sampler.sample(1, seed, max_flashes)[0]


# -- superselection -----------------------------------------------------------

@dataclass(frozen=True)
class FlashSuperselectionResult:
    max_deviation: float
    n_sequences: int
    n_grid_points: int
    observable_hamiltonian_commutator: float
    observable_rate_commutator: float

    @property
    def conditions_hold(self) -> bool:
        return max(self.observable_hamiltonian_commutator, self.observable_rate_commutator) <= 1e-12


def verify_flash_superselection(psi, g, h, lam: FlashRateFamily, n_max: int, times: Sequence[float],
                                locations: Sequence[int] | None = None,
                                hbar: float = HBAR) -> FlashSuperselectionResult:
    """max |P_n^psi - sum_nu w_nu P_n^{psi^nu}| over every grid sequence of length <= n_max."""
    psi = as_state(psi)
    dyn = GRWDynamics(h, lam, hbar)
    mix = build_mixture(psi, g)
    states = np.vstack([psi, *mix.states])
    w = np.asarray(mix.weights)
    worst = [0.0]

    def visit(_, vecs):
        dens = np.sum(np.abs(vecs) ** 2, axis=2)
        dev = np.abs(dens[:, 0] - dens[:, 1:] @ w)
        worst[0] = max(worst[0], float(dev.max()))

    grid = FlashGrid(dyn, times, locations)
    n_seq = grid.walk(states, n_max, visit)
    c_h = commutator_norm(g, h)
    c_lam = max(commutator_norm(g, op) for op in lam.operators)
    return FlashSuperselectionResult(worst[0], n_seq, grid.n_points, c_h, c_lam)


# -- flash-rate constructions -------------------------------------------------

def _gaussian_weights(n_sites: int, width: float, allowed: Callable[[int, int], bool]) -> np.ndarray:
    """g[x, y] Gaussian in |x - y|, normalized over x for each y."""
    x = np.arange(n_sites)
    g = np.exp(-0.5 * ((x[:, None] - x[None, :]) / width) ** 2)
    mask = np.array([[allowed(a, b) for b in x] for a in x])
    g = np.where(mask, g, 0.0)
    return g / g.sum(axis=0, keepdims=True)


def number_density_flash_rates(model: Model, rate: float = 1.0, width: float = 0.5) -> FlashRateFamily:
    """Lambda(x) = rate * sum_y g(x, y) (n_f(y) + n_b(y)) on the fermion-boson model."""
    if model.name != "fermion_boson":
        raise DomainError("number-density flash rates need the fermion-boson model")
    L = model.params["sites"]
    g = _gaussian_weights(L, width, lambda a, b: True)
    occ = np.array([np.add(f, b) for f, b in model.space.configs], dtype=float)  # (dim, L)
    ops = np.array([np.diag(rate * occ @ g[x]) for x in range(L)]).astype(complex)
    return FlashRateFamily(tuple(range(L)), ops)


def two_component_flash_rates(model: Model, rate: float = 1.0, width: float = 0.5) -> FlashRateFamily:
    """Lambda(x) = rate * sum_p sum_y g(x, y) |x_p = y|, with g not crossing components."""
    if model.name != "two_component":
        raise DomainError("two-component flash rates need the two-component model")
    s = model.params["sites_per_component"]
    g = _gaussian_weights(2 * s, width, lambda a, b: (a < s) == (b < s))
    configs = np.array(model.space.configs)  # (dim, particles)
    ops = np.zeros((2 * s, model.dim, model.dim), dtype=complex)
    for x in range(2 * s):
        ops[x] = np.diag(rate * g[x][configs].sum(axis=1))
    return FlashRateFamily(tuple(range(2 * s)), ops)


def cross_sector_flash_rates(lam: FlashRateFamily, g, strength: float = 0.5,
                             seed: int = 0) -> FlashRateFamily:
    """Negative control: Lambda'(x) = A A^dag with A = Lambda(x)^1/2 + strength * B.

    B only joins different eigenspaces of g, so Lambda' has cross-sector blocks.
    """
    g = require_hermitian(g, what="observable")
    rng = np.random.default_rng(seed)
    d = lam.dim
    w, v = np.linalg.eigh(g)
    same = np.abs(w[:, None] - w[None, :]) < 1e-9
    ops = []
    for root in lam.square_roots:
        b = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(d)
        bv = v.conj().T @ b @ v
        bv[same] = 0.0
        a = root + strength * (v @ bv @ v.conj().T)
        ops.append(a @ a.conj().T)
    return FlashRateFamily(lam.locations, np.array(ops))


# -- matter density -----------------------------------------------------------

@dataclass
class MatterDensityField:
    samples: dict[tuple[object, float], float] = field(default_factory=dict)

    def add_row(self, t: float, locations: Sequence, values: Sequence[float]) -> None:
        for x, v in zip(locations, values):
            self.samples[(x, float(t))] = float(v)

    def at(self, t: float) -> dict[object, float]:
        return {x: v for (x, s), v in self.samples.items() if s == float(t)}

    def min_value(self) -> float:
        return min(self.samples.values(), default=0.0)


def matter_density(psi_t, lam: FlashRateFamily) -> np.ndarray:
    """m(x) = <psi_t|Lambda(x)|psi_t> for every location."""
    psi_t = as_state(psi_t)
    return np.real(np.einsum("a,xab,b->x", psi_t.conj(), lam.operators, psi_t))


def matter_density_field(psi, h, lam: FlashRateFamily, times: Sequence[float],
                         hbar: float = HBAR) -> MatterDensityField:
    """m along the flash-free branch, psi_t = W_t psi / |W_t psi|."""
    dyn = GRWDynamics(h, lam, hbar)
    out = MatterDensityField()
    phi = as_state(psi)
    for t in times:
        v = dyn.propagate(phi, t)
        out.add_row(t, lam.locations, matter_density(v / np.linalg.norm(v), lam))
    return out


@dataclass(frozen=True)
class GRWmReport:
    times: tuple[float, ...]
    psi_masses: np.ndarray
    member_masses: np.ndarray
    member_weights: tuple[float, ...]
    expectation_gap: float

    @property
    def discrepancy(self) -> float:
        """max over times and members of the largest component-mass difference to psi."""
        return float(np.max(np.abs(self.member_masses - self.psi_masses[:, None, :])))

    @property
    def member_min_masses(self) -> np.ndarray:
        """Smallest component mass of each member, maximized over times."""
        return self.member_masses.min(axis=2).max(axis=0)

    def to_dict(self) -> dict:
        return {
            "times": list(self.times),
            "psi_component_masses": self.psi_masses.tolist(),
            "member_component_masses": self.member_masses.tolist(),
            "member_weights": list(self.member_weights),
            "expectation_gap": self.expectation_gap,
            "discrepancy": self.discrepancy,
        }


def grwm_counterexample(model: Model, psi, lam: FlashRateFamily, times: Sequence[float],
                        location_component: Sequence[int] | None = None,
                        g=None) -> GRWmReport:
    """Per-component matter fractions of psi against each sector member before any flash.

    The mixture members are the sectors of ``g`` (default the model's
    ``component_index``).  Masses are fractions of the total matter.
    """
    if g is None:
        g = model.named_observables["component_index"]
    if location_component is None:
        s = model.params["sites_per_component"]
        location_component = [0 if x < s else 1 for x in lam.locations]
    comp = np.asarray(location_component, dtype=int)
    n_comp = int(comp.max()) + 1
    mix = build_mixture(psi, g)
    dyn = GRWDynamics(model.h_total, lam, model.hbar)

    def masses(phi, t):
        v = dyn.propagate(phi, t)
        m = matter_density(v / np.linalg.norm(v), lam)
        per = np.bincount(comp, weights=m, minlength=n_comp)
        return per / per.sum(), m

    psi = as_state(psi)
    psi_m = np.empty((len(times), n_comp))
    mem_m = np.empty((len(times), len(mix), n_comp))
    gap = 0.0
    for i, t in enumerate(times):
        psi_m[i], m_psi = masses(psi, t)
        avg = np.zeros_like(m_psi)
        for k, (state, w) in enumerate(mix.members):
            mem_m[i, k], m_k = masses(state, t)
            avg += w * m_k
        gap = max(gap, float(np.max(np.abs(avg - m_psi))))
    return GRWmReport(tuple(float(t) for t in times), psi_m, mem_m, mix.weights, gap)
