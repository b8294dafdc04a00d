"""Bell-type jump process on a finite configuration space.

Jumps q' -> q occur at rate

    sigma(q|q') = (2/hbar) [Im <psi|P(q) H_I P(q')|psi>]^+ / <psi|P(q')|psi>

with ``H_I = model.h_jump``.  Because the rates depend on psi_t, which is
deterministic, the time-discretized chain has the same step kernels for every
trajectory; :class:`BellProcess` computes them once and the samplers and the
exact path-law enumerator share them.
"""
from __future__ import annotations

import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.sparse.csgraph import connected_components

from . import kernels
from .hilbert import PVM, DomainError, Propagator, as_state, commutator_norm, random_state
from .models import Model

OCCUPATION_FLOOR = 1e-14
DT_GUARD = 0.1
EXACT_MAX_CONFIGS = 8
EXACT_MAX_STEPS = 12


class RateUndefinedError(DomainError):
    """The configuration has (numerically) zero probability under psi."""


class DtGuardWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class RateMap:
    source: int
    rates: dict[int, float]

    def total(self) -> float:
        return float(sum(self.rates.values()))


@dataclass(frozen=True)
class Path:
    initial_config: int
    events: tuple[tuple[float, int, int], ...]
    horizon: float
    sector_value: float | None = None
    seed: int | None = None

    def __post_init__(self):
        prev_t, cur = -math.inf, self.initial_config
        for t, a, b in self.events:
            if not (t > prev_t and t <= self.horizon):
                raise ValueError("event times must increase strictly and stay within the horizon")
            if a != cur:
                raise ValueError("events do not chain")
            prev_t, cur = t, b

    @property
    def final_config(self) -> int:
        return self.events[-1][2] if self.events else self.initial_config

    def config_at(self, t: float) -> int:
        q = self.initial_config
        for te, _, b in self.events:
            if te > t:
                break
            q = b
        return q

    def visited(self) -> list[int]:
        return [self.initial_config] + [b for _, _, b in self.events]


@dataclass
class PathEnsemble:
    """Sampled paths plus their step skeletons, shape (n, n_steps + 1)."""

    paths: list[Path]
    skeletons: np.ndarray
    times: np.ndarray
    model_id: str = ""
    psi_id: str = ""
    seed: int | None = None
    dt: float = 0.0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.paths)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def configs_at_step(self, k: int) -> np.ndarray:
        return self.skeletons[:, k]

    def empirical_distribution(self, k: int, n_configs: int) -> np.ndarray:
        counts = np.bincount(self.skeletons[:, k], minlength=n_configs)
        return counts / max(1, len(self))

    def jump_counts(self) -> np.ndarray:
        return np.array([len(p.events) for p in self.paths], dtype=np.int64)


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed for sub-stream ``keys``."""
    ss = np.random.SeedSequence([int(seed) & (2 ** 63 - 1), *[int(k) for k in keys]])
    return int(ss.generate_state(1, np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator for a (derived) seed."""
    return np.random.Generator(np.random.Philox(int(seed)))


# -- rates --------------------------------------------------------------------

def rate_matrix(psi, pvm: PVM, h_int, hbar: float = 1.0,
                floor: float = OCCUPATION_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """All jump rates at once.

    Returns ``(rates, occupied)`` with ``rates[q, q']`` the rate of q' -> q
    (zero diagonal, zero columns for unoccupied q') and ``occupied[q']`` the
    mask of configurations above the floor.
    """
    psi = np.asarray(psi, dtype=complex)
    s = pvm.indicator()
    left = s * psi.conj()[None, :]
    right = (s * psi[None, :]).T
    j = left @ np.asarray(h_int) @ right
    p = pvm.probabilities(psi)
    occupied = p > floor
    num = np.maximum((2.0 / hbar) * j.imag, 0.0)
    np.fill_diagonal(num, 0.0)
    rates = np.zeros_like(num)
    rates[:, occupied] = num[:, occupied] / p[occupied]
    return rates, occupied


def jump_rates(psi, source: int, model: Model, floor: float = OCCUPATION_FLOOR,
               h_int=None) -> RateMap:
    """Rates out of ``source`` under psi (Bell's formula with H_I = h_jump)."""
    psi = as_state(psi, normalized=False)
    h_int = model.h_jump if h_int is None else h_int
    p = model.pvm.probabilities(psi)
    if p[source] <= floor:
        raise RateUndefinedError(
            f"rate undefined at unoccupied configuration {source} (probability {p[source]:.3e})")
    rates, _ = rate_matrix(psi, model.pvm, h_int, model.hbar, floor)
    col = rates[:, source]
    return RateMap(source, {int(q): float(col[q]) for q in range(col.size) if q != source})


def _generator_exponential(rates: np.ndarray, dt: float) -> np.ndarray:
    """exp(G dt) for the generator G = R - diag(col sums), block by block."""
    n = rates.shape[0]
    gen = rates - np.diag(rates.sum(axis=0))
    pattern = (rates > 0) | (rates.T > 0)
    n_blocks, labels = connected_components(pattern, directed=False)
    out = np.zeros((n, n))
    for b in range(n_blocks):
        idx = np.flatnonzero(labels == b)
        if idx.size == 1:
            out[idx[0], idx[0]] = 1.0
        else:
            out[np.ix_(idx, idx)] = expm(gen[np.ix_(idx, idx)] * dt)
    out = np.clip(out, 0.0, None)
    sums = out.sum(axis=0)
    return out / sums[None, :]


class BellProcess:
    """Time-discretized Bell jump chain for one (model, psi0, horizon, dt).

    Step ``k`` covers ``[k dt, (k+1) dt)``.  Its kernel is the exponential
    of the rate generator frozen at the step midpoint, so equivariance is
    violated only at O(dt^2) per unit time.  ``kernels[k][q, q']`` is the
    probability to be at q at the end of the step given q' at its start.
    """

    def __init__(self, model: Model, psi0, horizon: float, dt: float,
                 floor: float = OCCUPATION_FLOOR, h_int=None, warn: bool = True):
        if horizon <= 0 or dt <= 0:
            raise DomainError("horizon and dt must be positive")
        self.model = model
        self.psi0 = as_state(psi0)
        self.n_steps = max(1, int(round(horizon / dt)))
        self.dt = horizon / self.n_steps
        self.horizon = float(horizon)
        self.times = np.linspace(0.0, self.horizon, self.n_steps + 1)
        self.floor = floor
        self.h_int = model.h_jump if h_int is None else np.asarray(h_int)
        prop = Propagator(model.h_total, model.hbar)
        mids = (np.arange(self.n_steps) + 0.5) * self.dt
        states = prop.evolve_many(self.psi0, mids)
        n_cfg = model.n_configs
        self.kernels = np.empty((self.n_steps, n_cfg, n_cfg))
        self.defined = np.empty((self.n_steps, n_cfg), dtype=bool)
        self.max_total_rate = 0.0
        for k in range(self.n_steps):
            rates, occupied = rate_matrix(states[k], model.pvm, self.h_int, model.hbar, floor)
            self.kernels[k] = _generator_exponential(rates, self.dt)
            self.defined[k] = occupied
            self.max_total_rate = max(self.max_total_rate, float(rates.sum(axis=0).max()))
        self.initial_probs = model.pvm.probabilities(self.psi0)
        if warn and self.max_total_rate * self.dt > DT_GUARD:
            warnings.warn(
                f"max total rate * dt = {self.max_total_rate * self.dt:.3g} exceeds {DT_GUARD}; "
                "reduce dt", DtGuardWarning, stacklevel=2)
        self._cum = None

    @property
    def n_configs(self) -> int:
        return self.kernels.shape[1]

    def cumulative_kernels(self) -> np.ndarray:
        if self._cum is None:
            cum = np.cumsum(self.kernels, axis=1)
            # pin each column's tail to exactly 1 so zero-probability
            # destinations past the last reachable one are never chosen
            nz = self.kernels > 0
            last = self.n_configs - 1 - np.argmax(nz[:, ::-1, :], axis=1)
            rows = np.arange(self.n_configs)[None, :, None]
            cum[rows >= last[:, None, :]] = 1.0
            self._cum = cum
        return self._cum

    def exact_marginals(self) -> np.ndarray:
        """Configuration law of the discretized chain at each step time."""
        out = np.empty((self.n_steps + 1, self.n_configs))
        p = self.initial_probs.copy()
        out[0] = p
        for k in range(self.n_steps):
            p = self.kernels[k] @ p
            out[k + 1] = p
        return out

    def quantum_marginals(self) -> np.ndarray:
        """|psi_t|^2 configuration law at each step time (the equivariance target)."""
        prop = Propagator(self.model.h_total, self.model.hbar)
        states = prop.evolve_many(self.psi0, self.times)
        return np.array([self.model.pvm.probabilities(s) for s in states])

    def initial_configs(self, u0: np.ndarray) -> np.ndarray:
        cum = np.cumsum(self.initial_probs)
        cum[-1] = 1.0
        cum[np.flatnonzero(self.initial_probs > 0)[-1]:] = 1.0
        return np.searchsorted(cum, u0, side="right").astype(np.int64)

    def run_skeletons(self, q0: np.ndarray, u: np.ndarray) -> np.ndarray:
        traj, bad = kernels.sample_chain(self.cumulative_kernels(), self.defined, q0, u)
        failed = np.flatnonzero(bad >= 0)
        if failed.size:
            i = int(failed[0])
            k = int(bad[i])
            raise RateUndefinedError(
                f"path {i} reached configuration {traj[i, k]} at t={self.times[k]:.6g} "
                "where the jump law is undefined (zero occupation)")
        return traj

    def skeleton_to_path(self, skel: np.ndarray, sector_value=None, seed=None) -> Path:
        moves = np.flatnonzero(skel[1:] != skel[:-1])
        events = tuple((float((k + 0.5) * self.dt), int(skel[k]), int(skel[k + 1])) for k in moves)
        return Path(int(skel[0]), events, self.horizon, sector_value, seed)

    def uniforms(self, seed: int) -> np.ndarray:
        return make_rng(seed).random(self.n_steps + 1)

    def sample(self, n: int, seed: int, sector_function=None) -> PathEnsemble:
        if n < 1:
            raise DomainError("need n >= 1")
        seeds = [derive_seed(seed, i) for i in range(n)]
        u = np.empty((n, self.n_steps + 1))
        for i, s in enumerate(seeds):
            u[i] = self.uniforms(s)
        q0 = self.initial_configs(u[:, 0])
        skel = self.run_skeletons(q0, u[:, 1:])
        paths = [self.skeleton_to_path(skel[i], _sector(sector_function, skel[i, 0]), seeds[i])
                 for i in range(n)]
        return PathEnsemble(paths, skel, self.times, self.model.name, "", seed, self.dt)

    def exact_path_law(self, max_skeletons: int = 5_000_000) -> dict[tuple[int, ...], float]:
        """Exact law of the discretized chain over all step skeletons."""
        if self.n_configs > EXACT_MAX_CONFIGS or self.n_steps > EXACT_MAX_STEPS:
            raise DomainError(
                f"exact path law guard: {self.n_configs} configs (max {EXACT_MAX_CONFIGS}), "
                f"{self.n_steps} steps (max {EXACT_MAX_STEPS})")
        start = np.flatnonzero(self.initial_probs > 0)
        prefixes = start[:, None]
        probs = self.initial_probs[start]
        for k in range(self.n_steps):
            last = prefixes[:, -1]
            if not np.all(self.defined[k, last]):
                raise RateUndefinedError(f"jump law undefined at step {k}")
            trans = self.kernels[k][:, last].T  # (m, n_cfg)
            new_probs = (probs[:, None] * trans).ravel()
            keep = new_probs > 0
            if keep.sum() > max_skeletons:
                raise DomainError("exact path law: too many skeletons")
            rep = np.repeat(prefixes, self.n_configs, axis=0)
            dest = np.tile(np.arange(self.n_configs), prefixes.shape[0])[:, None]
            prefixes = np.hstack([rep, dest])[keep]
            probs = new_probs[keep]
        return {tuple(int(v) for v in row): float(p) for row, p in zip(prefixes, probs)}


def _sector(fn, q):
    return None if fn is None else float(fn(int(q)))


def sample_trajectory(model: Model, psi0, q0: int | str, horizon: float, dt: float,
                      rng_seed: int, process: BellProcess | None = None) -> Path:
    """One Bell trajectory; ``q0="sample"`` draws the start from |psi0|^2."""
    proc = process or BellProcess(model, psi0, horizon, dt)
    u = proc.uniforms(rng_seed)
    if isinstance(q0, str):
        if q0 != "sample":
            raise DomainError(f"q0 must be a configuration index or 'sample', got {q0!r}")
        start = proc.initial_configs(u[:1])
    else:
        start = np.array([int(q0)], dtype=np.int64)
        if proc.initial_probs[start[0]] <= proc.floor:
            raise RateUndefinedError(f"initial configuration {q0} has zero probability")
    skel = proc.run_skeletons(start, u[None, 1:])[0]
    return proc.skeleton_to_path(skel, seed=rng_seed)


def sample_ensemble(model: Model, psi0, n: int, horizon: float, dt: float, seed: int,
                    sector_function=None) -> PathEnsemble:
    """n trajectories with per-path seeds ``derive_seed(seed, i)``."""
    ens = BellProcess(model, psi0, horizon, dt).sample(n, seed, sector_function)
    return ens


def exact_path_law(model: Model, psi0, horizon: float, dt: float) -> dict[tuple[int, ...], float]:
    return BellProcess(model, psi0, horizon, dt, warn=False).exact_path_law()


@dataclass(frozen=True)
class DeterminismResult:
    deterministic: bool
    max_commutator: float
    witness: tuple[int, float] | None
    max_sampled_rate: float
    rates_consistent: bool

    def __bool__(self) -> bool:
        return self.deterministic


def is_deterministic(model: Model, tol: float = 1e-12, h_int=None, n_probe: int = 20,
                     seed: int = 0) -> DeterminismResult:
    """Jump rates vanish for all psi iff [H_I, P(B)] = 0 for every cell B.

    The commutator criterion decides; the rates of ``n_probe`` random states
    are evaluated as a cross-check.
    """
    h_int = model.h_jump if h_int is None else np.asarray(h_int)
    pvm = model.pvm
    worst, witness = 0.0, None
    for q in pvm.used_cells():
        c = commutator_norm(h_int, pvm.projector(q))
        if c > worst:
            worst = c
        if c > tol and witness is None:
            witness = (q, c)
    deterministic = worst <= tol
    rng = np.random.default_rng(seed)
    max_rate = 0.0
    for _ in range(n_probe):
        psi = random_state(model.dim, rng)
        rates, _ = rate_matrix(psi, pvm, h_int, model.hbar)
        max_rate = max(max_rate, float(rates.max()))
    consistent = (max_rate <= tol) == deterministic
    return DeterminismResult(deterministic, worst, witness, max_rate, consistent)


def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))
