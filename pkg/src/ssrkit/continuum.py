"""1-d grid Bohmian mechanics with spinor wave functions.

Grid values are stored as arrays of shape (n_points, spin_dim).  Norms carry
the ``dx`` measure.  The Hamiltonian is the 3-point discrete Laplacian plus
a potential and an optional per-point spin coupling; evolution is
Crank-Nicolson.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .hilbert import HBAR, DomainError, commutator_norm
from .models import Model, model_from_hamiltonian

DENSITY_FLOOR = 1e-12


class TrajectoryError(RuntimeError):
    def __init__(self, message: str, position: float, time: float):
        super().__init__(message)
        self.position = position
        self.time = time


@dataclass(frozen=True)
class Grid:
    x0: float
    dx: float
    n: int

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    @classmethod
    def symmetric(cls, half_width: float, n: int) -> "Grid":
        """Grid on [-half_width, half_width] with x_j = -x_{n-1-j}."""
        dx = 2 * half_width / (n - 1)
        return cls(-half_width, dx, n)

    @classmethod
    def periodic(cls, length: float, n: int, x0: float = 0.0) -> "Grid":
        return cls(x0, length / n, n)


@dataclass(frozen=True)
class GridWavefunction:
    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.n:
            raise DomainError(f"expected {self.grid.n} grid values, got {v.shape[0]}")
        object.__setattr__(self, "values", v)

    @property
    def spin_dim(self) -> int:
        return self.values.shape[1]

    def density(self) -> np.ndarray:
        return np.sum(np.abs(self.values) ** 2, axis=1)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.density()) * self.grid.dx))

    def normalized(self) -> "GridWavefunction":
        return replace(self, values=self.values / self.norm())

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def with_flat(self, flat, time=None) -> "GridWavefunction":
        t = self.time if time is None else time
        return GridWavefunction(self.grid, np.asarray(flat).reshape(self.grid.n, -1), t)


@dataclass(frozen=True)
class ContinuumModel:
    grid: Grid
    mass: float = 1.0
    potential: np.ndarray | None = None
    spin_dim: int = 1
    spin_coupling: np.ndarray | None = None
    boundary: str = "reflecting"
    hbar: float = HBAR
    _cache: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.boundary not in ("reflecting", "periodic"):
            raise DomainError(f"unknown boundary {self.boundary!r}")
        pot = np.zeros(self.grid.n) if self.potential is None else np.asarray(self.potential, float)
        if pot.shape != (self.grid.n,) or not np.all(np.isfinite(pot)):
            raise DomainError("potential must be finite with one value per grid point")
        object.__setattr__(self, "potential", pot)
        if self.spin_coupling is not None:
            sc = np.asarray(self.spin_coupling, dtype=complex)
            if sc.shape != (self.grid.n, self.spin_dim, self.spin_dim):
                raise DomainError("spin_coupling must have shape (n, spin_dim, spin_dim)")
            if np.max(np.abs(sc - np.conj(np.swapaxes(sc, 1, 2)))) > 1e-12:
                raise DomainError("spin_coupling must be Hermitian at every point")
            object.__setattr__(self, "spin_coupling", sc)

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    def hamiltonian(self) -> sp.csr_matrix:
        if "h" not in self._cache:
            self._cache["h"] = _hamiltonian(self)
        return self._cache["h"]


def _hamiltonian(model: ContinuumModel) -> sp.csr_matrix:
    n, s = model.grid.n, model.spin_dim
    t = model.hbar ** 2 / (2 * model.mass * model.grid.dx ** 2)
    main = 2 * t + model.potential
    lap = sp.diags([np.full(n - 1, -t), main, np.full(n - 1, -t)], [-1, 0, 1], format="lil",
                   dtype=complex)
    if model.periodic:
        lap[0, n - 1] = -t
        lap[n - 1, 0] = -t
    h = sp.kron(lap.tocsr(), sp.identity(s), format="csr")
    if model.spin_coupling is not None:
        h = h + sp.block_diag(list(model.spin_coupling), format="csr")
    return h.tocsr()


class CrankNicolson:
    """(1 + iH dt/2hbar) psi' = (1 - iH dt/2hbar) psi, factorized once."""

    def __init__(self, model: ContinuumModel, dt: float):
        if dt == 0:
            raise DomainError("dt must be non-zero")
        self.model = model
        self.dt = dt
        h = model.hamiltonian()
        a = 0.5j * dt / model.hbar
        eye = sp.identity(h.shape[0], format="csc", dtype=complex)
        self._lhs = splu((eye + a * h).tocsc())
        self._rhs = (eye - a * h).tocsr()

    def step(self, psi: GridWavefunction) -> GridWavefunction:
        out = self._lhs.solve(self._rhs @ psi.flat())
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("Crank-Nicolson solve produced non-finite values")
        return psi.with_flat(out, psi.time + self.dt)

    def run(self, psi: GridWavefunction, n_steps: int) -> list[GridWavefunction]:
        out = [psi]
        for _ in range(n_steps):
            psi = self.step(psi)
            out.append(psi)
        return out


def cn_step(psi: GridWavefunction, model: ContinuumModel, dt: float) -> GridWavefunction:
    key = ("cn", dt)
    if key not in model._cache:
        model._cache[key] = CrankNicolson(model, dt)
    return model._cache[key].step(psi)


def _shift(values, step, periodic):
    """values[j + step] with zero (Dirichlet) or wrapped boundary."""
    if periodic:
        return np.roll(values, -step, axis=0)
    out = np.zeros_like(values)
    if step > 0:
        out[:-step] = values[step:]
    else:
        out[-step:] = values[:step]
    return out


def velocity_field(psi: GridWavefunction, model: ContinuumModel) -> np.ndarray:
    """(hbar/m) Im(psi* d psi) / psi* psi on the grid; NaN at nodes."""
    v = psi.values
    grad = (_shift(v, 1, model.periodic) - _shift(v, -1, model.periodic)) / (2 * psi.grid.dx)
    num = np.sum(np.conj(v) * grad, axis=1).imag
    den = np.sum(np.abs(v) ** 2, axis=1)
    out = np.full(v.shape[0], np.nan)
    ok = den > DENSITY_FLOOR
    out[ok] = (model.hbar / model.mass) * num[ok] / den[ok]
    return out


def integrate_trajectory(x0, psi_t, model: ContinuumModel, dt: float) -> np.ndarray:
    """Positions along the Bohmian trajectory through a psi_t sequence.

    ``psi_t`` is the wave function at times 0, dt, 2dt, ...; ``x0`` may be a
    scalar (returns shape (len(psi_t),)) or an array of starting points
    (returns (n, len(psi_t))).
    """
    vfields = np.array([velocity_field(p, model) for p in psi_t])
    return integrate_velocity_fields(x0, vfields, model, dt)


def integrate_velocity_fields(x0, vfields, model: ContinuumModel, dt: float) -> np.ndarray:
    scalar = np.ndim(x0) == 0
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    grid = model.grid
    hi = grid.x0 + grid.dx * (grid.n if model.periodic else grid.n - 1)
    if np.any((x0 < grid.x0) | (x0 > hi)):
        raise DomainError("starting positions must lie within the grid")
    out, bad = kernels.integrate_positions(x0, vfields, grid.x0, grid.dx, dt, model.periodic)
    failed = np.flatnonzero(bad >= 0)
    if failed.size:
        i = int(failed[0])
        k = int(bad[i])
        raise TrajectoryError(
            f"undefined velocity near x={out[i, k]:.6g} at t={k * dt:.6g}", float(out[i, k]), k * dt)
    return out[0] if scalar else out


def sample_positions(psi: GridWavefunction, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw positions from |psi|^2: a cell by its weight, then uniform within it."""
    p = psi.density() * psi.grid.dx
    p = p / p.sum()
    cells = rng.choice(psi.grid.n, size=n, p=p)
    x = psi.grid.x0 + psi.grid.dx * (cells + rng.uniform(-0.5, 0.5, size=n))
    return np.clip(x, psi.grid.x0, psi.grid.x0 + psi.grid.dx * (psi.grid.n - 1))


def empirical_cell_law(x, grid: Grid, periodic: bool = False) -> np.ndarray:
    """Histogram of positions over grid cells (nearest grid point)."""
    j = np.rint((np.asarray(x) - grid.x0) / grid.dx).astype(np.int64)
    j = j % grid.n if periodic else np.clip(j, 0, grid.n - 1)
    return np.bincount(j, minlength=grid.n) / max(1, j.size)


# -- lattice view -------------------------------------------------------------

def as_lattice_model(model: ContinuumModel) -> Model:
    """The discretized Hamiltonian as a finite Model; one cell per grid point."""
    h = model.hamiltonian().toarray()
    cell_of = np.repeat(np.arange(model.grid.n), model.spin_dim)
    return model_from_hamiltonian(h, cell_of, configs=tuple(model.grid.x), component_of=[0] * model.grid.n,
                                  hbar=model.hbar, name="continuum_grid")


def parity_operator(model: ContinuumModel) -> np.ndarray:
    """(G psi)(x) = psi(-x) on a symmetric grid."""
    g = model.grid
    if not np.allclose(g.x, -g.x[::-1], atol=1e-12 * max(1.0, abs(g.x0))):
        raise DomainError("parity needs a grid symmetric about 0")
    n, s = g.n, model.spin_dim
    perm = np.eye(n)[::-1]
    return np.kron(perm, np.eye(s)).astype(complex)


def reflect(psi: GridWavefunction) -> GridWavefunction:
    return GridWavefunction(psi.grid, psi.values[::-1], psi.time)


def double_well(grid: Grid, depth: float = 1.0, separation: float = 2.0) -> np.ndarray:
    """V(x) = depth * ((x/a)^2 - 1)^2, symmetric with minima at +-a."""
    a = separation / 2
    return depth * ((grid.x / a) ** 2 - 1) ** 2


def gaussian(grid: Grid, center: float, width: float, k: float = 0.0) -> np.ndarray:
    x = grid.x
    return np.exp(-((x - center) ** 2) / (4 * width ** 2) + 1j * k * x)


@dataclass(frozen=True)
class ParityReport:
    even_difference: float
    odd_difference: float
    parity_commutator: float
    even_weight: float
    odd_weight: float
    generic: bool
    threshold: float

    @property
    def demonstrates(self) -> bool:
        """Parity commutes with H but the velocity depends on both parts."""
        return self.generic and min(self.even_difference, self.odd_difference) > self.threshold


def parity_counterexample(model: ContinuumModel, psi: GridWavefunction,
                          threshold: float = 1e-3) -> ParityReport:
    """Compare v^psi with the velocities of its even and odd components."""
    g = parity_operator(model)
    comm = commutator_norm(g, model.hamiltonian().toarray())
    if np.max(np.abs(model.potential - model.potential[::-1])) > 1e-12:
        raise DomainError("potential is not symmetric")
    flipped = reflect(psi).values
    even = 0.5 * (psi.values + flipped)
    odd = 0.5 * (psi.values - flipped)
    dx = psi.grid.dx
    w_even = float(np.sum(np.abs(even) ** 2) * dx)
    w_odd = float(np.sum(np.abs(odd) ** 2) * dx)
    generic = w_even > 1e-12 and w_odd > 1e-12
    v = velocity_field(psi, model)

    def diff(part, weight):
        if weight <= 1e-12:
            return 0.0
        vp = velocity_field(GridWavefunction(psi.grid, part / np.sqrt(weight)), model)
        ok = np.isfinite(v) & np.isfinite(vp)
        return float(np.max(np.abs(v[ok] - vp[ok]))) if ok.any() else 0.0

    return ParityReport(diff(even, w_even), diff(odd, w_odd), comm, w_even, w_odd, generic, threshold)


def spin_swap(psi: GridWavefunction, pair=(0, 1)) -> GridWavefunction:
    v = psi.values.copy()
    a, b = pair
    v[:, [a, b]] = v[:, [b, a]]
    return GridWavefunction(psi.grid, v, psi.time)


def spin_swap_invariance(psi: GridWavefunction, model: ContinuumModel, dt: float,
                         n_steps: int) -> tuple[float, float]:
    """(max |v^{U psi_t} - v^{psi_t}|, max |(U psi)_t - U psi_t|) over the run."""
    cn = CrankNicolson(model, dt)
    a, b = psi, spin_swap(psi)
    worst_v = worst_state = 0.0
    for k in range(n_steps + 1):
        va, vb = velocity_field(a, model), velocity_field(spin_swap(a), model)
        ok = np.isfinite(va) & np.isfinite(vb)
        worst_v = max(worst_v, float(np.max(np.abs(va[ok] - vb[ok]), initial=0.0)))
        worst_state = max(worst_state, float(np.max(np.abs(spin_swap(a).values - b.values))))
        if k < n_steps:
            a, b = cn.step(a), cn.step(b)
    return worst_v, worst_state
