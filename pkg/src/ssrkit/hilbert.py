"""Finite-dimensional Hilbert space substrate.

States are 1-d complex ``ndarray``s and operators are square complex
``ndarray``s.  Configuration observables are partitions of the basis into
cells (:class:`PVM`); everything else in the package is built on the helpers
here.
"""
from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

HBAR = 1.0
MAX_DIM = 4096
HERMITIAN_TOL = 1e-12


class DomainError(ValueError):
    """Raised when an operation is called outside its mathematical domain."""


def check_dim(dim: int, cap: int | None = None) -> None:
    cap = MAX_DIM if cap is None else cap
    if dim > cap:
        raise DomainError(f"dimension {dim} exceeds cap {cap}")


def as_state(psi, normalized: bool = True, tol: float = 1e-10) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1 or psi.size == 0:
        raise DomainError("state vector must be a non-empty 1-d array")
    if normalized:
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > tol:
            raise DomainError(f"state vector has norm {norm!r}, expected 1")
    return psi


def normalize(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise DomainError("cannot normalize the zero vector")
    return psi / norm


def as_operator(a, dim: int | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"operator must be square, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise DomainError(f"operator has dim {a.shape[0]}, expected {dim}")
    return a


def hermiticity_error(a) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - a.conj().T)))


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_error(a) <= tol


def require_hermitian(a, tol: float = HERMITIAN_TOL, what: str = "operator") -> np.ndarray:
    a = as_operator(a)
    err = hermiticity_error(a)
    if err > tol:
        raise DomainError(f"{what} is not Hermitian (max |A - A^dag| = {err:.3e})")
    return a


def random_state(dim: int, rng: np.random.Generator | int | None = None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    return normalize(rng.normal(size=dim) + 1j * rng.normal(size=dim))


def random_hermitian(dim: int, rng: np.random.Generator | int | None = None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


@dataclass(frozen=True)
class ConfigurationSpace:
    """Finite configuration set with connected-component labels.

    ``adjacency`` holds unordered index pairs ``(i, j)`` with ``i < j`` that are
    linked by a local move; components are supplied explicitly so that
    builders can encode the physical notion of connectedness.
    """

    configs: tuple
    component_of: tuple[int, ...]
    adjacency: frozenset = frozenset()

    def __post_init__(self):
        if len(self.component_of) != len(self.configs):
            raise DomainError("component_of must label every configuration")
        n = len(self.configs)
        for i, j in self.adjacency:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise DomainError(f"adjacency pair {(i, j)} outside configuration space")

    def __len__(self) -> int:
        return len(self.configs)

    @property
    def n_components(self) -> int:
        return len(set(self.component_of))

    def index(self, config) -> int:
        return self.configs.index(config)


@dataclass(frozen=True)
class PVM:
    """Configuration observable: basis index -> configuration cell."""

    cell_of: np.ndarray
    n_cells: int = -1
    _members: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        cell_of = np.asarray(self.cell_of, dtype=np.int64)
        if cell_of.ndim != 1 or cell_of.size == 0:
            raise DomainError("cell_of must be a non-empty 1-d integer array")
        if cell_of.min() < 0:
            raise DomainError("cell indices must be non-negative")
        n_cells = int(cell_of.max()) + 1 if self.n_cells < 0 else self.n_cells
        if cell_of.max() >= n_cells:
            raise DomainError("cell index out of range")
        cell_of.setflags(write=False)
        members = tuple(np.flatnonzero(cell_of == q) for q in range(n_cells))
        object.__setattr__(self, "cell_of", cell_of)
        object.__setattr__(self, "n_cells", n_cells)
        object.__setattr__(self, "_members", members)

    @property
    def dim(self) -> int:
        return self.cell_of.size

    def indices(self, q: int) -> np.ndarray:
        return self._members[q]

    def used_cells(self) -> list[int]:
        return [q for q in range(self.n_cells) if self._members[q].size]

    def projector(self, q: int) -> np.ndarray:
        p = np.zeros((self.dim, self.dim), dtype=complex)
        idx = self._members[q]
        p[idx, idx] = 1.0
        return p

    def indicator(self) -> np.ndarray:
        """(n_cells, dim) 0/1 matrix S with S[q, i] = 1 iff i lies in cell q."""
        s = np.zeros((self.n_cells, self.dim))
        s[self.cell_of, np.arange(self.dim)] = 1.0
        return s

    def probabilities(self, psi) -> np.ndarray:
        """<psi|P(q)|psi> for every cell."""
        w = np.abs(np.asarray(psi)) ** 2
        return np.bincount(self.cell_of, weights=w, minlength=self.n_cells)

    def block_diagonal_part(self, a) -> np.ndarray:
        """sum_q P(q) A P(q)."""
        a = np.asarray(a)
        same = self.cell_of[:, None] == self.cell_of[None, :]
        return np.where(same, a, 0)


@dataclass(frozen=True)
class EigDecomposition:
    eigenvalues: np.ndarray
    projectors: tuple[np.ndarray, ...]
    tol: float

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        return sum(nu * p for nu, p in zip(self.eigenvalues, self.projectors))

    def index_of(self, value: float) -> int | None:
        """Index of the eigenvalue matching ``value`` within the clustering tol."""
        if len(self.eigenvalues) == 0:
            return None
        k = int(np.argmin(np.abs(self.eigenvalues - value)))
        scale = max(1.0, float(np.ptp(self.eigenvalues)))
        return k if abs(self.eigenvalues[k] - value) <= max(self.tol * scale, 1e-9) else None


def build_operator_from_config_function(
    f: Mapping[int, float] | Callable[[int], float] | Sequence[float], pvm: PVM
) -> np.ndarray:
    """Diagonal operator F = sum_q f(q) P(q)."""
    values = np.empty(pvm.n_cells)
    for q in range(pvm.n_cells):
        used = pvm.indices(q).size > 0
        try:
            if callable(f):
                v = f(q)
            else:
                v = f[q]
        except (KeyError, IndexError) as exc:
            if used:
                raise DomainError(f"config function undefined at used configuration {q}") from exc
            v = 0.0
        if v is None:
            if used:
                raise DomainError(f"config function undefined at used configuration {q}")
            v = 0.0
        values[q] = float(v)
    return np.diag(values[pvm.cell_of]).astype(complex)


def commutator(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DomainError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def commutator_norm(a, b) -> float:
    """Max-entry magnitude of AB - BA."""
    c = commutator(a, b)
    return float(np.max(np.abs(c))) if c.size else 0.0


def eigendecompose(g, tol: float = 1e-8) -> EigDecomposition:
    """Spectral decomposition with eigenvalues clustered within ``tol``.

    ``tol`` is relative to the spectral range (or to 1 for a flat spectrum).
    """
    g = require_hermitian(g, what="observable")
    check_dim(g.shape[0])
    w, v = np.linalg.eigh(g)
    scale = max(1.0, float(w[-1] - w[0])) if w.size else 1.0
    cut = tol * scale
    groups: list[list[int]] = [[0]] if w.size else []
    for k in range(1, w.size):
        if w[k] - w[groups[-1][-1]] > cut:
            groups.append([k])
        else:
            groups[-1].append(k)
    values = np.array([w[grp].mean() for grp in groups])
    projectors = []
    for grp in groups:
        vk = v[:, grp]
        projectors.append(vk @ vk.conj().T)
    return EigDecomposition(values, tuple(projectors), tol)


class Propagator:
    """Exact unitary evolution exp(-iHt/hbar) through one diagonalization of H."""

    def __init__(self, h, hbar: float = HBAR):
        h = require_hermitian(h, what="Hamiltonian")
        check_dim(h.shape[0])
        self.hbar = hbar
        self.energies, self.modes = np.linalg.eigh(h)

    @property
    def dim(self) -> int:
        return self.energies.size

    def unitary(self, t: float) -> np.ndarray:
        phase = np.exp(-1j * self.energies * t / self.hbar)
        return (self.modes * phase) @ self.modes.conj().T

    def evolve(self, psi, t: float) -> np.ndarray:
        if not np.isfinite(t):
            raise DomainError("propagation time must be finite")
        coeffs = self.modes.conj().T @ np.asarray(psi, dtype=complex)
        return self.modes @ (np.exp(-1j * self.energies * t / self.hbar) * coeffs)

    def evolve_many(self, psi, times) -> np.ndarray:
        """States at each time, shape (len(times), dim)."""
        times = np.asarray(times, dtype=float)
        coeffs = self.modes.conj().T @ np.asarray(psi, dtype=complex)
        phases = np.exp(-1j * np.outer(times, self.energies) / self.hbar)
        return (phases * coeffs) @ self.modes.T


def propagate(h, psi, t: float, hbar: float = HBAR) -> np.ndarray:
    """exp(-iHt/hbar) psi computed by exact diagonalization."""
    psi = as_state(psi, normalized=False)
    return Propagator(h, hbar).evolve(psi, t)


def expectation(psi, a) -> float:
    psi = np.asarray(psi)
    return float(np.real(np.vdot(psi, np.asarray(a) @ psi)))
