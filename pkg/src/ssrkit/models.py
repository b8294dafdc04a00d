"""Finite-dimensional example systems.

Every builder returns a :class:`Model`: configuration space, PVM, the
Hamiltonian split into a cell-block-diagonal part (``h_diag``) and a
jump-generating part (``h_jump``), and a dictionary of named observables.
On a lattice the kinetic term is hopping, which moves configurations, so it
ends up in ``h_jump``.
"""
from __future__ import annotations

import itertools
import json
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from .hilbert import (
    HBAR,
    PVM,
    ConfigurationSpace,
    DomainError,
    build_operator_from_config_function,
    check_dim,
    hermiticity_error,
)


@dataclass(frozen=True)
class Factorization:
    """Tensor split H = H_S (x) H_E of a model's Hilbert space.

    ``perm[k]`` is the model basis index of the factored index
    ``k = s * dim_e + e``.  ``env_cell_of`` gives the environment
    configuration cell of each environment index.
    """

    dim_s: int
    dim_e: int
    perm: np.ndarray
    env_cell_of: np.ndarray

    def to_factored(self, a) -> np.ndarray:
        a = np.asarray(a)
        if a.ndim == 1:
            return a[self.perm]
        return a[np.ix_(self.perm, self.perm)]

    def from_factored(self, a) -> np.ndarray:
        a = np.asarray(a)
        out = np.empty_like(a)
        if a.ndim == 1:
            out[self.perm] = a
        else:
            out[np.ix_(self.perm, self.perm)] = a
        return out

    def split(self, h) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Hilbert-Schmidt orthogonal split into (H_S, H_E, H_SE)."""
        hf = self.to_factored(h).reshape(self.dim_s, self.dim_e, self.dim_s, self.dim_e)
        tr_e = np.einsum("iaja->ij", hf) / self.dim_e
        tr_s = np.einsum("aiaj->ij", hf) / self.dim_s
        shift = np.trace(tr_e) / self.dim_s
        h_s = tr_e - shift * np.eye(self.dim_s)
        h_e = tr_s
        local = np.kron(h_s, np.eye(self.dim_e)) + np.kron(np.eye(self.dim_s), h_e)
        h_se = self.to_factored(h) - local
        return h_s, h_e, h_se


@dataclass(frozen=True)
class Model:
    space: ConfigurationSpace
    pvm: PVM
    h_total: np.ndarray
    h_diag: np.ndarray
    h_jump: np.ndarray
    named_observables: Mapping[str, np.ndarray]
    hbar: float = HBAR
    name: str = "model"
    params: Mapping = field(default_factory=dict)
    factorization: Factorization | None = None

    @property
    def dim(self) -> int:
        return self.h_total.shape[0]

    @property
    def n_configs(self) -> int:
        return len(self.space)

    def config_function(self, f: Callable[[object], float]) -> np.ndarray:
        """Operator of a function given on configuration *labels*."""
        return build_operator_from_config_function(lambda q: f(self.space.configs[q]), self.pvm)

    def invariant_errors(self) -> dict[str, float]:
        """Sizes of the Model invariants' residuals (all should be ~0)."""
        pvm = self.pvm
        in_cell = pvm.block_diagonal_part(self.h_jump)
        return {
            "split": float(np.max(np.abs(self.h_total - self.h_diag - self.h_jump))),
            "h_total_hermitian": hermiticity_error(self.h_total),
            "h_diag_hermitian": hermiticity_error(self.h_diag),
            "h_jump_hermitian": hermiticity_error(self.h_jump),
            "h_diag_off_cell": float(np.max(np.abs(self.h_diag - pvm.block_diagonal_part(self.h_diag)))),
            "h_jump_in_cell": float(np.max(np.abs(in_cell))),
        }


def split_hamiltonian(h, pvm: PVM) -> tuple[np.ndarray, np.ndarray]:
    """(h_diag, h_jump): cell-block-diagonal part and the remainder."""
    h = np.asarray(h, dtype=complex)
    h_diag = pvm.block_diagonal_part(h)
    return h_diag, h - h_diag


def model_from_hamiltonian(
    h,
    cell_of,
    *,
    configs: Sequence | None = None,
    component_of: Sequence[int] | None = None,
    named_observables: Mapping[str, np.ndarray] | None = None,
    hbar: float = HBAR,
    name: str = "explicit",
    params: Mapping | None = None,
    factorization: Factorization | None = None,
) -> Model:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DomainError(f"Hamiltonian must be square, got {h.shape}")
    check_dim(h.shape[0])
    err = hermiticity_error(h)
    if err > 1e-12:
        raise DomainError(f"Hamiltonian is not Hermitian (error {err:.3e})")
    pvm = PVM(np.asarray(cell_of))
    if pvm.dim != h.shape[0]:
        raise DomainError("cell_of length must equal the Hamiltonian dimension")
    n = pvm.n_cells
    configs = tuple(configs) if configs is not None else tuple(range(n))
    if component_of is None:
        component_of = tuple(range(n))
    space = ConfigurationSpace(configs, tuple(int(c) for c in component_of))
    h_diag, h_jump = split_hamiltonian(h, pvm)
    return Model(space, pvm, h, h_diag, h_jump, dict(named_observables or {}), hbar, name,
                 dict(params or {}), factorization)


# -- fermion-boson lattice field theory --------------------------------------

@dataclass(frozen=True)
class FockBasisSpec:
    """Truncated Fock basis for spinless lattice fermions emitting bosons.

    ``coupling`` maps site distance |x - y| to phi(|x - y|); the default is
    an on-site coupling of strength ``g``.
    """

    sites: int
    fermion_counts: frozenset
    max_total_bosons: int
    mass_f: float = 1.0
    mass_b: float = 1.0
    dx: float = 1.0
    g: float = 0.5
    coupling: Mapping[int, float] | None = None
    onsite_f: Sequence[float] | None = None
    hbar: float = HBAR

    def phi(self, distance: int) -> float:
        if self.coupling is None:
            return self.g if distance == 0 else 0.0
        return float(self.coupling.get(distance, 0.0))

    def hopping(self, mass: float) -> float:
        return self.hbar ** 2 / (2 * mass * self.dx ** 2)


def _boson_occupations(sites: int, max_total: int):
    for occ in itertools.product(range(max_total + 1), repeat=sites):
        if sum(occ) <= max_total:
            yield occ


def fock_basis(spec: FockBasisSpec) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    fermions = [occ for occ in itertools.product((0, 1), repeat=spec.sites)
                if sum(occ) in spec.fermion_counts]
    bosons = list(_boson_occupations(spec.sites, spec.max_total_bosons))
    return [(f, b) for f in fermions for b in bosons]


def build_fermion_boson_model(spec: FockBasisSpec, dim_cap: int | None = None) -> Model:
    if spec.sites < 1:
        raise DomainError("need at least one site")
    if not spec.fermion_counts:
        raise DomainError("fermion_counts must not be empty")
    if any(c < 0 or c > spec.sites for c in spec.fermion_counts):
        raise DomainError("fermion counts must lie in [0, sites]")
    if spec.max_total_bosons < 0:
        raise DomainError("max_total_bosons must be non-negative")
    basis = fock_basis(spec)
    dim = len(basis)
    check_dim(dim, dim_cap)
    index = {cfg: i for i, cfg in enumerate(basis)}
    L = spec.sites
    tf = spec.hopping(spec.mass_f)
    tb = spec.hopping(spec.mass_b)
    onsite = np.zeros(L) if spec.onsite_f is None else np.asarray(spec.onsite_f, dtype=float)
    h = np.zeros((dim, dim))

    for i, (nf, nb) in enumerate(basis):
        # discrete Laplacian: 2t on-site per particle
        h[i, i] += 2 * tf * sum(nf) + 2 * tb * sum(nb) + float(np.dot(onsite, nf))
        for x in range(L - 1):
            # nearest-neighbour fermion hop; no sites in between, so no JW sign
            if nf[x] != nf[x + 1]:
                moved = list(nf)
                moved[x], moved[x + 1] = moved[x + 1], moved[x]
                j = index[(tuple(moved), nb)]
                h[j, i] += -tf
            # boson hop b_{x+1}^dag b_x (the h.c. is generated from the partner state)
            if nb[x] > 0:
                moved = list(nb)
                moved[x] -= 1
                moved[x + 1] += 1
                j = index[(nf, tuple(moved))]
                amp = -tb * np.sqrt(nb[x] * (nb[x + 1] + 1))
                h[j, i] += amp
                h[i, j] += amp
        # emission: sum_x n_f(x) sum_y phi(x-y) b_y^dag; absorption is its adjoint
        if sum(nb) < spec.max_total_bosons:
            for y in range(L):
                c = sum(nf[x] * spec.phi(abs(x - y)) for x in range(L))
                if c == 0:
                    continue
                moved = list(nb)
                moved[y] += 1
                j = index[(nf, tuple(moved))]
                amp = c * np.sqrt(nb[y] + 1)
                h[j, i] += amp
                h[i, j] += amp

    sectors = sorted({(sum(f), sum(b)) for f, b in basis})
    sector_id = {s: k for k, s in enumerate(sectors)}
    component_of = tuple(sector_id[(sum(f), sum(b))] for f, b in basis)
    adjacency = set()
    for i, j in zip(*np.nonzero(np.triu(h, 1))):
        if component_of[i] == component_of[j]:
            adjacency.add((int(i), int(j)))
    space = ConfigurationSpace(tuple(basis), component_of, frozenset(adjacency))
    pvm = PVM(np.arange(dim))
    h = h.astype(complex)
    h_diag, h_jump = split_hamiltonian(h, pvm)
    observables = {
        "fermion_number": build_operator_from_config_function(lambda q: sum(basis[q][0]), pvm),
        "boson_number": build_operator_from_config_function(lambda q: sum(basis[q][1]), pvm),
    }
    params = {"sites": L, "fermion_counts": sorted(spec.fermion_counts),
              "max_total_bosons": spec.max_total_bosons}
    return Model(space, pvm, h, h_diag, h_jump, observables, spec.hbar, "fermion_boson", params)


# -- two disconnected components ---------------------------------------------

def build_two_component_model(
    sites_per_component: int,
    particles: int,
    potential: Mapping[int, float] | Sequence[float] | Callable[[int], float] | None = None,
    hopping: float = 1.0,
    hbar: float = HBAR,
    dim_cap: int | None = None,
) -> Model:
    """Distinguishable particles on two disjoint chains C1 = [0, s) and C2 = [s, 2s)."""
    s = int(sites_per_component)
    if particles < 1:
        raise DomainError("need at least one particle")
    if s < 1:
        raise DomainError("need at least one site per component")
    n_sites = 2 * s
    dim = n_sites ** particles
    check_dim(dim, dim_cap)
    if potential is None:
        pot = np.zeros(n_sites)
    elif callable(potential):
        pot = np.array([float(potential(x)) for x in range(n_sites)])
    elif isinstance(potential, Mapping):
        pot = np.array([float(potential.get(x, 0.0)) for x in range(n_sites)])
    else:
        pot = np.asarray(potential, dtype=float)
        if pot.size != n_sites:
            raise DomainError(f"potential needs {n_sites} values, got {pot.size}")

    def comp(x):
        return 0 if x < s else 1

    configs = list(itertools.product(range(n_sites), repeat=particles))
    index = {c: i for i, c in enumerate(configs)}
    h = np.zeros((dim, dim))
    adjacency = set()
    for i, q in enumerate(configs):
        h[i, i] = sum(pot[x] for x in q)
        for p, x in enumerate(q):
            y = x + 1
            if y < n_sites and comp(y) == comp(x):
                moved = list(q)
                moved[p] = y
                j = index[tuple(moved)]
                h[i, j] = h[j, i] = -hopping
                adjacency.add((min(i, j), max(i, j)))
    # component label: which chain each particle is on
    comp_labels = sorted({tuple(comp(x) for x in q) for q in configs})
    comp_id = {c: k for k, c in enumerate(comp_labels)}
    component_of = tuple(comp_id[tuple(comp(x) for x in q)] for q in configs)
    space = ConfigurationSpace(tuple(configs), component_of, frozenset(adjacency))
    pvm = PVM(np.arange(dim))
    h = h.astype(complex)
    h_diag, h_jump = split_hamiltonian(h, pvm)
    observables = {
        "component_index": build_operator_from_config_function(
            lambda q: 1.0 + comp(configs[q][0]), pvm),
    }
    params = {"sites_per_component": s, "particles": particles}
    return Model(space, pvm, h, h_diag, h_jump, observables, hbar, "two_component", params)


# -- spinning particles on a chain -------------------------------------------

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def spin_matrices(spin_dim: int) -> dict[str, np.ndarray]:
    """Twice the spin-s matrices (the Pauli matrices for spin_dim 2)."""
    if spin_dim == 2:
        return dict(PAULI)
    s = (spin_dim - 1) / 2
    m = s - np.arange(spin_dim)
    sp = np.zeros((spin_dim, spin_dim), dtype=complex)
    for k in range(1, spin_dim):
        sp[k - 1, k] = np.sqrt(s * (s + 1) - m[k] * (m[k] + 1))
    sx = (sp + sp.conj().T) / 2
    sy = (sp - sp.conj().T) / 2j
    sz = np.diag(m).astype(complex)
    return {"x": 2 * sx, "y": 2 * sy, "z": 2 * sz}


def _default_pair_potential(x: int, y: int) -> float:
    return 1.0 / (1.0 + abs(x - y))


def build_spin_lattice_model(
    sites: int,
    particles: int,
    spin_dim: int = 2,
    magnetic_profile: Mapping[int, float] | Sequence[float] | None = None,
    hopping: float = 1.0,
    potential: Sequence[float] | None = None,
    pair_potential: Callable[[int, int], float] | None = _default_pair_potential,
    hbar: float = HBAR,
    dim_cap: int | None = None,
) -> Model:
    """Distinguishable spinning particles; spin is internal to each position cell.

    Basis index = position_index * spin_dim**particles + spin_index, so the
    field-free Hamiltonian is exactly ``H_pos (x) 1_spin``.  A magnetic
    profile B(x) adds ``sum_i B(x_i) sigma_z^(i)``.
    """
    if spin_dim < 2:
        raise DomainError("spin_dim must be at least 2")
    if sites < 1 or particles < 1:
        raise DomainError("need at least one site and one particle")
    n_pos = sites ** particles
    n_spin = spin_dim ** particles
    dim = n_pos * n_spin
    check_dim(dim, dim_cap)
    pot = np.zeros(sites) if potential is None else np.asarray(potential, dtype=float)
    positions = list(itertools.product(range(sites), repeat=particles))
    pindex = {q: i for i, q in enumerate(positions)}
    h_pos = np.zeros((n_pos, n_pos))
    adjacency = set()
    for i, q in enumerate(positions):
        h_pos[i, i] = sum(pot[x] for x in q)
        if pair_potential is not None:
            h_pos[i, i] += sum(pair_potential(q[a], q[b])
                               for a in range(particles) for b in range(a + 1, particles))
        for p, x in enumerate(q):
            if x + 1 < sites:
                moved = list(q)
                moved[p] = x + 1
                j = pindex[tuple(moved)]
                h_pos[i, j] = h_pos[j, i] = -hopping
                adjacency.add((min(i, j), max(i, j)))
    eye_spin = np.eye(n_spin)
    h = np.kron(h_pos, eye_spin).astype(complex)

    smats = spin_matrices(spin_dim)

    def one_spin(op, particle):
        mats = [np.eye(spin_dim)] * particles
        mats = list(mats)
        mats[particle] = op
        out = np.array([[1.0 + 0j]])
        for m in mats:
            out = np.kron(out, m)
        return out

    if magnetic_profile is not None:
        if isinstance(magnetic_profile, Mapping):
            field_ = np.array([float(magnetic_profile.get(x, 0.0)) for x in range(sites)])
        else:
            field_ = np.asarray(magnetic_profile, dtype=float)
            if field_.size != sites:
                raise DomainError(f"magnetic_profile needs {sites} values")
        for p in range(particles):
            bz = np.diag([field_[q[p]] for q in positions])
            h = h + np.kron(bz, one_spin(smats["z"], p))

    pvm = PVM(np.repeat(np.arange(n_pos), n_spin))
    h_diag, h_jump = split_hamiltonian(h, pvm)
    eye_pos = np.eye(n_pos)
    observables = {}
    for p in range(particles):
        for k, m in smats.items():
            op = np.kron(eye_pos, one_spin(m, p))
            observables[f"sigma_{k}_{p}"] = op
            if p == 0:
                observables[f"sigma_{k}"] = op
    # system = spin of particle 0; environment = positions (x) remaining spins
    rest = spin_dim ** (particles - 1)
    dim_e = n_pos * rest
    perm = np.empty(dim, dtype=np.int64)
    env_cell = np.empty(dim_e, dtype=np.int64)
    for s0 in range(spin_dim):
        for pos in range(n_pos):
            for r in range(rest):
                e = pos * rest + r
                perm[s0 * dim_e + e] = pos * n_spin + s0 * rest + r
                env_cell[e] = pos
    fact = Factorization(spin_dim, dim_e, perm, env_cell)
    space = ConfigurationSpace(tuple(positions), tuple([0] * n_pos), frozenset(adjacency))
    params = {"sites": sites, "particles": particles, "spin_dim": spin_dim,
              "field": magnetic_profile is not None}
    return Model(space, pvm, h, h_diag, h_jump, observables, hbar, "spin_lattice", params, fact)


def spin_swap_unitary(model: Model, particle: int = 0, pair: tuple[int, int] = (0, 1)) -> np.ndarray:
    """1_pos (x) (swap of two spin levels of one particle)."""
    sd = model.params["spin_dim"]
    n_part = model.params["particles"]
    swap = np.eye(sd)
    a, b = pair
    swap[[a, b]] = swap[[b, a]]
    out = np.array([[1.0]])
    for p in range(n_part):
        out = np.kron(out, swap if p == particle else np.eye(sd))
    n_pos = model.dim // out.shape[0]
    return np.kron(np.eye(n_pos), out).astype(complex)


# -- config documents ---------------------------------------------------------

_NUM = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}

PARAM_SCHEMAS = {
    "fermion_boson": {
        "type": "object",
        "required": ["sites", "fermion_counts", "max_total_bosons"],
        "properties": {
            "sites": _POS_INT,
            "fermion_counts": {"type": "array", "items": {"type": "integer", "minimum": 0},
                               "minItems": 1},
            "max_total_bosons": {"type": "integer", "minimum": 0},
            "mass_f": {"type": "number", "exclusiveMinimum": 0},
            "mass_b": {"type": "number", "exclusiveMinimum": 0},
            "dx": {"type": "number", "exclusiveMinimum": 0},
            "g": _NUM,
            "coupling": {"type": "array", "items": _NUM},
            "onsite_f": {"type": "array", "items": _NUM},
        },
        "additionalProperties": False,
    },
    "two_component": {
        "type": "object",
        "required": ["sites_per_component", "particles"],
        "properties": {
            "sites_per_component": _POS_INT,
            "particles": _POS_INT,
            "potential": {"type": "array", "items": _NUM},
            "hopping": _NUM,
        },
        "additionalProperties": False,
    },
    "spin_lattice": {
        "type": "object",
        "required": ["sites", "particles"],
        "properties": {
            "sites": _POS_INT,
            "particles": _POS_INT,
            "spin_dim": {"type": "integer", "minimum": 2},
            "magnetic_profile": {"type": "array", "items": _NUM},
            "hopping": _NUM,
            "potential": {"type": "array", "items": _NUM},
        },
        "additionalProperties": False,
    },
    "explicit": {
        "type": "object",
        "required": ["h_real", "cell_of"],
        "properties": {
            "h_real": {"type": "array", "items": {"type": "array", "items": _NUM}},
            "h_imag": {"type": "array", "items": {"type": "array", "items": _NUM}},
            "cell_of": {"type": "array", "items": {"type": "integer", "minimum": 0}},
            "component_of": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        },
        "additionalProperties": False,
    },
}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["builder"],
    "properties": {
        "builder": {"type": "string"},
        "params": {"type": "object"},
        "hbar": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Config document failed validation; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.message = message
        self.path = path


def _field_path(prefix: str, err: jsonschema.ValidationError) -> str:
    parts = [prefix] if prefix else []
    parts += [str(p) for p in err.absolute_path]
    if err.validator == "required":
        missing = err.message.split("'")[1] if "'" in err.message else ""
        parts.append(missing)
    elif err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        parts.append(extra[0] if extra else "")
    return ".".join(p for p in parts if p)


def validate(doc, schema, prefix: str = "") -> None:
    validator = jsonschema.Draft7Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, _field_path(prefix, err))


def build_model(builder: str, params: Mapping, hbar: float = HBAR) -> Model:
    """Dispatch to a named builder with already-parsed parameters."""
    if builder not in PARAM_SCHEMAS:
        raise ConfigError(f"unknown builder {builder!r}", "builder")
    validate(dict(params), PARAM_SCHEMAS[builder], "params")
    p = dict(params)
    if builder == "fermion_boson":
        coupling = p.pop("coupling", None)
        spec = FockBasisSpec(
            sites=p["sites"],
            fermion_counts=frozenset(p["fermion_counts"]),
            max_total_bosons=p["max_total_bosons"],
            mass_f=p.get("mass_f", 1.0),
            mass_b=p.get("mass_b", 1.0),
            dx=p.get("dx", 1.0),
            g=p.get("g", 0.5),
            coupling=None if coupling is None else dict(enumerate(coupling)),
            onsite_f=p.get("onsite_f"),
            hbar=hbar,
        )
        return build_fermion_boson_model(spec)
    if builder == "two_component":
        return build_two_component_model(p["sites_per_component"], p["particles"],
                                         p.get("potential"), p.get("hopping", 1.0), hbar)
    if builder == "spin_lattice":
        return build_spin_lattice_model(p["sites"], p["particles"], p.get("spin_dim", 2),
                                        p.get("magnetic_profile"), p.get("hopping", 1.0),
                                        p.get("potential"), hbar=hbar)
    h = np.asarray(p["h_real"], dtype=float)
    if "h_imag" in p:
        h = h + 1j * np.asarray(p["h_imag"], dtype=float)
    return model_from_hamiltonian(h, p["cell_of"], component_of=p.get("component_of"),
                                  hbar=hbar, params=p)


def load_model_from_config(text: str | Mapping) -> Model:
    """Build a Model from a JSON document ``{"builder", "params", "hbar"}``."""
    if isinstance(text, Mapping):
        doc = dict(text)
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("model document must be an object")
    validate(doc, MODEL_SCHEMA)
    return build_model(doc["builder"], doc.get("params", {}), float(doc.get("hbar", HBAR)))
