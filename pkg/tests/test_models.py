import json

import numpy as np
import pytest

from ssrkit.hilbert import DomainError, commutator_norm
from ssrkit.models import (
    ConfigError,
    FockBasisSpec,
    build_fermion_boson_model,
    build_model,
    build_spin_lattice_model,
    build_two_component_model,
    fock_basis,
    load_model_from_config,
    model_from_hamiltonian,
    spin_matrices,
    spin_swap_unitary,
)


def assert_model_invariants(model):
    errs = model.invariant_errors()
    assert errs["split"] <= 1e-12
    for key in ("h_total_hermitian", "h_diag_hermitian", "h_jump_hermitian"):
        assert errs[key] <= 1e-12
    assert errs["h_diag_off_cell"] == 0
    assert errs["h_jump_in_cell"] == 0


def test_trivial_fermion_boson_model():
    m = build_fermion_boson_model(FockBasisSpec(1, frozenset({0, 1}), 0))
    assert m.dim == 2
    assert np.all(m.h_jump == 0)
    assert commutator_norm(m.named_observables["fermion_number"], m.h_total) == 0
    assert_model_invariants(m)


def test_single_fermion_two_sites():
    spec = FockBasisSpec(2, frozenset({1}), 1)
    m = build_fermion_boson_model(spec)
    assert m.dim == 6
    basis = fock_basis(spec)
    for i, j in zip(*np.nonzero(m.h_jump)):
        assert sum(basis[i][0]) == sum(basis[j][0])
    assert_model_invariants(m)


def test_fermion_boson_sector_structure(fermion_boson):
    m = fermion_boson
    assert_model_invariants(m)
    basis = m.space.configs
    nf = np.array([sum(f) for f, _ in basis])
    nb = np.array([sum(b) for _, b in basis])
    rows, cols = np.nonzero(m.h_jump)
    assert np.all(nf[rows] == nf[cols])
    assert np.all(np.abs(nb[rows] - nb[cols]) <= 1)
    # independent number operator from occupations
    number = np.diag(nf).astype(complex)
    assert np.max(np.abs(m.named_observables["fermion_number"] - number)) <= 1e-12
    assert commutator_norm(m.named_observables["fermion_number"], m.h_total) <= 1e-12
    # sector blocks: H restricted between different fermion numbers vanishes
    assert np.all(m.h_total[np.ix_(nf == 1, nf == 2)] == 0)


def test_fermion_boson_hopping_and_emission_values():
    spec = FockBasisSpec(2, frozenset({1}), 1, mass_f=0.5, dx=1.0, g=0.3)
    m = build_fermion_boson_model(spec)
    idx = {c: i for i, c in enumerate(m.space.configs)}
    a = idx[((1, 0), (0, 0))]
    b = idx[((0, 1), (0, 0))]
    c = idx[((1, 0), (1, 0))]
    assert m.h_total[a, b] == pytest.approx(-1.0)  # hbar^2/(2 m dx^2)
    assert m.h_total[a, c] == pytest.approx(0.3)
    assert m.h_total[a, a] == pytest.approx(2.0)


def test_fermion_boson_rejects_bad_spec():
    with pytest.raises(DomainError):
        build_fermion_boson_model(FockBasisSpec(2, frozenset({3}), 1))
    with pytest.raises(DomainError):
        build_fermion_boson_model(FockBasisSpec(4, frozenset({2}), 6), dim_cap=50)


def test_two_component_model():
    m = build_two_component_model(2, 1)
    assert m.dim == 4
    comp = np.array([0 if q[0] < 2 else 1 for q in m.space.configs])
    assert np.all(m.h_jump[np.ix_(comp == 0, comp == 1)] == 0)
    assert commutator_norm(m.named_observables["component_index"], m.h_total) <= 1e-12
    for i, j in m.space.adjacency:
        assert m.space.component_of[i] == m.space.component_of[j]
    assert_model_invariants(m)


def test_two_component_two_particles():
    m = build_two_component_model(2, 2, potential=lambda x: 0.1 * x)
    assert m.dim == 16
    assert m.space.n_components == 4
    assert commutator_norm(m.named_observables["component_index"], m.h_total) <= 1e-12


def test_spin_model_without_field():
    m = build_spin_lattice_model(3, 1)
    assert_model_invariants(m)
    sx = m.named_observables["sigma_x"]
    assert commutator_norm(sx, m.h_total) == 0
    n_pos = 3
    h_pos = m.h_total[::2, ::2]
    assert np.allclose(m.h_total, np.kron(h_pos, np.eye(2)))
    u = spin_swap_unitary(m)
    assert np.max(np.abs(u @ m.h_total @ u.conj().T - m.h_total)) <= 1e-12
    assert m.dim == 2 * n_pos


def test_spin_model_with_field():
    m = build_spin_lattice_model(2, 1, magnetic_profile=[1.0, 2.0])
    assert commutator_norm(m.named_observables["sigma_z"], m.h_total) <= 1e-12
    assert commutator_norm(m.named_observables["sigma_x"], m.h_total) > 0.1


def test_spin_permutations_commute_two_particles():
    m = build_spin_lattice_model(2, 2, spin_dim=3)
    for p in range(2):
        for pair in ((0, 1), (1, 2), (0, 2)):
            assert commutator_norm(spin_swap_unitary(m, p, pair), m.h_total) <= 1e-12


def test_spin_matrices_commutation():
    for d in (2, 3, 4):
        s = spin_matrices(d)
        lhs = s["x"] @ s["y"] - s["y"] @ s["x"]
        assert np.allclose(lhs, 2j * s["z"])


def test_factorization_split_recombines():
    m = build_spin_lattice_model(2, 1, magnetic_profile=[0.5, 1.5])
    f = m.factorization
    h_s, h_e, h_se = f.split(m.h_total)
    local = np.kron(h_s, np.eye(f.dim_e)) + np.kron(np.eye(f.dim_s), h_e)
    assert np.allclose(local + h_se, f.to_factored(m.h_total))
    assert np.allclose(f.from_factored(f.to_factored(m.h_total)), m.h_total)
    # the interaction is orthogonal to local terms
    assert abs(np.trace(h_se @ np.kron(np.eye(f.dim_s), h_e))) < 1e-10


def test_load_model_matches_direct_builder(fermion_boson):
    doc = {"builder": "fermion_boson",
           "params": {"sites": 2, "fermion_counts": [1, 2], "max_total_bosons": 1}}
    m = load_model_from_config(json.dumps(doc))
    assert np.array_equal(m.h_total, fermion_boson.h_total)


def test_unknown_builder_is_named():
    with pytest.raises(ConfigError, match="nope") as info:
        load_model_from_config({"builder": "nope"})
    assert info.value.path == "builder"


def test_missing_field_path_is_named():
    with pytest.raises(ConfigError) as info:
        load_model_from_config({"builder": "two_component", "params": {"particles": 1}})
    assert info.value.path == "params.sites_per_component"
    with pytest.raises(ConfigError) as info:
        load_model_from_config({"builder": "two_component",
                                "params": {"particles": 0, "sites_per_component": 2}})
    assert info.value.path == "params.particles"


def test_explicit_builder():
    m = build_model("explicit", {"h_real": [[0, 1], [1, 0]], "cell_of": [0, 1]})
    assert np.allclose(m.h_jump, [[0, 1], [1, 0]])
    with pytest.raises(DomainError):
        model_from_hamiltonian([[0, 1], [0, 0]], [0, 1])
