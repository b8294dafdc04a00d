import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ssrkit.belljump import (
    BellProcess,
    Path,
    RateUndefinedError,
    derive_seed,
    exact_path_law,
    is_deterministic,
    jump_rates,
    rate_matrix,
    sample_ensemble,
    sample_trajectory,
    total_variation,
)
from ssrkit.hilbert import PVM, random_hermitian, random_state
from ssrkit.models import model_from_hamiltonian
from ssrkit.stats import chi2_goodness_of_fit

SX = np.array([[0, 1], [1, 0]], dtype=complex)
PSI_I = np.array([1, 1j]) / np.sqrt(2)


@pytest.fixture
def qubit():
    return model_from_hamiltonian(SX, [0, 1])


def test_two_level_rates(qubit):
    # config "2" (index 1) -> config "1" (index 0) at rate 2; the reverse is 0
    assert jump_rates(PSI_I, 1, qubit).rates == {0: pytest.approx(2.0)}
    assert jump_rates(PSI_I, 0, qubit).rates == {1: 0.0}


def test_rates_hbar_scaling():
    m = model_from_hamiltonian(SX, [0, 1], hbar=2.0)
    assert jump_rates(PSI_I, 1, m).rates[0] == pytest.approx(1.0)


def test_real_state_has_no_rates(fermion_boson, rng):
    psi = rng.normal(size=fermion_boson.dim)
    psi /= np.linalg.norm(psi)
    rates, _ = rate_matrix(psi, fermion_boson.pvm, fermion_boson.h_jump.real)
    assert np.all(rates == 0)


def test_no_rates_into_other_fermion_sectors(fermion_boson, rng):
    m = fermion_boson
    nf = np.array([sum(f) for f, _ in m.space.configs])
    psi = np.where(nf == 1, rng.normal(size=m.dim) + 1j * rng.normal(size=m.dim), 0)
    psi /= np.linalg.norm(psi)
    rates, occupied = rate_matrix(psi, m.pvm, m.h_jump)
    assert np.all(rates[np.ix_(nf == 2, nf == 1)] == 0)
    assert not occupied[nf == 2].any()


def test_unoccupied_source_raises(qubit):
    with pytest.raises(RateUndefinedError):
        jump_rates(np.array([1.0, 0.0]), 1, qubit)


@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_rates_are_one_sided_and_nonnegative(seed, dim):
    rng = np.random.default_rng(seed)
    cells = rng.integers(0, max(2, dim // 2), size=dim)
    cells[:2] = [0, 1]
    pvm = PVM(cells)
    h = random_hermitian(dim, rng)
    psi = random_state(dim, rng)
    rates, occupied = rate_matrix(psi, pvm, h)
    assert np.all(rates >= 0)
    assert np.all(np.diag(rates) == 0)
    both = np.outer(occupied, occupied)
    assert np.all((rates * rates.T)[both] == 0)


def test_rate_matrix_matches_direct_formula(rng):
    dim = 6
    cells = np.array([0, 0, 1, 2, 2, 2])
    pvm = PVM(cells)
    h = random_hermitian(dim, rng)
    psi = random_state(dim, rng)
    rates, _ = rate_matrix(psi, pvm, h)
    for q in range(3):
        for qp in range(3):
            if q == qp:
                continue
            val = np.vdot(psi, pvm.projector(q) @ h @ pvm.projector(qp) @ psi)
            expected = 2 * max(0.0, val.imag) / pvm.probabilities(psi)[qp]
            assert rates[q, qp] == pytest.approx(expected, abs=1e-13)


def test_no_jump_part_means_no_events():
    h = np.diag([0.3, -0.2, 1.0]).astype(complex)
    m = model_from_hamiltonian(h, [0, 1, 2])
    psi = random_state(3, 4)
    path = sample_trajectory(m, psi, "sample", 2.0, 0.05, rng_seed=11)
    assert path.events == ()
    law = exact_path_law(m, psi, 0.5, 0.1)
    probs = np.abs(psi) ** 2
    assert law == {tuple([q] * 6): pytest.approx(probs[q]) for q in range(3)}


def test_initial_hazard_matches_rate(qubit):
    proc = BellProcess(qubit, PSI_I, 0.01, 0.01)
    n = 2_000_000
    u = np.random.default_rng(5).random((n, 1))
    skel = proc.run_skeletons(np.ones(n, dtype=np.int64), u)
    hazard = np.mean(skel[:, 1] == 0) / proc.dt
    assert hazard == pytest.approx(2.0, rel=0.05)


def test_fermion_count_constant_on_paths(fermion_boson):
    m = fermion_boson
    psi = random_state(m.dim, 8)
    ens = sample_ensemble(m, psi, 500, 1.0, 0.05, seed=3)
    nf = np.array([sum(f) for f, _ in m.space.configs])
    counts = nf[ens.skeletons]
    assert np.all(counts == counts[:, :1])


def test_single_path_ensemble_matches_trajectory(fermion_boson):
    psi = random_state(fermion_boson.dim, 2)
    ens = sample_ensemble(fermion_boson, psi, 1, 1.0, 0.05, seed=99)
    path = sample_trajectory(fermion_boson, psi, "sample", 1.0, 0.05, rng_seed=derive_seed(99, 0))
    assert ens.paths[0] == path


def test_seeded_reproducibility(fermion_boson):
    psi = random_state(fermion_boson.dim, 2)
    a = sample_ensemble(fermion_boson, psi, 50, 1.0, 0.05, seed=1)
    b = sample_ensemble(fermion_boson, psi, 50, 1.0, 0.05, seed=1)
    c = sample_ensemble(fermion_boson, psi, 50, 1.0, 0.05, seed=2)
    assert a.paths == b.paths
    assert not np.array_equal(a.skeletons, c.skeletons)


def test_initial_distribution(fermion_boson):
    psi = random_state(fermion_boson.dim, 6)
    n = 4000
    ens = sample_ensemble(fermion_boson, psi, n, 0.2, 0.05, seed=4)
    emp = ens.empirical_distribution(0, fermion_boson.n_configs)
    target = fermion_boson.pvm.probabilities(psi)
    assert total_variation(emp, target) <= 3 * np.sqrt(fermion_boson.n_configs / n)


def test_discretization_error_is_second_order(fermion_boson):
    psi = random_state(fermion_boson.dim, 1)
    errs = []
    for dt in (0.1, 0.05):
        proc = BellProcess(fermion_boson, psi, 1.0, dt, warn=False)
        errs.append(np.max(np.abs(proc.exact_marginals() - proc.quantum_marginals())))
    assert errs[1] < errs[0] / 2.5


def test_exact_law_two_level(qubit):
    law = exact_path_law(qubit, PSI_I, 0.2, 0.1)
    assert sum(law.values()) == pytest.approx(1.0, abs=1e-12)
    assert 1 <= len(law) <= 8
    assert all(len(k) == 3 for k in law)


def test_exact_law_matches_monte_carlo():
    h = SX + np.diag([0.4, -0.3])
    m = model_from_hamiltonian(h, [0, 1])
    proc = BellProcess(m, PSI_I, 0.5, 0.1)
    law = proc.exact_path_law()
    assert sum(law.values()) == pytest.approx(1.0, abs=1e-9)
    ens = proc.sample(100_000, seed=21)
    keys = list(law)
    index = {k: i for i, k in enumerate(keys)}
    counts = np.zeros(len(keys))
    for row in map(tuple, ens.skeletons):
        counts[index[row]] += 1
    res = chi2_goodness_of_fit(counts, [law[k] for k in keys], "skeleton", 0.01)
    assert res.passed, res


def test_exact_law_guard(fermion_boson):
    with pytest.raises(Exception, match="guard"):
        exact_path_law(fermion_boson, random_state(9, 1), 1.0, 0.1)


def test_dt_guard_warns(qubit):
    from ssrkit.belljump import DtGuardWarning
    with pytest.warns(DtGuardWarning):
        BellProcess(qubit, PSI_I, 1.0, 0.5)


def test_determinism_criterion(qubit, rng):
    diag = model_from_hamiltonian(np.diag([1.0, 2.0]), [0, 1])
    assert is_deterministic(diag).deterministic
    res = is_deterministic(qubit)
    assert not res.deterministic and res.witness[0] == 0
    cells = np.repeat(np.arange(3), 2)
    h = random_hermitian(6, rng)
    h = np.where(cells[:, None] == cells[None, :], h, 0)
    res = is_deterministic(model_from_hamiltonian(h, cells))
    assert res.deterministic and res.max_sampled_rate <= 1e-12 and res.rates_consistent


def test_path_validation():
    p = Path(0, ((0.1, 0, 1), (0.4, 1, 2)), 1.0)
    assert p.final_config == 2 and p.config_at(0.2) == 1 and p.visited() == [0, 1, 2]
    with pytest.raises(ValueError):
        Path(0, ((0.4, 0, 1), (0.1, 1, 2)), 1.0)
    with pytest.raises(ValueError):
        Path(0, ((0.1, 1, 2),), 1.0)
    with pytest.raises(ValueError):
        Path(0, ((1.5, 0, 1),), 1.0)


def test_jumps_recorded_at_step_midpoints(fermion_boson):
    psi = random_state(fermion_boson.dim, 3)
    ens = sample_ensemble(fermion_boson, psi, 200, 1.0, 0.05, seed=5)
    for p in ens.paths:
        for t, _, _ in p.events:
            k = t / 0.05 - 0.5
            assert abs(k - round(k)) < 1e-9
