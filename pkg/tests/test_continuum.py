import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ssrkit.continuum import (
    ContinuumModel,
    CrankNicolson,
    Grid,
    GridWavefunction,
    TrajectoryError,
    as_lattice_model,
    cn_step,
    double_well,
    empirical_cell_law,
    gaussian,
    integrate_trajectory,
    parity_counterexample,
    parity_operator,
    sample_positions,
    spin_swap,
    spin_swap_invariance,
    velocity_field,
)
from ssrkit.hilbert import DomainError, commutator_norm

L, N = 2 * np.pi, 128


@pytest.fixture
def ring():
    return ContinuumModel(Grid.periodic(L, N), boundary="periodic")


def plane_wave(grid, m):
    return GridWavefunction(grid, np.exp(1j * m * grid.x) / np.sqrt(L))


@pytest.mark.parametrize("m", [1, 3, 7])
def test_plane_wave_velocity(ring, m):
    dx = ring.grid.dx
    v = velocity_field(plane_wave(ring.grid, m), ring)
    assert np.allclose(v, np.sin(m * dx) / dx, atol=1e-12)
    assert np.allclose(v, m, rtol=(m * dx) ** 2)


@pytest.mark.parametrize("m", [1, 4])
def test_plane_wave_dispersion(ring, m):
    dx, dt = ring.grid.dx, 0.01
    psi = plane_wave(ring.grid, m)
    out = cn_step(psi, ring, dt)
    energy = (1 - np.cos(m * dx)) / dx ** 2
    phase = np.exp(-2j * np.arctan(energy * dt / 2))
    assert np.allclose(out.values, phase * psi.values, atol=1e-12)
    assert energy == pytest.approx(m ** 2 / 2, rel=(m * dx) ** 2)


def test_plane_wave_trajectory_is_straight(ring):
    m, dt = 2, 0.01
    psi_t = CrankNicolson(ring, dt).run(plane_wave(ring.grid, m), 100)
    x = integrate_trajectory(1.0, psi_t, ring, dt)
    v = np.sin(m * ring.grid.dx) / ring.grid.dx
    expected = np.mod(1.0 + v * dt * np.arange(101), L)
    assert np.allclose(x, expected, atol=1e-10)


def test_real_state_does_not_move():
    grid = Grid.symmetric(5.0, 201)
    model = ContinuumModel(grid, potential=0.5 * grid.x ** 2)
    ev, vecs = np.linalg.eigh(model.hamiltonian().toarray())
    psi = GridWavefunction(grid, vecs[:, 0] / np.sqrt(grid.dx))
    assert np.allclose(velocity_field(psi, model), 0, atol=1e-12)
    psi_t = CrankNicolson(model, 0.01).run(psi, 50)
    x = integrate_trajectory(np.array([-1.0, 0.3, 2.0]), psi_t, model, 0.01)
    assert np.allclose(x, x[:, :1], atol=1e-9)
    # eigenstates are stationary: density unchanged
    assert np.allclose(psi_t[-1].density(), psi.density(), atol=1e-10)


def test_norm_is_conserved():
    grid = Grid.symmetric(8.0, 256)
    model = ContinuumModel(grid, potential=double_well(grid, 1.0, 3.0))
    psi = GridWavefunction(grid, gaussian(grid, 0.9, 0.6, 0.4)).normalized()
    cn = CrankNicolson(model, 0.01)
    worst_step = 0.0
    for _ in range(10_000):
        before = psi.norm()
        psi = cn.step(psi)
        worst_step = max(worst_step, abs(psi.norm() - before))
    assert worst_step <= 1e-10 and abs(psi.norm() - 1) <= 1e-7


def test_time_reversal():
    grid = Grid.symmetric(8.0, 256)
    model = ContinuumModel(grid, potential=double_well(grid))
    psi = GridWavefunction(grid, gaussian(grid, -1.0, 0.5, 1.0)).normalized()
    back = CrankNicolson(model, -0.02).step(CrankNicolson(model, 0.02).step(psi))
    assert np.max(np.abs(back.values - psi.values)) < 1e-12


@given(st.floats(0, 2 * np.pi))
def test_velocity_is_phase_invariant(alpha):
    grid = Grid.symmetric(6.0, 128)
    model = ContinuumModel(grid)
    psi = GridWavefunction(grid, gaussian(grid, 0.5, 0.7, 1.3))
    rotated = GridWavefunction(grid, np.exp(1j * alpha) * psi.values)
    a, b = velocity_field(psi, model), velocity_field(rotated, model)
    ok = np.isfinite(a)
    assert np.max(np.abs(a[ok] - b[ok])) <= 1e-13


def test_node_stops_trajectory():
    grid = Grid.symmetric(4.0, 81)
    model = ContinuumModel(grid)
    psi = GridWavefunction(grid, grid.x * np.exp(-grid.x ** 2) * (1 + 0.5j))
    vfield = velocity_field(psi, model)
    assert np.isnan(vfield[40])
    with pytest.raises(TrajectoryError):
        integrate_trajectory(0.0, [psi, psi], model, 0.01)


def test_start_outside_grid_rejected():
    grid = Grid.symmetric(1.0, 11)
    psi = GridWavefunction(grid, gaussian(grid, 0.0, 0.5, 1.0))
    with pytest.raises(DomainError):
        integrate_trajectory(-2.0, [psi], ContinuumModel(grid), 0.1)


def test_model_validation():
    grid = Grid.symmetric(1.0, 11)
    with pytest.raises(DomainError):
        ContinuumModel(grid, potential=np.ones(5))
    with pytest.raises(DomainError):
        ContinuumModel(grid, boundary="absorbing")
    bad = np.zeros((11, 2, 2), complex)
    bad[:, 0, 1] = 1
    with pytest.raises(DomainError):
        ContinuumModel(grid, spin_dim=2, spin_coupling=bad)
    with pytest.raises(DomainError):
        CrankNicolson(ContinuumModel(grid), 0.0)


def test_parity_commutes_but_velocity_differs():
    grid = Grid.symmetric(6.0, 256)
    model = ContinuumModel(grid, potential=double_well(grid, 1.0, 3.0))
    assert commutator_norm(parity_operator(model), model.hamiltonian().toarray()) < 1e-10
    psi = GridWavefunction(grid, gaussian(grid, 0.9, 0.6, 0.4)).normalized()
    rep = parity_counterexample(model, psi)
    assert rep.demonstrates
    assert rep.even_difference > 1e-3 and rep.odd_difference > 1e-3


def test_parity_needs_symmetric_setup():
    with pytest.raises(DomainError):
        parity_operator(ContinuumModel(Grid(0.0, 0.1, 10)))
    grid = Grid.symmetric(3.0, 31)
    model = ContinuumModel(grid, potential=grid.x)
    with pytest.raises(DomainError):
        parity_counterexample(model, GridWavefunction(grid, gaussian(grid, 0, 1)))


def test_spin_swap_symmetry():
    grid = Grid.symmetric(6.0, 128)
    model = ContinuumModel(grid, potential=double_well(grid), spin_dim=2)
    rng = np.random.default_rng(3)
    chi = rng.normal(size=2) + 1j * rng.normal(size=2)
    vals = gaussian(grid, 0.5, 0.8, 0.7)[:, None] * chi[None, :]
    vals[:, 1] *= np.exp(1j * 0.3 * grid.x)
    psi = GridWavefunction(grid, vals).normalized()
    assert np.allclose(spin_swap(spin_swap(psi)).values, psi.values)
    dv, dstate = spin_swap_invariance(psi, model, 0.01, 50)
    assert dv < 1e-10 and dstate < 1e-12


def test_lattice_view(ring):
    m = as_lattice_model(ring)
    assert m.dim == N and m.n_configs == N
    assert np.allclose(m.h_total, ring.hamiltonian().toarray())


def test_sampled_positions_follow_density():
    grid = Grid.symmetric(6.0, 64)
    psi = GridWavefunction(grid, gaussian(grid, 0.5, 1.0)).normalized()
    x = sample_positions(psi, 100_000, np.random.default_rng(0))
    law = empirical_cell_law(x, grid)
    target = psi.density() * grid.dx
    assert 0.5 * np.abs(law - target / target.sum()).sum() < 0.02
