"""Compiled and pure-numpy kernels must agree."""
import numpy as np
import pytest

from ssrkit import kernels
from ssrkit._accel import HAVE_NUMBA, numba_enabled

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def _random_kernels(rng, steps, c):
    k = rng.random((steps, c, c)) * (rng.random((steps, c, c)) < 0.6)
    k[:, np.arange(c), np.arange(c)] += 0.5
    k /= k.sum(axis=1, keepdims=True)
    return np.cumsum(k, axis=1)


def test_chain_kernels_agree():
    rng = np.random.default_rng(0)
    cum = _random_kernels(rng, 15, 5)
    defined = np.ones((15, 5), dtype=bool)
    q0 = rng.integers(0, 5, 300)
    u = rng.random((300, 15))
    a, bad_a = kernels.sample_chain(cum, defined, q0, u, use_numba=True)
    b, bad_b = kernels.sample_chain(cum, defined, q0, u, use_numba=False)
    assert np.array_equal(a, b) and np.array_equal(bad_a, bad_b)


def test_chain_flags_undefined_states():
    cum = np.cumsum(np.eye(2)[None].repeat(3, axis=0), axis=1)
    defined = np.array([[True, False]] * 3)
    for flag in (True, False):
        _, bad = kernels.sample_chain(cum, defined, np.array([0, 1]), np.zeros((2, 3)), use_numba=flag)
        assert bad.tolist() == [-1, 0]


@pytest.mark.parametrize("periodic", [False, True])
def test_position_kernels_agree(periodic):
    rng = np.random.default_rng(1)
    v = rng.normal(size=(30, 64))
    x0 = rng.uniform(0, 6.3, 100)
    a, bad_a = kernels.integrate_positions(x0, v, 0.0, 0.1, 0.01, periodic, use_numba=True)
    b, bad_b = kernels.integrate_positions(x0, v, 0.0, 0.1, 0.01, periodic, use_numba=False)
    assert np.allclose(a, b, atol=1e-12) and np.array_equal(bad_a, bad_b)


def test_position_kernel_flags_nan():
    v = np.zeros((3, 10))
    v[:, 4:6] = np.nan
    for flag in (True, False):
        _, bad = kernels.integrate_positions(np.array([0.1, 0.45]), v, 0.0, 0.1, 0.01,
                                             use_numba=flag)
        assert bad[0] == -1 and bad[1] >= 0


def test_flash_kernels_agree():
    rng = np.random.default_rng(2)
    d, X = 4, 3
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    w_step = np.eye(d) * 0.98 + 0.01 * a
    w_half = np.eye(d) * 0.99 + 0.005 * a
    roots = np.array([np.diag(rng.random(d)) for _ in range(X)]).astype(complex)
    phi0 = rng.normal(size=d) + 0j
    phi0 /= np.linalg.norm(phi0)
    u = rng.random((200, 40, 2))
    out_a = kernels.sample_flash_steps(w_step, w_half, roots, phi0, u, 8, use_numba=True)
    out_b = kernels.sample_flash_steps(w_step, w_half, roots, phi0, u, 8, use_numba=False)
    for x, y in zip(out_a[:3], out_b[:3]):
        assert np.array_equal(x, y)
    assert np.allclose(out_a[3], out_b[3], atol=1e-12)


def test_env_flag_selects_numpy(monkeypatch):
    monkeypatch.setenv("SSRKIT_DISABLE_NUMBA", "1")
    assert not numba_enabled()
    monkeypatch.setenv("SSRKIT_DISABLE_NUMBA", "0")
    assert numba_enabled()


def test_bell_sampling_identical_on_both_paths(monkeypatch, fermion_boson):
    from ssrkit.belljump import sample_ensemble
    from ssrkit.hilbert import random_state
    psi = random_state(fermion_boson.dim, 0)
    a = sample_ensemble(fermion_boson, psi, 300, 1.0, 0.05, seed=7).skeletons
    monkeypatch.setenv("SSRKIT_DISABLE_NUMBA", "1")
    b = sample_ensemble(fermion_boson, psi, 300, 1.0, 0.05, seed=7).skeletons
    assert np.array_equal(a, b)
