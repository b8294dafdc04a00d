"""Inner loops of the Monte-Carlo samplers.

Each kernel exists twice: a numba-compiled per-sample loop and a numpy
version vectorized over samples.  Both consume the same pre-drawn uniforms,
so they return identical results; :func:`ssrkit._accel.numba_enabled`
selects one at call time.
"""
from __future__ import annotations

import numpy as np

from ._accel import njit, numba_enabled

# -- Markov chain skeletons ---------------------------------------------------


@njit
def _sample_chain_numba(cum_kernels, defined, q0, u):
    n, n_steps = u.shape
    n_cfg = cum_kernels.shape[1]
    traj = np.empty((n, n_steps + 1), dtype=np.int64)
    bad = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        q = q0[i]
        traj[i, 0] = q
        for k in range(n_steps):
            if not defined[k, q]:
                bad[i] = k
                for kk in range(k + 1, n_steps + 1):
                    traj[i, kk] = -1
                break
            r = u[i, k]
            dest = 0
            while dest < n_cfg - 1 and r >= cum_kernels[k, dest, q]:
                dest += 1
            q = dest
            traj[i, k + 1] = q
    return traj, bad


def _sample_chain_numpy(cum_kernels, defined, q0, u):
    n, n_steps = u.shape
    n_cfg = cum_kernels.shape[1]
    traj = np.empty((n, n_steps + 1), dtype=np.int64)
    bad = np.full(n, -1, dtype=np.int64)
    q = q0.astype(np.int64).copy()
    traj[:, 0] = q
    alive = np.ones(n, dtype=bool)
    for k in range(n_steps):
        safe_q = np.where(alive, q, 0)
        newly_bad = alive & ~defined[k, safe_q]
        bad[newly_bad] = k
        alive &= ~newly_bad
        cum = cum_kernels[k][:, safe_q]  # (n_cfg, n)
        dest = np.sum(u[:, k][None, :] >= cum[:-1], axis=0)
        q = np.where(alive, np.minimum(dest, n_cfg - 1), -1)
        traj[:, k + 1] = q
    return traj, bad


def sample_chain(cum_kernels, defined, q0, u, use_numba: bool | None = None):
    """Sample chain skeletons.

    ``cum_kernels[k, j, q]`` is the cumulative probability of landing in a
    destination <= j when leaving ``q`` at step ``k``; ``defined[k, q]`` is
    False where the transition law does not exist.  Returns ``(traj, bad)``
    where ``bad[i]`` is the step at which sample ``i`` hit an undefined
    state (-1 if never).
    """
    cum_kernels = np.ascontiguousarray(cum_kernels, dtype=np.float64)
    defined = np.ascontiguousarray(defined, dtype=np.bool_)
    q0 = np.ascontiguousarray(q0, dtype=np.int64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    if use_numba is None:
        use_numba = numba_enabled()
    if use_numba:
        return _sample_chain_numba(cum_kernels, defined, q0, u)
    return _sample_chain_numpy(cum_kernels, defined, q0, u)


# -- Bohmian positions --------------------------------------------------------


@njit
def _interp_numba(v, x, x_min, dx, periodic):
    n = v.shape[0]
    s = (x - x_min) / dx
    if periodic:
        s = s % n
        j = int(np.floor(s))
        frac = s - j
        j1 = (j + 1) % n
        j = j % n
    else:
        if s <= 0.0:
            return v[0]
        if s >= n - 1:
            return v[n - 1]
        j = int(np.floor(s))
        frac = s - j
        j1 = j + 1
    return (1.0 - frac) * v[j] + frac * v[j1]


@njit
def _wrap_numba(x, x_min, dx, n, periodic):
    if periodic:
        length = n * dx
        return x_min + (x - x_min) % length
    x_max = x_min + (n - 1) * dx
    # reflect at the walls
    while x < x_min or x > x_max:
        if x < x_min:
            x = 2 * x_min - x
        if x > x_max:
            x = 2 * x_max - x
    return x


@njit
def _integrate_numba(x0, vfields, x_min, dx, dt, periodic):
    n = x0.shape[0]
    n_steps = vfields.shape[0] - 1
    n_grid = vfields.shape[1]
    out = np.empty((n, n_steps + 1))
    bad = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        x = x0[i]
        out[i, 0] = x
        for k in range(n_steps):
            v0 = _interp_numba(vfields[k], x, x_min, dx, periodic)
            xm = _wrap_numba(x + 0.5 * dt * v0, x_min, dx, n_grid, periodic)
            vmid = 0.5 * (_interp_numba(vfields[k], xm, x_min, dx, periodic)
                          + _interp_numba(vfields[k + 1], xm, x_min, dx, periodic))
            if not (np.isfinite(v0) and np.isfinite(vmid)):
                bad[i] = k
                for kk in range(k + 1, n_steps + 1):
                    out[i, kk] = np.nan
                break
            x = _wrap_numba(x + dt * vmid, x_min, dx, n_grid, periodic)
            out[i, k + 1] = x
    return out, bad


def _interp_numpy(v, x, x_min, dx, periodic):
    n = v.shape[0]
    s = (x - x_min) / dx
    if periodic:
        s = np.mod(s, n)
        j = np.floor(s).astype(np.int64)
        frac = s - j
        j = j % n
        j1 = (j + 1) % n
    else:
        s = np.clip(s, 0.0, n - 1)
        j = np.minimum(np.floor(s).astype(np.int64), n - 2)
        frac = s - j
        j1 = j + 1
    return (1.0 - frac) * v[j] + frac * v[j1]


def _wrap_numpy(x, x_min, dx, n, periodic):
    if periodic:
        return x_min + np.mod(x - x_min, n * dx)
    x_max = x_min + (n - 1) * dx
    x = np.asarray(x, dtype=float).copy()
    for _ in range(64):
        low = x < x_min
        x[low] = 2 * x_min - x[low]
        high = x > x_max
        x[high] = 2 * x_max - x[high]
        if not (low.any() or high.any()):
            break
    return x


def _integrate_numpy(x0, vfields, x_min, dx, dt, periodic):
    n = x0.shape[0]
    n_steps = vfields.shape[0] - 1
    n_grid = vfields.shape[1]
    out = np.empty((n, n_steps + 1))
    bad = np.full(n, -1, dtype=np.int64)
    x = x0.astype(float).copy()
    out[:, 0] = x
    alive = np.ones(n, dtype=bool)
    for k in range(n_steps):
        # stopped particles sit at NaN; evaluate them at a dummy point and keep them masked
        xs = np.where(alive, x, x_min)
        v0 = _interp_numpy(vfields[k], xs, x_min, dx, periodic)
        xm = _wrap_numpy(xs + 0.5 * dt * np.where(np.isfinite(v0), v0, 0.0), x_min, dx, n_grid, periodic)
        vmid = 0.5 * (_interp_numpy(vfields[k], xm, x_min, dx, periodic)
                      + _interp_numpy(vfields[k + 1], xm, x_min, dx, periodic))
        ok = np.isfinite(v0) & np.isfinite(vmid)
        newly_bad = alive & ~ok
        bad[newly_bad] = k
        alive &= ok
        x = np.where(alive, _wrap_numpy(xs + dt * np.where(ok, vmid, 0.0), x_min, dx, n_grid, periodic),
                     np.nan)
        out[:, k + 1] = x
    return out, bad


def integrate_positions(x0, vfields, x_min, dx, dt, periodic=False, use_numba: bool | None = None):
    """Explicit-midpoint integration of dx/dt = v(x, t) for many particles.

    ``vfields`` has shape (n_steps + 1, n_grid): the velocity on the grid at
    each output time; the midpoint field is the average of its neighbours.
    NaN marks undefined velocity (nodes); a particle touching one stops and
    is flagged in ``bad``.
    """
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    vfields = np.ascontiguousarray(vfields, dtype=np.float64)
    if use_numba is None:
        use_numba = numba_enabled()
    if use_numba:
        return _integrate_numba(x0, vfields, float(x_min), float(dx), float(dt), bool(periodic))
    return _integrate_numpy(x0, vfields, float(x_min), float(dx), float(dt), bool(periodic))


# -- GRW flashes --------------------------------------------------------------


@njit
def _matvec(a, x):
    d = a.shape[0]
    y = np.zeros(d, dtype=np.complex128)
    for r in range(d):
        acc = 0j
        for c in range(d):
            acc += a[r, c] * x[c]
        y[r] = acc
    return y


@njit
def _norm2(x):
    acc = 0.0
    for j in range(x.shape[0]):
        acc += x[j].real * x[j].real + x[j].imag * x[j].imag
    return acc


@njit
def _flash_numba(w_step, w_half, sqrt_lams, phi0, u, max_flashes):
    n, n_steps, _ = u.shape
    n_loc = sqrt_lams.shape[0]
    d = phi0.shape[0]
    steps = np.full((n, max_flashes), -1, dtype=np.int64)
    locs = np.full((n, max_flashes), -1, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    final = np.empty((n, d), dtype=np.complex128)
    weights = np.empty(n_loc)
    for i in range(n):
        phi = phi0.copy()
        for k in range(n_steps):
            nxt = _matvec(w_step, phi)
            before = _norm2(phi)
            survive = _norm2(nxt) / before
            if u[i, k, 0] < survive:
                phi = nxt
                continue
            half = _matvec(w_half, phi)
            total = 0.0
            for x in range(n_loc):
                weights[x] = _norm2(_matvec(sqrt_lams[x], half))
                total += weights[x]
            r = u[i, k, 1] * total
            x = 0
            acc = weights[0]
            while x < n_loc - 1 and r >= acc:
                x += 1
                acc += weights[x]
            post = _matvec(w_half, _matvec(sqrt_lams[x], half))
            scale = np.sqrt(_norm2(post))
            if scale == 0.0:
                counts[i] = -1
                break
            phi = post / scale
            c = counts[i]
            if c < max_flashes:
                steps[i, c] = k
                locs[i, c] = x
            counts[i] = c + 1
        final[i] = phi
    return steps, locs, counts, final


def _flash_numpy(w_step, w_half, sqrt_lams, phi0, u, max_flashes):
    n, n_steps, _ = u.shape
    n_loc = sqrt_lams.shape[0]
    steps = np.full((n, max_flashes), -1, dtype=np.int64)
    locs = np.full((n, max_flashes), -1, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    phi = np.tile(phi0, (n, 1))
    alive = np.ones(n, dtype=bool)
    for k in range(n_steps):
        nxt = phi @ w_step.T
        before = np.sum(np.abs(phi) ** 2, axis=1)
        survive = np.sum(np.abs(nxt) ** 2, axis=1) / np.where(before > 0, before, 1.0)
        flash = alive & (u[:, k, 0] >= survive)
        stay = ~flash
        phi[stay] = nxt[stay]
        if not flash.any():
            continue
        idx = np.flatnonzero(flash)
        half = phi[idx] @ w_half.T
        cand = np.einsum("xab,nb->nxa", sqrt_lams, half)
        weights = np.sum(np.abs(cand) ** 2, axis=2)
        cum = np.cumsum(weights, axis=1)
        r = u[idx, k, 1] * cum[:, -1]
        x = np.minimum(np.sum(r[:, None] >= cum[:, :-1], axis=1), n_loc - 1)
        post = cand[np.arange(idx.size), x] @ w_half.T
        scale = np.sqrt(np.sum(np.abs(post) ** 2, axis=1))
        dead = scale == 0.0
        counts[idx[dead]] = -1
        alive[idx[dead]] = False
        good = ~dead
        gi = idx[good]
        phi[gi] = post[good] / scale[good][:, None]
        c = counts[gi]
        slot = c < max_flashes
        steps[gi[slot], c[slot]] = k
        locs[gi[slot], c[slot]] = x[good][slot]
        counts[gi] = c + 1
    return steps, locs, counts, phi


def sample_flash_steps(w_step, w_half, sqrt_lams, phi0, u, max_flashes, use_numba: bool | None = None):
    """Run the stepped flash process for ``u.shape[0]`` independent histories.

    Per step the no-flash probability is ``|W_dt phi|^2 / |phi|^2``; on a
    flash the location is drawn from ``|Lambda(x)^1/2 W_dt/2 phi|^2`` and
    phi becomes ``W_dt/2 Lambda(x)^1/2 W_dt/2 phi`` (renormalized).
    ``u`` has shape (n, n_steps, 2).  Returns step indices and location
    indices of the first ``max_flashes`` flashes, the flash counts (-1 on
    norm underflow) and the final normalized-then-propagated states.
    """
    args = (np.ascontiguousarray(w_step, dtype=np.complex128),
            np.ascontiguousarray(w_half, dtype=np.complex128),
            np.ascontiguousarray(sqrt_lams, dtype=np.complex128),
            np.ascontiguousarray(phi0, dtype=np.complex128),
            np.ascontiguousarray(u, dtype=np.float64),
            int(max_flashes))
    if use_numba is None:
        use_numba = numba_enabled()
    if use_numba:
        return _flash_numba(*args)
    return _flash_numpy(*args)
