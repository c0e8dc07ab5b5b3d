"""Pure numpy implementations of the inner loops in ``_ckernels.pyx``.

Used when the compiled module is unavailable or ``MEMSTAB_BACKEND=python``.
The Aberth sweep here is Jacobi-style (all roots updated at once) where the
compiled one is Gauss-Seidel; both converge to the same roots.
"""

import numpy as np


def aberth_polish(coeffs, roots, maxiter=50, tol=1e-15):
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    z = np.array(roots, dtype=np.complex128, copy=True)
    n, d = z.shape
    sweeps = np.zeros(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    eye = np.eye(d, dtype=bool)
    for it in range(maxiter):
        if not active.any():
            break
        za = z[active]
        ca = coeffs[active]
        p = np.repeat(ca[:, :1], d, axis=1)
        dp = np.zeros_like(za)
        for m in range(1, d + 1):
            dp = dp * za + p
            p = p * za + ca[:, m:m + 1]
        diff = za[:, :, None] - za[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(eye | (diff == 0), 0, 1 / diff)
            s = inv.sum(axis=2)
            ratio = p / dp
            w = ratio / (1 - ratio * s)
        w = np.where((p == 0) | (dp == 0), 0, w)
        za = za - w
        z[active] = za
        sweeps[active] = it + 1
        done = (np.abs(w) ** 2 <= tol * tol * (1 + np.abs(za) ** 2)).all(axis=1)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return z, sweeps


def modal_rk4(mat, w0, dt, nsteps, stride):
    mat = np.asarray(mat, dtype=np.complex128)
    m = mat.shape[0]
    hm = dt * mat
    # one RK4 step of a linear autonomous system is multiplication by this
    # truncated exponential series
    prop = np.eye(m, dtype=np.complex128)
    term = np.eye(m, dtype=np.complex128)
    for order in range(1, 5):
        term = term @ hm / order
        prop = prop + term
    w = np.array(w0, dtype=np.complex128, copy=True)
    u = np.zeros(nsteps // stride + 1, dtype=np.complex128)
    u[0] = w[0]
    blowup = -1
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, nsteps + 1):
            w = prop @ w
            if not np.isfinite(w[0]):
                blowup = step
                break
            if step % stride == 0:
                u[step // stride] = w[0]
    return u, w, blowup


def memory_rk4(g_int, g_half, xi2, u0, dt, nsteps):
    g_int = np.asarray(g_int, dtype=np.float64)
    g_half = np.asarray(g_half, dtype=np.float64)
    u = np.zeros(nsteps + 1, dtype=np.complex128)
    u[0] = u0
    g0 = g_int[0]
    blowup = -1
    for n in range(nsteps):
        un = u[n]
        if n == 0:
            h0 = hh = h1 = 0.0
        else:
            mid = u[1:n]
            # reversed kernel slices: entry m-1 pairs with g(n - m) etc.
            h0 = 0.5 * g_int[n] * u[0] + 0.5 * g_int[0] * un + np.dot(g_int[n - 1:0:-1], mid)
            hh = 0.5 * g_half[n] * u[0] + 0.5 * g_half[0] * un + np.dot(g_half[n - 1:0:-1], mid)
            h1 = 0.5 * g_int[n + 1] * u[0] + 0.5 * g_int[1] * un + np.dot(g_int[n:1:-1], mid)
            h0 *= dt
            hh *= dt
            h1 *= dt
        k1 = -xi2 * h0
        k2 = -xi2 * (hh + 0.25 * dt * (g_half[0] * un + g0 * (un + 0.5 * dt * k1)))
        k3 = -xi2 * (hh + 0.25 * dt * (g_half[0] * un + g0 * (un + 0.5 * dt * k2)))
        k4 = -xi2 * (h1 + 0.5 * dt * (g_int[1] * un + g0 * (un + dt * k3)))
        u[n + 1] = un + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.isfinite(u[n + 1]):
            blowup = n + 1
            break
    return u, blowup
