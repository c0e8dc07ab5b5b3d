# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Same signatures as :mod:`memstab._pykernels`."""

import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()

ctypedef double complex cplx


cdef inline double cabs2(cplx z) nogil:
    return z.real * z.real + z.imag * z.imag


def aberth_polish(cplx[:, ::1] coeffs, cplx[:, ::1] roots, int maxiter=50, double tol=1e-15):
    """Refine root approximations of many polynomials by Aberth-Ehrlich sweeps.

    ``coeffs`` rows hold coefficients from the highest degree down. Returns the
    refined roots and the number of sweeps used per row.
    """
    cdef Py_ssize_t n = roots.shape[0], d = roots.shape[1]
    cdef Py_ssize_t r, i, j, m, it
    cdef cplx p, dp, ratio, s, w, z, diff
    cdef double step, scale
    cdef bint done
    out = np.array(roots, dtype=np.complex128, copy=True)
    cdef cplx[:, ::1] z_ = out
    sweeps = np.zeros(n, dtype=np.int64)
    cdef long long[::1] sweeps_ = sweeps
    with nogil:
        for r in range(n):
            for it in range(maxiter):
                done = True
                for i in range(d):
                    z = z_[r, i]
                    p = coeffs[r, 0]
                    dp = 0
                    for m in range(1, d + 1):
                        dp = dp * z + p
                        p = p * z + coeffs[r, m]
                    if p == 0 or dp == 0:
                        continue
                    ratio = p / dp
                    s = 0
                    for j in range(d):
                        if j != i:
                            diff = z - z_[r, j]
                            if diff != 0:
                                s = s + 1 / diff
                    w = ratio / (1 - ratio * s)
                    z_[r, i] = z - w
                    scale = 1 + cabs2(z)
                    step = cabs2(w)
                    if step > tol * tol * scale:
                        done = False
                sweeps_[r] = it + 1
                if done:
                    break
    return out, sweeps


def modal_rk4(cplx[:, ::1] mat, cplx[::1] w0, double dt, Py_ssize_t nsteps, Py_ssize_t stride):
    """Classical RK4 for dW/dt = mat @ W, recording W[0] every ``stride`` steps.

    Returns ``(u_samples, w_final, blowup_step)``; ``blowup_step`` is -1 unless
    the state became non-finite, in which case integration stops there.
    """
    cdef Py_ssize_t m = w0.shape[0]
    cdef Py_ssize_t nrec = nsteps // stride + 1
    cdef Py_ssize_t step, i, j, rec = 0
    cdef long long blowup = -1
    cdef double h = dt
    u = np.zeros(nrec, dtype=np.complex128)
    w = np.array(w0, dtype=np.complex128, copy=True)
    k1a = np.empty(m, dtype=np.complex128)
    k2a = np.empty(m, dtype=np.complex128)
    k3a = np.empty(m, dtype=np.complex128)
    k4a = np.empty(m, dtype=np.complex128)
    tmpa = np.empty(m, dtype=np.complex128)
    cdef cplx[::1] u_ = u, w_ = w, k1 = k1a, k2 = k2a, k3 = k3a, k4 = k4a, tmp = tmpa
    cdef cplx acc
    u_[0] = w_[0]
    with nogil:
        for step in range(1, nsteps + 1):
            for i in range(m):
                acc = 0
                for j in range(m):
                    acc = acc + mat[i, j] * w_[j]
                k1[i] = acc
            for i in range(m):
                tmp[i] = w_[i] + 0.5 * h * k1[i]
            for i in range(m):
                acc = 0
                for j in range(m):
                    acc = acc + mat[i, j] * tmp[j]
                k2[i] = acc
            for i in range(m):
                tmp[i] = w_[i] + 0.5 * h * k2[i]
            for i in range(m):
                acc = 0
                for j in range(m):
                    acc = acc + mat[i, j] * tmp[j]
                k3[i] = acc
            for i in range(m):
                tmp[i] = w_[i] + h * k3[i]
            for i in range(m):
                acc = 0
                for j in range(m):
                    acc = acc + mat[i, j] * tmp[j]
                k4[i] = acc
            for i in range(m):
                w_[i] = w_[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])
            if not (isfinite(w_[0].real) and isfinite(w_[0].imag)):
                blowup = step
                break
            if step % stride == 0:
                rec = step // stride
                u_[rec] = w_[0]
    return u, w, blowup


def memory_rk4(double[::1] g_int, double[::1] g_half, double xi2, cplx u0, double dt, Py_ssize_t nsteps):
    """RK4 for u' = -xi2 * int_0^t g(t-s) u(s) ds with trapezoidal history sums.

    ``g_int[m] = g(m dt)`` for m = 0..nsteps+1 and ``g_half[m] = g((m+1/2) dt)``
    for m = 0..nsteps. Returns ``(u, blowup_step)``.
    """
    cdef Py_ssize_t n, m
    cdef long long blowup = -1
    cdef cplx h0, hh, h1, un, k1, k2, k3, k4, big_u
    cdef double g0 = g_int[0]
    u = np.zeros(nsteps + 1, dtype=np.complex128)
    cdef cplx[::1] u_ = u
    u_[0] = u0
    with nogil:
        for n in range(nsteps):
            un = u_[n]
            if n == 0:
                h0 = 0
                hh = 0
                h1 = 0
            else:
                h0 = 0.5 * g_int[n] * u_[0] + 0.5 * g_int[0] * un
                hh = 0.5 * g_half[n] * u_[0] + 0.5 * g_half[0] * un
                h1 = 0.5 * g_int[n + 1] * u_[0] + 0.5 * g_int[1] * un
                for m in range(1, n):
                    h0 = h0 + g_int[n - m] * u_[m]
                    hh = hh + g_half[n - m] * u_[m]
                    h1 = h1 + g_int[n + 1 - m] * u_[m]
                h0 = h0 * dt
                hh = hh * dt
                h1 = h1 * dt
            k1 = -xi2 * h0
            big_u = un + 0.5 * dt * k1
            k2 = -xi2 * (hh + 0.25 * dt * (g_half[0] * un + g0 * big_u))
            big_u = un + 0.5 * dt * k2
            k3 = -xi2 * (hh + 0.25 * dt * (g_half[0] * un + g0 * big_u))
            big_u = un + dt * k3
            k4 = -xi2 * (h1 + 0.5 * dt * (g_int[1] * un + g0 * big_u))
            u_[n + 1] = un + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not (isfinite(u_[n + 1].real) and isfinite(u_[n + 1].imag)):
                blowup = n + 1
                break
    return u, blowup
