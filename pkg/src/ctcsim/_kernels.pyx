# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: channel orbit iteration and cyclic Jacobi.

Drop-in replacement for ``ctcsim._kernels_py``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, copysign

cnp.import_array()


cdef extern from "complex.h":
    double cabs(double complex)
    double creal(double complex)
    double complex conj(double complex)


def orbit(S, x0, Py_ssize_t n, Py_ssize_t keep):
    cdef double complex[:, ::1] s = np.ascontiguousarray(S, dtype=np.complex128)
    cdef Py_ssize_t m = s.shape[0]
    x_arr = np.array(x0, dtype=np.complex128)
    y_arr = np.empty(m, dtype=np.complex128)
    total_arr = np.zeros(m, dtype=np.complex128)
    cdef Py_ssize_t k = keep if keep < n else n
    tail_arr = np.empty((k + 1, m), dtype=np.complex128)
    cdef double complex[::1] x = x_arr
    cdef double complex[::1] y = y_arr
    cdef double complex[::1] total = total_arr
    cdef double complex[:, ::1] tail = tail_arr
    cdef Py_ssize_t first_kept = n - k
    cdef Py_ssize_t step, i, j
    cdef double complex acc
    if first_kept == 0:
        for i in range(m):
            tail[0, i] = x[i]
    for step in range(1, n + 1):
        for i in range(m):
            acc = 0
            for j in range(m):
                acc = acc + s[i, j] * x[j]
            y[i] = acc
        for i in range(m):
            x[i] = y[i]
            total[i] = total[i] + y[i]
        if step >= first_kept:
            for i in range(m):
                tail[step - first_kept, i] = y[i]
    return x_arr, total_arr, tail_arr


def jacobi_eigh(h, double tol, int max_sweeps):
    a_arr = np.array(h, dtype=np.complex128, order="C")
    cdef double complex[:, ::1] a = a_arr
    cdef Py_ssize_t dim = a.shape[0]
    v_arr = np.eye(dim, dtype=np.complex128)
    cdef double complex[:, ::1] v = v_arr
    cdef Py_ssize_t p, q, r
    cdef int sweep
    cdef double scale = 0.0, off, mag, app, aqq, theta, t, c, s
    cdef double complex apq, ph, g10, g11, xp, xq
    for p in range(dim):
        for q in range(dim):
            scale += creal(a[p, q] * conj(a[p, q]))
    scale = sqrt(scale)
    if scale < 1e-300:
        scale = 1e-300
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(dim):
            for q in range(dim):
                if p != q:
                    off += creal(a[p, q] * conj(a[p, q]))
        if sqrt(off) <= tol * scale:
            return np.real(np.diag(a_arr)).copy(), v_arr, sweep
        if sweep == max_sweeps:
            break
        for p in range(dim - 1):
            for q in range(p + 1, dim):
                apq = a[p, q]
                mag = cabs(apq)
                if mag <= 1e-300:
                    continue
                ph = conj(apq / mag)
                app = creal(a[p, p])
                aqq = creal(a[q, q])
                theta = (aqq - app) / (2.0 * mag)
                t = copysign(1.0, theta) / (fabs(theta) + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                # G = [[c, s], [-s*ph, c*ph]]
                g10 = -s * ph
                g11 = c * ph
                for r in range(dim):
                    xp = a[r, p]
                    xq = a[r, q]
                    a[r, p] = xp * c + xq * g10
                    a[r, q] = xp * s + xq * g11
                for r in range(dim):
                    xp = a[p, r]
                    xq = a[q, r]
                    a[p, r] = c * xp + conj(g10) * xq
                    a[q, r] = s * xp + conj(g11) * xq
                a[p, q] = 0
                a[q, p] = 0
                a[p, p] = creal(a[p, p])
                a[q, q] = creal(a[q, q])
                for r in range(dim):
                    xp = v[r, p]
                    xq = v[r, q]
                    v[r, p] = xp * c + xq * g10
                    v[r, q] = xp * s + xq * g11
    return np.real(np.diag(a_arr)).copy(), v_arr, -1
