"""Pure-Python kernels.

Same signatures and semantics as the compiled ``_kernels`` module; used when
the extension is not built or ``CTCSIM_PURE_PYTHON`` is set.
"""
import math

import numpy as np


def orbit(S, x0, n, keep):
    """Iterate ``x <- S x`` for ``n`` steps.

    Returns ``(x_n, total, tail)`` where ``total`` is the sum of
    ``x_1 .. x_n`` and ``tail`` holds ``x_{n-k} .. x_n`` (oldest first) with
    ``k = min(keep, n)``.
    """
    S = np.ascontiguousarray(S, dtype=complex)
    x = np.array(x0, dtype=complex)
    total = np.zeros_like(x)
    k = min(keep, n)
    tail = np.empty((k + 1, x.shape[0]), dtype=complex)
    first_kept = n - k
    if first_kept == 0:
        tail[0] = x
    for step in range(1, n + 1):
        x = S @ x
        total += x
        if step >= first_kept:
            tail[step - first_kept] = x
    return x, total, tail


def jacobi_eigh(h, tol, max_sweeps):
    """Cyclic Jacobi diagonalization of a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors, sweeps)``; eigenvalues are unsorted
    and ``sweeps`` is -1 when the off-diagonal mass did not fall below
    ``tol * ||h||_F`` within ``max_sweeps``.
    """
    a = np.array(h, dtype=complex)
    dim = a.shape[0]
    v = np.eye(dim, dtype=complex)
    scale = max(np.linalg.norm(a), 1e-300)
    for sweep in range(max_sweeps + 1):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            return np.real(np.diag(a)).copy(), v, sweep
        if sweep == max_sweeps:
            break
        for p in range(dim - 1):
            for q in range(p + 1, dim):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                app = a[p, p].real
                aqq = a[q, q].real
                theta = (aqq - app) / (2.0 * mag)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # G = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                g = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                cols = a[:, [p, q]] @ g
                a[:, p] = cols[:, 0]
                a[:, q] = cols[:, 1]
                rows = g.conj().T @ a[[p, q], :]
                a[p, :] = rows[0]
                a[q, :] = rows[1]
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vcols = v[:, [p, q]] @ g
                v[:, p] = vcols[:, 0]
                v[:, q] = vcols[:, 1]
    return np.real(np.diag(a)).copy(), v, -1
