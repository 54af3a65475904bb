"""Dense complex linear algebra shared by every other module.

Matrices are plain ``numpy`` complex arrays. Composite indices are row-major
and big-endian: the basis index of ``(s, c)`` in a ``(d_s, d_c)`` product is
``s * d_c + c``.
"""
import numpy as np

from ctcsim import kernels

HERMITIAN_TOL = 1e-10
NULLSPACE_TOL = 1e-9
RECONSTRUCTION_TOL = 1e-10
DIM_CAP = 4096
JACOBI_MAX_SWEEPS = 100


class DimensionCapError(ValueError):
    """Instance too large to simulate densely."""


class ConvergenceError(RuntimeError):
    pass


def as_matrix(m):
    """Return ``m`` as a 2-D complex array, rejecting NaN/Inf entries."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def check_dim(side, what="matrix"):
    if side > DIM_CAP:
        raise DimensionCapError(f"{what} side {side} exceeds cap {DIM_CAP}")


def kron(a, b):
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    a = as_matrix(a)
    b = as_matrix(b)
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    check_dim(max(rows, cols), "kron result")
    return np.kron(a, b)


def kron_all(factors):
    out = np.ones((1, 1), dtype=complex)
    for f in factors:
        out = kron(out, f)
    return out


def dagger(m):
    return np.conj(np.transpose(m))


def hermiticity_error(h):
    h = np.asarray(h)
    return float(np.max(np.abs(h - dagger(h)))) if h.size else 0.0


def hermitian_eigen(h, tol=HERMITIAN_TOL):
    """Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and the
    eigenvectors as orthonormal columns.

    Raises:
        ValueError: ``h`` is not square or not Hermitian within ``tol``.
        ConvergenceError: the sweep cap was hit.
    """
    h = as_matrix(h)
    if h.shape[0] != h.shape[1]:
        raise ValueError(f"hermitian_eigen needs a square matrix, got {h.shape}")
    err = hermiticity_error(h)
    if err > tol:
        raise ValueError(f"matrix is not Hermitian (max |h - h^dag| = {err:.3e})")
    h = 0.5 * (h + dagger(h))
    w, v, sweeps = kernels.jacobi_eigh(h, 1e-15, JACOBI_MAX_SWEEPS)
    if sweeps < 0:
        raise ConvergenceError(f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps")
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def nullspace(m, tol=NULLSPACE_TOL):
    """Orthonormal basis of ``{v : ||m v|| <= tol ||v||}`` as column vectors.

    Uses the singular value decomposition; singular values at or below
    ``tol`` count as null directions.
    """
    return nullspace_with_margin(m, tol)[0]


def nullspace_with_margin(m, tol=NULLSPACE_TOL):
    """Like :func:`nullspace`, also returning whether the rank is ambiguous.

    The rank is ambiguous when some singular value sits within a factor of
    10 of ``tol`` on either side.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"nullspace needs a square matrix, got {m.shape}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    _, sv, vh = np.linalg.svd(m)
    basis = [vh[k].conj().reshape(-1, 1) for k in range(len(sv)) if sv[k] <= tol]
    ambiguous = bool(np.any((sv > tol / 10) & (sv < tol * 10)))
    return basis, ambiguous
