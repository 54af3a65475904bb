"""Multipartite states, unitaries, measurement and correlation metrics."""
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ctcsim import numlin
from ctcsim.numlin import dagger

TRACE_TOL = 1e-10
PSD_TOL = 1e-8
NORM_TOL = 1e-10
UNITARY_TOL = 1e-10
BRANCH_CUTOFF = 1e-14


def _freeze(arr):
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


def _check_dims(side, dims):
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims) or int(np.prod(dims)) != side:
        raise ValueError(f"subsystem dims {dims} do not multiply to {side}")
    return dims


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator.

    ``subsystem_dims`` lists the register dimensions in big-endian order.
    """

    matrix: np.ndarray
    subsystem_dims: tuple

    def __post_init__(self):
        m = numlin.as_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got {m.shape}")
        numlin.check_dim(m.shape[0], "density matrix")
        dims = _check_dims(m.shape[0], self.subsystem_dims)
        herm = numlin.hermiticity_error(m)
        if herm > numlin.HERMITIAN_TOL:
            raise ValueError(f"density matrix not Hermitian (error {herm:.3e})")
        tr = np.trace(m).real
        if abs(tr - 1) > TRACE_TOL:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        # LAPACK here: validation runs on every construction, including
        # large unrolled-circuit marginals.
        lo = np.linalg.eigvalsh(0.5 * (m + dagger(m)))[0]
        if lo < -PSD_TOL:
            raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "matrix", _freeze(m))
        object.__setattr__(self, "subsystem_dims", dims)

    @classmethod
    def trusted(cls, matrix, subsystem_dims):
        """Wrap an already-valid matrix without re-running validation."""
        self = object.__new__(cls)
        object.__setattr__(self, "matrix", _freeze(matrix))
        object.__setattr__(self, "subsystem_dims", tuple(int(d) for d in subsystem_dims))
        return self

    @classmethod
    def from_pure(cls, state):
        psi = state.amplitudes
        return cls.trusted(np.outer(psi, psi.conj()), state.subsystem_dims)

    @classmethod
    def maximally_mixed(cls, dims):
        dims = tuple(dims)
        side = int(np.prod(dims))
        return cls.trusted(np.eye(side) / side, dims)

    @property
    def side(self):
        return self.matrix.shape[0]

    def tensor(self, other):
        return DensityMatrix.trusted(
            numlin.kron(self.matrix, other.matrix),
            self.subsystem_dims + other.subsystem_dims,
        )

    def rank(self, tol=1e-8):
        w = np.linalg.eigvalsh(self.matrix)
        return int(np.sum(w > tol))

    def __repr__(self):
        return f"DensityMatrix(dims={self.subsystem_dims}, matrix=\n{np.round(self.matrix, 6)})"


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray
    subsystem_dims: tuple

    def __post_init__(self):
        psi = np.asarray(self.amplitudes, dtype=complex).ravel()
        if not np.all(np.isfinite(psi)):
            raise ValueError("amplitudes must be finite")
        dims = _check_dims(psi.shape[0], self.subsystem_dims)
        norm = np.linalg.norm(psi)
        if abs(norm - 1) > NORM_TOL:
            raise ValueError(f"state norm is {norm!r}, expected 1")
        object.__setattr__(self, "amplitudes", _freeze(psi))
        object.__setattr__(self, "subsystem_dims", dims)

    def density(self):
        return DensityMatrix.from_pure(self)


@dataclass(frozen=True, eq=False)
class Unitary:
    matrix: np.ndarray
    subsystem_dims: tuple

    def __post_init__(self):
        u = numlin.as_matrix(self.matrix)
        if u.shape[0] != u.shape[1]:
            raise ValueError(f"unitary must be square, got {u.shape}")
        dims = _check_dims(u.shape[0], self.subsystem_dims)
        residual = unitarity_residual(u)
        if residual > UNITARY_TOL:
            raise ValueError(f"matrix is not unitary (max |U^dag U - I| = {residual:.3e})")
        object.__setattr__(self, "matrix", _freeze(u))
        object.__setattr__(self, "subsystem_dims", dims)

    def tensor(self, other):
        return Unitary(numlin.kron(self.matrix, other.matrix),
                       self.subsystem_dims + other.subsystem_dims)


def unitarity_residual(u):
    u = np.asarray(u)
    return float(np.max(np.abs(dagger(u) @ u - np.eye(u.shape[0]))))


@dataclass(frozen=True)
class CorrelationReport:
    """Joint computational-basis statistics of a (reference, output) pair."""

    zz: float
    mutual_information_bits: float
    joint_distribution: tuple
    provenance: dict = field(default_factory=dict)


# -- raw array helpers (used directly by the unrolled circuit) --------------

def reduce_matrix(mat, dims, keep):
    n = len(dims)
    keep = sorted(keep)
    t = np.asarray(mat).reshape(tuple(dims) * 2)
    rows = list(range(n))
    cols = [n + i if i in keep else i for i in range(n)]
    out = list(keep) + [n + i for i in keep]
    side = int(np.prod([dims[i] for i in keep]))
    return np.einsum(t, rows + cols, out).reshape(side, side)


def conjugate_matrix(mat, dims, umat, targets):
    """Return ``U_emb mat U_emb^dag`` with ``umat`` acting on ``targets``."""
    n = len(dims)
    k = len(targets)
    tdims = tuple(dims[i] for i in targets)
    u = np.asarray(umat).reshape(tdims * 2)
    t = np.asarray(mat).reshape(tuple(dims) * 2)
    t = np.tensordot(u, t, axes=(list(range(k, 2 * k)), list(targets)))
    t = np.moveaxis(t, list(range(k)), list(targets))
    t = np.tensordot(t, u.conj(), axes=([n + i for i in targets], list(range(k, 2 * k))))
    t = np.moveaxis(t, list(range(2 * n - k, 2 * n)), [n + i for i in targets])
    side = mat.shape[0]
    return t.reshape(side, side)


# -- operations ---------------------------------------------------------------

def partial_trace(state: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Trace out every subsystem not in ``keep``.

    Kept subsystems stay in their original relative order.
    """
    n = len(state.subsystem_dims)
    keep = sorted(set(int(i) for i in keep))
    if not keep:
        raise ValueError("keep must name at least one subsystem")
    if keep[0] < 0 or keep[-1] >= n:
        raise IndexError(f"subsystem index out of range for {n} subsystems: {keep}")
    reduced = reduce_matrix(state.matrix, state.subsystem_dims, keep)
    return DensityMatrix.trusted(reduced, [state.subsystem_dims[i] for i in keep])


def apply_unitary(state: DensityMatrix, u: Unitary, targets: Sequence[int]) -> DensityMatrix:
    targets = [int(t) for t in targets]
    n = len(state.subsystem_dims)
    if len(set(targets)) != len(targets):
        raise ValueError(f"targets must be distinct: {targets}")
    if any(t < 0 or t >= n for t in targets):
        raise IndexError(f"target out of range for {n} subsystems: {targets}")
    tdims = tuple(state.subsystem_dims[t] for t in targets)
    if tdims != tuple(u.subsystem_dims):
        raise ValueError(f"unitary dims {u.subsystem_dims} do not match target dims {tdims}")
    out = conjugate_matrix(state.matrix, state.subsystem_dims, u.matrix, targets)
    return DensityMatrix.trusted(out, state.subsystem_dims)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Half the trace norm of ``a - b``."""
    if a.matrix.shape != b.matrix.shape:
        raise ValueError(f"dimension mismatch: {a.matrix.shape} vs {b.matrix.shape}")
    return trace_distance_matrices(a.matrix, b.matrix)


def trace_distance_matrices(a, b):
    diff = np.asarray(a) - np.asarray(b)
    diff = 0.5 * (diff + dagger(diff))
    w, _ = numlin.hermitian_eigen(diff)
    return float(min(max(0.5 * np.sum(np.abs(w)), 0.0), 1.0))


def _projector(dim, k, rotation):
    p = np.zeros((dim, dim), dtype=complex)
    p[k, k] = 1
    if rotation is not None:
        r = np.asarray(rotation.matrix if isinstance(rotation, Unitary) else rotation)
        p = dagger(r) @ p @ r
    return p


def measure_computational(state: DensityMatrix, subsystem: int, rotation: Optional[Unitary] = None):
    """Projective measurement of one subsystem.

    With ``rotation`` R the measured basis is ``R^dag |k>``. Returns a list of
    ``(outcome, probability, post_state)``; branches with probability below
    1e-14 are dropped.
    """
    dims = state.subsystem_dims
    if not 0 <= subsystem < len(dims):
        raise IndexError(f"subsystem {subsystem} out of range")
    d = dims[subsystem]
    branches = []
    for k in range(d):
        proj = _projector(d, k, rotation)
        projected = conjugate_matrix(state.matrix, dims, proj, [subsystem])
        p = float(np.trace(projected).real)
        if p > BRANCH_CUTOFF:
            post = projected / p
            branches.append((k, p, DensityMatrix.trusted(0.5 * (post + dagger(post)), dims)))
    return branches


def dephase(state: DensityMatrix, subsystem: int, rotation: Optional[Unitary] = None) -> DensityMatrix:
    """Non-selective measurement: mix the post-measurement branches."""
    out = sum(p * post.matrix for _, p, post in measure_computational(state, subsystem, rotation))
    return DensityMatrix.trusted(out, state.subsystem_dims)


def joint_distribution(joint: DensityMatrix, rotations=(None, None)):
    if tuple(joint.subsystem_dims) != (2, 2):
        raise ValueError(
            f"correlation metrics need two qubit registers, got dims {joint.subsystem_dims}")
    m = joint.matrix
    ra, rb = rotations
    if ra is not None or rb is not None:
        eye = np.eye(2)
        a = eye if ra is None else np.asarray(getattr(ra, "matrix", ra))
        b = eye if rb is None else np.asarray(getattr(rb, "matrix", rb))
        r = np.kron(a, b)
        m = r @ m @ dagger(r)
    p = np.clip(np.real(np.diag(m)), 0.0, None)
    return p / p.sum()


def correlation_metrics(joint: DensityMatrix, rotations=(None, None), provenance=None) -> CorrelationReport:
    """ZZ correlator and mutual information (bits) of the Z-basis statistics."""
    p = joint_distribution(joint, rotations)
    pab = p.reshape(2, 2)
    signs = np.array([[1, -1], [-1, 1]])
    zz = float(np.sum(signs * pab))
    pa = pab.sum(axis=1)
    pb = pab.sum(axis=0)
    mi = 0.0
    for a in range(2):
        for b in range(2):
            if pab[a, b] > 0:
                mi += pab[a, b] * np.log2(pab[a, b] / (pa[a] * pb[b]))
    return CorrelationReport(
        zz=zz,
        mutual_information_bits=max(float(mi), 0.0),
        joint_distribution=tuple(float(x) for x in p),
        provenance=dict(provenance or {}),
    )
