"""Deutsch consistency: the induced loop channel, its fixed points, and the
state the CTC emits.

Slot order is (system, CTC) throughout: composite index ``s * d_ctc + c``.
Loop states are iterated in row-major vectorized form, where
``vec(A σ B) = (A ⊗ Bᵀ) vec(σ)``.
"""
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from ctcsim import kernels, numlin
from ctcsim.numlin import dagger
from ctcsim.qstate import DensityMatrix, Unitary, reduce_matrix, trace_distance_matrices

CESARO_BLOCK = 840  # lcm(1..8): block averages cancel every orbit period <= 8
CESARO_TOL = 1e-10
CESARO_CAP = 100_000
FIXED_POINT_RESIDUAL = 1e-8
OSCILLATION_WINDOW = 8
OSCILLATION_MATCH = 1e-10
OSCILLATION_MOVING = 1e-6


class ConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class DeutschMap:
    """The loop channel ``σ -> Tr_sys[U (ρ_sys ⊗ σ) U^dag]``."""

    interaction: Unitary
    system_input: DensityMatrix

    def __post_init__(self):
        side = self.interaction.matrix.shape[0]
        d_sys = self.system_input.side
        if side % d_sys:
            raise ValueError(
                f"interaction side {side} is not a multiple of system dimension {d_sys}")
        if side // d_sys < 1:
            raise ValueError("CTC slot would be empty")

    @property
    def d_sys(self):
        return self.system_input.side

    @property
    def d_ctc(self):
        return self.interaction.matrix.shape[0] // self.d_sys

    @cached_property
    def superoperator(self):
        return superoperator_matrix(self)

    def loop_state(self, vec):
        d = self.d_ctc
        m = np.asarray(vec).reshape(d, d)
        return DensityMatrix.trusted(0.5 * (m + dagger(m)), (d,))


@dataclass(frozen=True, eq=False)
class FixedPointReport:
    fixed_space_basis: list
    canonical: DensityMatrix
    unique: bool
    residual: float
    rank_warning: bool = False
    cesaro_iterations: int = 0
    cesaro_converged: bool = True

    @property
    def dimension(self):
        return len(self.fixed_space_basis)


@dataclass(frozen=True, eq=False)
class PowerIterationResult:
    state: DensityMatrix
    oscillation_detected: bool
    period_estimate: Optional[int]
    previous: Optional[DensityMatrix] = None


@dataclass(frozen=True, eq=False)
class CesaroResult:
    state: DensityMatrix
    iterations: int
    converged: bool


def _check_loop_state(dmap, sigma):
    if sigma.side != dmap.d_ctc:
        raise ValueError(f"loop state side {sigma.side} does not match CTC dimension {dmap.d_ctc}")


def _evolve_joint(dmap, sigma):
    joint = numlin.kron(dmap.system_input.matrix, sigma.matrix)
    u = dmap.interaction.matrix
    return u @ joint @ dagger(u)


def deutsch_map_apply(dmap: DeutschMap, sigma: DensityMatrix) -> DensityMatrix:
    _check_loop_state(dmap, sigma)
    out = reduce_matrix(_evolve_joint(dmap, sigma), (dmap.d_sys, dmap.d_ctc), [1])
    return DensityMatrix.trusted(0.5 * (out + dagger(out)), (dmap.d_ctc,))


def ctc_output(dmap: DeutschMap, sigma_fixed: DensityMatrix) -> DensityMatrix:
    """System state emitted when the loop holds ``sigma_fixed``."""
    _check_loop_state(dmap, sigma_fixed)
    out = reduce_matrix(_evolve_joint(dmap, sigma_fixed), (dmap.d_sys, dmap.d_ctc), [0])
    return DensityMatrix.trusted(0.5 * (out + dagger(out)), dmap.system_input.subsystem_dims)


def superoperator_matrix(dmap: DeutschMap) -> np.ndarray:
    """``S`` with ``S vec(σ) = vec(Φ(σ))`` under row-major vectorization."""
    ds, dc = dmap.d_sys, dmap.d_ctc
    u = dmap.interaction.matrix.reshape(ds, dc, ds, dc)
    rho = dmap.system_input.matrix
    # S[(a,b),(c,e)] = sum_{s,t,r} U[s,a,t,c] rho[t,r] conj(U[s,b,r,e])
    s = np.einsum("satc,tr,sbre->abce", u, rho, u.conj())
    return s.reshape(dc * dc, dc * dc)


def _td_vec(dmap, x, y):
    d = dmap.d_ctc
    return trace_distance_matrices(np.asarray(x).reshape(d, d), np.asarray(y).reshape(d, d))


def power_iterate(dmap: DeutschMap, seed: DensityMatrix, n: int, averaged: bool = False) -> PowerIterationResult:
    """``Φⁿ(seed)``, or the running mean of ``Φ¹..Φⁿ`` when ``averaged``.

    A plain orbit that is still moving (successive iterates differ by more
    than 1e-6) but returns to within 1e-10 of an earlier iterate ``p <= 8``
    steps back is reported as oscillating with period ``p``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    _check_loop_state(dmap, seed)
    if n == 0:
        return PowerIterationResult(seed, False, None, None)
    x, total, tail = kernels.orbit(dmap.superoperator, seed.matrix.ravel(), n, OSCILLATION_WINDOW)
    last = tail[-1]
    period = None
    if len(tail) > 1 and _td_vec(dmap, last, tail[-2]) > OSCILLATION_MOVING:
        for p in range(2, len(tail)):
            if _td_vec(dmap, last, tail[-1 - p]) <= OSCILLATION_MATCH:
                period = p
                break
    state = dmap.loop_state(total / n if averaged else x)
    previous = dmap.loop_state(tail[-2])
    return PowerIterationResult(state, period is not None, period, previous)


def _ergodic_projection(dmap, x0):
    """Component of ``x0`` in ker(S - I) along range(S - I).

    Equals the Cesàro limit for any power-bounded ``S``.
    """
    s = dmap.superoperator
    m = s - np.eye(s.shape[0])
    basis = numlin.nullspace(m)
    if not basis:
        raise numlin.ConvergenceError("channel has no fixed point (numerical failure)")
    k = np.hstack(basis)
    coeffs = np.linalg.lstsq(np.hstack([k, m]), x0, rcond=None)[0]
    return k @ coeffs[: k.shape[1]]


def cesaro_limit(dmap: DeutschMap, seed: DensityMatrix) -> CesaroResult:
    """Limit of the Cesàro means of the orbit of ``seed``.

    Averages are taken over consecutive blocks of 840 iterates; each block
    mean has the same limit as the running mean but without its O(1/N)
    transient. Stops when two successive block means agree to 1e-10 in trace
    distance. If that does not happen within 1e5 iterates (peripheral
    eigenvalues that are not roots of unity of order <= 8) the limit is
    obtained by projecting onto the fixed space along the range of
    ``S - I`` and a :class:`ConvergenceWarning` is issued.
    """
    _check_loop_state(dmap, seed)
    s = dmap.superoperator
    x = seed.matrix.ravel().astype(complex)
    prev = None
    done = 0
    while done < CESARO_CAP:
        x, total, _ = kernels.orbit(s, x, CESARO_BLOCK, 0)
        done += CESARO_BLOCK
        mean = total / CESARO_BLOCK
        if prev is not None and _td_vec(dmap, mean, prev) <= CESARO_TOL:
            return CesaroResult(_normalized(dmap, mean), done, True)
        prev = mean
    warnings.warn(
        f"Cesàro block means did not settle within {CESARO_CAP} iterations; "
        "using the ergodic projection", ConvergenceWarning, stacklevel=2)
    return CesaroResult(_normalized(dmap, _ergodic_projection(dmap, seed.matrix.ravel())), done, False)


def _normalized(dmap, vec):
    state = dmap.loop_state(vec)
    m = state.matrix / np.trace(state.matrix).real
    return DensityMatrix.trusted(m, (dmap.d_ctc,))


def canonical_fixed_point(dmap: DeutschMap, seed_state: DensityMatrix) -> DensityMatrix:
    """The consistent loop state selected by the orbit of ``seed_state``.

    Pass the single-copy equivalent-circuit input as the seed.
    """
    return cesaro_limit(dmap, seed_state).state


def default_seed(dmap: DeutschMap) -> DensityMatrix:
    """The equivalent-circuit copy state when it fits the loop, else I/d."""
    if dmap.d_ctc == dmap.d_sys:
        return DensityMatrix.trusted(dmap.system_input.matrix, (dmap.d_ctc,))
    return DensityMatrix.maximally_mixed((dmap.d_ctc,))


def fixed_point_residual(dmap: DeutschMap, sigma: DensityMatrix) -> float:
    return float(np.max(np.abs(deutsch_map_apply(dmap, sigma).matrix - sigma.matrix)))


def hermitian_fixed_basis(dmap: DeutschMap, tol=numlin.NULLSPACE_TOL):
    """Trace-orthonormal Hermitian basis of the fixed space of the channel.

    Returns ``(basis, rank_warning)``.
    """
    d = dmap.d_ctc
    s = dmap.superoperator
    vecs, ambiguous = numlin.nullspace_with_margin(s - np.eye(d * d), tol)
    if not vecs:
        return [], True
    candidates = []
    for v in vecs:
        m = v.reshape(d, d)
        for h in (0.5 * (m + dagger(m)), (m - dagger(m)) / 2j):
            candidates.append(np.concatenate([h.real.ravel(), h.imag.ravel()]))
    # Hermitian matrices in real coordinates: Euclidean = Hilbert-Schmidt.
    left, sv, _ = np.linalg.svd(np.array(candidates).T, full_matrices=False)
    k = len(vecs)
    rank = int(np.sum(sv > 1e-8))
    basis = []
    for col in left[:, :k].T:
        h = (col[: d * d] + 1j * col[d * d:]).reshape(d, d)
        basis.append(0.5 * (h + dagger(h)))
    return basis, ambiguous or rank != k


def fixed_point_set(dmap: DeutschMap, seed_state: Optional[DensityMatrix] = None) -> FixedPointReport:
    basis, rank_warning = hermitian_fixed_basis(dmap)
    seed = default_seed(dmap) if seed_state is None else seed_state
    ces = cesaro_limit(dmap, seed)
    return FixedPointReport(
        fixed_space_basis=basis,
        canonical=ces.state,
        unique=len(basis) == 1,
        residual=fixed_point_residual(dmap, ces.state),
        rank_warning=rank_warning,
        cesaro_iterations=ces.iterations,
        cesaro_converged=ces.converged,
    )
