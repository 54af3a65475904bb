"""Equivalent-circuit evaluation.

A CTC interaction becomes a chain: a rail register seeded with one copy of
the traveler input meets ``n`` fresh copies through ``n`` copies of the
interaction, gate ``i`` acting on (system copy ``i``, rail). Only the system
output of the last gate is detected.

Two ways of lifting a single-copy input to ``n`` copies:

* ``PREPARED``: an ensemble of pure states ``{p_k, ψ_k}`` becomes
  ``Σ_k p_k (|ψ_k><ψ_k|)^{⊗n}``. Shot-by-shot labels survive.
* ``DENSITY``: a density operator ``ρ`` becomes ``ρ^{⊗n}``; any reference
  register is carried as an independent factor.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from ctcsim import numlin
from ctcsim.ctc import DeutschMap, canonical_fixed_point, ctc_output, power_iterate
from ctcsim.qstate import (
    DensityMatrix,
    PureState,
    Unitary,
    conjugate_matrix,
    partial_trace,
    reduce_matrix,
    trace_distance,
)

WEIGHT_TOL = 1e-10
PURITY_TOL = 1e-8


class LiftRule(str, Enum):
    PREPARED = "prepared"
    DENSITY = "density"


@dataclass(frozen=True, eq=False)
class LiftComponent:
    weight: float
    copy_state: DensityMatrix
    reference_state: Optional[DensityMatrix] = None


@dataclass(frozen=True, eq=False)
class LiftedInput:
    """Symbolic n-copy input; copies are never materialized here."""

    components: tuple
    rule: LiftRule
    n: Optional[int] = None

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("lifted input needs at least one component")
        weights = np.array([c.weight for c in comps])
        if np.any(weights <= 0):
            raise ValueError("component weights must be positive")
        if abs(weights.sum() - 1) > WEIGHT_TOL:
            raise ValueError(f"component weights sum to {weights.sum()!r}, expected 1")
        dims = {c.copy_state.subsystem_dims for c in comps}
        if len(dims) != 1:
            raise ValueError(f"traveler states disagree on dims: {sorted(dims)}")
        has_ref = {c.reference_state is not None for c in comps}
        if len(has_ref) != 1:
            raise ValueError("either every component carries a reference or none does")
        if self.rule is LiftRule.DENSITY and (len(comps) != 1 or abs(comps[0].weight - 1) > WEIGHT_TOL):
            raise ValueError("density lifting has exactly one component of weight 1")
        if self.rule is LiftRule.PREPARED:
            for c in comps:
                if _purity_defect(c.copy_state) > PURITY_TOL:
                    raise ValueError("prepared lifting needs pure traveler components")
        object.__setattr__(self, "components", comps)

    @property
    def has_reference(self):
        return self.components[0].reference_state is not None

    @property
    def traveler_dims(self):
        return self.components[0].copy_state.subsystem_dims

    def marginal(self):
        """Single-copy traveler state, labels forgotten."""
        m = sum(c.weight * c.copy_state.matrix for c in self.components)
        return DensityMatrix.trusted(m, self.traveler_dims)

    def materialize(self, n, include_reference=True):
        """Explicit ``Σ_k w_k [ref_k ⊗] copy_k^{⊗n}`` (small n only)."""
        total = None
        for c in self.components:
            factors = [c.copy_state.matrix] * n
            if include_reference and c.reference_state is not None:
                factors = [c.reference_state.matrix] + factors
            term = c.weight * numlin.kron_all(factors)
            total = term if total is None else total + term
        dims = self.traveler_dims * n
        if include_reference and self.has_reference:
            dims = self.components[0].reference_state.subsystem_dims + dims
        return DensityMatrix.trusted(total, dims)


@dataclass(frozen=True, eq=False)
class EquivCircuitResult:
    output: DensityMatrix
    rail_state: DensityMatrix
    n_used: int
    oscillation: bool = False
    period: Optional[int] = None


def _purity_defect(state):
    m = state.matrix
    return abs(1 - np.real(np.trace(m @ m)))


def _as_density(state):
    if isinstance(state, PureState):
        return state.density()
    if isinstance(state, DensityMatrix):
        return state
    raise TypeError(f"expected PureState or DensityMatrix, got {type(state).__name__}")


def lift_prepared(ensemble) -> LiftedInput:
    """Lift an ensemble of ``(p, traveler, reference_or_None)`` pure states.

    Members with ``p == 0`` are dropped.
    """
    comps = []
    for item in ensemble:
        p, traveler = item[0], item[1]
        ref = item[2] if len(item) > 2 else None
        if p < 0:
            raise ValueError(f"negative ensemble probability {p}")
        if p == 0:
            continue
        copy = _as_density(traveler)
        if _purity_defect(copy) > PURITY_TOL:
            raise ValueError(
                "prepared lifting is defined on pure traveler states only; "
                "use lift_density for a mixed traveler")
        comps.append(LiftComponent(float(p), copy, None if ref is None else _as_density(ref)))
    if not comps:
        raise ValueError("ensemble is empty")
    return LiftedInput(tuple(comps), LiftRule.PREPARED)


def lift_density(rho, reference=None) -> LiftedInput:
    ref = None if reference is None else _as_density(reference)
    return LiftedInput((LiftComponent(1.0, _as_density(rho), ref),), LiftRule.DENSITY)


def lift_density_from_joint(joint: DensityMatrix, traveler: int = 1) -> LiftedInput:
    """Density-rule lift of a two-register (reference, traveler) state.

    Both marginals are kept; their correlation is not.
    """
    if len(joint.subsystem_dims) != 2:
        raise ValueError("joint source must have exactly two registers")
    return lift_density(partial_trace(joint, [traveler]), partial_trace(joint, [1 - traveler]))


def _check_interaction(u, copy):
    d = copy.side
    if u.matrix.shape[0] != d * d:
        raise ValueError(
            f"interaction side {u.matrix.shape[0]} does not fit two traveler copies of side {d}")


def equiv_circuit_unrolled(u: Unitary, source, n: int) -> EquivCircuitResult:
    """Brute-force equivalent circuit on the full (n+1)-copy Hilbert space.

    ``source`` is a single-copy :class:`DensityMatrix` or a
    :class:`LiftedInput`; the latter is materialized exactly, references
    included, so no linearity is assumed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    lifted = source if isinstance(source, LiftedInput) else lift_density(_as_density(source))
    copy_dims = lifted.traveler_dims
    d = int(np.prod(copy_dims))
    _check_interaction(u, lifted.components[0].copy_state)
    has_ref = lifted.has_reference
    d_ref = lifted.components[0].reference_state.side if has_ref else 1
    numlin.check_dim(d_ref * d ** (n + 1), "unrolled circuit")

    state = lifted.materialize(n + 1, include_reference=True).matrix
    # registers: [reference], rail, system copies 1..n
    dims = ([d_ref] if has_ref else []) + [d] * (n + 1)
    rail = 1 if has_ref else 0
    for i in range(1, n + 1):
        state = conjugate_matrix(state, dims, u.matrix, [rail + i, rail])
    last = rail + n
    keep = [0, last] if has_ref else [last]
    out_dims = ((d_ref,) if has_ref else ()) + tuple(copy_dims)
    output = reduce_matrix(state, dims, keep)
    rail_state = reduce_matrix(state, dims, [rail])
    return EquivCircuitResult(
        output=DensityMatrix.trusted(output, out_dims),
        rail_state=DensityMatrix.trusted(rail_state, (d,)),
        n_used=n,
    )


def _loop_seed(copy):
    return DensityMatrix.trusted(copy.matrix, (copy.side,))


def _mix(terms, dims):
    return DensityMatrix.trusted(sum(w * m for w, m in terms), dims)


def equiv_circuit_contracted(u: Unitary, lifted: LiftedInput, n: int) -> EquivCircuitResult:
    """Equivalent circuit evaluated on the rail alone.

    Per component the rail entering gate ``m`` is ``Φ^{m-1}(copy)``, so the
    chain is power iteration of the Deutsch map seeded with the copy state;
    the detected output is the map's emitted state at the rail entering the
    last gate.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    outputs, rails = [], []
    oscillation, period = False, None
    for comp in lifted.components:
        copy = comp.copy_state
        _check_interaction(u, copy)
        dmap = DeutschMap(u, copy)
        it = power_iterate(dmap, _loop_seed(copy), n)
        out = ctc_output(dmap, it.previous)
        if comp.reference_state is not None:
            out = comp.reference_state.tensor(out)
        outputs.append((comp.weight, out.matrix))
        rails.append((comp.weight, it.state.matrix))
        if it.oscillation_detected:
            oscillation = True
            period = period or it.period_estimate
    first = lifted.components[0]
    out_dims = ((first.reference_state.side,) if lifted.has_reference else ()) + lifted.traveler_dims
    return EquivCircuitResult(
        output=_mix(outputs, out_dims),
        rail_state=_mix(rails, (first.copy_state.side,)),
        n_used=n,
        oscillation=oscillation,
        period=period,
    )


def deutsch_output(u: Unitary, lifted: LiftedInput) -> DensityMatrix:
    """Weighted mixture of per-component Deutsch-consistent outputs.

    Each component's loop state is the canonical fixed point seeded with its
    copy state.
    """
    terms = []
    for comp in lifted.components:
        _check_interaction(u, comp.copy_state)
        dmap = DeutschMap(u, comp.copy_state)
        sigma = canonical_fixed_point(dmap, _loop_seed(comp.copy_state))
        out = ctc_output(dmap, sigma)
        if comp.reference_state is not None:
            out = comp.reference_state.tensor(out)
        terms.append((comp.weight, out.matrix))
    first = lifted.components[0]
    dims = ((first.reference_state.side,) if lifted.has_reference else ()) + lifted.traveler_dims
    return _mix(terms, dims)


def convergence_series(u: Unitary, lifted: LiftedInput, n_list):
    """``[(n, trace distance of the size-n output to the Deutsch output)]``."""
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise ValueError("n_list must be non-empty")
    if any(b < a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be ascending")
    target = deutsch_output(u, lifted)
    return [(n, trace_distance(equiv_circuit_contracted(u, lifted, n).output, target)) for n in n_list]
