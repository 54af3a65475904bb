"""Experiments: prepared vs entanglement-derived correlations, measurement
ordering, shot-by-shot vs whole-ensemble semantics, fixed-point surveys.

Register convention for two-register sources: (reference, traveler).
"""
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ctcsim import gates
from ctcsim.ctc import (
    DeutschMap,
    canonical_fixed_point,
    default_seed,
    fixed_point_set,
    power_iterate,
)
from ctcsim.equiv import (
    deutsch_output,
    equiv_circuit_contracted,
    lift_density_from_joint,
    lift_prepared,
)
from ctcsim.numlin import dagger
from ctcsim.qstate import (
    CorrelationReport,
    DensityMatrix,
    PureState,
    correlation_metrics,
    dephase,
    measure_computational,
    partial_trace,
    reduce_matrix,
    trace_distance,
)

CONTRAST_LABEL = "contrast: measurement-derived labels lifted shot by shot (not physically licensed)"


@dataclass(frozen=True)
class PreparedEnsemble:
    """Members are ``(probability, traveler, reference_or_None)``."""

    members: tuple

    def joint(self):
        """Single-copy (reference, traveler) state of the ensemble."""
        total = 0
        for p, trav, ref in self.members:
            total = total + p * np.kron(_dm(ref).matrix, _dm(trav).matrix)
        ref0 = _dm(self.members[0][2])
        return DensityMatrix.trusted(total, ref0.subsystem_dims + _dm(self.members[0][1]).subsystem_dims)

    @property
    def has_reference(self):
        return all(m[2] is not None for m in self.members)


@dataclass(frozen=True)
class EntangledSource:
    state: PureState

    def __post_init__(self):
        if len(self.state.subsystem_dims) != 2:
            raise ValueError("entangled source must be a two-register pure state")

    def density(self):
        return self.state.density()


@dataclass(frozen=True)
class Scenario:
    interaction: str
    traveler_input: Union[PreparedEnsemble, EntangledSource]
    lift_rule: str = "prepared"
    ordering: str = "after"
    n_list: tuple = (1, 2, 4, 8)
    seed: int = 0

    def __post_init__(self):
        if self.lift_rule not in ("prepared", "density", "both"):
            raise ValueError(f"lift_rule must be prepared, density or both, not {self.lift_rule!r}")
        if self.ordering not in ("before", "after", "both"):
            raise ValueError(f"ordering must be before, after or both, not {self.ordering!r}")
        n_list = tuple(int(n) for n in self.n_list)
        if not n_list or any(n < 1 for n in n_list):
            raise ValueError("n_list must be a non-empty list of positive counts")
        object.__setattr__(self, "n_list", n_list)

    def unitary(self):
        return gates.build_gate(self.interaction, seed=self.seed)

    def rules(self):
        return ["prepared", "density"] if self.lift_rule == "both" else [self.lift_rule]


def _dm(state):
    return state.density() if isinstance(state, PureState) else state


def _report(joint, **provenance):
    return correlation_metrics(joint, provenance=provenance)


def _total_variation(p, q):
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def run_prepared_experiment(scenario: Scenario):
    """Reference-output correlations of a labelled ensemble, one report per n.

    ``density`` lifting of a prepared ensemble keeps only the two marginals.
    """
    src = scenario.traveler_input
    if not isinstance(src, PreparedEnsemble) or not src.has_reference:
        raise ValueError("prepared experiment needs an ensemble with reference labels")
    u = scenario.unitary()
    reports = []
    for rule in scenario.rules():
        if rule == "prepared":
            lifted = lift_prepared(src.members)
        else:
            lifted = lift_density_from_joint(src.joint())
        target = deutsch_output(u, lifted)
        for n in scenario.n_list:
            res = equiv_circuit_contracted(u, lifted, n)
            reports.append(_report(
                res.output, experiment="prepared", unitary=scenario.interaction, lift=rule, n=n,
                dist_to_deutsch=trace_distance(res.output, target), oscillation=res.oscillation))
    return reports


def _measured_before(joint, rotation=None):
    return dephase(joint, 0, rotation)


def _entangled_joint(u, joint, n, ordering, rule, rotation=None):
    """Joint (reference, output) state for one ordering and lifting rule."""
    if ordering == "before":
        joint = _measured_before(joint, rotation)
        if rule == "prepared":
            members = []
            for a, p, post in measure_computational(joint, 0, rotation):
                ref = partial_trace(post, [0])
                members.append((p, partial_trace(post, [1]), ref))
            lifted = lift_prepared(members)
        else:
            lifted = lift_density_from_joint(joint)
        return equiv_circuit_contracted(u, lifted, n).output
    if rule == "prepared":
        raise ValueError(
            "prepared lifting of an unmeasured entangled traveler has no shot-by-shot "
            "pure decomposition; use the density rule or measure first (ordering 'before')")
    out = equiv_circuit_contracted(u, lift_density_from_joint(joint), n).output
    return _measured_before(out, rotation)


def run_entangled_experiment(scenario: Scenario):
    """Correlations when the traveler is half of an entangled source.

    The prepared rule is accepted only with ordering ``before`` and is then
    labelled as the contrast branch.
    """
    src = scenario.traveler_input
    if not isinstance(src, EntangledSource):
        raise ValueError("entangled experiment needs an entangled source")
    orderings = ["before", "after"] if scenario.ordering == "both" else [scenario.ordering]
    rules = scenario.rules()
    if "prepared" in rules and orderings != ["before"]:
        raise ValueError(
            "prepared lifting of an entangled traveler requires measuring the partner "
            "before the CTC (ordering 'before'); it is a contrast mode, not a physical rule")
    u = scenario.unitary()
    joint = src.density()
    reports = []
    for rule in rules:
        for n in scenario.n_list:
            per_order = {}
            for ordering in orderings:
                out = _entangled_joint(u, joint, n, ordering, rule)
                prov = dict(experiment="entangled", unitary=scenario.interaction, lift=rule,
                            ordering=ordering, n=n)
                if rule == "prepared":
                    prov["note"] = CONTRAST_LABEL
                per_order[ordering] = _report(out, **prov)
                reports.append(per_order[ordering])
            if len(per_order) == 2:
                gap = _total_variation(per_order["before"].joint_distribution,
                                       per_order["after"].joint_distribution)
                for rep in per_order.values():
                    rep.provenance["ordering_discrepancy"] = gap
    return reports


def ordering_consistency_check(scenario: Scenario):
    """``(max_discrepancy, contrast_discrepancy)`` over the scenario's n values.

    Both are total-variation distances between joint (reference, output)
    distributions. ``max_discrepancy`` compares measuring the partner before
    vs after the CTC, both under the density rule. ``contrast_discrepancy``
    compares the measured-before ensemble lifted shot by shot against the
    measured-after density-rule result.
    """
    src = scenario.traveler_input
    if not isinstance(src, EntangledSource):
        raise ValueError("ordering check needs an entangled source")
    u = scenario.unitary()
    joint = src.density()
    worst = contrast = 0.0
    for n in scenario.n_list:
        after = correlation_metrics(_entangled_joint(u, joint, n, "after", "density"))
        before = correlation_metrics(_entangled_joint(u, joint, n, "before", "density"))
        shot = correlation_metrics(_entangled_joint(u, joint, n, "before", "prepared"))
        worst = max(worst, _total_variation(after.joint_distribution, before.joint_distribution))
        contrast = max(contrast, _total_variation(after.joint_distribution, shot.joint_distribution))
    return worst, contrast


@dataclass(frozen=True)
class SemanticsComparison:
    per_component: CorrelationReport
    whole_ensemble: CorrelationReport


def semantics_compare(interaction, ensemble: PreparedEnsemble, seed: int = 0) -> SemanticsComparison:
    """Deutsch solution traced shot by shot vs over the whole ensemble.

    Per component: each pure member gets its own consistent loop state and
    the outputs are mixed with their labels. Whole ensemble: one loop state
    for the mixed traveler marginal, then the interaction acts on the
    labelled (reference, traveler) state with that loop state attached.
    """
    u = gates.build_gate(interaction, seed=seed) if isinstance(interaction, str) else interaction
    if not ensemble.has_reference:
        raise ValueError("semantics comparison needs reference labels")
    per = correlation_metrics(
        deutsch_output(u, lift_prepared(ensemble.members)),
        provenance={"experiment": "compare-semantics", "branch": "per-component"})

    joint = ensemble.joint()
    marginal = partial_trace(joint, [1])
    dmap = DeutschMap(u, marginal)
    sigma = canonical_fixed_point(dmap, DensityMatrix.trusted(marginal.matrix, (marginal.side,)))
    d_ref = joint.subsystem_dims[0]
    full_u = np.kron(np.eye(d_ref), u.matrix)
    big = np.kron(joint.matrix, sigma.matrix)
    big = full_u @ big @ dagger(full_u)
    out = reduce_matrix(big, (d_ref, marginal.side, sigma.side), [0, 1])
    whole = correlation_metrics(
        DensityMatrix.trusted(out, joint.subsystem_dims),
        provenance={"experiment": "compare-semantics", "branch": "whole-ensemble"})
    return SemanticsComparison(per, whole)


@dataclass(frozen=True, eq=False)
class SurveyReport:
    interaction: str
    system_state: str
    dimension: int
    unique: bool
    basis: list
    canonical: DensityMatrix
    residual: float
    rank_warning: bool
    cesaro_iterations: int
    cesaro_converged: bool
    n: int
    plain_state: DensityMatrix
    averaged_state: DensityMatrix
    oscillation_detected: bool
    period: Optional[int]

    def render(self):
        lines = [
            f"interaction      {self.interaction}",
            f"system state     {self.system_state}",
            f"fixed-space dim  {self.dimension} ({'unique' if self.unique else 'multiple solutions'})",
            f"canonical        {np.array2string(np.round(self.canonical.matrix, 10), separator=', ')}",
            f"residual         {self.residual:.3e}",
            f"cesaro           {self.cesaro_iterations} iterations, "
            f"{'converged' if self.cesaro_converged else 'NOT converged (projection used)'}",
            f"plain iteration  n={self.n}, "
            + (f"oscillating with period {self.period}" if self.oscillation_detected else "no oscillation"),
        ]
        if self.rank_warning:
            lines.append("warning          fixed-space rank is numerically ambiguous")
        if self.oscillation_detected:
            lines.append("note             plain limit oscillates; canonical solution is the Cesaro limit")
        return "\n".join(lines)


def fixed_point_survey(interaction: str, system_state: str, n: int = 64, seed: int = 0) -> SurveyReport:
    u = gates.build_gate(interaction, seed=seed)
    rho = gates.parse_state(system_state).density()
    dmap = DeutschMap(u, rho)
    rep = fixed_point_set(dmap)
    start = default_seed(dmap)
    plain = power_iterate(dmap, start, n)
    averaged = power_iterate(dmap, start, n, averaged=True)
    return SurveyReport(
        interaction=interaction,
        system_state=system_state,
        dimension=rep.dimension,
        unique=rep.unique,
        basis=rep.fixed_space_basis,
        canonical=rep.canonical,
        residual=rep.residual,
        rank_warning=rep.rank_warning,
        cesaro_iterations=rep.cesaro_iterations,
        cesaro_converged=rep.cesaro_converged,
        n=n,
        plain_state=plain.state,
        averaged_state=averaged.state,
        oscillation_detected=plain.oscillation_detected,
        period=plain.period_estimate,
    )
