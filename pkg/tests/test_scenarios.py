import numpy as np
import pytest

from ctcsim import gates
from ctcsim.corpus import gate_corpus
from ctcsim.equiv import equiv_circuit_unrolled, lift_prepared
from ctcsim.qstate import DensityMatrix, PureState, correlation_metrics
from ctcsim.scenarios import (
    CONTRAST_LABEL,
    EntangledSource,
    PreparedEnsemble,
    Scenario,
    fixed_point_survey,
    ordering_consistency_check,
    run_entangled_experiment,
    run_prepared_experiment,
    semantics_compare,
)

S = gates.parse_state
BELL = EntangledSource(S("bell:phi+"))
EQUAL = PreparedEnsemble(((0.5, S("0"), S("0")), (0.5, S("1"), S("1"))))
N_LIST = (1, 2, 4, 8)


def _loop_channel(u, rho, sigma):
    # Tr over the system slot of U (rho (x) sigma) U^dag, by explicit loops
    full = u @ np.kron(rho, sigma) @ u.conj().T
    d = rho.shape[0]
    out = np.zeros_like(sigma, dtype=complex)
    for s in range(d):
        out += full[s * d:(s + 1) * d, s * d:(s + 1) * d]
    return out


def _emitted(u, rho, sigma):
    full = u @ np.kron(rho, sigma) @ u.conj().T
    d = sigma.shape[0]
    return np.array([[np.trace(full[i * d:(i + 1) * d, j * d:(j + 1) * d]) for j in range(d)]
                     for i in range(d)])


def _spectral_fixed_point(u, rho, seed):
    """Seed projected onto the eigenvalue-1 eigenspace of the loop channel."""
    d = rho.shape[0]
    cols = []
    for k in range(d * d):
        e = np.zeros(d * d, dtype=complex)
        e[k] = 1
        cols.append(_loop_channel(u, rho, e.reshape(d, d)).ravel())
    s = np.array(cols).T
    w, v = np.linalg.eig(s)
    keep = np.abs(w - 1) <= 1e-9
    proj = v[:, keep] @ np.linalg.inv(v)[keep, :]
    return (proj @ seed.ravel()).reshape(d, d)


def _joint_distribution(joint):
    return np.real(np.diag(joint))


# -- scenario type ---------------------------------------------------------------

def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario("swap", EQUAL, lift_rule="shots")
    with pytest.raises(ValueError):
        Scenario("swap", EQUAL, ordering="during")
    with pytest.raises(ValueError):
        Scenario("swap", EQUAL, n_list=(0, 1))
    with pytest.raises(ValueError):
        EntangledSource(S("0"))
    assert Scenario("swap", EQUAL, lift_rule="both").rules() == ["prepared", "density"]


# -- prepared experiments -----------------------------------------------------------

@pytest.mark.parametrize("gate", ["identity", "swap"])
def test_prepared_equal_ensemble_keeps_zz(gate):
    reports = run_prepared_experiment(Scenario(gate, EQUAL, n_list=N_LIST))
    assert len(reports) == len(N_LIST)
    for rep in reports:
        assert abs(rep.zz - 1) <= 1e-10
        assert abs(rep.mutual_information_bits - 1) <= 1e-10
        assert rep.provenance["n"] in N_LIST


def test_prepared_cnot_matches_unrolled():
    ens = PreparedEnsemble(((0.5, S("+"), S("0")), (0.5, S("1"), S("1"))))
    rep, = run_prepared_experiment(Scenario("cnot", ens, n_list=(8,)))
    oracle = equiv_circuit_unrolled(gates.build_gate("cnot"), lift_prepared(ens.members), 8).output
    np.testing.assert_allclose(rep.joint_distribution, _joint_distribution(oracle.matrix), atol=1e-10)
    assert abs(rep.zz - correlation_metrics(oracle).zz) <= 1e-10


def test_prepared_experiment_needs_labels():
    unlabelled = PreparedEnsemble(((0.5, S("0"), None), (0.5, S("1"), None)))
    with pytest.raises(ValueError):
        run_prepared_experiment(Scenario("swap", unlabelled))


def test_prepared_density_rule_forgets_labels():
    reports = run_prepared_experiment(Scenario("swap", EQUAL, lift_rule="both", n_list=(4,)))
    by_lift = {r.provenance["lift"]: r for r in reports}
    assert abs(by_lift["prepared"].zz - 1) <= 1e-10
    assert abs(by_lift["density"].zz) <= 1e-10
    assert by_lift["density"].mutual_information_bits <= 1e-12


# -- entangled experiments --------------------------------------------------------

def test_bell_swap_density_decorrelates():
    for rep in run_entangled_experiment(Scenario("swap", BELL, lift_rule="density", n_list=N_LIST)):
        assert abs(rep.zz) <= 1e-10
        assert rep.mutual_information_bits <= 1e-12


def test_bell_identity_density_reference_is_independent():
    for rep in run_entangled_experiment(Scenario("identity", BELL, lift_rule="density", n_list=N_LIST)):
        assert abs(rep.zz) <= 1e-10


def test_bell_cnot_matches_channel_iteration():
    n = 16
    u = gates.CNOT
    half = np.eye(2) / 2
    sigma = half.copy()
    for _ in range(n - 1):
        sigma = _loop_channel(u, half, sigma)
    expected = np.kron(half, _emitted(u, half, sigma))
    oracle = correlation_metrics(DensityMatrix(expected, (2, 2)))
    for rep in run_entangled_experiment(Scenario("cnot", BELL, lift_rule="density", ordering="after",
                                                 n_list=(n,))):
        np.testing.assert_allclose(rep.joint_distribution, oracle.joint_distribution, atol=1e-10)
        assert abs(rep.zz - oracle.zz) <= 1e-10
        assert abs(rep.mutual_information_bits - oracle.mutual_information_bits) <= 1e-10


def test_prepared_rule_on_entangled_needs_measuring_first():
    with pytest.raises(ValueError, match="before"):
        run_entangled_experiment(Scenario("swap", BELL, lift_rule="prepared", ordering="after"))
    reports = run_entangled_experiment(Scenario("swap", BELL, lift_rule="prepared", ordering="before",
                                                n_list=(2,)))
    assert reports[0].provenance["note"] == CONTRAST_LABEL
    assert abs(reports[0].zz - 1) <= 1e-10


def test_both_orderings_report_discrepancy():
    reports = run_entangled_experiment(Scenario("cnot", BELL, lift_rule="density", ordering="both",
                                                n_list=(1, 4)))
    assert len(reports) == 4
    assert all(r.provenance["ordering_discrepancy"] <= 1e-10 for r in reports)


# -- ordering check ---------------------------------------------------------------

def test_ordering_swap_contrast_is_half():
    gap, contrast = ordering_consistency_check(Scenario("swap", BELL, n_list=N_LIST))
    assert gap <= 1e-10
    assert abs(contrast - 0.5) <= 1e-10


def test_ordering_cnot_contrast_positive():
    gap, contrast = ordering_consistency_check(Scenario("cnot", BELL, n_list=N_LIST))
    assert gap <= 1e-10
    assert contrast > 0


def test_ordering_product_unitary_uncorrelated_source():
    # an uncorrelated source leaves nothing for either lifting rule to disagree on
    src = EntangledSource(PureState(S("0+").amplitudes, (2, 2)))
    gap, contrast = ordering_consistency_check(Scenario("h*i", src, n_list=N_LIST))
    assert gap <= 1e-12 and contrast <= 1e-12


@pytest.mark.parametrize("label,u", gate_corpus(), ids=[g[0] for g in gate_corpus()])
def test_ordering_invariant_over_corpus(label, u):
    gap, _ = ordering_consistency_check(Scenario(label, BELL, n_list=N_LIST))
    assert gap <= 1e-10


# -- semantics comparison ----------------------------------------------------------

def test_semantics_swap():
    cmp = semantics_compare("swap", EQUAL)
    assert abs(cmp.per_component.zz - 1) <= 1e-10
    assert abs(cmp.whole_ensemble.zz) <= 1e-10


def test_semantics_identity_product():
    cmp = semantics_compare("identity", EQUAL)
    assert abs(cmp.per_component.zz - 1) <= 1e-10
    assert abs(cmp.whole_ensemble.zz - 1) <= 1e-10


@pytest.mark.parametrize("ens", [
    EQUAL,
    PreparedEnsemble(((0.5, S("+"), S("0")), (0.5, S("-"), S("1")))),
    PreparedEnsemble(((0.25, S("amps:[[0.6,0],[0,0.8]]"), S("0")), (0.75, S("1"), S("1")))),
])
def test_semantics_cnot_matches_spectral_oracle(ens):
    u = gates.CNOT
    cmp = semantics_compare("cnot", ens)

    per = 0
    for p, trav, ref in ens.members:
        rho = trav.density().matrix
        sigma = _spectral_fixed_point(u, rho, rho)
        per = per + p * np.kron(ref.density().matrix, _emitted(u, rho, sigma))
    np.testing.assert_allclose(cmp.per_component.joint_distribution, _joint_distribution(per), atol=1e-10)

    marginal = sum(p * t.density().matrix for p, t, _ in ens.members)
    sigma = _spectral_fixed_point(u, marginal, marginal)
    whole = 0
    for p, trav, ref in ens.members:
        whole = whole + p * np.kron(ref.density().matrix, _emitted(u, trav.density().matrix, sigma))
    np.testing.assert_allclose(cmp.whole_ensemble.joint_distribution, _joint_distribution(whole), atol=1e-10)


def test_semantics_per_component_is_chain_limit():
    ens = PreparedEnsemble(((0.3, S("+"), S("0")), (0.7, S("amps:[[0.6,0],[0,0.8]]"), S("1"))))
    seed, u = gate_corpus()[-1]
    cmp = semantics_compare(u, ens)
    rep, = run_prepared_experiment(Scenario(seed, ens, n_list=(64,)))
    # the report echoes the distance of the n=64 output to the per-component solution
    assert rep.provenance["dist_to_deutsch"] <= 1e-6
    np.testing.assert_allclose(rep.joint_distribution, cmp.per_component.joint_distribution, atol=1e-6)


def test_semantics_needs_labels():
    with pytest.raises(ValueError):
        semantics_compare("swap", PreparedEnsemble(((1.0, S("0"), None),)))


# -- fixed point survey ----------------------------------------------------------

def test_survey_identity():
    rep = fixed_point_survey("identity", "0")
    assert rep.dimension == 4
    np.testing.assert_allclose(rep.canonical.matrix, np.diag([1, 0]), atol=1e-12)


def test_survey_swap():
    rep = fixed_point_survey("swap", "+")
    assert rep.dimension == 1 and rep.unique
    np.testing.assert_allclose(rep.canonical.matrix, np.full((2, 2), 0.5), atol=1e-12)


def test_survey_cnot_oscillates():
    rep = fixed_point_survey("cnot", "1")
    assert rep.dimension == 2
    np.testing.assert_allclose(rep.canonical.matrix, np.eye(2) / 2, atol=1e-12)
    assert rep.oscillation_detected and rep.period == 2
    np.testing.assert_allclose(rep.averaged_state.matrix, np.eye(2) / 2, atol=1e-12)
    text = rep.render()
    assert "period 2" in text and "fixed-space dim  2" in text
