"""Seeded gate and input corpus used by the acceptance suite and benchmarks."""
import numpy as np

from ctcsim.ctc import DeutschMap
from ctcsim.gates import build_gate, random_unitary
from ctcsim.qstate import PureState, Unitary

NAMED_GATES = ("identity", "swap", "cnot", "cnot_rev", "grandfather", "h*i")
INPUT_SEEDS = (101, 102, 103)
# Random interactions must contract: second-largest |eigenvalue| of every
# corpus Deutsch map at most this, so 64 chain steps reach ~1e-8.
SPECTRAL_GAP_BOUND = 0.75


def random_pure_qubit(seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return PureState(v / np.linalg.norm(v), (2,))


def pure_inputs():
    return [random_pure_qubit(s) for s in INPUT_SEEDS]


def second_eigenvalue_modulus(u, rho):
    s = DeutschMap(u, rho).superoperator
    return float(np.sort(np.abs(np.linalg.eigvals(s)))[-2])


def random_interactions(count=3, start_seed=0):
    """First ``count`` Haar-random 4x4 unitaries (by seed) whose Deutsch maps
    on every corpus input have a spectral gap.

    Returns ``[(seed, Unitary)]``.
    """
    inputs = [p.density() for p in pure_inputs()]
    out = []
    seed = start_seed
    while len(out) < count:
        u = Unitary(random_unitary(4, seed), (2, 2))
        if all(second_eigenvalue_modulus(u, rho) <= SPECTRAL_GAP_BOUND for rho in inputs):
            out.append((seed, u))
        seed += 1
    return out


def gate_corpus():
    """``[(label, Unitary)]``: named gates plus the seeded random ones."""
    gates = [(name, build_gate(name)) for name in NAMED_GATES]
    gates += [(f"random({seed})", u) for seed, u in random_interactions()]
    return gates
