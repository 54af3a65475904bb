"""Compiled vs pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times the orbit kernel (one Cesàro block on a qubit and a qutrit loop) and
the Jacobi eigensolver, reporting the best of ``--repeat`` runs.
"""
import argparse
import timeit

import numpy as np

from ctcsim import _kernels_py
from ctcsim.ctc import CESARO_BLOCK, DeutschMap
from ctcsim.gates import random_unitary
from ctcsim.qstate import DensityMatrix, Unitary

try:
    from ctcsim import _kernels
except ImportError:
    _kernels = None


def _loop_superoperator(d_ctc, seed):
    u = Unitary(random_unitary(2 * d_ctc, seed), (2 * d_ctc,))
    dmap = DeutschMap(u, DensityMatrix(np.diag([0.75, 0.25]), (2,)))
    return dmap.superoperator, np.eye(d_ctc).ravel().astype(complex) / d_ctc


def _hermitian(dim, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return a + a.conj().T


def cases():
    s2, x2 = _loop_superoperator(2, 1)
    s3, x3 = _loop_superoperator(3, 2)
    h4, h16 = _hermitian(4, 3), _hermitian(16, 4)
    return [
        ("orbit d=2, 840 steps", lambda k: k.orbit(s2, x2, CESARO_BLOCK, 8)),
        ("orbit d=3, 840 steps", lambda k: k.orbit(s3, x3, CESARO_BLOCK, 8)),
        ("jacobi 4x4", lambda k: k.jacobi_eigh(h4, 1e-15, 100)),
        ("jacobi 16x16", lambda k: k.jacobi_eigh(h16, 1e-15, 100)),
    ]


def best_of(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _kernels is None:
        print("compiled extension not built; timing the Python kernels only")
    print(f"{'case':<24}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for name, call in cases():
        t_py = best_of(lambda: call(_kernels_py), args.repeat)
        if _kernels is None:
            print(f"{name:<24}{t_py * 1e6:>10.1f}us{'-':>12}{'-':>10}")
            continue
        t_c = best_of(lambda: call(_kernels), args.repeat)
        print(f"{name:<24}{t_py * 1e6:>10.1f}us{t_c * 1e6:>10.1f}us{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
