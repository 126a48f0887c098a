"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 20]

Prints the best time per call of each kernel at desk-scale sizes
(21 BSs, N = 64, K = 8) and the end-to-end time of one drop.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from mmimou import _pykernels, topology

try:
    from mmimou import _ckernels
except ImportError:
    _ckernels = None


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def cases(rng):
    lay = topology.build_layout(7, 500.0)
    ues = rng.uniform(-1000, 1000, size=(700, 2))
    wifi = rng.uniform(-1000, 1000, size=(336, 2))
    return {
        "wrapped_displacement bs x ue (21x700)": ("wrapped_displacement", (lay.bs_positions, ues, lay.wrap_vectors)),
        "wrapped_displacement wifi x wifi (336x336)": ("wrapped_displacement", (wifi, wifi, lay.wrap_vectors)),
        "beam_gains ue (21x168x64, K=8)": ("beam_gains", (crandn(rng, 21, 168, 64), crandn(rng, 21, 8, 64))),
        "beam_gains wifi (21x336x64, K=8)": ("beam_gains", (crandn(rng, 21, 336, 64), crandn(rng, 21, 8, 64))),
    }


def best(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def drop_time(pure: bool, repeat: int) -> float:
    code = ("import timeit; from mmimou import sim; from mmimou.config import SimulationConfig;"
            "c = SimulationConfig().replace(**{'scheduler.n_antennas': 64}); sim.run_drop(c, 0);"
            f"print(min(timeit.repeat(lambda: sim.run_drop(c, 0), number=1, repeat={repeat})))")
    env = {**os.environ, "MMIMOU_PURE_PYTHON": "1" if pure else "0"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<44} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for name, (fn, fargs) in cases(rng).items():
        t_py = best(getattr(_pykernels, fn), fargs, args.repeat)
        if _ckernels is None:
            print(f"{name:<44} {1e3 * t_py:>10.3f} {'n/a':>10} {'':>8}")
            continue
        t_c = best(getattr(_ckernels, fn), fargs, args.repeat)
        print(f"{name:<44} {1e3 * t_py:>10.3f} {1e3 * t_c:>10.3f} {t_py / t_c:>7.2f}x")
    reps = max(3, args.repeat // 4)
    t_py = drop_time(True, reps)
    if _ckernels is not None:
        t_c = drop_time(False, reps)
        print(f"{'run_drop (7 sites, N=64)':<44} {1e3 * t_py:>10.1f} {1e3 * t_c:>10.1f} {t_py / t_c:>7.2f}x")
    else:
        print(f"{'run_drop (7 sites, N=64)':<44} {1e3 * t_py:>10.1f} {'n/a':>10}")


if __name__ == "__main__":
    main()
