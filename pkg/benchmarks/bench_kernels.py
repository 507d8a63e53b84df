"""Compiled vs numpy kernels, plus one end-to-end S-BF run per backend.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from cobeam import _kernels_py

try:
    from cobeam import _kernels as _compiled
except ImportError:
    _compiled = None


def _cases(rng):
    M, N, K = 4, 5, 5
    h = rng.standard_normal((M, M, N, K)) + 1j * rng.standard_normal((M, M, N, K))
    w = rng.standard_normal((M, N, K)) + 1j * rng.standard_normal((M, N, K))
    X = rng.standard_normal((M, N, K, K)) + 1j * rng.standard_normal((M, N, K, K))
    W = X @ np.conj(np.swapaxes(X, -1, -2))
    G = _kernels_py.gains_from_beams(h, w)
    noise = rng.uniform(0.1, 1.0, (M, N))
    lam = rng.uniform(0, 2, (N, K))
    coef = rng.uniform(0, 2, (N, K))
    interf = rng.uniform(0.1, 1, N)
    scale = np.full(N, np.log(2))
    return {
        "gains_from_beams": lambda k: k.gains_from_beams(h, w),
        "gains_from_covs": lambda k: k.gains_from_covs(h, W),
        "signal_interference": lambda k: k.signal_interference(G, noise),
        "sbf_user_powers": lambda k: k.sbf_user_powers(0.3, lam, coef, interf, scale, 1e-12),
    }


_END_TO_END = """
import time, numpy as np
from cobeam import kernels
from cobeam.model import NetworkConfig
from cobeam.sbf import run_sbf
from cobeam.simenv import FadingParams, generate_topology, sample_channels
cfg = NetworkConfig(4, 5, 5)
chs = [sample_channels(generate_topology(4, 5, s), FadingParams(), 5, s + 1000) for s in range(20)]
t = time.perf_counter()
for s, ch in enumerate(chs):
    run_sbf(ch, cfg, seed=s)
print(kernels.BACKEND, (time.perf_counter() - t) / len(chs))
"""


def end_to_end(pure: bool) -> str:
    env = dict(os.environ, COBEAM_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", _END_TO_END], env=env, check=True,
                         capture_output=True, text=True).stdout.split()
    return f"{out[0]:>9s}  {float(out[1]) * 1e3:8.2f} ms per S-BF run (M=4, N=5, K=5)"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()
    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':22s} {'python us':>10s} {'compiled us':>12s} {'speedup':>8s}")
    for name, fn in cases.items():
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=args.repeat, repeat=3)) / args.repeat
        if _compiled is None:
            print(f"{name:22s} {t_py * 1e6:10.2f} {'n/a':>12s}")
            continue
        t_c = min(timeit.repeat(lambda: fn(_compiled), number=args.repeat, repeat=3)) / args.repeat
        print(f"{name:22s} {t_py * 1e6:10.2f} {t_c * 1e6:12.2f} {t_py / t_c:7.1f}x")
    print()
    print(end_to_end(pure=True))
    if _compiled is not None:
        print(end_to_end(pure=False))


if __name__ == "__main__":
    main()
