"""Compare the numba kernels against the pure-numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--n 200000] [--repeat 3]

Each backend runs in a fresh interpreter because the switch is read at import
time from ``MPA_DISABLE_NUMBA``.
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, timeit
import numpy as np
from mpa import special_fn
from mpa._accel import NUMBA_ENABLED

n, repeat = int(sys.argv[1]), int(sys.argv[2])
rng = np.random.default_rng(0)
a = rng.uniform(0.0, 8.0, n)
b = rng.uniform(0.0, 10.0, n)
w = rng.uniform(-0.3, 50.0, n)
x = rng.uniform(0.0, 80.0, n)

cases = {
    "marcum_q1": lambda: special_fn.marcum_q1(a, b),
    "bessel_i0e": lambda: special_fn.bessel_i0e(x),
    "lambert_w0": lambda: special_fn.lambert_w0(w),
}
out = {"numba": NUMBA_ENABLED}
for name, fn in cases.items():
    fn()  # warm-up / JIT compile
    out[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
    out[name + "_checksum"] = float(np.sum(fn()))
print(json.dumps(out))
"""


def run_backend(disable: bool, n: int, repeat: int) -> dict:
    env = dict(os.environ, MPA_DISABLE_NUMBA="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", CHILD, str(n), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    fast = run_backend(False, args.n, args.repeat)
    slow = run_backend(True, args.n, args.repeat)
    print(f"{'kernel':<12} {'numba [s]':>10} {'numpy [s]':>10} {'speed-up':>9} {'checksum diff':>14}")
    for name in ("marcum_q1", "bessel_i0e", "lambert_w0"):
        diff = abs(fast[name + "_checksum"] - slow[name + "_checksum"])
        print(f"{name:<12} {fast[name]:10.4f} {slow[name]:10.4f} {slow[name] / fast[name]:9.1f} {diff:14.2e}")
    if not fast["numba"]:
        print("note: numba is not installed, both columns ran the numpy path")


if __name__ == "__main__":
    main()
