"""Time the numba kernels against the numpy fallback.

Each backend runs in its own interpreter because the backend is chosen at
import time from ARTIFACT_DISABLE_NUMBA.

    python3 benchmarks/bench_kernels.py [--n 800] [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time

import numpy as np

WORKER = r"""
import json, sys, time
import numpy as np
from artifact import _kernels

n, repeat, out = int(sys.argv[1]), int(sys.argv[2]), sys.argv[3]
r = (np.arange(n) + 0.5) * (40.0 / n)
lam = 1.3 + 0.2j
nodes, weights = np.polynomial.legendre.leggauss(64)
nodes, weights = 0.5 * (nodes + 1.0), 0.5 * weights

def run():
    jr, hr = _kernels.riccati(1, lam * r)
    g = _kernels.green_fill(jr, hr, r, jr, hr, r, 1j / lam)
    s = _kernels.static_fill(1, r, r)
    m = _kernels.mu_profile(r, 7.0, nodes, weights)
    return g, s, m

t0 = time.perf_counter()
g, s, m = run()
first = time.perf_counter() - t0
best = {}
for name, fn in [
    ("riccati", lambda: _kernels.riccati(1, lam * r)),
    ("green_fill", lambda: _kernels.green_fill(*_kernels.riccati(1, lam * r), r, *_kernels.riccati(1, lam * r), r, 1j / lam)),
    ("static_fill", lambda: _kernels.static_fill(1, r, r)),
    ("mu_profile", lambda: _kernels.mu_profile(r, 7.0, nodes, weights)),
]:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    best[name] = min(times)
np.savez(out + ".npz", g=g, s=s, m=m)
with open(out + ".json", "w") as fh:
    json.dump({"backend": _kernels.BACKEND, "first_call": first, "best": best}, fh)
"""


def run_backend(disable, n, repeat, tmp):
    env = dict(os.environ)
    env["ARTIFACT_DISABLE_NUMBA"] = "1" if disable else "0"
    out = os.path.join(tmp, "numpy" if disable else "numba")
    subprocess.run([sys.executable, "-c", WORKER, str(n), str(repeat), out], env=env, check=True)
    with open(out + ".json") as fh:
        info = json.load(fh)
    info["arrays"] = dict(np.load(out + ".npz"))
    return info


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=800)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    with tempfile.TemporaryDirectory() as tmp:
        t0 = time.perf_counter()
        fast = run_backend(False, args.n, args.repeat, tmp)
        slow = run_backend(True, args.n, args.repeat, tmp)
        wall = time.perf_counter() - t0

    print(f"N = {args.n}, best of {args.repeat}  (backends: {fast['backend']}, {slow['backend']})")
    print(f"{'kernel':<12} {'numba [ms]':>12} {'numpy [ms]':>12} {'speedup':>9}")
    for name in fast["best"]:
        a, b = fast["best"][name] * 1e3, slow["best"][name] * 1e3
        print(f"{name:<12} {a:12.3f} {b:12.3f} {b / a:9.1f}x")
    print(f"first call incl. jit/cache load: numba {fast['first_call']:.2f} s, numpy {slow['first_call']:.2f} s")
    for key in ("g", "s", "m"):
        x, y = fast["arrays"][key], slow["arrays"][key]
        err = np.max(np.abs(x - y)) / max(np.max(np.abs(y)), 1e-300)
        print(f"max rel difference {key}: {err:.2e}")
    print(f"total wall {wall:.1f} s")


if __name__ == "__main__":
    main()
