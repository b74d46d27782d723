"""Compare the compiled and numpy backends on the two hot kernels.

Run:  python3 benchmarks/bench_backends.py [--n 200000] [--nodes 192]

Times philox4x32 block generation and the H-type m=1 integral triple for
both backends, checks the contracts (bit-identical Philox bits, integral
agreement at the few-ulp level), and prints a small table.
"""

import argparse
import time

import numpy as np

from carnotlab import _ref

try:
    from carnotlab import _core
except ImportError:
    _core = None


def _timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_philox(backends, n):
    rng = np.random.default_rng(1)
    ctr = rng.integers(0, 2 ** 32, size=(n, 4), dtype=np.uint32)
    key = (np.uint32(0x1BADB002), np.uint32(0xCAFEF00D))
    rows, outs = [], {}
    for name, mod in backends:
        dt, out = _timeit(mod.philox4x32, ctr, key)
        rows.append((f"philox4x32 ({name})", dt, n / dt / 1e6, "Mblocks/s"))
        outs[name] = out
    if len(outs) == 2 and not np.array_equal(outs["compiled"], outs["numpy"]):
        raise AssertionError("Philox outputs differ between backends")
    return rows


def bench_htype(backends, n, nodes):
    rng = np.random.default_rng(2)
    r2 = rng.uniform(0.0, 30.0, n)
    z = rng.uniform(-8.0, 8.0, n)
    lam = np.linspace(1e-3, 40.0, nodes)
    t = 0.7
    gfac = lam / np.tanh(lam * t)
    sfac = lam / np.sinh(lam * t)
    w = rng.uniform(0.1, 1.0, nodes)
    rows, outs = [], {}
    for name, mod in backends:
        dt, out = _timeit(mod.htype_m1_batch, r2, z, gfac, sfac, lam, w)
        rows.append((f"htype_m1_batch ({name})", dt, n / dt / 1e6, "Msamples/s"))
        outs[name] = out
    if len(outs) == 2:
        env = np.exp(np.multiply.outer(r2, -0.25 * gfac)) @ (sfac * w)
        for a, b in zip(outs["compiled"], outs["numpy"]):
            if np.max(np.abs(a - b) / np.maximum(env, 1e-300)) > 1e-13:
                raise AssertionError("integral triple differs beyond a few ulp")
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=200000)
    ap.add_argument("--nodes", type=int, default=192)
    args = ap.parse_args()

    backends = [("numpy", _ref)]
    if _core is not None:
        backends.insert(0, ("compiled", _core))
    else:
        print("note: compiled backend not built; benchmarking numpy only")

    rows = bench_philox(backends, args.n) + bench_htype(backends, args.n, args.nodes)
    width = max(len(r[0]) for r in rows)
    for label, dt, rate, unit in rows:
        print(f"{label:<{width}}  {dt * 1e3:9.2f} ms   {rate:9.2f} {unit}")
    if _core is not None:
        print("contracts verified: Philox bits identical, integrals within a few ulp")


if __name__ == "__main__":
    main()
