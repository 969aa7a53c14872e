#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Runs each hot kernel on representative Monte Carlo workloads and one
end-to-end slot run per backend.  Usage:

    python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from macdiv._kernels import _pykernels

try:
    from macdiv._kernels import _ckernels
    BACKENDS = [("c", _ckernels), ("python", _pykernels)]
except ImportError:
    print("compiled kernels not built; benchmarking the fallback only")
    BACKENDS = [("python", _pykernels)]


def timeit(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args()
    scale = 4 if args.quick else 1

    nstreams = 2000 // scale
    K, r = 300, 4
    rng = np.random.default_rng(0)
    Hj = rng.standard_normal((200_000 // scale, 4, 3)) + 1j * rng.standard_normal((200_000 // scale, 4, 3))
    Hs = rng.standard_normal((2_000 // scale, 300, 4)) + 1j * rng.standard_normal((2_000 // scale, 300, 4))
    streams = np.arange(nstreams, dtype=np.uint64)

    rows = []
    for name, mod in BACKENDS:
        t = timeit(mod.channels, 7, streams, K, r)
        rows.append((name, "channels (K=300, r=4)", f"{nstreams * K * r * 2 / t / 1e6:8.1f} Mnormals/s"))
        t = timeit(mod.chi2_batch, 7, streams, K, r)
        rows.append((name, "chi2_batch", f"{nstreams * K * r / t / 1e6:8.1f} Mwords/s"))
        t = timeit(mod.zf_gains, Hj)
        rows.append((name, "zf_gains (j=3, r=4)", f"{Hj.shape[0] / t / 1e3:8.1f} Kslots/s"))
        t = timeit(mod.mmse_sinrs, Hj)
        rows.append((name, "mmse_sinrs (j=3, r=4)", f"{Hj.shape[0] / t / 1e3:8.1f} Kslots/s"))
        t = timeit(mod.sic_chain, Hs, r)
        rows.append((name, "sic_chain (K=300, r=4)", f"{Hs.shape[0] / t / 1e3:8.1f} Kslots/s"))

    width = max(len(r[1]) for r in rows)
    for name, what, rate in rows:
        print(f"{name:7s} {what:{width}s} {rate}")

    # end-to-end comparison through the engine
    import importlib
    import os

    from macdiv import simkit
    from macdiv.simkit import SystemConfig

    cfg = SystemConfig(K=300, r=4, P=1.0, k_target=4.0,
                       n_slots=100_000 // scale, seed=1, receiver="zf")
    results = {}
    for name, _ in BACKENDS:
        os.environ["MACDIV_BACKEND"] = name
        import macdiv._kernels
        importlib.reload(macdiv._kernels)
        importlib.reload(simkit)
        t0 = time.perf_counter()
        s = simkit.run_slots(cfg)
        dt = time.perf_counter() - t0
        results[name] = s.mean
        print(f"{name:7s} run_slots (tail, {cfg.n_slots} slots)      "
              f"{cfg.n_slots / dt / 1e3:8.1f} Kslots/s   mean={s.mean:.4f}")
    os.environ.pop("MACDIV_BACKEND", None)
    importlib.reload(macdiv._kernels)
    importlib.reload(simkit)


if __name__ == "__main__":
    main()
