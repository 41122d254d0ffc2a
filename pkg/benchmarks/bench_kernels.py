"""Time the compiled trial kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--trials N] [--mode per_link|per_bs]

Both backends simulate the same trial indices, so the outputs are compared
as well as the timings.
"""
import argparse
import time

import numpy as np

from ris_stogeo.montecarlo import Simulator, backend_name
from ris_stogeo.params import default_config


def timed(sim, n, seed):
    t0 = time.perf_counter()
    rec = sim.run(n, seed, threads=1)
    return time.perf_counter() - t0, rec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--mode", choices=("per_link", "per_bs"), default="per_link")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    cfg = default_config()
    if backend_name() != "compiled":
        print("compiled kernels not built; only the python backend is available")
        return
    py = Simulator(cfg, args.mode, backend="python")
    cy = Simulator(cfg, args.mode, backend="compiled")
    cy.run(64, args.seed, threads=1)  # warm-up
    t_py, r_py = timed(py, args.trials, args.seed)
    t_cy, r_cy = timed(cy, args.trials, args.seed)

    # the compiled per-BS kernel sums interference in distance order, so
    # SINR can differ in the last bit
    pairs = list(zip(r_py.arrays(), r_cy.arrays()))
    same = all(np.allclose(a, b, rtol=1e-12, atol=0, equal_nan=True) for a, b in pairs)
    worst = 0.0
    for a, b in pairs:
        ok = np.isfinite(a) & np.isfinite(b) & (a != 0)
        if ok.any():
            worst = max(worst, float(np.max(np.abs(a[ok] - b[ok]) / np.abs(a[ok]))))
    print(f"mode={args.mode} trials={args.trials} (single thread)")
    print(f"python   {t_py:8.3f} s  {1e6 * t_py / args.trials:9.1f} us/trial")
    print(f"compiled {t_cy:8.3f} s  {1e6 * t_cy / args.trials:9.1f} us/trial")
    print(f"speed-up {t_py / t_cy:8.1f}x   outputs agree (rtol 1e-12): {same}, max rel diff {worst:.1e}")


if __name__ == "__main__":
    main()
