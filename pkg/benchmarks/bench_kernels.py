"""Time the elliptical slice sampler under the compiled and pure-Python kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--n 1000] [--steps 5000] [--repeat 3]

Both backends run the same chain from the same seed; the script checks that
the draws agree before reporting the timings.
"""
import argparse
import time

import numpy as np

from semibvm.dgp import TruthConfig, build_truth, simulate
from semibvm.priors import ExpDensityMap, SeriesPrior, SeriesPriorSpec
from semibvm.sampler import SamplerConfig, sample_b_posterior, sample_f_density_posterior


def _time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=1000, help="sample size")
    parser.add_argument("--steps", type=int, default=5000, help="retained draws per chain")
    parser.add_argument("--repeat", type=int, default=3, help="timing repeats (best is reported)")
    args = parser.parse_args(argv)

    truth = build_truth(TruthConfig())
    data = simulate(truth, args.n, np.random.default_rng(0))
    prior = SeriesPrior(SeriesPriorSpec(2.0, args.n))
    densmap = ExpDensityMap(SeriesPrior(SeriesPriorSpec(1.0, args.n)), level=8)
    config = SamplerConfig(burnin=0, draws=args.steps, thin=1, chains=1, seed=1)
    workloads = {
        "binomial": lambda backend: sample_b_posterior(data, prior, config, backend=backend),
        "density": lambda backend: sample_f_density_posterior(data.z, densmap, config, backend=backend),
    }

    print(f"{'workload':<10} {'backend':<9} {'seconds':>9} {'speedup':>8}")
    for name, run in workloads.items():
        t_py, ch_py = _time(lambda: run("python"), args.repeat)
        try:
            t_c, ch_c = _time(lambda: run("compiled"), args.repeat)
        except ImportError:
            print(f"{name:<10} {'python':<9} {t_py:9.3f} {'':>8}  (compiled kernel not built)")
            continue
        if not np.allclose(ch_py.thetas, ch_c.thetas, rtol=0, atol=1e-9):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<10} {'python':<9} {t_py:9.3f} {1.0:8.2f}")
        print(f"{name:<10} {'compiled':<9} {t_c:9.3f} {t_py / t_c:8.2f}")


if __name__ == "__main__":
    main()
