"""Timing comparison of the compiled and vectorized pairwise kernels.

Runs the two hot kernels (right-hand-side accumulation and the fused
pair step) over a range of problem sizes, first through the numba path
when it is available and then through the numpy fallback, and prints a
table of per-call times.  A full solver fit is timed at the end for an
end-to-end view.

Usage::

    python benchmarks/bench_kernels.py [--sizes 50,100,200] [--repeat 20]

``TRAJCLUST_NO_NUMBA=1`` makes both columns run the numpy kernels, which
is a quick way to sanity check the harness itself.
"""

import argparse
import timeit

import numpy as np

from trajclust._kernels import (
    HAS_NUMBA,
    accumulate_rhs_numpy,
    pair_indices,
    pair_step_numpy,
    _accumulate_rhs_loop,
    _pair_step_loop,
)

if HAS_NUMBA:
    from numba import njit

    accumulate_rhs_nb = njit(cache=True)(_accumulate_rhs_loop)
    pair_step_nb = njit(cache=True)(_pair_step_loop)
else:
    accumulate_rhs_nb = None
    pair_step_nb = None


def bench_one(fn, args, repeat, needs_zbuf):
    def call():
        gamma, delta, upsilon, pi, pj, s_out, zbuf = args
        s_out[:] = 0.0
        if needs_zbuf:
            fn(gamma, delta, upsilon, pi, pj, 1.0, 0.5, 3.0, s_out, zbuf)
        else:
            fn(gamma, delta, upsilon, pi, pj, 1.0, 0.5, 3.0, s_out)

    call()  # warm up (jit compile, cache touch)
    return min(timeit.repeat(call, number=1, repeat=repeat))


def bench_accumulate(fn, args, repeat):
    def call():
        delta, upsilon, pi, pj, out = args
        out[:] = 0.0
        fn(delta, upsilon, pi, pj, 1.0, out)

    call()
    return min(timeit.repeat(call, number=1, repeat=repeat))


def fused_fit_seconds():
    from trajclust.path import PathConfig
    from trajclust.pipeline import fit_dataset, spline_config_for
    from trajclust.simulate import ScenarioConfig, generate, replication_rng

    scenario = ScenarioConfig(groups=2, separation="far", n_subjects=60,
                              n_times=20)
    dataset, _ = generate(scenario, replication_rng(0, 0))
    t0 = timeit.default_timer()
    fit_dataset(dataset, spline=spline_config_for(dataset),
                path_config=PathConfig(lam_min=0.1, lam_max=2.0, num=10))
    return timeit.default_timer() - t0


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="50,100,200,400",
                        help="comma-separated subject counts")
    parser.add_argument("--repeat", type=int, default=20,
                        help="timing repeats per cell (min is reported)")
    parser.add_argument("--dim", type=int, default=4,
                        help="coefficients per subject")
    args = parser.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    d = args.dim
    rng = np.random.default_rng(0)

    print(f"numba available: {HAS_NUMBA}")
    print(f"{'n':>6} {'pairs':>9} {'kernel':<14} "
          f"{'numpy (ms)':>11} {'numba (ms)':>11} {'speedup':>8}")
    for n in sizes:
        pi, pj = pair_indices(n)
        gamma = rng.standard_normal((n, d))
        delta = rng.standard_normal((len(pi), d))
        upsilon = rng.standard_normal((len(pi), d))
        s_out = np.zeros((n, d))
        zbuf = np.empty(d)
        out = np.zeros((n, d))

        t_np = bench_accumulate(accumulate_rhs_numpy,
                                (delta, upsilon, pi, pj, out), args.repeat)
        row = f"{n:>6} {len(pi):>9} {'accumulate':<14} {t_np * 1e3:>11.3f} "
        if accumulate_rhs_nb is not None:
            t_nb = bench_accumulate(accumulate_rhs_nb,
                                    (delta, upsilon, pi, pj, out),
                                    args.repeat)
            row += f"{t_nb * 1e3:>11.3f} {t_np / t_nb:>8.1f}"
        else:
            row += f"{'-':>11} {'-':>8}"
        print(row)

        state = (gamma, delta.copy(), upsilon.copy(), pi, pj, s_out, zbuf)
        t_np = bench_one(pair_step_numpy, state, args.repeat, False)
        row = f"{n:>6} {len(pi):>9} {'pair step':<14} {t_np * 1e3:>11.3f} "
        if pair_step_nb is not None:
            state = (gamma, delta.copy(), upsilon.copy(), pi, pj, s_out, zbuf)
            t_nb = bench_one(pair_step_nb, state, args.repeat, True)
            row += f"{t_nb * 1e3:>11.3f} {t_np / t_nb:>8.1f}"
        else:
            row += f"{'-':>11} {'-':>8}"
        print(row)

    print(f"\nfull fit (n=60, T=20, 10-point grid): "
          f"{fused_fit_seconds():.2f} s with the active backend")


if __name__ == "__main__":
    main()
