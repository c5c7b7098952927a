"""Engine throughput: events per second and worst migration per stream size.

    python benchmarks/bench_engine.py --n 200 1000 --seeds 3

Kernel timings (compiled vs pure Python) are printed by ``dynbinpack bench``.
"""

import argparse
import time
from fractions import Fraction

from dynbinpack import kernels
from dynbinpack.harness import RandomSpec, gen_random, run


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, nargs="+", default=[200, 1000])
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--epsilon-inv", type=int, default=4)
    parser.add_argument("--dist", default="bimodal")
    args = parser.parse_args()
    print(f"kernel backend: {kernels.BACKEND}")
    print(f"{'n':>6}{'events/s':>10}{'max factor':>12}{'max repacked':>14}{'max ratio':>11}")
    for n in args.n:
        events, seconds = 0, 0.0
        factor, repacked, ratio = Fraction(0), 0, Fraction(0)
        for seed in range(args.seeds):
            stream = gen_random(RandomSpec(n, args.dist, 0.3, seed, Fraction(1, args.epsilon_inv)))
            start = time.perf_counter()
            report = run(stream, args.epsilon_inv)
            seconds += time.perf_counter() - start
            events += len(stream)
            factor = max(factor, report.max_migration)
            repacked = max(repacked, report.max_repacked)
            ratio = max(ratio, report.max_ratio)
        print(f"{n:>6}{events / seconds:>10.0f}{float(factor):>12.2f}{repacked:>14}{float(ratio):>11.3f}")


if __name__ == "__main__":
    main()
