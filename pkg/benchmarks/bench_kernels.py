"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py --horizon 20000 --repeat 3
"""
import argparse
import timeit

import numpy as np

from semimarkov import collect_statistics, load_bundled, run_filter, run_smoother, simulate_path
from semimarkov.kernels import get_backend


def cases(model, obs, y, backend):
    filt = run_filter(model, obs, y, backend=backend)
    return {
        "simulate": lambda: simulate_path(model, y.size - 1, 0, backend=backend),
        "filter": lambda: run_filter(model, obs, y, backend=backend),
        "smoother": lambda: run_smoother(model, obs, y, filt=filt, backend=backend),
        "statistics": lambda: collect_statistics(model, obs, y, filt=filt, backend=backend),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--model", default="mixed3", help="bundled model name")
    parser.add_argument("--horizon", type=int, default=20_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    try:
        get_backend("cython")
        backends = ["cython", "python"]
    except ImportError:
        print("compiled extension not built; timing the fallback only")
        backends = ["python"]

    model, obs = load_bundled(args.model)
    y = np.random.default_rng(0).normal(size=args.horizon + 1)
    times = {}
    for backend in backends:
        for name, fn in cases(model, obs, y, backend).items():
            times[name, backend] = min(timeit.repeat(fn, number=1, repeat=args.repeat))

    print(f"model {args.model}, T = {args.horizon}, best of {args.repeat}")
    print(f"{'kernel':<12}" + "".join(f"{b:>12}" for b in backends)
          + ("   speedup" if len(backends) == 2 else ""))
    for name in ("simulate", "filter", "smoother", "statistics"):
        row = f"{name:<12}" + "".join(f"{times[name, b]:>11.4f}s" for b in backends)
        if len(backends) == 2:
            row += f"{times[name, 'python'] / times[name, 'cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
