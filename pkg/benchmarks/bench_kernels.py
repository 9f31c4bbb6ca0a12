"""Time the compiled and numpy kernels on the same inputs and check they agree.

    python3 benchmarks/bench_kernels.py [--trials 20000] [--repeat 3]
"""

import argparse
import importlib
import timeit

import numpy as np

from genlab import _pykernels


def cases(trials):
    x = (np.arange(8) + 0.5) / 8
    y = np.where(np.arange(8) % 2 == 0, 1, -1).astype(np.int64)
    return {
        "altline M=3 N=8": ("altline_trials", (x, y, 3, 4, trials, 200, 12345)),
        "coprime n=10 N=29": ("coprime_trials", (10, 29, trials * 10, 12345)),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=20_000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    try:
        compiled = importlib.import_module("genlab._ckernels")
    except ImportError:
        compiled = None
        print("compiled extension not built; timing numpy only")

    print(f"{'kernel':<20} {'numpy s':>10} {'cython s':>10} {'speedup':>8}")
    for name, (fn, fargs) in cases(args.trials).items():
        py = getattr(_pykernels, fn)
        t_py = min(timeit.repeat(lambda: py(*fargs), number=1, repeat=args.repeat))
        if compiled is None:
            print(f"{name:<20} {t_py:>10.4f} {'-':>10} {'-':>8}")
            continue
        c = getattr(compiled, fn)
        t_c = min(timeit.repeat(lambda: c(*fargs), number=1, repeat=args.repeat))
        a, b = py(*fargs), c(*fargs)
        same = all(np.array_equal(u, v) for u, v in zip(a, b)) if isinstance(a, tuple) \
            else np.array_equal(a, b)
        if not same:
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<20} {t_py:>10.4f} {t_c:>10.4f} {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
