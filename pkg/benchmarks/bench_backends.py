"""Compare the compiled core against the pure-Python fallback.

    python benchmarks/bench_backends.py --sizes 100,1000,10000 --repeat 5

Both backends are imported directly, so the result does not depend on
FDPKIT_PURE_PYTHON.  Every timing is checked for bit-identical output first.
"""

from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from fdpkit import _pycore
from fdpkit.accumulator import AccumConfig

try:
    from fdpkit import _core
except ImportError:
    _core = None


def best(fn, repeat: int) -> float:
    number = 1
    while timeit.timeit(fn, number=number) < 0.05 and number < 10**5:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="100,1000,10000")
    ap.add_argument("--acc", default="30:30:-30")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=20221)
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled core not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1
    cfg = AccumConfig.parse(args.acc)
    rng = np.random.default_rng(args.seed)
    print(f"seed={args.seed} acc={cfg} width={cfg.width}")
    print(f"{'kernel':<10}{'n':>8}{'core_us':>12}{'python_us':>12}{'speedup':>10}")
    for n in (int(s) for s in args.sizes.split(",")):
        x = (rng.standard_normal(n) * np.exp2(rng.integers(-20, 21, n))).view(np.uint64)
        y = (rng.standard_normal(n) * np.exp2(rng.integers(-20, 21, n))).view(np.uint64)
        cases = {
            "fdp": (lambda m: lambda: m.fdp_f64(x, y, cfg.width, cfg.lsb)),
            "fma_chain": (lambda m: lambda: m.fma_chain_f64(x, y)),
        }
        for name, make in cases.items():
            fast, slow = make(_core), make(_pycore)
            if fast() != slow():
                print(f"{name} n={n}: backends disagree", file=sys.stderr)
                return 1
            tc, tp = best(fast, args.repeat), best(slow, args.repeat)
            print(f"{name:<10}{n:>8}{tc * 1e6:>12.1f}{tp * 1e6:>12.1f}{tp / tc:>10.0f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
