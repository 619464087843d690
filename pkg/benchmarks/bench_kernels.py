"""Compare the compiled and numpy maxout kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times one forward and one backward pass of a maxout layer for a few batch
and layer sizes with each backend, checks that both agree, and prints a
table of median wall times and the speed-up.
"""
import argparse
import timeit

import numpy as np

from choquet import _kernels_py

try:
    from choquet import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

CASES = [
    # (batch, fan_in, width, k)
    (512, 2, 32, 4),
    (512, 32, 32, 4),
    (4096, 32, 32, 2),
    (32768, 8, 8, 4),
]


def _case(batch, fan_in, width, k, seed=0):
    rng = np.random.default_rng(seed)
    H = rng.normal(size=(batch, fan_in))
    W = rng.normal(size=(width, k, fan_in + 1))
    G = rng.normal(size=(batch, width))
    return H, W, G, 1.0 / np.sqrt(width)


def _time(fn, repeat):
    return float(np.median(timeit.repeat(fn, number=1, repeat=repeat)))


def run(repeat: int):
    rows = []
    for batch, fan_in, width, k in CASES:
        H, W, G, scale = _case(batch, fan_in, width, k)
        backends = {"python": _kernels_py}
        if _compiled is not None:
            backends["cython"] = _compiled
        times = {}
        outs = {}
        for name, mod in backends.items():
            out, idx = mod.maxout_forward(H, W, scale)
            dW, dH = mod.maxout_backward(H, W, idx, G, scale)
            outs[name] = (out, idx, dW, dH)
            times[name] = (
                _time(lambda: mod.maxout_forward(H, W, scale), repeat),
                _time(lambda: mod.maxout_backward(H, W, idx, G, scale), repeat),
            )
        if "cython" in outs:
            for a, b in zip(outs["python"], outs["cython"]):
                np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
        rows.append(((batch, fan_in, width, k), times))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rows = run(args.repeat)
    print(f"{'batch':>6} {'fan':>4} {'width':>5} {'k':>2}  {'op':8} {'python ms':>10} {'cython ms':>10} {'speed-up':>8}")
    for (batch, fan_in, width, k), times in rows:
        for j, op in enumerate(("forward", "backward")):
            py = times["python"][j] * 1e3
            cy = times["cython"][j] * 1e3 if "cython" in times else float("nan")
            print(f"{batch:>6} {fan_in:>4} {width:>5} {k:>2}  {op:8} {py:>10.3f} {cy:>10.3f} {py / cy:>8.2f}")
    if _compiled is None:
        print("compiled extension not built; only the numpy backend was timed")


if __name__ == "__main__":
    main()
