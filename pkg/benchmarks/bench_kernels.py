"""Time the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel runs on identical inputs under both flavours; numba is warmed up
(compiled) before timing and results are cross-checked for agreement.
"""
import argparse
import json
import math
import timeit

import numpy as np

from amenable_entropy import _kernels
from amenable_entropy.estimators import ball_levels, _allowed_mask
from amenable_entropy.group import centered_boxes
from amenable_entropy.shift import build_tree, full_shift, random_tree


def cases():
    seq = centered_boxes(1)
    rng = np.random.Generator(np.random.Philox(1))

    full = ball_levels(build_tree(full_shift(2), 9, seq))
    parent, offsets, weights = full.truncated(full.depth)
    allowed = _allowed_mask(full.depth, 1, None)
    yield "tree_objective (full shift, depth 9)", "tree_objective", (parent, offsets, weights, 0.69, 1, allowed, True)

    pruned = ball_levels(random_tree(seq, 3, 6, 0.25, rng))
    p2, o2, w2 = pruned.truncated(pruned.depth)
    yield "tree_objective (random 3-symbol, depth 6)", "tree_objective", (p2, o2, w2, 0.5, 2, _allowed_mask(pruned.depth, 2, None), False)

    steps = 2 * rng.integers(0, 2, 1_000_000) - 1
    yield "walk_envelopes (L=1e6)", "walk_envelopes", (steps,)

    mat = 2 * rng.integers(0, 2, (200, 10_000)) - 1
    yield "range_at (200 x 1e4)", "range_at", (mat,)

    vals = rng.integers(0, 2, 20_005)
    yield "window_histogram (5 sites, 2e4 anchors)", "window_histogram", (vals, np.arange(5), 2, 0, 20_000)


def agree(a, b):
    if isinstance(a, tuple):
        return all(agree(x, y) for x, y in zip(a, b))
    if isinstance(a, float):
        return math.isclose(a, b, rel_tol=1e-12)
    return np.array_equal(a, b)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        print("numba is unavailable; both columns time the numpy path")
    rows = []
    print(f"{'kernel':44s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}  agree")
    for label, name, inputs in cases():
        fn_np, fn_nb = _kernels.NUMPY[name], _kernels.NUMBA[name]
        same = agree(fn_np(*inputs), fn_nb(*inputs))
        t = {}
        for flavour, fn in (("numpy", fn_np), ("numba", fn_nb)):
            timer = timeit.Timer(lambda: fn(*inputs))
            loops, _ = timer.autorange()
            t[flavour] = min(timer.repeat(args.repeat, loops)) / loops * 1e3
        rows.append({"kernel": label, "numpy_ms": t["numpy"], "numba_ms": t["numba"],
                     "speedup": t["numpy"] / t["numba"], "agree": bool(same)})
        print(f"{label:44s} {t['numpy']:11.3f} {t['numba']:11.3f} {t['numpy'] / t['numba']:7.1f}x  {same}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
