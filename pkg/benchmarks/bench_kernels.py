"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Prints one row per kernel with the best-of-N wall time for each backend and
the speedup. The Cython column is skipped when the extension is not built.
"""

import argparse
import timeit

import numpy as np

from zcal import _kernels_py

try:
    from zcal import _ckernels
except ImportError:
    _ckernels = None


def _boxes(rng, n, span):
    xy = rng.uniform(0, span, (n, 2))
    return np.hstack([xy, xy + rng.uniform(5, 60, (n, 2))])


def cases(rng):
    probs = rng.dirichlet(np.ones(20), size=20_000)
    a, b = _boxes(rng, 400, 600), _boxes(rng, 300, 600)
    # evaluation-shaped workload: 2000 images, ~6 dets and ~3 GTs each
    n_img = 2000
    dg = np.sort(rng.integers(0, n_img, 12_000))
    gg = np.sort(rng.integers(0, n_img, 6_000))
    db, gb = _boxes(rng, dg.size, 200), _boxes(rng, gg.size, 200)
    conf = rng.random(dg.size)
    tp = rng.integers(0, 2, 50_000).astype(np.int8)
    ap_conf = rng.random(tp.size)
    return {
        "box_scores/entropy 20k x 20": lambda k: k.box_scores(probs, k.ENTROPY),
        "box_scores/margin 20k x 20": lambda k: k.box_scores(probs, k.MARGIN),
        "iou_matrix 400 x 300": lambda k: k.iou_matrix(a, b),
        "greedy_match 12k dets / 6k gts": lambda k: k.greedy_match(dg, db, conf, gg, gb, 0.5),
        "average_precision 50k": lambda k: k.average_precision(ap_conf, tp, 30_000, False),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:34s} {t_py:12.2f} {'n/a':>12s} {'':>8s}")
            continue
        t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:34s} {t_py:12.2f} {t_c:12.2f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
