"""Time the compiled kernels against their pure-Python twins.

Each case runs through the public function that calls the kernel
(``oversegment``, ``build_retrieval_set``, ``alpha_beta_swap``), so the
numbers include the numpy work around it. Outputs of both backends are
compared before timing.

    python benchmarks/bench_kernels.py [--repeat 3] [--size 120 160]
"""
import argparse
import contextlib
import time

import numpy as np

from sceneparse import kernels
from sceneparse.retrieval import TrainingIndex, build_retrieval_set
from sceneparse.segmentation import oversegment
from sceneparse.smoothing import MrfProblem, alpha_beta_swap
from sceneparse.synth import make_scene


@contextlib.contextmanager
def use_backend(name):
    impl = kernels.get_backend(name)
    saved = {k: getattr(kernels, k) for k in ("segment_graph", "greedy_match", "maxflow")}
    for k in saved:
        setattr(kernels, k, getattr(impl, k))
    try:
        yield
    finally:
        for k, v in saved.items():
            setattr(kernels, k, v)


def grid_edges(h, w):
    idx = np.arange(h * w).reshape(h, w)
    a = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    b = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    return a, b


def make_cases(size, rng):
    img, _ = make_scene(rng, "street", size=tuple(size))

    n_t, n_q, dim = 4000, 60, 20
    index = TrainingIndex(
        features=rng.normal(size=(n_t, dim)),
        image_of=np.sort(rng.integers(0, 100, n_t)),
        labels=rng.integers(0, 4, n_t),
        n_images=100,
        n_labels=4,
    )
    Q = rng.normal(size=(n_q, dim))

    h, w = 40, 40
    a, b = grid_edges(h, w)
    V = np.triu(rng.random((5, 5)), 1)
    problem = MrfProblem(rng.random((h * w, 5)), a, b, rng.random(a.size), V + V.T, lam=2.0)
    start = problem.unary.argmin(axis=1)

    return {
        "segment_graph": lambda: oversegment(img).segment_id,
        "greedy_match": lambda: build_retrieval_set(Q, index, 1000, 0.3).scores,
        "maxflow (swap)": lambda: alpha_beta_swap(problem, start).labels,
    }


def timed(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--size", type=int, nargs=2, default=(120, 160), metavar=("H", "W"))
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the Python backend is timed")
    cases = make_cases(args.size, np.random.default_rng(0))

    print(f"{'kernel':<16}" + "".join(f"{b:>12}" for b in backends) + f"{'speed-up':>10}")
    for name, fn in cases.items():
        times, outs = {}, {}
        for b in backends:
            with use_backend(b):
                times[b], outs[b] = timed(fn, args.repeat)
        if len(outs) == 2:
            assert np.allclose(outs["cython"], outs["python"]), f"{name}: backends disagree"
        ratio = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<16}" + "".join(f"{times[b]:>11.4f}s" for b in backends) + f"{ratio:>9.1f}x")


if __name__ == "__main__":
    main()
