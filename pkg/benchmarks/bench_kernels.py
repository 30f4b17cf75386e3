"""Benchmark the compiled kernels against the pure-Python fallback.

Run after building the extension in place:

    python setup.py build_ext --inplace
    python benchmarks/bench_kernels.py

Prints a small table of scan and BM25 accumulation timings for both
backends over the same inputs, matching results included.
"""

from __future__ import annotations

import random
import string
import time

import numpy as np

from dbcopilot._kernels import _pure
from dbcopilot.safety import build_lexicon, normalize_for_match

try:
    from dbcopilot._kernels import _native
except ImportError:
    _native = None


def automaton_args(lexicon):
    return (lexicon._trans_start, lexicon._trans_byte, lexicon._trans_next,
            lexicon._fail, lexicon._out_link, lexicon._word_id, lexicon._word_len)


def time_it(fn, repeat=5):
    best = float("inf")
    result = None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def bench_scan():
    rng = random.Random(1234)
    words = sorted({"".join(rng.choices(string.ascii_lowercase, k=rng.randint(4, 12)))
                    for _ in range(20000)})
    lexicon = build_lexicon(words)
    text = " ".join(rng.choices(words, k=400)) + \
        "".join(rng.choices(string.ascii_lowercase + " ", k=6000))
    data = normalize_for_match(text).encode()

    rows = []
    t_pure, hits_pure = time_it(lambda: _pure.ac_scan(*automaton_args(lexicon), data))
    rows.append(("ac_scan", "pure", t_pure, len(hits_pure)))
    if _native is not None:
        t_nat, hits_nat = time_it(lambda: _native.ac_scan(*automaton_args(lexicon), data))
        assert hits_nat == hits_pure
        rows.append(("ac_scan", "native", t_nat, len(hits_nat)))
    return rows


def bench_bm25():
    rng = random.Random(99)
    n_docs = 50000
    norm = np.abs(np.random.default_rng(3).normal(1.2, 0.3, n_docs)) + 0.1
    doc_idx = np.array(sorted(rng.sample(range(n_docs), 20000)), dtype=np.int32)
    tf = np.array([rng.randint(1, 9) for _ in doc_idx], dtype=np.int32)

    rows = []

    def run(impl):
        scores = np.zeros(n_docs)
        for _ in range(10):  # ten query terms
            impl.bm25_accumulate(doc_idx, tf, 2.17, 1.2, norm, scores)
        return scores

    t_pure, scores_pure = time_it(lambda: run(_pure), repeat=3)
    rows.append(("bm25_accumulate x10", "pure", t_pure, float(scores_pure.sum())))
    if _native is not None:
        t_nat, scores_nat = time_it(lambda: run(_native), repeat=3)
        assert np.array_equal(scores_pure, scores_nat)
        rows.append(("bm25_accumulate x10", "native", t_nat, float(scores_nat.sum())))
    return rows


def main() -> None:
    rows = bench_scan() + bench_bm25()
    print(f"{'kernel':<22}{'backend':<9}{'best (ms)':>12}  check")
    for kernel, backend, seconds, check in rows:
        print(f"{kernel:<22}{backend:<9}{seconds * 1000:>12.2f}  {check}")
    by_kernel: dict[str, dict[str, float]] = {}
    for kernel, backend, seconds, _ in rows:
        by_kernel.setdefault(kernel, {})[backend] = seconds
    for kernel, timings in by_kernel.items():
        if "native" in timings and "pure" in timings:
            print(f"{kernel}: native is {timings['pure'] / timings['native']:.1f}x "
                  f"faster than pure")
    if _native is None:
        print("native extension not built; run: python setup.py build_ext --inplace")


if __name__ == "__main__":
    main()
