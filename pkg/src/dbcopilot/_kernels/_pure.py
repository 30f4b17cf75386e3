"""Pure-Python reference kernels, semantically identical to the Cython ones.

The automaton is passed in flattened CSR form (see safety.SensitiveLexicon):
per-node edge ranges into parallel byte/target arrays, failure links, and
output links. Keeping the data layout shared between backends means the
selection at import time changes speed only, never behavior.
"""

from __future__ import annotations

from bisect import bisect_left


def ac_scan(trans_start, trans_byte, trans_next, fail, out_link, word_id,
            word_len, data: bytes) -> list[tuple[int, int]]:
    """Scan ``data`` once, reporting every pattern occurrence.

    Returns ``(word_index, start_byte)`` pairs in scan order (by end
    position, longest suffix first at equal ends).
    """
    matches: list[tuple[int, int]] = []
    state = 0
    for i, b in enumerate(data):
        while True:
            lo = trans_start[state]
            hi = trans_start[state + 1]
            j = bisect_left(trans_byte, b, lo, hi)
            if j < hi and trans_byte[j] == b:
                state = trans_next[j]
                break
            if state == 0:
                break
            state = fail[state]
        node = state
        while node >= 0:
            w = word_id[node]
            if w >= 0:
                matches.append((w, i - word_len[w] + 1))
            node = out_link[node]
    return matches


def bm25_accumulate(doc_idx, tf, idf: float, k1: float, norm, scores) -> None:
    """Add one query term's BM25 contribution to ``scores`` in place.

    ``norm`` holds the precomputed per-document length normalizer
    ``k1 * (1 - b + b * dl / avgdl)``.
    """
    top = k1 + 1.0
    for j in range(len(doc_idx)):
        d = doc_idx[j]
        f = tf[j]
        scores[d] += idf * (f * top) / (f + norm[d])
