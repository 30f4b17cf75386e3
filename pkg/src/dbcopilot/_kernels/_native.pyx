# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: automaton byte scan and BM25 posting accumulation.

Same contracts as ``dbcopilot._kernels._pure``; see that module for the
semantics. The operation order inside the loops matches the pure version
so both backends produce bit-identical floats.
"""


cdef inline int _step(const int[:] trans_start, const unsigned char[:] trans_byte,
                      const int[:] trans_next, int state, unsigned char b) noexcept nogil:
    cdef int lo = trans_start[state]
    cdef int hi = trans_start[state + 1]
    cdef int mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if trans_byte[mid] < b:
            lo = mid + 1
        else:
            hi = mid
    if lo < trans_start[state + 1] and trans_byte[lo] == b:
        return trans_next[lo]
    return -1


def ac_scan(const int[:] trans_start, const unsigned char[:] trans_byte,
            const int[:] trans_next, const int[:] fail, const int[:] out_link,
            const int[:] word_id, const int[:] word_len,
            const unsigned char[:] data):
    """Single left-to-right pass; returns (word_index, start_byte) pairs."""
    cdef list matches = []
    cdef int state = 0
    cdef int node, nxt, w
    cdef Py_ssize_t i, n = data.shape[0]
    cdef unsigned char b
    for i in range(n):
        b = data[i]
        while True:
            nxt = _step(trans_start, trans_byte, trans_next, state, b)
            if nxt >= 0:
                state = nxt
                break
            if state == 0:
                break
            state = fail[state]
        node = state
        while node >= 0:
            w = word_id[node]
            if w >= 0:
                matches.append((w, <int>i - word_len[w] + 1))
            node = out_link[node]
    return matches


def bm25_accumulate(const int[:] doc_idx, const int[:] tf, double idf, double k1,
                    const double[:] norm, double[:] scores):
    """Add one query term's BM25 contribution to ``scores`` in place."""
    cdef Py_ssize_t j
    cdef int d
    cdef double f
    cdef double top = k1 + 1.0
    for j in range(doc_idx.shape[0]):
        d = doc_idx[j]
        f = tf[j]
        scores[d] += idf * (f * top) / (f + norm[d])
