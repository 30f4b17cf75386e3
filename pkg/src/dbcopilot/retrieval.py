"""Hybrid retrieval: BM25 sparse arm, feature-hash dense arm, RRF fusion,
thresholded reranking, and neighbor expansion.

Every stage is exact (no approximate indexing) and deterministic: scores
are sorted descending with ties broken by ascending chunk id, and the
reranker removes every candidate scoring below zero.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from ._kernels import bm25_accumulate
from .errors import DimensionMismatch, UnknownChunkId
from .kb import KnowledgeBase, fnv1a64

BM25_K1 = 1.2
BM25_B = 0.75
RRF_C = 60
DEFAULT_DIM = 256

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, keep tokens of length >= 2."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= 2]


class Stage(str, Enum):
    SPARSE = "sparse"
    DENSE = "dense"
    FUSED = "fused"
    RERANKED = "reranked"


@dataclass
class ScoredChunk:
    chunk_id: str
    score: float
    stage: Stage


def _ranked(scores: dict[str, float], k: int, stage: Stage) -> list[ScoredChunk]:
    order = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [ScoredChunk(cid, s, stage) for cid, s in order[:k]]


# ---------------------------------------------------------------------------
# sparse arm

class SparseIndex:
    """BM25 inverted index over a knowledge base."""

    def __init__(self, kb: KnowledgeBase):
        self.chunk_ids: list[str] = [c.chunk_id for c in kb.chunks]
        self.doc_lengths: dict[str, int] = {}
        self.postings: dict[str, list[tuple[str, int]]] = {}
        self._postings_arrays: dict[str, tuple[np.ndarray, np.ndarray]] = {}

        lengths = np.zeros(len(self.chunk_ids), dtype=np.float64)
        term_docs: dict[str, list[tuple[int, int]]] = {}
        for idx, chunk in enumerate(kb.chunks):
            tokens = tokenize(chunk.text)
            self.doc_lengths[chunk.chunk_id] = len(tokens)
            lengths[idx] = len(tokens)
            for term, tf in sorted(Counter(tokens).items()):
                term_docs.setdefault(term, []).append((idx, tf))

        self.doc_count = len(self.chunk_ids)
        self.avg_doc_len = float(lengths.mean()) if self.doc_count else 0.0
        for term, entries in term_docs.items():
            self.postings[term] = [(self.chunk_ids[i], tf) for i, tf in entries]
            self._postings_arrays[term] = (
                np.array([i for i, _ in entries], dtype=np.int32),
                np.array([tf for _, tf in entries], dtype=np.int32),
            )
        # per-document BM25 length normalizer, shared by all terms
        avg = self.avg_doc_len or 1.0
        self._norm = BM25_K1 * (1.0 - BM25_B + BM25_B * lengths / avg)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))


def index_sparse(kb: KnowledgeBase) -> SparseIndex:
    return SparseIndex(kb)


def search_sparse(index: SparseIndex, query: str, k: int) -> list[ScoredChunk]:
    """Top-k chunks by BM25; chunks sharing no query term never appear."""
    if k < 1:
        raise ValueError("k must be >= 1")
    terms = [t for t in tokenize(query) if t in index.postings]
    if not terms:
        return []
    scores = np.zeros(index.doc_count, dtype=np.float64)
    matched: set[int] = set()
    for term in terms:
        doc_idx, tf = index._postings_arrays[term]
        bm25_accumulate(doc_idx, tf, index.idf(term), BM25_K1, index._norm, scores)
        matched.update(int(i) for i in doc_idx)
    by_id = {index.chunk_ids[i]: float(scores[i]) for i in matched}
    return _ranked(by_id, k, Stage.SPARSE)


# ---------------------------------------------------------------------------
# dense arm

class Embedder:
    """Text-to-vector interface; implementations must be deterministic."""

    dim: int = DEFAULT_DIM

    def embed(self, text: str) -> np.ndarray:
        raise NotImplementedError


class FeatureHashEmbedder(Embedder):
    """Signed feature hashing: token -> bucket ``h mod D``, sign from the
    hash's top bit, accumulated then L2-normalized. Empty text embeds to
    the zero vector."""

    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in tokenize(text):
            h = fnv1a64(token.encode("utf-8"))
            sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
            vec[h % self.dim] += sign
        n = float(np.linalg.norm(vec))
        return vec / n if n > 0 else vec


class DenseIndex:
    """Exact (exhaustive) cosine index; vectors are unit or all-zero."""

    def __init__(self, chunk_ids: list[str], matrix: np.ndarray):
        self.chunk_ids = chunk_ids
        self.matrix = matrix

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def save(self, path: str | Path) -> None:
        lines = []
        for cid, row in zip(self.chunk_ids, self.matrix):
            lines.append(json.dumps({"chunk_id": cid, "values": [float(v) for v in row]},
                                    separators=(",", ":")))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DenseIndex":
        ids, rows = [], []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            ids.append(rec["chunk_id"])
            rows.append(rec["values"])
        matrix = np.array(rows, dtype=np.float64) if rows else np.zeros((0, DEFAULT_DIM))
        return cls(ids, matrix)


def index_dense(kb: KnowledgeBase, embedder: Embedder | None = None) -> DenseIndex:
    embedder = embedder or FeatureHashEmbedder()
    matrix = np.zeros((len(kb.chunks), embedder.dim), dtype=np.float64)
    for i, chunk in enumerate(kb.chunks):
        matrix[i] = embedder.embed(chunk.text)
    return DenseIndex([c.chunk_id for c in kb.chunks], matrix)


def search_dense(index: DenseIndex, query_vec: np.ndarray, k: int) -> list[ScoredChunk]:
    if k < 1:
        raise ValueError("k must be >= 1")
    query_vec = np.asarray(query_vec, dtype=np.float64)
    if query_vec.shape != (index.dim,):
        raise DimensionMismatch(f"query dim {query_vec.shape} != index dim {index.dim}")
    if not np.any(query_vec):
        return []
    # per-row reduction rather than BLAS matmul: identical rows then score
    # bit-identically regardless of their position, keeping id tie-breaks sane
    scores = (index.matrix * query_vec).sum(axis=1)
    by_id = {cid: float(s) for cid, s in zip(index.chunk_ids, scores)}
    return _ranked(by_id, k, Stage.DENSE)


# ---------------------------------------------------------------------------
# fusion and rerank

def fuse_many(lists: list[list[ScoredChunk]], k: int) -> list[ScoredChunk]:
    """Reciprocal rank fusion: score(c) = sum over lists of 1/(60 + rank)."""
    scores: dict[str, float] = {}
    for ranked in lists:
        for rank, item in enumerate(ranked, start=1):
            scores[item.chunk_id] = scores.get(item.chunk_id, 0.0) + 1.0 / (RRF_C + rank)
    return _ranked(scores, k, Stage.FUSED)


def fuse(sparse_list: list[ScoredChunk], dense_list: list[ScoredChunk],
         k: int) -> list[ScoredChunk]:
    return fuse_many([sparse_list, dense_list], k)


class Reranker:
    """Second-stage relevance scorer; scores below zero mean irrelevant."""

    def score(self, query: str, chunk_text: str) -> float:
        raise NotImplementedError


class LexicalOverlapReranker(Reranker):
    """Dice overlap of token sets, shifted so zero overlap is negative:
    ``2*|Q & C| / (|Q| + |C|) - 0.1``."""

    def score(self, query: str, chunk_text: str) -> float:
        q = set(tokenize(query))
        c = set(tokenize(chunk_text))
        denom = len(q) + len(c)
        if denom == 0:
            return -0.1
        return 2.0 * len(q & c) / denom - 0.1


def rerank(query: str, candidates: list[ScoredChunk], kb: KnowledgeBase,
           scorer: Reranker | None = None) -> list[ScoredChunk]:
    """Rescore, sort descending, and drop everything below zero."""
    scorer = scorer or LexicalOverlapReranker()
    rescored: dict[str, float] = {}
    for cand in candidates:
        chunk = kb.get(cand.chunk_id)
        if chunk is None:
            raise UnknownChunkId(cand.chunk_id)
        rescored[cand.chunk_id] = scorer.score(query, chunk.text)
    kept = {cid: s for cid, s in rescored.items() if s >= 0}
    return _ranked(kept, len(kept), Stage.RERANKED)


def expand_neighbors(results: list[ScoredChunk], kb: KnowledgeBase,
                     radius: int) -> list[ScoredChunk]:
    """Pull in prev/next chunks within ``radius`` hops of each result.

    A neighbor scores fractionally below its parent (1e-9 per hop) so
    original ranking is preserved; duplicates keep their best score.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    best: dict[str, ScoredChunk] = {}

    def offer(chunk_id: str, score: float, stage: Stage) -> None:
        cur = best.get(chunk_id)
        if cur is None or score > cur.score:
            best[chunk_id] = ScoredChunk(chunk_id, score, stage)

    for item in results:
        offer(item.chunk_id, item.score, item.stage)
        chunk = kb.get(item.chunk_id)
        if chunk is None:
            continue
        for direction in ("prev_id", "next_id"):
            cursor = chunk
            for dist in range(1, radius + 1):
                next_id = getattr(cursor, direction)
                if next_id is None:
                    break
                cursor = kb.by_id[next_id]
                offer(cursor.chunk_id, item.score - 1e-9 * dist, item.stage)
    order = sorted(best.values(), key=lambda sc: (-sc.score, sc.chunk_id))
    return order


# ---------------------------------------------------------------------------
# pipeline

class Retriever:
    """Immutable index pair plus the full retrieve pipeline."""

    def __init__(self, kb: KnowledgeBase, embedder: Embedder | None = None,
                 reranker: Reranker | None = None):
        self.kb = kb
        self.embedder = embedder or FeatureHashEmbedder()
        self.reranker = reranker or LexicalOverlapReranker()
        self.sparse = index_sparse(kb)
        self.dense = index_dense(kb, self.embedder)

    def retrieve(self, query: str, k: int, variants: list[str] | None = None) -> list[ScoredChunk]:
        """sparse+dense per query variant -> RRF -> rerank -> neighbors.

        The rerank stage always scores against the original query; the
        final list is capped at ``k``.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        queries = [query]
        for v in variants or []:
            if v not in queries:
                queries.append(v)
        pool = max(2 * k, 10)
        lists = []
        for q in queries:
            lists.append(search_sparse(self.sparse, q, pool))
            lists.append(search_dense(self.dense, self.embedder.embed(q), pool))
        fused = fuse_many(lists, pool)
        reranked = rerank(query, fused, self.kb, self.reranker)
        expanded = expand_neighbors(reranked, self.kb, radius=1)
        return expanded[:k]


def retrieve(query: str, kb: KnowledgeBase, k: int) -> list[ScoredChunk]:
    """One-shot convenience; long-lived callers should hold a Retriever."""
    return Retriever(kb).retrieve(query, k)
