"""Two-stage risky-question control.

Stage one is a literal word detector: a multi-pattern automaton (trie plus
failure links, built over UTF-8 bytes of lowercased NFC text) that reports
every occurrence of every lexicon word, overlaps included, in one
left-to-right pass. Stage two is a pluggable content classifier with a
deterministic rule-based default. A question (or a generated answer; the
check is symmetric) is blocked when either stage fires.
"""

from __future__ import annotations

import json
import re
import unicodedata
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from ._kernels import ac_scan
from .errors import EmptyWord

REFUSAL_TEXT = "GaussMaster cannot answer such a question."

SAFETY_GUIDELINES = (
    "Safety guidelines:\n"
    "(a) Classify the request first: if it touches sensitive topics such as "
    "data privacy violations, unauthorized access, or destructive operations, "
    "refuse instead of answering.\n"
    "(b) Judge whether the request is highly relevant to GaussDB; answer only "
    "GaussDB-relevant requests, strictly from the provided context."
)


def normalize_for_match(text: str) -> str:
    """Lowercase + NFC; offsets are reported against this form's UTF-8 bytes."""
    return unicodedata.normalize("NFC", text.lower())


class RiskLabel(str, Enum):
    SAFE = "safe"
    RISKY_DB_OPERATION = "risky_db_operation"
    GENERAL_UNSAFE = "general_unsafe"


class CheckStage(str, Enum):
    PRE_QUESTION = "pre_question"
    POST_ANSWER = "post_answer"


@dataclass
class RiskVerdict:
    blocked: bool
    matched_words: list[tuple[str, int]]
    classifier_label: RiskLabel
    stage: CheckStage


class SensitiveLexicon:
    """Flattened multi-pattern automaton over normalized word bytes.

    Construction is classic three-phase: insert every word into a byte
    trie, compute failure links breadth-first (longest proper suffix that
    is also a pattern prefix), then derive output links so shorter words
    ending at the same position are reported too. The automaton is stored
    as CSR arrays consumed by the scan kernel (compiled or pure).
    """

    def __init__(self, words: list[str]):
        cleaned: list[str] = []
        seen: set[str] = set()
        for word in words:
            norm = normalize_for_match(word.strip())
            if not norm:
                raise EmptyWord("lexicon words must be non-empty")
            if norm not in seen:
                seen.add(norm)
                cleaned.append(norm)
        self.words = cleaned
        self.word_count = len(cleaned)

        children: list[dict[int, int]] = [{}]
        terminal: list[int] = [-1]
        for wi, word in enumerate(cleaned):
            node = 0
            for b in word.encode("utf-8"):
                nxt = children[node].get(b)
                if nxt is None:
                    children.append({})
                    terminal.append(-1)
                    nxt = len(children) - 1
                    children[node][b] = nxt
                node = nxt
            terminal[node] = wi

        n = len(children)
        fail = [0] * n
        out_link = [-1] * n
        queue: deque[int] = deque()
        for v in children[0].values():
            queue.append(v)
        while queue:
            u = queue.popleft()
            fu = fail[u]
            out_link[u] = fu if terminal[fu] >= 0 else out_link[fu]
            for b, v in children[u].items():
                f = fail[u]
                while f and b not in children[f]:
                    f = fail[f]
                fail[v] = children[f].get(b, 0)
                queue.append(v)

        starts = np.zeros(n + 1, dtype=np.int32)
        edge_bytes: list[int] = []
        edge_next: list[int] = []
        for u in range(n):
            starts[u] = len(edge_bytes)
            for b in sorted(children[u]):
                edge_bytes.append(b)
                edge_next.append(children[u][b])
        starts[n] = len(edge_bytes)

        self._trans_start = starts
        self._trans_byte = np.array(edge_bytes, dtype=np.uint8)
        self._trans_next = np.array(edge_next, dtype=np.int32)
        self._fail = np.array(fail, dtype=np.int32)
        self._out_link = np.array(out_link, dtype=np.int32)
        self._word_id = np.array(terminal, dtype=np.int32)
        self._word_len = np.array([len(w.encode("utf-8")) for w in cleaned] or [0],
                                  dtype=np.int32)

    def scan(self, data: bytes) -> list[tuple[int, int]]:
        return ac_scan(self._trans_start, self._trans_byte, self._trans_next,
                       self._fail, self._out_link, self._word_id,
                       self._word_len, data)


def build_lexicon(words: list[str]) -> SensitiveLexicon:
    return SensitiveLexicon(words)


def detect_words(text: str, lexicon: SensitiveLexicon) -> list[tuple[str, int]]:
    """All lexicon-word occurrences in normalized ``text``.

    Returns ``(word, byte_offset)`` pairs sorted by offset then word;
    overlapping matches are all reported.
    """
    if not text or lexicon.word_count == 0:
        return []
    data = normalize_for_match(text).encode("utf-8")
    hits = sorted((off, lexicon.words[w]) for w, off in lexicon.scan(data))
    return [(word, off) for off, word in hits]


def load_lexicon_file(path: str | Path) -> SensitiveLexicon:
    """One word per line, UTF-8; blank lines and ``#`` comments ignored."""
    words = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.append(line)
    return build_lexicon(words)


# ---------------------------------------------------------------------------
# content classifier

class Classifier:
    """Content classifier interface; must return within 500 ms for <=10 KB."""

    def classify(self, text: str) -> RiskLabel:
        raise NotImplementedError


@dataclass
class RuleClassifier(Classifier):
    """Deterministic regex rules; risky database intent takes precedence."""

    risky_patterns: list[re.Pattern] = field(default_factory=list)
    unsafe_patterns: list[re.Pattern] = field(default_factory=list)

    @classmethod
    def from_config(cls, config: dict) -> "RuleClassifier":
        return cls(
            risky_patterns=[re.compile(p, re.IGNORECASE)
                            for p in config.get("risky_db_operation", [])],
            unsafe_patterns=[re.compile(p, re.IGNORECASE)
                             for p in config.get("general_unsafe", [])],
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "RuleClassifier":
        return cls.from_config(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def default(cls) -> "RuleClassifier":
        data = resources.files("dbcopilot.data").joinpath("classifier_patterns.json")
        return cls.from_config(json.loads(data.read_text(encoding="utf-8")))

    def classify(self, text: str) -> RiskLabel:
        for pattern in self.risky_patterns:
            if pattern.search(text):
                return RiskLabel.RISKY_DB_OPERATION
        for pattern in self.unsafe_patterns:
            if pattern.search(text):
                return RiskLabel.GENERAL_UNSAFE
        return RiskLabel.SAFE


def check(text: str, lexicon: SensitiveLexicon, classifier: Classifier,
          stage: CheckStage) -> RiskVerdict:
    """Run both stages; a classifier failure blocks (fail-closed)."""
    matched = detect_words(text, lexicon)
    try:
        label = classifier.classify(text)
    except Exception:
        label = RiskLabel.GENERAL_UNSAFE
    return RiskVerdict(
        blocked=bool(matched) or label is not RiskLabel.SAFE,
        matched_words=matched,
        classifier_label=label,
        stage=stage,
    )


def refusal_response() -> str:
    return REFUSAL_TEXT


def safety_prompt(base_prompt: str) -> str:
    """Append the guideline block exactly once."""
    if SAFETY_GUIDELINES in base_prompt:
        return base_prompt
    return base_prompt + "\n\n" + SAFETY_GUIDELINES


@dataclass
class SafetyGate:
    """Lexicon + classifier bundle applied symmetrically pre and post."""

    lexicon: SensitiveLexicon
    classifier: Classifier

    def check(self, text: str, stage: CheckStage) -> RiskVerdict:
        return check(text, self.lexicon, self.classifier, stage)
