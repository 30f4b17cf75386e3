"""Knowledge-base ingestion: parse, split, deduplicate, persist.

Documents (markdown or plaintext) are parsed into typed blocks, packed
greedily into chunks at paragraph boundaries (code fences and tables are
never split), de-duplicated globally by a 64-bit content hash over
normalized text, and linked prev/next within each document. The result is
an immutable ``KnowledgeBase`` that serializes to a JSON-Lines manifest
(``kb.jsonl``) byte-identically across runs.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import InvalidEncoding, UnsupportedFormat

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1

_HEADING_RE = re.compile(r"^(#{1,6})\s+(.*)$")
_LIST_RE = re.compile(r"^\s*(?:[-*+]|\d+[.)])\s+\S")

MANIFEST_FIELDS = ("chunk_id", "text", "content_hash", "version_tag",
                   "prev_id", "next_id", "heading_path", "source")


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a. Used as an index key only; equality is re-checked."""
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK64
    return h


def normalize_text(text: str) -> str:
    """Trim, collapse whitespace runs to single spaces, NFC-normalize."""
    return unicodedata.normalize("NFC", " ".join(text.split()))


def content_hash(text: str) -> int:
    return fnv1a64(normalize_text(text).encode("utf-8"))


class BlockKind(str, Enum):
    HEADING = "heading"
    PARAGRAPH = "paragraph"
    CODE_FENCE = "code_fence"
    TABLE = "table"
    LIST_ITEM = "list_item"


@dataclass
class Block:
    kind: BlockKind
    text: str
    level: int = 0          # heading level 1..6, else 0
    info: str = ""          # code fence info string ("sql", ...)
    closed: bool = True     # False only for an unterminated fence

    def render(self) -> str:
        """Markdown-syntax text of the block, as it appears in a chunk."""
        if self.kind is BlockKind.HEADING:
            return "#" * self.level + " " + self.text
        if self.kind is BlockKind.CODE_FENCE:
            tail = "\n```" if self.closed else ""
            return f"```{self.info}\n{self.text}{tail}"
        return self.text


@dataclass
class SourceDocument:
    doc_id: str
    format: str
    source: str
    version_tag: str
    blocks: list[Block] = field(default_factory=list)


@dataclass
class Chunk:
    chunk_id: str
    text: str
    content_hash: int
    version_tag: str
    prev_id: str | None = None
    next_id: str | None = None
    heading_path: list[str] = field(default_factory=list)
    source: str = ""

    @property
    def doc_id(self) -> str:
        return self.chunk_id.rsplit(":", 1)[0]


@dataclass
class SplitConfig:
    min_chars: int = 200
    max_chars: int = 800

    def __post_init__(self) -> None:
        if not (self.max_chars >= self.min_chars > 0):
            raise ValueError("require max_chars >= min_chars > 0")

    @classmethod
    def from_file(cls, path: str | Path) -> "SplitConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(min_chars=int(raw["min_chars"]), max_chars=int(raw["max_chars"]))


# ---------------------------------------------------------------------------
# parsing

def parse_document(raw: bytes, format: str, doc_id: str, source: str,
                   version_tag: str) -> SourceDocument:
    """Decode and parse one document into ordered blocks."""
    if format not in ("markdown", "plaintext"):
        raise UnsupportedFormat(f"unsupported format: {format!r}")
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidEncoding(f"{doc_id}: not valid UTF-8: {exc}") from exc
    blocks = _parse_markdown(text) if format == "markdown" else _parse_plaintext(text)
    return SourceDocument(doc_id=doc_id, format=format, source=source,
                          version_tag=version_tag, blocks=blocks)


def _parse_plaintext(text: str) -> list[Block]:
    blocks = []
    for para in re.split(r"\n\s*\n", text):
        para = para.strip()
        if para:
            blocks.append(Block(BlockKind.PARAGRAPH, para))
    return blocks


def _parse_markdown(text: str) -> list[Block]:
    blocks: list[Block] = []
    para: list[str] = []
    table: list[str] = []

    def flush_para() -> None:
        if para:
            blocks.append(Block(BlockKind.PARAGRAPH, "\n".join(para)))
            para.clear()

    def flush_table() -> None:
        if table:
            blocks.append(Block(BlockKind.TABLE, "\n".join(table)))
            table.clear()

    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i]
        stripped = line.strip()

        if stripped.startswith("```"):
            flush_para()
            flush_table()
            info = stripped[3:].strip()
            body: list[str] = []
            i += 1
            closed = False
            while i < len(lines):
                if lines[i].strip().startswith("```"):
                    closed = True
                    i += 1
                    break
                body.append(lines[i])
                i += 1
            blocks.append(Block(BlockKind.CODE_FENCE, "\n".join(body),
                                info=info, closed=closed))
            continue

        if not stripped:
            flush_para()
            flush_table()
            i += 1
            continue

        m = _HEADING_RE.match(stripped)
        if m:
            flush_para()
            flush_table()
            blocks.append(Block(BlockKind.HEADING, m.group(2).strip(),
                                level=len(m.group(1))))
            i += 1
            continue

        if stripped.startswith("|"):
            flush_para()
            table.append(stripped)
            i += 1
            continue
        flush_table()

        if _LIST_RE.match(line):
            flush_para()
            blocks.append(Block(BlockKind.LIST_ITEM, stripped))
            i += 1
            continue

        para.append(stripped)
        i += 1

    flush_para()
    flush_table()
    return blocks


# ---------------------------------------------------------------------------
# splitting

def _render_blocks(blocks: list[Block]) -> str:
    return "\n\n".join(b.render() for b in blocks)


def split_into_chunks(doc: SourceDocument, cfg: SplitConfig | None = None) -> list[Chunk]:
    """Greedy paragraph-boundary packing with atomic fences and tables.

    Headings always open a new chunk; other blocks accumulate until adding
    the next one would push the rendered text past ``max_chars``, except
    that a chunk shorter than ``min_chars`` keeps absorbing blocks. A
    single oversized block (long code fence, wide table) becomes its own
    chunk rather than being split.
    """
    cfg = cfg or SplitConfig()
    heading_stack: list[tuple[int, str]] = []
    groups: list[tuple[list[Block], list[str]]] = []
    current: list[Block] = []
    current_path: list[str] = []

    def snapshot() -> list[str]:
        return [t for _, t in heading_stack]

    def close() -> None:
        nonlocal current, current_path
        if current:
            groups.append((current, current_path))
        current = []
        current_path = []

    for block in doc.blocks:
        if block.kind is BlockKind.HEADING:
            close()
            while heading_stack and heading_stack[-1][0] >= block.level:
                heading_stack.pop()
            heading_stack.append((block.level, block.text))
            current = [block]
            current_path = snapshot()
            continue
        if not current:
            current = [block]
            current_path = snapshot()
            continue
        grown = len(_render_blocks(current)) + 2 + len(block.render())
        if grown > cfg.max_chars and len(_render_blocks(current)) >= cfg.min_chars:
            close()
            current = [block]
            current_path = snapshot()
        else:
            current.append(block)
    close()

    chunks: list[Chunk] = []
    for i, (blocks, path) in enumerate(groups):
        text = _render_blocks(blocks)
        chunks.append(Chunk(
            chunk_id=f"{doc.doc_id}:{i:04d}",
            text=text,
            content_hash=content_hash(text),
            version_tag=doc.version_tag,
            heading_path=list(path),
            source=doc.source,
        ))
    for i, chunk in enumerate(chunks):
        chunk.prev_id = chunks[i - 1].chunk_id if i > 0 else None
        chunk.next_id = chunks[i + 1].chunk_id if i < len(chunks) - 1 else None
    return chunks


# ---------------------------------------------------------------------------
# de-duplication

def deduplicate(chunks: list[Chunk]) -> list[Chunk]:
    """Keep first occurrences; drop later chunks with equal normalized text.

    The hash is only an index: textual equality is re-checked so a hash
    collision can never merge different chunks. Survivors' prev/next links
    are rewired to skip dropped chunks within the same document.
    """
    buckets: dict[int, list[Chunk]] = {}
    survivors: list[Chunk] = []
    for chunk in chunks:
        bucket = buckets.setdefault(chunk.content_hash, [])
        norm = normalize_text(chunk.text)
        if any(normalize_text(kept.text) == norm for kept in bucket):
            continue
        bucket.append(chunk)
        survivors.append(chunk)

    by_doc: dict[str, list[Chunk]] = {}
    for chunk in survivors:
        by_doc.setdefault(chunk.doc_id, []).append(chunk)
    for doc_chunks in by_doc.values():
        for i, chunk in enumerate(doc_chunks):
            chunk.prev_id = doc_chunks[i - 1].chunk_id if i > 0 else None
            chunk.next_id = doc_chunks[i + 1].chunk_id if i < len(doc_chunks) - 1 else None
    return survivors


# ---------------------------------------------------------------------------
# knowledge base

class KnowledgeBase:
    """Immutable chunk store with id lookup and manifest round-trip."""

    def __init__(self, chunks: list[Chunk]):
        self.chunks = list(chunks)
        self.by_id = {c.chunk_id: c for c in self.chunks}

    def __len__(self) -> int:
        return len(self.chunks)

    def get(self, chunk_id: str) -> Chunk | None:
        return self.by_id.get(chunk_id)

    def manifest_lines(self) -> list[str]:
        lines = []
        for c in self.chunks:
            record = {
                "chunk_id": c.chunk_id,
                "text": c.text,
                "content_hash": str(c.content_hash),
                "version_tag": c.version_tag,
                "prev_id": c.prev_id,
                "next_id": c.next_id,
                "heading_path": c.heading_path,
                "source": c.source,
            }
            lines.append(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
        return lines

    def save_manifest(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.manifest_lines()) + "\n", encoding="utf-8")

    @classmethod
    def load_manifest(cls, path: str | Path) -> "KnowledgeBase":
        chunks = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            chunks.append(Chunk(
                chunk_id=rec["chunk_id"],
                text=rec["text"],
                content_hash=int(rec["content_hash"]),
                version_tag=rec["version_tag"],
                prev_id=rec["prev_id"],
                next_id=rec["next_id"],
                heading_path=list(rec["heading_path"]),
                source=rec["source"],
            ))
        return cls(chunks)


def build_knowledge_base(docs: list[SourceDocument],
                         cfg: SplitConfig | None = None) -> KnowledgeBase:
    """parse -> split -> global dedup -> link, as one deterministic build."""
    cfg = cfg or SplitConfig()
    seen_ids: set[str] = set()
    all_chunks: list[Chunk] = []
    for doc in docs:
        if doc.doc_id in seen_ids:
            raise ValueError(f"duplicate doc_id: {doc.doc_id!r}")
        seen_ids.add(doc.doc_id)
        all_chunks.extend(split_into_chunks(doc, cfg))
    return KnowledgeBase(deduplicate(all_chunks))


def ingest_directory(directory: str | Path, cfg: SplitConfig | None = None) -> KnowledgeBase:
    """Ingest every .md/.txt file under ``directory`` (sorted for determinism).

    An optional ``corpus.json`` in the directory maps file names to
    ``{"source": ..., "version_tag": ...}``; unlisted files default to the
    directory name and "latest".
    """
    directory = Path(directory)
    meta: dict[str, dict] = {}
    meta_path = directory / "corpus.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    docs = []
    for path in sorted(directory.rglob("*")):
        if path.suffix not in (".md", ".txt") or not path.is_file():
            continue
        fmt = "markdown" if path.suffix == ".md" else "plaintext"
        info = meta.get(path.name, {})
        try:
            docs.append(parse_document(
                path.read_bytes(), fmt,
                doc_id=path.stem,
                source=info.get("source", directory.name),
                version_tag=info.get("version_tag", "latest"),
            ))
        except (UnsupportedFormat, InvalidEncoding) as exc:
            raise type(exc)(f"{path.name}: {exc}") from exc
    return build_knowledge_base(docs, cfg)
