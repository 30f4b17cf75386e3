from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbcopilot.errors import InvalidEncoding, UnsupportedFormat
from dbcopilot.kb import (Block, BlockKind, Chunk, KnowledgeBase, SourceDocument,
                          SplitConfig, build_knowledge_base, content_hash,
                          deduplicate, fnv1a64, ingest_directory,
                          normalize_text, parse_document, split_into_chunks)


def doc_from_blocks(blocks, doc_id="d1", version="505.2"):
    return SourceDocument(doc_id=doc_id, format="markdown", source="test",
                          version_tag=version, blocks=blocks)


def para(n_chars, seed="x"):
    # deterministic filler paragraph of exactly n_chars visible characters
    unit = (seed * 8 + " ")
    text = (unit * (n_chars // len(unit) + 1))[:n_chars]
    return Block(BlockKind.PARAGRAPH, text.strip() or seed)


# ---------------------------------------------------------------- parsing

def test_parse_markdown_heading_and_fence():
    doc = parse_document(b"## Setup\n```sql\nSELECT 1;\n```", "markdown",
                         "d1", "s", "505.2")
    assert [b.kind for b in doc.blocks] == [BlockKind.HEADING, BlockKind.CODE_FENCE]
    assert doc.blocks[0].level == 2 and doc.blocks[0].text == "Setup"
    assert doc.blocks[1].text == "SELECT 1;"
    assert doc.blocks[1].info == "sql"


def test_parse_empty_input():
    doc = parse_document(b"", "markdown", "d1", "s", "1")
    assert doc.blocks == []


def test_parse_plaintext_blank_line_separation():
    doc = parse_document(b"a\n\nb", "plaintext", "d1", "s", "1")
    assert [b.kind for b in doc.blocks] == [BlockKind.PARAGRAPH] * 2
    assert [b.text for b in doc.blocks] == ["a", "b"]


def test_parse_table_and_list():
    raw = b"| a | b |\n| - | - |\n| 1 | 2 |\n\n- item one\n- item two\n"
    doc = parse_document(raw, "markdown", "d1", "s", "1")
    kinds = [b.kind for b in doc.blocks]
    assert kinds == [BlockKind.TABLE, BlockKind.LIST_ITEM, BlockKind.LIST_ITEM]
    assert doc.blocks[0].text.count("\n") == 2


def test_parse_unsupported_format():
    with pytest.raises(UnsupportedFormat):
        parse_document(b"x", "docx", "d1", "s", "1")


def test_parse_invalid_encoding():
    with pytest.raises(InvalidEncoding):
        parse_document(b"\xff\xfe\x00bad", "markdown", "d1", "s", "1")


# ---------------------------------------------------------------- splitting

def test_atomic_code_fence_exceeds_max_chars():
    fence = Block(BlockKind.CODE_FENCE, "SELECT 1;\n" * 1000, info="sql")
    chunks = split_into_chunks(doc_from_blocks([fence]),
                               SplitConfig(min_chars=200, max_chars=800))
    assert len(chunks) == 1
    assert "SELECT 1;" in chunks[0].text
    assert chunks[0].text.count("```") == 2


def test_split_empty_doc():
    assert split_into_chunks(doc_from_blocks([])) == []


def greedy_oracle(sizes, min_chars, max_chars):
    """Independent reimplementation of the packing rule over block sizes:
    rendered length of a chunk = sum(sizes) + 2 * (n_blocks - 1)."""
    groups, current = [], []

    def length(group):
        return sum(group) + 2 * (len(group) - 1)

    for size in sizes:
        if not current:
            current = [size]
            continue
        if length(current + [size]) > max_chars and length(current) >= min_chars:
            groups.append(current)
            current = [size]
        else:
            current.append(size)
    if current:
        groups.append(current)
    return groups


def test_split_paragraph_boundaries_match_oracle():
    blocks = [para(300, seed=chr(ord("a") + i)) for i in range(5)]
    sizes = [len(b.render()) for b in blocks]
    cfg = SplitConfig(min_chars=200, max_chars=800)
    chunks = split_into_chunks(doc_from_blocks(blocks), cfg)
    expected_groups = greedy_oracle(sizes, 200, 800)
    assert [len(c.text) for c in chunks] == \
           [sum(g) + 2 * (len(g) - 1) for g in expected_groups]
    for c in chunks[:-1]:
        assert 200 <= len(c.text) <= 800
    # boundaries only at paragraph boundaries: chunk text is whole renders
    rendered = [b.render() for b in blocks]
    joined = "\n\n".join(c.text for c in chunks)
    assert joined == "\n\n".join(rendered)


def test_heading_always_opens_chunk_and_heading_path():
    blocks = [
        Block(BlockKind.HEADING, "Top", level=1),
        para(50),
        Block(BlockKind.HEADING, "Sub", level=2),
        para(50, seed="y"),
        Block(BlockKind.HEADING, "Other", level=1),
        para(50, seed="z"),
    ]
    chunks = split_into_chunks(doc_from_blocks(blocks))
    assert [c.heading_path for c in chunks] == [["Top"], ["Top", "Sub"], ["Other"]]
    assert chunks[0].text.startswith("# Top")
    assert chunks[0].prev_id is None
    assert chunks[1].prev_id == chunks[0].chunk_id
    assert chunks[1].next_id == chunks[2].chunk_id
    assert chunks[2].next_id is None


def test_chunk_ids_deterministic():
    blocks = [para(50), Block(BlockKind.HEADING, "H", level=1), para(60)]
    chunks = split_into_chunks(doc_from_blocks(blocks, doc_id="guide"))
    assert [c.chunk_id for c in chunks] == [f"guide:{i:04d}" for i in range(len(chunks))]


# ---------------------------------------------------------------- dedup

def chunk(cid, text, version="1"):
    return Chunk(chunk_id=cid, text=text, content_hash=content_hash(text),
                 version_tag=version)


def test_dedup_exact_duplicate_rewires_links():
    c1 = chunk("d:0000", "alpha beta")
    c2 = chunk("d:0001", "alpha  beta")  # same normalized text
    c3 = chunk("d:0002", "gamma")
    c1.next_id, c2.prev_id = c2.chunk_id, c1.chunk_id
    c2.next_id, c3.prev_id = c3.chunk_id, c2.chunk_id
    out = deduplicate([c1, c2, c3])
    assert [c.chunk_id for c in out] == ["d:0000", "d:0002"]
    assert out[0].next_id == "d:0002"
    assert out[1].prev_id == "d:0000"


def test_dedup_no_duplicates_identity():
    chunks = [chunk(f"d:{i:04d}", f"text number {i}") for i in range(5)]
    assert deduplicate(list(chunks)) == chunks


def test_dedup_seeded_duplicates_counted_by_naive_oracle():
    dup_positions = set(range(3, 39, 2))  # 18 occurrences -> 17 dropped
    chunks = []
    for i in range(100):
        text = "repeated filler text" if i in dup_positions else f"unique text {i}"
        chunks.append(chunk(f"doc{i // 10}:{i % 10:04d}", text))
    # naive O(n^2) oracle over normalized text
    survivors = []
    for c in chunks:
        if not any(normalize_text(c.text) == normalize_text(s.text) for s in survivors):
            survivors.append(c)
    out = deduplicate(chunks)
    assert len(out) == len(survivors) == 83
    assert [c.chunk_id for c in out] == [c.chunk_id for c in survivors]


def test_hash_soundness_hash_is_index_not_proof():
    # same-hash, different text chunks must not merge; the normalized-text
    # re-check protects against collisions, simulated here by forcing hashes
    a = chunk("d:0000", "one text")
    b = chunk("d:0001", "another text")
    b.content_hash = a.content_hash
    assert len(deduplicate([a, b])) == 2


# ---------------------------------------------------------------- build + manifest

def test_build_dedups_across_documents(corpus_kb):
    # the shared "Connection limits" section appears in dev_guide and faq
    texts = [c.text for c in corpus_kb.chunks]
    shared = [t for t in texts if "max_connections is 5000" in t]
    assert len(shared) == 1


def test_build_zero_docs_and_manifest_roundtrip(tmp_path):
    kb = build_knowledge_base([])
    assert len(kb) == 0
    path = tmp_path / "kb.jsonl"
    kb.save_manifest(path)
    assert KnowledgeBase.load_manifest(path).chunks == []


def test_duplicate_doc_id_rejected():
    doc = doc_from_blocks([para(30)])
    with pytest.raises(ValueError):
        build_knowledge_base([doc, doc])


def test_corpus_chunk_count_matches_independent_recount(data_dir, corpus_kb):
    # oracle: re-split every parsed doc with the greedy size rule and count,
    # then dedup by normalized text with a plain dict
    from dbcopilot.kb import _parse_markdown, _parse_plaintext  # noqa: PLC2701

    cfg = SplitConfig()
    total = []
    meta = json.loads((data_dir / "corpus" / "corpus.json").read_text())
    for path in sorted((data_dir / "corpus").rglob("*")):
        if path.suffix not in (".md", ".txt"):
            continue
        text = path.read_text(encoding="utf-8")
        blocks = _parse_markdown(text) if path.suffix == ".md" else _parse_plaintext(text)
        sizes = []
        for b in blocks:
            if b.kind is BlockKind.HEADING:
                sizes.append(None)  # forced boundary marker
            else:
                sizes.append(len(b.render()))
        groups = []
        current = []
        renders = [b.render() for b in blocks]
        for b, r in zip(blocks, renders):
            if b.kind is BlockKind.HEADING:
                if current:
                    groups.append(current)
                current = [r]
                continue
            if not current:
                current = [r]
            elif len("\n\n".join(current + [r])) > cfg.max_chars \
                    and len("\n\n".join(current)) >= cfg.min_chars:
                groups.append(current)
                current = [r]
            else:
                current.append(r)
        if current:
            groups.append(current)
        total.extend("\n\n".join(g) for g in groups)
        assert path.name in meta or path.name == "corpus.json"
    seen = {}
    for text in total:
        seen.setdefault(normalize_text(text), text)
    assert len(corpus_kb) == len(seen)


def test_manifest_byte_identical_and_field_order(data_dir, corpus_kb):
    again = ingest_directory(data_dir / "corpus")
    assert corpus_kb.manifest_lines() == again.manifest_lines()
    first = json.loads(corpus_kb.manifest_lines()[0])
    assert list(first) == ["chunk_id", "text", "content_hash", "version_tag",
                           "prev_id", "next_id", "heading_path", "source"]
    assert first["content_hash"].isdigit()


def test_round_trip_non_whitespace_coverage(data_dir):
    for path in sorted((data_dir / "corpus").glob("*.md")):
        raw = path.read_text(encoding="utf-8")
        doc = parse_document(raw.encode(), "markdown", path.stem, "s", "1")
        chunks = split_into_chunks(doc)
        assert "".join(raw.split()) == "".join("\n\n".join(c.text for c in chunks).split())


def test_fence_atomicity_across_corpus(corpus_kb):
    for c in corpus_kb.chunks:
        assert c.text.count("```") % 2 == 0, c.chunk_id


# ---------------------------------------------------------------- config + hash

def test_split_config_validation_and_file(tmp_path):
    with pytest.raises(ValueError):
        SplitConfig(min_chars=0, max_chars=10)
    with pytest.raises(ValueError):
        SplitConfig(min_chars=100, max_chars=50)
    path = tmp_path / "split.json"
    path.write_text('{"min_chars": 100, "max_chars": 400}')
    cfg = SplitConfig.from_file(path)
    assert (cfg.min_chars, cfg.max_chars) == (100, 400)


def test_fnv1a64_known_vectors():
    assert fnv1a64(b"") == 14695981039346656037
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C


def test_normalize_text():
    assert normalize_text("  a\t b\n\nc  ") == "a b c"
    assert content_hash("a  b") == content_hash("a b")
    assert content_hash("a b") != content_hash("a c")


# ---------------------------------------------------------------- properties

@st.composite
def block_lists(draw):
    blocks = []
    n = draw(st.integers(min_value=1, max_value=8))
    words = st.text(alphabet="abcdefg hij", min_size=1, max_size=120)
    for _ in range(n):
        kind = draw(st.sampled_from(["h", "p", "f"]))
        text = draw(words)
        if kind == "h":
            blocks.append(Block(BlockKind.HEADING, text.replace("\n", " ").strip() or "t",
                                level=draw(st.integers(1, 6))))
        elif kind == "p":
            stripped = text.strip()
            if stripped:
                blocks.append(Block(BlockKind.PARAGRAPH, stripped))
        else:
            blocks.append(Block(BlockKind.CODE_FENCE, text, info="sql"))
    return blocks


@settings(max_examples=60, deadline=None)
@given(blocks=block_lists(), max_chars=st.integers(min_value=60, max_value=400))
def test_property_coverage_and_atomicity(blocks, max_chars):
    doc = doc_from_blocks(blocks)
    chunks = split_into_chunks(doc, SplitConfig(min_chars=min(50, max_chars), max_chars=max_chars))
    rendered = "\n\n".join(b.render() for b in blocks)
    joined = "\n\n".join(c.text for c in chunks)
    assert "".join(rendered.split()) == "".join(joined.split())
    for c in chunks:
        assert c.text
        assert c.text.count("```") % 2 == 0
