from __future__ import annotations

import functools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentloop.memory import (
    DuplicateDoc,
    MemoryStore,
    PolicyDenied,
    SearchHit,
    chunk_document,
    embed_text,
    tokenize,
)


def reference_fnv1a_64(data: bytes) -> int:
    # Independent oracle implementation (fold instead of a loop).
    return functools.reduce(
        lambda h, b: ((h ^ b) * 0x100000001B3) % 2**64, data, 0xCBF29CE484222325
    )


def brute_force_search(chunks, query: str, k: int) -> list[str]:
    """Exhaustive-scan oracle: score every chunk, sort, truncate.

    Scores use the documented bit-exact contract (left-to-right sum over the
    unit vectors), so mathematically tied documents tie here too and fall
    back to insertion order exactly as the store must.
    """
    q = embed_text(query)
    if all(v == 0.0 for v in q):
        return []
    scored = []
    for position, chunk in enumerate(chunks):
        score = 0.0
        for a, b in zip(q, chunk.vector):
            score += a * b
        scored.append((-score, position, chunk.chunk_id))
    scored.sort()
    return [chunk_id for _, _, chunk_id in scored[:k]]


def numpy_cosine(query: str, vector) -> float:
    """Independent numeric cross-check of a single similarity value."""
    q = np.array(embed_text(query))
    v = np.array(vector)
    denom = float(np.linalg.norm(q) * np.linalg.norm(v))
    return float(np.dot(q, v) / denom) if denom else 0.0


class TestEmbedText:
    def test_empty_is_zero_vector(self):
        assert embed_text("") == [0.0] * 64

    def test_punctuation_only_is_zero_vector(self):
        assert embed_text("?!... --- ") == [0.0] * 64

    def test_abc_single_coordinate_per_reference(self):
        h = reference_fnv1a_64(b"abc")
        expected_index = h % 64
        expected_sign = 1.0 if (h >> 6) & 1 == 0 else -1.0
        vector = embed_text("abc")
        nonzero = [(i, v) for i, v in enumerate(vector) if v != 0.0]
        assert nonzero == [(expected_index, expected_sign)]

    def test_repeated_token_normalizes_to_unit(self):
        vector = embed_text("Dog dog")
        nonzero = [v for v in vector if v != 0.0]
        assert len(nonzero) == 1
        assert abs(abs(nonzero[0]) - 1.0) < 1e-12

    def test_multi_token_accumulation_per_reference(self):
        text = "alpha beta gamma alpha"
        expected = [0.0] * 64
        for token in tokenize(text):
            h = reference_fnv1a_64(token.encode("utf-8"))
            expected[h % 64] += 1.0 if (h >> 6) & 1 == 0 else -1.0
        norm = math.sqrt(sum(v * v for v in expected))
        expected = [v / norm for v in expected]
        assert embed_text(text) == expected

    @staticmethod
    def _accumulation_cancels(text: str) -> bool:
        # Signed hashing can cancel exactly (two tokens, same slot, opposite
        # signs); such inputs legitimately embed to the zero vector.
        slots = [0] * 64
        for token in tokenize(text):
            h = reference_fnv1a_64(token.encode("utf-8"))
            slots[h % 64] += 1 if (h >> 6) & 1 == 0 else -1
        return not any(slots)

    @given(st.text(min_size=1, max_size=120))
    def test_unit_norm_or_zero(self, text):
        vector = embed_text(text)
        norm = math.sqrt(sum(v * v for v in vector))
        if tokenize(text) and not self._accumulation_cancels(text):
            assert abs(norm - 1.0) <= 1e-12
        else:
            assert norm == 0.0

    @given(st.text(min_size=1, max_size=80))
    def test_self_cosine_is_one(self, text):
        if not tokenize(text) or self._accumulation_cancels(text):
            return
        v = embed_text(text)
        assert abs(sum(x * x for x in v) - 1.0) <= 1e-9


class TestChunkDocument:
    def test_small_doc_single_chunk(self):
        doc = " ".join(f"w{i}" for i in range(100))
        chunks = chunk_document(doc)
        assert len(chunks) == 1
        assert len(chunks[0].split()) == 100

    def test_960_tokens_three_chunks(self):
        doc = " ".join(f"w{i}" for i in range(960))
        chunks = chunk_document(doc)
        assert len(chunks) == 3
        assert chunks[0].split()[0] == "w0"
        assert chunks[1].split()[0] == "w448"
        assert chunks[2].split()[0] == "w896"
        assert len(chunks[2].split()) == 64

    def test_empty(self):
        assert chunk_document("") == []

    def test_overlap_is_64_tokens(self):
        doc = " ".join(f"w{i}" for i in range(600))
        chunks = chunk_document(doc)
        first, second = chunks[0].split(), chunks[1].split()
        assert first[-64:] == second[:64]


class TestIngestAndSearch:
    def test_small_doc_immediately_searchable(self):
        memory = MemoryStore()
        count = memory.ingest_document("domain_knowledge", "d1", "coffee brewing guide")
        assert count == 1
        hits = memory.search("domain_knowledge", "coffee brewing guide", k=1)
        assert hits[0].chunk_id == "d1:0"
        assert abs(hits[0].score - 1.0) <= 1e-9

    def test_duplicate_doc(self):
        memory = MemoryStore()
        memory.ingest_document("domain_knowledge", "d1", "text")
        with pytest.raises(DuplicateDoc):
            memory.ingest_document("domain_knowledge", "d1", "other")

    def test_960_token_doc_count(self):
        memory = MemoryStore()
        doc = " ".join(f"w{i}" for i in range(960))
        assert memory.ingest_document("domain_knowledge", "big", doc) == 3

    def test_empty_store_returns_nothing(self):
        assert MemoryStore().search("domain_knowledge", "anything", k=3) == []

    def test_zero_vector_query_returns_nothing(self):
        memory = MemoryStore()
        memory.ingest_document("domain_knowledge", "d1", "some text")
        assert memory.search("domain_knowledge", "?!", k=3) == []

    def test_topk_matches_oracle_small(self):
        memory = MemoryStore()
        rng = random.Random(7)
        words = [f"word{i}" for i in range(30)]
        for d in range(10):
            memory.ingest_document(
                "domain_knowledge", f"d{d}", " ".join(rng.choices(words, k=6))
            )
        query = " ".join(rng.choices(words, k=4))
        hits = memory.search("domain_knowledge", query, k=3)
        assert [h.chunk_id for h in hits] == brute_force_search(
            memory.chunks("domain_knowledge"), query, 3
        )
        by_id = {c.chunk_id: c for c in memory.chunks("domain_knowledge")}
        for hit in hits:
            assert abs(hit.score - numpy_cosine(query, by_id[hit.chunk_id].vector)) <= 1e-9

    def test_store_isolation(self):
        memory = MemoryStore()
        memory.ingest_document("domain_knowledge", "d1", "espresso ratio")
        memory.ingest_document("user_profile", "u1", "espresso ratio")
        hits = memory.search("domain_knowledge", "espresso ratio", k=5)
        assert {h.chunk_id for h in hits} == {"d1:0"}

    @settings(max_examples=40, deadline=None)
    @given(
        docs=st.lists(
            st.lists(st.sampled_from([f"t{i}" for i in range(50)]), min_size=1, max_size=8),
            min_size=1,
            max_size=30,
        ),
        query=st.lists(st.sampled_from([f"t{i}" for i in range(50)]), min_size=1, max_size=5),
        k=st.integers(min_value=1, max_value=8),
    )
    def test_topk_matches_oracle_property(self, docs, query, k):
        memory = MemoryStore()
        for i, words in enumerate(docs):
            memory.ingest_document("domain_knowledge", f"d{i}", " ".join(words))
        hits = memory.search("domain_knowledge", " ".join(query), k=k)
        oracle = brute_force_search(memory.chunks("domain_knowledge"), " ".join(query), k)
        assert [h.chunk_id for h in hits] == oracle

    def test_large_store_matches_oracle(self):
        memory = MemoryStore()
        rng = random.Random(13)
        words = [f"term{i}" for i in range(120)]
        for d in range(500):
            memory.ingest_document(
                "domain_knowledge", f"d{d}", " ".join(rng.choices(words, k=10))
            )
        assert len(memory.chunks("domain_knowledge")) == 500
        for _ in range(5):
            query = " ".join(rng.choices(words, k=5))
            hits = memory.search("domain_knowledge", query, k=10)
            assert [h.chunk_id for h in hits] == brute_force_search(
                memory.chunks("domain_knowledge"), query, 10
            )


class TestRecords:
    def test_put_get(self):
        memory = MemoryStore()
        memory.put_record("prefers", "brief answers")
        assert memory.get_record("prefers") == "brief answers"

    def test_missing_key(self):
        assert MemoryStore().get_record("missing") is None

    def test_last_write_wins(self):
        memory = MemoryStore()
        memory.put_record("k", "v1")
        memory.put_record("k", "v2")
        assert memory.get_record("k") == "v2"

    def test_policy_denied_leaves_store_unchanged(self):
        memory = MemoryStore(store_user_profile=False)
        with pytest.raises(PolicyDenied):
            memory.put_record("prefers", "x")
        assert memory.get_record("prefers") is None


class TestArchive:
    def _messages(self, n):
        return [{"actor": "user" if i % 2 == 0 else "agent", "payload": f"m{i}"} for i in range(n)]

    def test_archive_counts(self):
        memory = MemoryStore()
        assert memory.archive_conversation("s1", self._messages(4)) == 4
        assert len(memory.conversation("s1")) == 4

    def test_second_archive_appends(self):
        memory = MemoryStore()
        memory.archive_conversation("s1", self._messages(2))
        assert memory.archive_conversation("s1", self._messages(3)) == 5

    def test_policy_denied(self, tmp_path):
        memory = MemoryStore(data_dir=tmp_path, store_conversation=False)
        with pytest.raises(PolicyDenied):
            memory.archive_conversation("s1", self._messages(1))
        memory.flush()
        assert not (tmp_path / "conversations" / "s1.jsonl").exists()

    def test_finalize_ingests_once(self):
        memory = MemoryStore()
        memory.archive_conversation("s1", self._messages(2))
        assert memory.finalize_conversation("s1") == 1
        assert memory.finalize_conversation("s1") == 0
        hits = memory.search("user_structured", "m0 m1", k=1)
        assert hits and hits[0].chunk_id == "conversation:s1:0"


class TestFlushLoad:
    def test_round_trip_through_disk(self, tmp_path):
        memory = MemoryStore(data_dir=tmp_path)
        memory.ingest_document("domain_knowledge", "d1", "alpha beta gamma")
        memory.put_record("k", "v")
        memory.archive_conversation("s1", [{"actor": "user", "payload": "hello"}])
        memory.flush()

        reloaded = MemoryStore(data_dir=tmp_path)
        reloaded.load()
        assert reloaded.records() == {"k": "v"}
        assert reloaded.conversation("s1") == [{"actor": "user", "payload": "hello"}]
        original = memory.search("domain_knowledge", "alpha beta gamma", k=1)
        restored = reloaded.search("domain_knowledge", "alpha beta gamma", k=1)
        assert restored == original

    def test_export_files_deterministic(self):
        memory = MemoryStore()
        memory.ingest_document("domain_knowledge", "d1", "one two three")
        assert memory.export_files() == memory.export_files()
