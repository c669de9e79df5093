"""Tests for chunking, the vector store and corpus loading."""

import numpy as np
import pytest

from tsagent.clients import HashingEmbedder
from tsagent.errors import CorpusError
from tsagent.rag import DOC_KINDS, Document, VectorStore, ingest_corpus, load_corpus, parse_document, split_text


class FixedEmbedder:
    """Looks vectors up by text"""

    def __init__(self, table):
        self.table = table

    def embed(self, texts):
        return np.array([self.table[text] for text in texts], dtype=float)


class TestSplitText:
    WORDS = [f"w{k:03d}" for k in range(200)]
    TEXT = ' '.join(WORDS)

    def test_windows_overlap_and_cover(self):
        chunks = split_text(self.TEXT, chunk_chars=100, overlap_chars=20)
        assert all(len(chunk) <= 100 for chunk in chunks)
        seen = set()
        for chunk in chunks:
            words = chunk.split()
            assert set(words) <= set(self.WORDS)
            seen.update(words)
        assert seen == set(self.WORDS)
        for a, b in zip(chunks, chunks[1:]):
            assert set(a.split()) & set(b.split())

    def test_short_text_is_one_chunk(self):
        assert split_text('fault at bus seven', 100, 20) == ['fault at bus seven']

    def test_blank_text(self):
        assert split_text('   ', 100, 20) == []

    def test_overlap_must_be_smaller(self):
        with pytest.raises(ValueError):
            split_text('x', 10, 10)


class TestVectorStore:
    def test_matches_brute_force_cosine(self):
        rng = np.random.default_rng(5)
        texts = [f"chunk {k}" for k in range(40)]
        table = {text: rng.normal(size=8) for text in texts}
        table['query'] = rng.normal(size=8)
        store = VectorStore(FixedEmbedder(table))
        store.add([(f"doc{k % 4}", DOC_KINDS[k % 4], text) for k, text in enumerate(texts)])

        q = table['query']
        sims = [float(table[t] @ q / (np.linalg.norm(table[t]) * np.linalg.norm(q))) for t in texts]
        expected = sorted(range(len(texts)), key=lambda i: -sims[i])[:5]
        got = store.retrieve('query', k=5)
        assert [r.chunk.text for r in got] == [texts[i] for i in expected]
        assert [r.score for r in got] == pytest.approx([sims[i] for i in expected])

    def test_ties_keep_ingestion_order(self):
        table = {'a': [1.0, 0.0], 'b': [2.0, 0.0], 'c': [0.0, 1.0], 'q': [1.0, 0.0]}
        store = VectorStore(FixedEmbedder(table))
        store.add([('s', 'user_guide', 'c'), ('s', 'user_guide', 'b'), ('s', 'user_guide', 'a')])
        assert [r.chunk.text for r in store.retrieve('q', k=2)] == ['b', 'a']

    def test_kind_filter(self):
        table = {'a': [1.0, 0.0], 'b': [0.9, 0.1], 'q': [1.0, 0.0]}
        store = VectorStore(FixedEmbedder(table))
        store.add([('s1', 'case_study', 'a'), ('s2', 'syntax_manual', 'b')])
        hits = store.retrieve('q', k=3, kinds=['syntax_manual'])
        assert [hit.source_id for hit in hits] == ['s2']
        assert store.indexes == {'case_study': 1, 'syntax_manual': 1}

    def test_zero_vectors_are_skipped(self):
        store = VectorStore(FixedEmbedder({'a': [0.0, 0.0], 'b': [1.0, 0.0]}))
        assert store.add([('s', 'user_guide', 'a'), ('s', 'user_guide', 'b')]) == 1

    def test_empty_store(self):
        with pytest.raises(CorpusError, match='empty'):
            VectorStore(HashingEmbedder()).retrieve('anything')


class TestCorpus:
    def test_front_matter_sets_kind(self):
        doc = parse_document("---\nkind: case_study\n---\n# Title\nBody", 'x')
        assert doc.kind == 'case_study'
        assert doc.text.startswith('# Title')

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            parse_document("---\nkind: poetry\n---\ntext", 'x')

    def test_bundled_corpus_covers_every_kind(self):
        docs = load_corpus()
        assert {doc.kind for doc in docs} == set(DOC_KINDS)
        store = ingest_corpus(docs, HashingEmbedder())
        assert set(store.indexes) == set(DOC_KINDS)
        hits = store.retrieve('fenced block syntax', k=2)
        assert len(hits) == 2

    def test_empty_corpus(self, tmp_path):
        with pytest.raises(CorpusError):
            ingest_corpus([], HashingEmbedder())
        with pytest.raises(CorpusError, match='no documents'):
            load_corpus(tmp_path)

    def test_nothing_indexable(self):
        with pytest.raises(CorpusError, match='no indexable'):
            ingest_corpus([Document('d', 'user_guide', '...')], FixedEmbedder({'...': [0.0, 0.0]}))
