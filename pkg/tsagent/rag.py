"""
Retrieval-augmented generation: document chunking, a cosine vector store and
top-k retrieval
"""

import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import CorpusError

DOC_KINDS = ('user_guide', 'case_study', 'syntax_manual', 'general_knowledge')
DEFAULT_CHUNK_CHARS = 1600
DEFAULT_OVERLAP_CHARS = 200
CORPUS_DIR = Path(__file__).resolve().parent / 'data' / 'corpus'

_FRONT_MATTER = re.compile(r'\A---\s*\n(.*?)\n---\s*\n', re.DOTALL)


@dataclass(frozen=True)
class Document:
    source_id: str
    kind: str
    text: str

    def __post_init__(self):
        if self.kind not in DOC_KINDS:
            raise ValueError(f"document kind must be one of {DOC_KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class DocChunk:
    source_id: str
    kind: str
    text: str
    index: int = 0
    vector: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("chunk text must be non-empty")


@dataclass(frozen=True)
class Retrieved:
    chunk: DocChunk
    score: float

    @property
    def source_id(self) -> str:
        return self.chunk.source_id

    @property
    def kind(self) -> str:
        return self.chunk.kind


def split_text(text: str, chunk_chars: int = DEFAULT_CHUNK_CHARS,
               overlap_chars: int = DEFAULT_OVERLAP_CHARS) -> List[str]:
    """
    Overlapping windows of about ``chunk_chars`` characters

    Windows start every ``chunk_chars - overlap_chars`` characters. Starts move
    forward to the next word and ends move back to the last whitespace, so no
    word is cut in half unless it is longer than a window.
    """
    if not chunk_chars > overlap_chars >= 0:
        raise ValueError("need chunk_chars > overlap_chars >= 0")
    n = len(text)
    stride = chunk_chars - overlap_chars
    chunks = []
    for start in range(0, n, stride):
        end = min(start + chunk_chars, n)
        if start > 0 and not text[start - 1].isspace():
            space = re.search(r'\s', text[start:end])
            if space is not None:
                start += space.end()
        if end < n and not text[end].isspace():
            cut = max(text.rfind(' ', start, end), text.rfind('\n', start, end))
            if cut > start:
                end = cut
        piece = text[start:end].strip()
        if piece:
            chunks.append(piece)
    return chunks


class VectorStore:
    """
    In-memory chunk index

    Reads are lock-free; ``add`` holds a lock so ingestion is exclusive.
    """

    def __init__(self, backend):
        self.backend = backend
        self.chunks: List[DocChunk] = []
        self._matrix: Optional[np.ndarray] = None
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.chunks)

    @property
    def indexes(self) -> Dict[str, int]:
        """Chunk count per document kind (one index per kind present)"""
        counts: Dict[str, int] = {}
        for chunk in self.chunks:
            counts[chunk.kind] = counts.get(chunk.kind, 0) + 1
        return counts

    def add(self, pieces: Sequence[Tuple[str, str, str]]) -> int:
        """Embed and index (source_id, kind, text) triples; returns chunks added"""
        if not pieces:
            return 0
        vectors = np.asarray(self.backend.embed([text for _, _, text in pieces]), dtype=np.float64)
        with self._lock:
            added = []
            for (source_id, kind, text), vector in zip(pieces, vectors):
                norm = np.linalg.norm(vector)
                if not norm > 0:
                    print(f"[RAG] Skipping chunk of '{source_id}' with no indexable terms")
                    continue
                added.append(DocChunk(source_id, kind, text, len(self.chunks) + len(added), vector / norm))
            if added:
                self.chunks.extend(added)
                block = np.stack([c.vector for c in added])
                self._matrix = block if self._matrix is None else np.vstack([self._matrix, block])
        return len(added)

    def similarities(self, query: str) -> np.ndarray:
        q = np.asarray(self.backend.embed([query]), dtype=np.float64)[0]
        norm = np.linalg.norm(q)
        if not norm > 0:
            return np.zeros(len(self.chunks))
        return self._matrix @ (q / norm)

    def retrieve(self, query: str, k: int = 3, kinds: Optional[Sequence[str]] = None) -> List[Retrieved]:
        """Top-k chunks by cosine similarity; ties keep ingestion order"""
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self.chunks:
            raise CorpusError("vector store is empty")
        sims = self.similarities(query)
        order = np.argsort(-sims, kind='stable')
        out = []
        for i in order:
            chunk = self.chunks[int(i)]
            if kinds and chunk.kind not in kinds:
                continue
            out.append(Retrieved(chunk, float(sims[i])))
            if len(out) == k:
                break
        return out


def ingest_corpus(docs: Sequence[Document], backend, chunk_chars: int = DEFAULT_CHUNK_CHARS,
                  overlap_chars: int = DEFAULT_OVERLAP_CHARS) -> VectorStore:
    """
    Chunk, embed and index documents

    Raises:
        CorpusError: no documents, or nothing indexable in them
    """
    if not docs:
        raise CorpusError("corpus is empty")
    pieces = []
    for doc in docs:
        for text in split_text(doc.text, chunk_chars, overlap_chars):
            pieces.append((doc.source_id, doc.kind, text))
    store = VectorStore(backend)
    store.add(pieces)
    if not len(store):
        raise CorpusError("corpus has no indexable text")
    print(f"[RAG] Indexed {len(store)} chunks from {len(docs)} documents "
          f"({', '.join(f'{k}={v}' for k, v in sorted(store.indexes.items()))})")
    return store


def parse_document(text: str, source_id: str, default_kind: str = 'general_knowledge') -> Document:
    """Markdown document with optional ``kind:`` front matter"""
    kind = default_kind
    match = _FRONT_MATTER.match(text)
    if match:
        for line in match.group(1).splitlines():
            key, _, value = line.partition(':')
            if key.strip() == 'kind':
                kind = value.strip()
        text = text[match.end():]
    return Document(source_id, kind, text)


def load_corpus(directory: Union[str, Path, None] = None) -> List[Document]:
    """Every ``*.md`` document under ``directory`` (default: the bundled corpus)"""
    directory = Path(directory) if directory else CORPUS_DIR
    if not directory.is_dir():
        raise CorpusError(f"corpus directory not found: {directory}")
    docs = [parse_document(path.read_text(encoding='utf-8'), path.stem)
            for path in sorted(directory.glob('*.md'))]
    if not docs:
        raise CorpusError(f"no documents in {directory}")
    return docs
