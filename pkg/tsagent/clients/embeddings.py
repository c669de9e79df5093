"""Deterministic offline embeddings"""

from typing import List

import numpy as np
from sklearn.feature_extraction.text import HashingVectorizer

EMBED_DIM = 512


class HashingEmbedder:
    """Signed-hash term-frequency vectors, L2-normalized"""

    def __init__(self, dim: int = EMBED_DIM):
        self.dim = dim
        self.vectorizer = HashingVectorizer(
            n_features=dim,
            alternate_sign=True,
            norm='l2',
            lowercase=True,
        )

    def embed(self, texts: List[str]) -> np.ndarray:
        if not texts:
            raise ValueError("nothing to embed")
        return self.vectorizer.transform(list(texts)).toarray()

    def buckets(self, text: str) -> List[int]:
        """Hash buckets touched by a text"""
        return sorted(int(k) for k in self.vectorizer.transform([text]).indices)
