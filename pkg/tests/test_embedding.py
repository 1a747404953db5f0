from __future__ import annotations

import random

import numpy as np
import pytest

from castbook.audio import pcm16_to_float
from castbook.backends.mock import persona_base_f0
from castbook.evaluation.embedding import (
    EMBEDDING_DIM,
    EmbeddingError,
    cosine_similarity,
    embed_window,
    mfcc_frames,
)
from castbook.model import SAMPLE_RATE
from helpers import WORDS, bootstrap_pcm, make_tts


def test_embedding_is_unit_norm_and_26_dimensional():
    rng = np.random.default_rng(0)
    embedding = embed_window(rng.standard_normal(SAMPLE_RATE) * 0.2, (0.0, 1.0))
    vector = np.asarray(embedding.vector)
    assert len(vector) == EMBEDDING_DIM == 26
    assert np.linalg.norm(vector) == pytest.approx(1.0, abs=1e-9)
    assert np.all(np.isfinite(vector))


def test_embedding_deterministic():
    rng = np.random.default_rng(1)
    samples = rng.standard_normal(SAMPLE_RATE) * 0.2
    a = embed_window(samples, (0.0, 1.0))
    b = embed_window(samples, (0.0, 1.0))
    assert a.vector == b.vector


def test_mfcc_frame_grid():
    coeffs = mfcc_frames(np.zeros(SAMPLE_RATE) + 0.01)
    assert coeffs.shape[1] == 13
    assert 95 <= coeffs.shape[0] <= 100  # 25 ms window, 10 ms hop over 1 s


def test_silence_window_rejected():
    with pytest.raises(EmbeddingError):
        embed_window(np.zeros(100), (0.0, 0.1))


def test_bootstrap_separability_for_20hz_apart_personas():
    """Personas whose hash pitches differ by at least 20 Hz embed further
    from each other than either embeds from itself."""
    tts = make_tts()
    rng = random.Random(5)
    personas = []
    while len(personas) < 8:
        caption = " ".join(rng.choices(WORDS, k=4)) + f" nr {rng.randrange(10**6)}"
        face = f"face-{rng.randrange(10**9)}".encode()
        personas.append((caption, face, persona_base_f0(caption, face)))

    def halves(caption, face):
        samples = pcm16_to_float(bootstrap_pcm(tts, caption, face))
        mid = len(samples) // 2
        return (
            embed_window(samples[:mid], (0.0, 1.5)),
            embed_window(samples[mid:], (1.5, 3.0)),
        )

    embeddings = {i: halves(c, f) for i, (c, f, _) in enumerate(personas)}
    checked = 0
    for i in range(len(personas)):
        for j in range(i + 1, len(personas)):
            if abs(personas[i][2] - personas[j][2]) < 20.0:
                continue
            checked += 1
            self_i = cosine_similarity(*embeddings[i])
            self_j = cosine_similarity(*embeddings[j])
            cross = cosine_similarity(embeddings[i][0], embeddings[j][0])
            assert cross < min(self_i, self_j), (
                f"personas {i}/{j}: cross {cross:.4f} >= self {min(self_i, self_j):.4f}"
            )
    assert checked >= 10  # the property actually exercised many pairs
