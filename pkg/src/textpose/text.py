"""Vocabulary, tokenization, and the recurrent caption encoder."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .core import TextPoseError

PAD, UNK, BOS, EOS = 0, 1, 2, 3
RESERVED = ["<pad>", "<unk>", "<bos>", "<eos>"]

_WORD_RE = re.compile(r"[a-z0-9]+")


class EmptyCaptionError(TextPoseError):
    pass


class OutOfVocabularyError(TextPoseError):
    pass


def word_tokens(caption: str) -> list[str]:
    """Lowercased whitespace-and-punctuation tokenization."""
    return _WORD_RE.findall(caption.lower())


@dataclass(frozen=True)
class Vocab:
    tokens: list[str]  # non-reserved tokens, index 0 maps to id 4
    min_freq: int = 1

    def __post_init__(self):
        object.__setattr__(self, "_ids", {t: i + len(RESERVED) for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens) + len(RESERVED)

    def id_of(self, token: str) -> int:
        return self._ids.get(token, UNK)

    def token_of(self, tid: int) -> str:
        if tid < len(RESERVED):
            return RESERVED[tid]
        return self.tokens[tid - len(RESERVED)]

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def to_json(self) -> str:
        return json.dumps({"version": 1, "min_freq": self.min_freq, "tokens": self.tokens})

    @classmethod
    def from_json(cls, text: str) -> "Vocab":
        doc = json.loads(text)
        if doc.get("version") != 1:
            raise ValueError(f"unsupported vocab version: {doc.get('version')}")
        return cls(tokens=list(doc["tokens"]), min_freq=int(doc["min_freq"]))


def build_vocab(captions: list[str], min_freq: int = 1) -> Vocab:
    """Frequency-filtered vocab with deterministic order (freq desc, then lex)."""
    if not captions:
        raise EmptyCaptionError("empty caption corpus")
    counts = Counter()
    for caption in captions:
        counts.update(word_tokens(caption))
    kept = [t for t, c in counts.items() if c >= min_freq]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocab(tokens=kept, min_freq=min_freq)


@dataclass(frozen=True)
class TokenSeq:
    ids: np.ndarray  # int64, padded to max_words
    length: int  # real tokens including bos/eos

    def __post_init__(self):
        arr = np.asarray(self.ids, dtype=np.int64).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "ids", arr)


def tokenize(caption: str, vocab: Vocab, max_words: int) -> TokenSeq:
    """bos + token ids + eos, truncated then padded to ``max_words``."""
    words = word_tokens(caption)
    if not words:
        raise EmptyCaptionError(f"caption has no tokens: {caption!r}")
    body = [vocab.id_of(w) for w in words][: max_words - 2]
    ids = [BOS] + body + [EOS]
    length = len(ids)
    ids = ids + [PAD] * (max_words - length)
    return TokenSeq(ids=np.asarray(ids, dtype=np.int64), length=length)


def is_fully_out_of_vocab(caption: str, vocab: Vocab) -> bool:
    words = word_tokens(caption)
    return bool(words) and all(w not in vocab for w in words)


class TextEncoder(nn.Module):
    """Bi-directional LSTM over token embeddings.

    Produces the per-word feature matrix (forward/backward hidden states
    concatenated per position) and a sentence vector (final hidden states of
    both directions concatenated). Pad positions are encoded like any other
    token; downstream consumers mask them with the sequence length.
    """

    def __init__(self, vocab_size: int, embed_dim: int = 128, feat_dim: int = 256):
        super().__init__()
        if feat_dim % 2 != 0:
            raise ValueError("feat_dim must be even (two directions)")
        self.feat_dim = feat_dim
        self.embed = nn.Embedding(vocab_size, embed_dim)
        self.rnn = nn.LSTM(embed_dim, feat_dim // 2, batch_first=True, bidirectional=True)

    def forward(self, ids: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """ids: B x N int64 -> (word feats B x feat_dim x N, sentence B x feat_dim)."""
        emb = self.embed(ids)
        out, (h_n, _) = self.rnn(emb)
        words = out.transpose(1, 2)  # B x feat_dim x N
        sent = torch.cat([h_n[0], h_n[1]], dim=1)  # B x feat_dim
        return words, sent


def encode_batch(
    encoder: TextEncoder, seqs: list[TokenSeq], device=None
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Stack token sequences and run the encoder.

    Returns (word feats B x L x N, sentence vectors B x L, lengths B).
    """
    ids = torch.from_numpy(np.stack([s.ids for s in seqs]))
    lengths = torch.tensor([s.length for s in seqs], dtype=torch.int64)
    if device is not None:
        ids = ids.to(device)
        lengths = lengths.to(device)
    words, sent = encoder(ids)
    return words, sent, lengths
