"""Hashing tokenizer and learned embedding table standing in for a T5 encoder."""
from __future__ import annotations

import re
import zlib
from dataclasses import dataclass

import torch
from torch import nn

VOCAB_BUCKETS = 4096
NULL_TOKEN = VOCAB_BUCKETS
MAX_TOKENS = 32

_WORD = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[int]:
    """Split on whitespace/punctuation, lowercase, hash each word into 4096 buckets."""
    words = _WORD.findall(text.lower())
    if not words:
        return [NULL_TOKEN]
    return [zlib.crc32(w.encode("utf-8")) % VOCAB_BUCKETS for w in words[:MAX_TOKENS]]


@dataclass
class TextEmbedding:
    tokens: torch.Tensor   # (B, T_tok, D), zero at padded positions
    lengths: torch.Tensor  # (B,)

    @property
    def key_mask(self) -> torch.Tensor:
        """(B, T_tok) True where a token is valid."""
        idx = torch.arange(self.tokens.shape[1], device=self.tokens.device)
        return idx[None, :] < self.lengths[:, None]


class TextEncoder(nn.Module):
    def __init__(self, width: int):
        super().__init__()
        self.table = nn.Embedding(VOCAB_BUCKETS + 1, width)
        nn.init.normal_(self.table.weight, std=1.0)

    def forward(self, texts: list[str] | str) -> TextEmbedding:
        if isinstance(texts, str):
            texts = [texts]
        ids = [tokenize(t) for t in texts]
        n = max(len(i) for i in ids)
        w = self.table.weight
        tokens = torch.zeros(len(ids), n, w.shape[1], dtype=w.dtype, device=w.device)
        for b, row in enumerate(ids):
            tokens[b, :len(row)] = self.table(torch.tensor(row, device=w.device))
        lengths = torch.tensor([len(i) for i in ids], device=w.device)
        return TextEmbedding(tokens, lengths)


def encode_text(encoder: TextEncoder, prompt_text) -> TextEmbedding:
    return encoder(prompt_text)
