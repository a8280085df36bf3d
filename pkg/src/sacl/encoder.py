"""Tokenization and pooled sequence encoding.

The compact encoder here is a small, self-contained transformer: hashing
tokenizer over a fixed vocabulary, token embeddings, sinusoidal positions, a
couple of self-attention blocks, and begin-marker pooling. It exists so the
whole training stack (including adversarial perturbation of the embedding
output) can run and be tested without any pretrained weights. Larger
pretrained encoders plug in through :class:`PooledTextEncoder`.
"""
from __future__ import annotations

import hashlib
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn

from .lexicon import segment_text

PAD_ID = 0
BOS_ID = 1
SEP_ID = 2
NUM_SPECIAL_TOKENS = 3

DEFAULT_VOCAB_SIZE = 32768
DEFAULT_MAX_LEN = 250


def hash_token(token: str, vocab_size: int) -> int:
    """Deterministic token id in [NUM_SPECIAL_TOKENS, vocab_size)."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return NUM_SPECIAL_TOKENS + int.from_bytes(digest, "big") % (
        vocab_size - NUM_SPECIAL_TOKENS
    )


@dataclass(frozen=True)
class TokenSequence:
    """Ids plus attention mask and segment ids; always starts with the begin marker."""

    ids: tuple[int, ...]
    mask: tuple[int, ...]
    segment_ids: tuple[int, ...]

    def __post_init__(self):
        if not self.ids or self.ids[0] != BOS_ID:
            raise ValueError("token sequence must start with the begin marker")
        if not (len(self.ids) == len(self.mask) == len(self.segment_ids)):
            raise ValueError("ids, mask and segment_ids must have equal length")

    def __len__(self) -> int:
        return len(self.ids)


class HashingTokenizer:
    """Whitespace+punctuation segmentation, lowercasing, stable hashing to ids.

    Composed inputs are rendered as: begin marker, prefix tokens, separator,
    text tokens, separator. The prefix segment may be empty but its separator
    is always emitted, so the unprefixed pipeline and an empty lexicon produce
    the same sequence. Truncation eats the text tail first and never drops a
    marker.
    """

    def __init__(
        self,
        vocab_size: int = DEFAULT_VOCAB_SIZE,
        max_prefix_tokens: int = 64,
    ):
        if vocab_size <= NUM_SPECIAL_TOKENS:
            raise ValueError("vocab_size must exceed the special-token count")
        self.vocab_size = vocab_size
        self.max_prefix_tokens = max_prefix_tokens

    def _hash_all(self, text: str) -> list[int]:
        return [hash_token(tok.lower(), self.vocab_size) for tok in segment_text(text)]

    def tokenize(self, segments: str | Sequence[str], max_len: int = DEFAULT_MAX_LEN) -> TokenSequence:
        if max_len < 4:
            raise ValueError(f"max_len must be >= 4, got {max_len}")
        if isinstance(segments, str):
            segments = [segments]
        if len(segments) == 1:
            prefix, text = "", segments[0]
        elif len(segments) == 2:
            prefix, text = segments
        else:
            raise ValueError(f"expected 1 or 2 segments, got {len(segments)}")

        prefix_ids = self._hash_all(prefix)[: min(self.max_prefix_tokens, max_len - 3)]
        text_budget = max_len - 3 - len(prefix_ids)
        text_ids = self._hash_all(text)[:text_budget]

        ids = [BOS_ID, *prefix_ids, SEP_ID, *text_ids, SEP_ID]
        boundary = 2 + len(prefix_ids)  # first position of the text segment
        segment_ids = [0] * boundary + [1] * (len(ids) - boundary)
        return TokenSequence(tuple(ids), (1,) * len(ids), tuple(segment_ids))


def collate(
    sequences: Sequence[TokenSequence],
    dtype: torch.dtype = torch.float32,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Pad a batch to its longest sequence; returns (ids, mask) tensors."""
    if not sequences:
        raise ValueError("cannot collate an empty batch")
    width = max(len(seq) for seq in sequences)
    ids = torch.full((len(sequences), width), PAD_ID, dtype=torch.long)
    mask = torch.zeros((len(sequences), width), dtype=dtype)
    for row, seq in enumerate(sequences):
        ids[row, : len(seq)] = torch.tensor(seq.ids, dtype=torch.long)
        mask[row, : len(seq)] = 1
    return ids, mask


class PooledTextEncoder(ABC):
    """Contract for encoders usable by the training stack.

    Requirements beyond the abstract methods:

    * ``encode(t) == encode_from_embeddings(embed(t.ids), t.mask)`` for all t;
    * ``embed`` is differentiable with respect to the embedding parameters and
      its output may be perturbed and re-encoded (the adversarial branch);
    * implementations based on ``torch.nn.Module`` gain parameter access and
      train/eval switching for free; anything else must expose equivalents.
    """

    hidden_size: int

    @abstractmethod
    def tokenize(self, segments, max_len: int | None = None) -> TokenSequence: ...

    @abstractmethod
    def embed(self, ids: torch.Tensor) -> torch.Tensor:
        """Look up token embeddings; row j is the embedding of token j."""

    @abstractmethod
    def encode_from_embeddings(self, emb: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """Contextualize an embedding matrix and pool the begin-marker position."""

    def encode(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        return self.encode_from_embeddings(self.embed(ids), mask)


def sinusoidal_positions(length: int, dim: int, dtype: torch.dtype) -> torch.Tensor:
    """Classic fixed sin/cos position table of shape (length, dim)."""
    position = torch.arange(length, dtype=dtype).unsqueeze(1)
    div = torch.exp(
        torch.arange(0, dim, 2, dtype=dtype) * (-math.log(10000.0) / dim)
    )
    table = torch.zeros(length, dim, dtype=dtype)
    table[:, 0::2] = torch.sin(position * div)
    table[:, 1::2] = torch.cos(position * div)
    return table


class SelfAttentionBlock(nn.Module):
    """Post-norm transformer block: multi-head self-attention + feed-forward."""

    def __init__(self, dim: int, num_heads: int, dropout: float):
        super().__init__()
        if dim % num_heads != 0:
            raise ValueError(f"hidden size {dim} not divisible by {num_heads} heads")
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)
        self.norm_attn = nn.LayerNorm(dim)
        self.norm_ffn = nn.LayerNorm(dim)
        self.ffn = nn.Sequential(
            nn.Linear(dim, 4 * dim), nn.GELU(), nn.Linear(4 * dim, dim)
        )
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        batch, length, dim = x.shape
        q, k, v = self.qkv(x).chunk(3, dim=-1)

        def split(t):
            return t.view(batch, length, self.num_heads, self.head_dim).transpose(1, 2)

        q, k, v = split(q), split(k), split(v)
        scores = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        # padding keys get weight exactly 0; the begin marker is always real,
        # so no row is fully masked and softmax never sees an all-(-inf) row
        key_mask = mask.bool()[:, None, None, :]
        scores = scores.masked_fill(~key_mask, float("-inf"))
        attn = self.dropout(scores.softmax(dim=-1))
        context = (attn @ v).transpose(1, 2).reshape(batch, length, dim)
        x = self.norm_attn(x + self.dropout(self.proj(context)))
        x = self.norm_ffn(x + self.dropout(self.ffn(x)))
        return x


class CompactTextEncoder(nn.Module, PooledTextEncoder):
    """Small from-scratch transformer with begin-marker pooling.

    Parameter initialization is driven entirely by ``seed``, so two encoders
    constructed with the same configuration are identical.
    """

    def __init__(
        self,
        vocab_size: int = DEFAULT_VOCAB_SIZE,
        hidden_size: int = 64,
        num_layers: int = 2,
        num_heads: int = 4,
        dropout: float = 0.2,
        max_len: int = DEFAULT_MAX_LEN,
        max_prefix_tokens: int = 64,
        seed: int = 0,
        dtype: torch.dtype = torch.float32,
    ):
        super().__init__()
        self.config = {
            "vocab_size": vocab_size,
            "hidden_size": hidden_size,
            "num_layers": num_layers,
            "num_heads": num_heads,
            "dropout": dropout,
            "max_len": max_len,
            "max_prefix_tokens": max_prefix_tokens,
            "seed": seed,
        }
        self.hidden_size = hidden_size
        self.max_len = max_len
        self.tokenizer = HashingTokenizer(vocab_size, max_prefix_tokens)
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self.token_embedding = nn.Embedding(vocab_size, hidden_size, padding_idx=PAD_ID)
            self.embedding_dropout = nn.Dropout(dropout)
            self.blocks = nn.ModuleList(
                SelfAttentionBlock(hidden_size, num_heads, dropout)
                for _ in range(num_layers)
            )
        if dtype is not torch.float32:
            self.to(dtype)

    @property
    def dtype(self) -> torch.dtype:
        return self.token_embedding.weight.dtype

    def tokenize(self, segments, max_len: int | None = None) -> TokenSequence:
        return self.tokenizer.tokenize(segments, max_len or self.max_len)

    def embed(self, ids: torch.Tensor) -> torch.Tensor:
        if ids.min() < 0 or ids.max() >= self.config["vocab_size"]:
            raise ValueError(
                f"token id out of range [0, {self.config['vocab_size']}): "
                f"{int(ids.min())}..{int(ids.max())}"
            )
        return self.token_embedding(ids)

    def encode_from_embeddings(self, emb: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        if not torch.isfinite(emb).all():
            raise ValueError("non-finite values in embedding matrix")
        squeeze = emb.dim() == 2
        if squeeze:
            emb, mask = emb.unsqueeze(0), mask.unsqueeze(0)
        length, dim = emb.shape[1], emb.shape[2]
        x = emb + sinusoidal_positions(length, dim, emb.dtype)
        x = self.embedding_dropout(x)
        for block in self.blocks:
            x = block(x, mask)
        pooled = x[:, 0, :]
        return pooled.squeeze(0) if squeeze else pooled

    def encode(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        return self.encode_from_embeddings(self.embed(ids), mask)
