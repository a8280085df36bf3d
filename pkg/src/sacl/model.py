"""Encoder + classifier head composite and its self-describing checkpoint format."""
from __future__ import annotations

from pathlib import Path

import torch
from torch import nn

from .data import POLARITIES
from .encoder import CompactTextEncoder
from .objective import ClassifierHead

CHECKPOINT_VERSION = 1


class SentimentModel(nn.Module):
    """A pooled text encoder with a linear polarity head on top."""

    def __init__(self, encoder: CompactTextEncoder, head: ClassifierHead):
        super().__init__()
        self.encoder = encoder
        self.head = head
        self.train_languages: frozenset[str] = frozenset()

    @property
    def dtype(self) -> torch.dtype:
        return self.encoder.dtype

    def tokenize(self, segments, max_len: int | None = None):
        return self.encoder.tokenize(segments, max_len)

    def embed(self, ids: torch.Tensor) -> torch.Tensor:
        return self.encoder.embed(ids)

    def encode_from_embeddings(self, emb: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        return self.encoder.encode_from_embeddings(emb, mask)

    def forward(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        return self.head(self.encoder.encode(ids, mask))


def build_model(
    *,
    vocab_size: int,
    hidden_size: int,
    num_layers: int,
    num_heads: int,
    dropout: float,
    max_len: int,
    max_prefix_tokens: int,
    seed: int,
    dtype: torch.dtype = torch.float32,
) -> SentimentModel:
    encoder = CompactTextEncoder(
        vocab_size=vocab_size,
        hidden_size=hidden_size,
        num_layers=num_layers,
        num_heads=num_heads,
        dropout=dropout,
        max_len=max_len,
        max_prefix_tokens=max_prefix_tokens,
        seed=seed,
        dtype=dtype,
    )
    head = ClassifierHead(hidden_size, seed=seed + 1)
    if dtype is not torch.float32:
        head.to(dtype)
    return SentimentModel(encoder, head)


def save_checkpoint(model: SentimentModel, path, extra: dict | None = None) -> None:
    """Write a self-describing checkpoint: config, parameters, training provenance."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "encoder_config": dict(model.encoder.config),
        "classes": list(POLARITIES),
        "dtype": str(model.dtype).removeprefix("torch."),
        "train_languages": sorted(model.train_languages),
        "state_dict": model.state_dict(),
        "extra": extra or {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path) -> tuple[SentimentModel, dict]:
    """Rebuild a model from :func:`save_checkpoint` output; returns (model, extra)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(
            f"unsupported checkpoint version {version!r}; expected {CHECKPOINT_VERSION}"
        )
    if payload["classes"] != list(POLARITIES):
        raise ValueError(f"checkpoint class order {payload['classes']} is incompatible")
    dtype = getattr(torch, payload["dtype"])
    model = build_model(
        vocab_size=payload["encoder_config"]["vocab_size"],
        hidden_size=payload["encoder_config"]["hidden_size"],
        num_layers=payload["encoder_config"]["num_layers"],
        num_heads=payload["encoder_config"]["num_heads"],
        dropout=payload["encoder_config"]["dropout"],
        max_len=payload["encoder_config"]["max_len"],
        max_prefix_tokens=payload["encoder_config"]["max_prefix_tokens"],
        seed=payload["encoder_config"]["seed"],
        dtype=dtype,
    )
    model.load_state_dict(payload["state_dict"])
    model.train_languages = frozenset(payload.get("train_languages", ()))
    return model, payload.get("extra", {})
