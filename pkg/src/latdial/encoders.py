"""Utterance and context encoders.

Utterances are summarized by a bidirectional GRU; the utterance vector is the
concatenation of the last forward state and the last backward state. A
dialogue context is then a sequence of utterance vectors, each tagged with a
conversation-floor scalar, consumed by a unidirectional GRU whose final state
summarizes the context.
"""
from __future__ import annotations

import torch
import torch.nn as nn
from torch.nn.utils.rnn import pack_padded_sequence


class UtteranceEncoder(nn.Module):
    def __init__(self, embedding: nn.Embedding, hidden_size: int):
        super().__init__()
        self.embedding = embedding
        self.hidden_size = hidden_size
        self.rnn = nn.GRU(
            embedding.embedding_dim,
            hidden_size,
            batch_first=True,
            bidirectional=True,
        )

    @property
    def output_size(self) -> int:
        return 2 * self.hidden_size

    def forward(self, tokens: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """tokens (B, T) int64, lengths (B,) int64 with zeros allowed.

        Rows with length 0 (all-pad placeholder slots) come back as zero
        vectors so they contribute nothing downstream.
        """
        batch = tokens.size(0)
        out = tokens.new_zeros((batch, self.output_size), dtype=torch.float32)
        nonempty = lengths > 0
        if not bool(nonempty.any()):
            return out
        kept = tokens[nonempty]
        kept_lens = lengths[nonempty]
        emb = self.embedding(kept)
        packed = pack_padded_sequence(
            emb, kept_lens.cpu(), batch_first=True, enforce_sorted=False
        )
        _, state = self.rnn(packed)  # (2, B', H)
        summary = torch.cat([state[0], state[1]], dim=1)
        out[nonempty] = summary
        return out


class ContextEncoder(nn.Module):
    """Runs a GRU over per-utterance vectors concatenated with floor flags."""

    def __init__(self, utterance_size: int, hidden_size: int):
        super().__init__()
        self.utterance_size = utterance_size
        self.hidden_size = hidden_size
        self.rnn = nn.GRU(utterance_size + 1, hidden_size, batch_first=True)

    @property
    def output_size(self) -> int:
        return self.hidden_size

    def forward(
        self,
        utterance_vectors: torch.Tensor,
        floors: torch.Tensor,
        context_lengths: torch.Tensor,
    ) -> torch.Tensor:
        """utterance_vectors (B, C, U), floors (B, C), context_lengths (B,)."""
        inputs = torch.cat([utterance_vectors, floors.unsqueeze(-1)], dim=-1)
        packed = pack_padded_sequence(
            inputs, context_lengths.cpu(), batch_first=True, enforce_sorted=False
        )
        _, state = self.rnn(packed)  # (1, B, H)
        return state.squeeze(0)


def encode_context(
    utterance_encoder: UtteranceEncoder,
    context_encoder: ContextEncoder,
    context: torch.Tensor,
    context_utt_lens: torch.Tensor,
    floors: torch.Tensor,
    context_lens: torch.Tensor,
) -> torch.Tensor:
    """context (B, C, T) -> context summary (B, ctx_hidden)."""
    batch, window, tlen = context.shape
    flat = context.reshape(batch * window, tlen)
    flat_lens = context_utt_lens.reshape(batch * window)
    utt_vecs = utterance_encoder(flat, flat_lens)
    utt_vecs = utt_vecs.reshape(batch, window, -1)
    return context_encoder(utt_vecs, floors, context_lens)


def encode_response(
    utterance_encoder: UtteranceEncoder,
    response: torch.Tensor,
    response_lens: torch.Tensor,
) -> torch.Tensor:
    return utterance_encoder(response, response_lens)


__all__ = [
    "UtteranceEncoder",
    "ContextEncoder",
    "encode_context",
    "encode_response",
]
