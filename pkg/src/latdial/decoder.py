"""Response decoder.

A single-layer GRU whose initial hidden state is an affine-plus-tanh
projection of the latent code concatenated with the context summary. During
training it is teacher-forced and scored with a masked token NLL; at
inference it decodes greedily, taking the highest-scoring token at each step
(first index on ties) until the end marker or the length cap.
"""
from __future__ import annotations

from typing import List, Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from .corpus import BOS_ID, EOS_ID, PAD_ID


class ResponseDecoder(nn.Module):
    def __init__(
        self,
        embedding: nn.Embedding,
        latent_size: int,
        context_size: int,
        hidden_size: int,
        vocab_size: int,
        feed_latent_per_step: bool = False,
    ):
        super().__init__()
        self.embedding = embedding
        self.hidden_size = hidden_size
        self.vocab_size = vocab_size
        self.feed_latent_per_step = feed_latent_per_step
        self.state_proj = nn.Linear(latent_size + context_size, hidden_size)
        input_size = embedding.embedding_dim
        if feed_latent_per_step:
            input_size += latent_size + context_size
        self.rnn = nn.GRU(input_size, hidden_size, batch_first=True)
        self.output = nn.Linear(hidden_size, vocab_size)

    def initial_state(self, latent: torch.Tensor, context_vec: torch.Tensor) -> torch.Tensor:
        return torch.tanh(self.state_proj(torch.cat([latent, context_vec], dim=1)))

    def _step_inputs(
        self, tokens: torch.Tensor, latent: torch.Tensor, context_vec: torch.Tensor
    ) -> torch.Tensor:
        emb = self.embedding(tokens)
        if not self.feed_latent_per_step:
            return emb
        extra = torch.cat([latent, context_vec], dim=1)
        extra = extra.unsqueeze(1).expand(-1, emb.size(1), -1)
        return torch.cat([emb, extra], dim=2)

    def teacher_forced_logits(
        self,
        latent: torch.Tensor,
        context_vec: torch.Tensor,
        response: torch.Tensor,
    ) -> torch.Tensor:
        """response (B, T) already ends with EOS; BOS is prepended here.

        Returns logits (B, T, V): position t predicts response[:, t].
        """
        batch = response.size(0)
        bos = response.new_full((batch, 1), BOS_ID)
        inputs = torch.cat([bos, response[:, :-1]], dim=1)
        state = self.initial_state(latent, context_vec).unsqueeze(0)
        out, _ = self.rnn(self._step_inputs(inputs, latent, context_vec), state)
        return self.output(out)

    def reconstruction_loss(
        self,
        latent: torch.Tensor,
        context_vec: torch.Tensor,
        response: torch.Tensor,
        response_lens: torch.Tensor,
    ) -> torch.Tensor:
        """Token NLL summed over each sequence, averaged over the batch."""
        logits = self.teacher_forced_logits(latent, context_vec, response)
        nll = F.cross_entropy(
            logits.reshape(-1, self.vocab_size),
            response.reshape(-1),
            ignore_index=PAD_ID,
            reduction="none",
        ).reshape(response.shape)
        mask = (response != PAD_ID).float()
        return (nll * mask).sum(dim=1).mean()

    @torch.no_grad()
    def greedy_decode(
        self,
        latent: torch.Tensor,
        context_vec: torch.Tensor,
        max_len: int,
    ) -> List[List[int]]:
        """Decode token ids per batch row; EOS and BOS are not included."""
        batch = latent.size(0)
        device = latent.device
        state = self.initial_state(latent, context_vec).unsqueeze(0)
        tokens = torch.full((batch, 1), BOS_ID, dtype=torch.long, device=device)
        done = torch.zeros(batch, dtype=torch.bool, device=device)
        outputs: List[List[int]] = [[] for _ in range(batch)]
        for _ in range(max_len):
            out, state = self.rnn(self._step_inputs(tokens, latent, context_vec), state)
            logits = self.output(out[:, -1, :])
            # argmax picks the first index among equal maxima
            tokens = logits.argmax(dim=1, keepdim=True)
            for row in range(batch):
                if done[row]:
                    continue
                tok = int(tokens[row, 0])
                if tok == EOS_ID:
                    done[row] = True
                else:
                    outputs[row].append(tok)
            if bool(done.all()):
                break
        return outputs


__all__ = ["ResponseDecoder"]
