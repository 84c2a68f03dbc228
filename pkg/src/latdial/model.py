"""Full dialogue model: encoders, noise networks, latent maps, critic, decoder.

The class groups parameters by training phase so the trainer can update
exactly the sets each phase owns, and bundles the sampling entry points used
by evaluation and the chat loop.
"""
from __future__ import annotations

import math
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch
import torch.nn as nn

from .config import TrainConfig
from .corpus import PAD_ID, ExchangeBatch
from .decoder import ResponseDecoder
from .encoders import ContextEncoder, UtteranceEncoder, encode_context, encode_response
from .latent import (
    LatentCritic,
    LatentMapper,
    MixturePriorNetwork,
    PriorNetwork,
    RecognitionNetwork,
)

INIT_RANGE = 0.02


def _dedupe(params: List[nn.Parameter]) -> List[nn.Parameter]:
    seen: Dict[int, None] = {}
    out = []
    for p in params:
        if id(p) not in seen:
            seen[id(p)] = None
            out.append(p)
    return out


class DialogModel(nn.Module):
    def __init__(
        self,
        vocab_size: int,
        cfg: TrainConfig,
        embedding_matrix: Optional[np.ndarray] = None,
    ):
        super().__init__()
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.embedding = nn.Embedding(vocab_size, cfg.embed_dim, padding_idx=PAD_ID)
        self.utterance_encoder = UtteranceEncoder(self.embedding, cfg.utt_hidden)
        self.context_encoder = ContextEncoder(
            self.utterance_encoder.output_size, cfg.ctx_hidden
        )
        self.recognition = RecognitionNetwork(
            self.utterance_encoder.output_size,
            cfg.ctx_hidden,
            cfg.prior_hidden,
            cfg.noise_dim,
        )
        if cfg.prior == "mixture":
            self.prior = MixturePriorNetwork(
                cfg.ctx_hidden, cfg.prior_hidden, cfg.noise_dim, cfg.mixture_k, cfg.tau
            )
        else:
            self.prior = PriorNetwork(cfg.ctx_hidden, cfg.prior_hidden, cfg.noise_dim)
        self.posterior_generator = LatentMapper(
            cfg.noise_dim, cfg.gen_hidden, cfg.latent_dim
        )
        self.prior_generator = LatentMapper(cfg.noise_dim, cfg.gen_hidden, cfg.latent_dim)
        self.critic = LatentCritic(cfg.latent_dim, cfg.ctx_hidden, cfg.critic_hidden)
        self.decoder = ResponseDecoder(
            self.embedding,
            cfg.latent_dim,
            cfg.ctx_hidden,
            cfg.dec_hidden,
            vocab_size,
            feed_latent_per_step=cfg.feed_latent_per_step,
        )
        self.initialize_weights(cfg.seed, embedding_matrix)

    # ------------------------------------------------------------------ init
    def initialize_weights(
        self, seed: int, embedding_matrix: Optional[np.ndarray] = None
    ) -> None:
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for module in self.modules():
                if isinstance(module, nn.Linear):
                    module.weight.uniform_(-INIT_RANGE, INIT_RANGE, generator=gen)
                    if module.bias is not None:
                        module.bias.zero_()
                elif isinstance(module, nn.GRU):
                    bound = 1.0 / math.sqrt(module.hidden_size)
                    for name, param in module.named_parameters():
                        if name.startswith("weight"):
                            param.uniform_(-bound, bound, generator=gen)
                        else:
                            param.zero_()
            if embedding_matrix is not None:
                if tuple(embedding_matrix.shape) != tuple(self.embedding.weight.shape):
                    raise ValueError(
                        "embedding matrix shape %s does not match table %s"
                        % (embedding_matrix.shape, tuple(self.embedding.weight.shape))
                    )
                self.embedding.weight.copy_(
                    torch.from_numpy(np.ascontiguousarray(embedding_matrix)).float()
                )
            else:
                self.embedding.weight.uniform_(-INIT_RANGE, INIT_RANGE, generator=gen)
            self.embedding.weight[PAD_ID].zero_()

    # --------------------------------------------------- parameter ownership
    def gan_generator_parameters(self) -> List[nn.Parameter]:
        return _dedupe(
            list(self.posterior_generator.parameters())
            + list(self.prior_generator.parameters())
            + list(self.prior.parameters())
            + list(self.recognition.parameters())
        )

    def critic_parameters(self) -> List[nn.Parameter]:
        return list(self.critic.parameters())

    def ae_parameters(self) -> List[nn.Parameter]:
        return _dedupe(
            list(self.utterance_encoder.parameters())
            + list(self.context_encoder.parameters())
            + list(self.recognition.parameters())
            + list(self.posterior_generator.parameters())
            + list(self.decoder.parameters())
        )

    def parameter_groups(self) -> Dict[str, List[nn.Parameter]]:
        return {
            "gan_generator": self.gan_generator_parameters(),
            "critic": self.critic_parameters(),
            "ae": self.ae_parameters(),
        }

    # ------------------------------------------------------------- encoding
    def context_vector(self, batch: ExchangeBatch) -> torch.Tensor:
        return encode_context(
            self.utterance_encoder,
            self.context_encoder,
            batch.context,
            batch.context_utt_lens,
            batch.floors,
            batch.context_lens,
        )

    def response_vector(self, batch: ExchangeBatch) -> torch.Tensor:
        return encode_response(self.utterance_encoder, batch.response, batch.response_lens)

    # ------------------------------------------------------------- sampling
    def prior_noise(
        self,
        context_vec: torch.Tensor,
        generator: Optional[torch.Generator] = None,
    ) -> Tuple[torch.Tensor, Optional[torch.Tensor]]:
        """Context-conditioned noise draw; weights only on the mixture path."""
        if self.cfg.point_mass_latent:
            if isinstance(self.prior, MixturePriorNetwork):
                logits, means, _ = self.prior(context_vec)
                weights = torch.softmax(logits, dim=-1)
                return torch.einsum("bk,bkn->bn", weights, means), weights
            mean, _ = self.prior(context_vec)
            return mean, None
        return self.prior.sample(context_vec, generator)

    def posterior_noise(
        self,
        response_vec: torch.Tensor,
        context_vec: torch.Tensor,
        generator: Optional[torch.Generator] = None,
        use_mean: bool = False,
    ) -> torch.Tensor:
        if self.cfg.point_mass_latent:
            use_mean = True
        return self.recognition.sample(
            response_vec, context_vec, generator, use_mean=use_mean
        )

    def prior_latent(
        self,
        context_vec: torch.Tensor,
        generator: Optional[torch.Generator] = None,
    ) -> Tuple[torch.Tensor, Optional[torch.Tensor]]:
        noise, weights = self.prior_noise(context_vec, generator)
        return self.prior_generator(noise), weights

    def posterior_latent(
        self,
        batch: ExchangeBatch,
        generator: Optional[torch.Generator] = None,
        use_mean: bool = False,
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """Returns (latent, context_vec) for the AE path."""
        context_vec = self.context_vector(batch)
        response_vec = self.response_vector(batch)
        noise = self.posterior_noise(response_vec, context_vec, generator, use_mean)
        return self.posterior_generator(noise), context_vec

    @torch.no_grad()
    def sample_responses(
        self,
        batch: ExchangeBatch,
        n_samples: int,
        generator: Optional[torch.Generator] = None,
        max_len: Optional[int] = None,
    ) -> Tuple[List[List[List[int]]], Optional[torch.Tensor]]:
        """Greedy-decode n_samples prior draws per batch row.

        Returns (responses[row][sample] = token ids, weights (B, n, K) or
        None on the Gaussian path).
        """
        self.eval()
        max_len = max_len or self.cfg.max_utterance_len
        context_vec = self.context_vector(batch)
        batch_size = context_vec.size(0)
        out: List[List[List[int]]] = [[] for _ in range(batch_size)]
        weight_draws = []
        for _ in range(n_samples):
            latent, weights = self.prior_latent(context_vec, generator)
            decoded = self.decoder.greedy_decode(latent, context_vec, max_len)
            for row in range(batch_size):
                out[row].append(decoded[row])
            if weights is not None:
                weight_draws.append(weights)
        stacked = torch.stack(weight_draws, dim=1) if weight_draws else None
        return out, stacked

    @torch.no_grad()
    def component_decodes(
        self, batch: ExchangeBatch, max_len: Optional[int] = None
    ) -> List[List[List[int]]]:
        """Greedy decode from each mixture component's mean noise.

        Returns decodes[row][component] = token ids. Mixture prior only.
        """
        if not isinstance(self.prior, MixturePriorNetwork):
            raise ValueError("component decodes require the mixture prior")
        self.eval()
        max_len = max_len or self.cfg.max_utterance_len
        context_vec = self.context_vector(batch)
        batch_size = context_vec.size(0)
        out: List[List[List[int]]] = [[] for _ in range(batch_size)]
        for k in range(self.prior.n_components):
            noise = self.prior.component_mean(context_vec, k)
            latent = self.prior_generator(noise)
            decoded = self.decoder.greedy_decode(latent, context_vec, max_len)
            for row in range(batch_size):
                out[row].append(decoded[row])
        return out

    @torch.no_grad()
    def reconstruct(
        self, batch: ExchangeBatch, max_len: Optional[int] = None
    ) -> List[List[int]]:
        """Greedy decode from the posterior mean noise (AE round trip)."""
        self.eval()
        max_len = max_len or self.cfg.max_utterance_len
        latent, context_vec = self.posterior_latent(batch, use_mean=True)
        return self.decoder.greedy_decode(latent, context_vec, max_len)


__all__ = ["DialogModel", "INIT_RANGE"]
