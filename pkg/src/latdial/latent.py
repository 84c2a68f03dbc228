"""Latent machinery: noise distributions, latent generators, and the critic.

Two noise distributions are learned per context: a recognition distribution
conditioned on the response and the context (used only in training), and a
prior conditioned on the context alone (optionally a mixture with
Gumbel-Softmax component selection). Feed-forward generators map noise draws
to latent codes, and a critic scores latent codes against their context so
the two latent populations can be matched adversarially.
"""
from __future__ import annotations

from typing import Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

LOG_VAR_MIN = -20.0
LOG_VAR_MAX = 20.0


def _gaussian_trunk(input_size: int, hidden_size: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(input_size, hidden_size),
        nn.Tanh(),
        nn.Linear(hidden_size, hidden_size),
        nn.Tanh(),
    )


def sample_gaussian(
    mean: torch.Tensor,
    log_var: torch.Tensor,
    generator: Optional[torch.Generator] = None,
) -> torch.Tensor:
    eta = torch.empty_like(mean).normal_(generator=generator)
    return mean + torch.exp(0.5 * log_var) * eta


class RecognitionNetwork(nn.Module):
    """Diagonal Gaussian over noise, conditioned on response and context."""

    def __init__(self, response_size: int, context_size: int, hidden_size: int, noise_size: int):
        super().__init__()
        self.noise_size = noise_size
        self.trunk = _gaussian_trunk(response_size + context_size, hidden_size)
        self.head = nn.Linear(hidden_size, 2 * noise_size)

    def forward(
        self, response_vec: torch.Tensor, context_vec: torch.Tensor
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        h = self.trunk(torch.cat([response_vec, context_vec], dim=1))
        mean, log_var = self.head(h).chunk(2, dim=1)
        return mean, log_var.clamp(LOG_VAR_MIN, LOG_VAR_MAX)

    def sample(
        self,
        response_vec: torch.Tensor,
        context_vec: torch.Tensor,
        generator: Optional[torch.Generator] = None,
        use_mean: bool = False,
    ) -> torch.Tensor:
        mean, log_var = self(response_vec, context_vec)
        if use_mean:
            return mean
        return sample_gaussian(mean, log_var, generator)


class PriorNetwork(nn.Module):
    """Single diagonal Gaussian over noise, conditioned on the context."""

    def __init__(self, context_size: int, hidden_size: int, noise_size: int):
        super().__init__()
        self.noise_size = noise_size
        self.trunk = _gaussian_trunk(context_size, hidden_size)
        self.head = nn.Linear(hidden_size, 2 * noise_size)

    def forward(self, context_vec: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        h = self.trunk(context_vec)
        mean, log_var = self.head(h).chunk(2, dim=1)
        return mean, log_var.clamp(LOG_VAR_MIN, LOG_VAR_MAX)

    def sample(
        self,
        context_vec: torch.Tensor,
        generator: Optional[torch.Generator] = None,
    ) -> Tuple[torch.Tensor, None]:
        mean, log_var = self(context_vec)
        return sample_gaussian(mean, log_var, generator), None


def gumbel_softmax_weights(
    logits: torch.Tensor,
    tau: float,
    generator: Optional[torch.Generator] = None,
    noise: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Differentiable soft one-hot over mixture components.

    `noise` substitutes the Gumbel draw when given (fixed-noise checks).
    """
    if noise is None:
        u = torch.empty_like(logits).uniform_(generator=generator)
        # guard both logs against exact 0
        exponential = -torch.log(u.clamp_min(1e-20))
        noise = -torch.log(exponential.clamp_min(1e-20))
    return F.softmax((logits + noise) / tau, dim=-1)


class MixturePriorNetwork(nn.Module):
    """Mixture of diagonal Gaussians over noise, conditioned on the context.

    One linear head per component emits a selection logit together with that
    component's mean and log-variance; component choice is relaxed with
    Gumbel-Softmax so the selection stays differentiable.
    """

    def __init__(
        self,
        context_size: int,
        hidden_size: int,
        noise_size: int,
        n_components: int,
        tau: float = 0.1,
    ):
        super().__init__()
        if n_components < 1:
            raise ValueError("n_components must be >= 1")
        self.noise_size = noise_size
        self.n_components = n_components
        self.tau = tau
        self.trunk = _gaussian_trunk(context_size, hidden_size)
        self.heads = nn.Linear(hidden_size, n_components * (1 + 2 * noise_size))

    def forward(
        self, context_vec: torch.Tensor
    ) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Returns (logits (B, K), means (B, K, N), log_vars (B, K, N))."""
        h = self.trunk(context_vec)
        out = self.heads(h).view(-1, self.n_components, 1 + 2 * self.noise_size)
        logits = out[:, :, 0]
        means = out[:, :, 1 : 1 + self.noise_size]
        log_vars = out[:, :, 1 + self.noise_size :].clamp(LOG_VAR_MIN, LOG_VAR_MAX)
        return logits, means, log_vars

    def mixture_weights(self, context_vec: torch.Tensor) -> torch.Tensor:
        logits, _, _ = self(context_vec)
        return F.softmax(logits, dim=-1)

    def sample(
        self,
        context_vec: torch.Tensor,
        generator: Optional[torch.Generator] = None,
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """Draw noise; returns (noise (B, N), component weights (B, K))."""
        logits, means, log_vars = self(context_vec)
        weights = gumbel_softmax_weights(logits, self.tau, generator)
        eta = torch.empty_like(means).normal_(generator=generator)
        draws = means + torch.exp(0.5 * log_vars) * eta  # (B, K, N)
        noise = torch.einsum("bk,bkn->bn", weights, draws)
        return noise, weights

    def component_mean(self, context_vec: torch.Tensor, component: int) -> torch.Tensor:
        _, means, _ = self(context_vec)
        return means[:, component, :]


class LatentMapper(nn.Module):
    """Three-layer ReLU feed-forward map from noise to a latent code."""

    def __init__(self, noise_size: int, hidden_size: int, latent_size: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(noise_size, hidden_size),
            nn.ReLU(),
            nn.Linear(hidden_size, hidden_size),
            nn.ReLU(),
            nn.Linear(hidden_size, latent_size),
        )

    def forward(self, noise: torch.Tensor) -> torch.Tensor:
        return self.net(noise)


class LatentCritic(nn.Module):
    """Scores a latent code against its context; no output activation."""

    def __init__(self, latent_size: int, context_size: int, hidden_size: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(latent_size + context_size, hidden_size),
            nn.ReLU(),
            nn.Linear(hidden_size, hidden_size),
            nn.ReLU(),
            nn.Linear(hidden_size, 1),
        )

    def forward(self, latent: torch.Tensor, context_vec: torch.Tensor) -> torch.Tensor:
        return self.net(torch.cat([latent, context_vec], dim=1)).squeeze(1)


def critic_gap(
    critic: LatentCritic,
    posterior_latent: torch.Tensor,
    prior_latent: torch.Tensor,
    context_vec: torch.Tensor,
) -> torch.Tensor:
    """Mean critic score of posterior codes minus mean score of prior codes.

    The latent generators take gradient ascent steps on this value; the
    critic takes descent steps on it (plus the gradient penalty).
    """
    return critic(posterior_latent, context_vec).mean() - critic(
        prior_latent, context_vec
    ).mean()


def gradient_penalty(
    critic: LatentCritic,
    posterior_latent: torch.Tensor,
    prior_latent: torch.Tensor,
    context_vec: torch.Tensor,
    generator: Optional[torch.Generator] = None,
) -> torch.Tensor:
    """Two-sided penalty pushing critic gradient norms toward 1.

    Interpolation happens in latent space only; the paired context is kept
    fixed and gradients are taken with respect to the latent alone.
    """
    batch = posterior_latent.size(0)
    alpha = torch.empty(batch, 1, device=posterior_latent.device).uniform_(
        generator=generator
    )
    mixed = alpha * posterior_latent.detach() + (1.0 - alpha) * prior_latent.detach()
    mixed.requires_grad_(True)
    scores = critic(mixed, context_vec.detach())
    grads = torch.autograd.grad(
        outputs=scores.sum(),
        inputs=mixed,
        create_graph=True,
        retain_graph=True,
    )[0]
    norms = grads.norm(2, dim=1)
    return ((norms - 1.0) ** 2).mean()


__all__ = [
    "RecognitionNetwork",
    "PriorNetwork",
    "MixturePriorNetwork",
    "LatentMapper",
    "LatentCritic",
    "sample_gaussian",
    "gumbel_softmax_weights",
    "critic_gap",
    "gradient_penalty",
    "LOG_VAR_MIN",
    "LOG_VAR_MAX",
]
