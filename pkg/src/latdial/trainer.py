"""Training loop: alternating adversarial and autoencoding phases.

Per mini-batch the order is fixed: one latent-generator update, then
n_critic critic updates with fresh noise on the same mini-batch, then one
autoencoder update. The critic side carries the gradient penalty; the
autoencoder side uses plain SGD with norm clipping and a step-decayed
learning rate. Each epoch ends with validation, a JSON-lines log record,
and a checkpoint directory.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch

from .config import RunConfig, TrainConfig
from .corpus import EOS_ID, Exchange, ExchangeBatch, batch_exchanges, collate_exchanges
from .latent import critic_gap, gradient_penalty
from .metrics import MetricsReport, evaluate
from .model import DialogModel

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, last_checkpoint: Optional[str] = None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint


@dataclass
class EpochRecord:
    epoch: int
    l_rec: float
    l_disc: float
    lr_ae: float
    val_metrics: Dict[str, float] = field(default_factory=dict)

    def to_json(self) -> str:
        record = {
            "epoch": self.epoch,
            "l_rec": self.l_rec,
            "l_disc": self.l_disc,
            "lr_ae": self.lr_ae,
            "val_metrics": self.val_metrics,
        }
        return json.dumps(record, sort_keys=True)


def ae_learning_rate(cfg: TrainConfig, epoch: int) -> float:
    """Step decay: the rate drops by cfg.lr_decay at every 10th epoch."""
    return cfg.ae_lr * (1.0 - cfg.lr_decay) ** (epoch // cfg.lr_decay_every)


class ResponseSampler:
    """Adapter giving metrics.evaluate a per-exchange sampling callable."""

    def __init__(self, model: DialogModel, seed: int, max_len: Optional[int] = None):
        self.model = model
        self.generator = torch.Generator().manual_seed(seed)
        self.max_len = max_len

    def __call__(self, exchange: Exchange, n_samples: int) -> List[List[int]]:
        batch = collate_exchanges([exchange])
        samples, _ = self.model.sample_responses(
            batch, n_samples, self.generator, max_len=self.max_len
        )
        # greedy decodes exclude bos/eos already; drop stray pads
        return [[t for t in s if t != 0] for s in samples[0]]


class Trainer:
    def __init__(
        self,
        model: DialogModel,
        cfg: TrainConfig,
        output_dir: str,
        eval_embeddings: Optional[np.ndarray] = None,
    ):
        self.model = model
        self.cfg = cfg
        self.output_dir = output_dir
        self.eval_embeddings = eval_embeddings
        self.opt_gen = torch.optim.RMSprop(
            model.gan_generator_parameters(), lr=cfg.gan_lr_generator
        )
        self.opt_critic = torch.optim.RMSprop(
            model.critic_parameters(), lr=cfg.gan_lr_critic
        )
        self.opt_ae = torch.optim.SGD(model.ae_parameters(), lr=cfg.ae_lr)
        self.noise_gen = torch.Generator().manual_seed(cfg.seed)
        self.generator_steps = 0
        self.critic_steps = 0
        self.ae_steps = 0

    # ------------------------------------------------------------ phase steps
    def _frozen_vectors(self, batch: ExchangeBatch):
        with torch.no_grad():
            context_vec = self.model.context_vector(batch)
            response_vec = self.model.response_vector(batch)
        return context_vec.detach(), response_vec.detach()

    def gan_generator_step(self, batch: ExchangeBatch) -> float:
        """Ascend the critic gap w.r.t. both latent generators and both
        noise networks; encoders, decoder and critic stay fixed."""
        self.model.train()
        self.model.zero_grad(set_to_none=True)
        context_vec, response_vec = self._frozen_vectors(batch)
        post_noise = self.model.posterior_noise(response_vec, context_vec, self.noise_gen)
        posterior_z = self.model.posterior_generator(post_noise)
        prior_noise, _ = self.model.prior_noise(context_vec, self.noise_gen)
        prior_z = self.model.prior_generator(prior_noise)
        gap = critic_gap(self.model.critic, posterior_z, prior_z, context_vec)
        (-gap).backward()
        self.opt_gen.step()
        self.model.zero_grad(set_to_none=True)
        self.generator_steps += 1
        return float(gap.detach())

    def gan_critic_step(self, batch: ExchangeBatch) -> float:
        """One descent step on the critic gap plus the gradient penalty.

        Latent codes are drawn with fresh noise and treated as constants;
        only the critic's own parameters move.
        """
        self.model.train()
        self.model.zero_grad(set_to_none=True)
        with torch.no_grad():
            context_vec = self.model.context_vector(batch)
            response_vec = self.model.response_vector(batch)
            post_noise = self.model.posterior_noise(
                response_vec, context_vec, self.noise_gen
            )
            posterior_z = self.model.posterior_generator(post_noise)
            prior_noise, _ = self.model.prior_noise(context_vec, self.noise_gen)
            prior_z = self.model.prior_generator(prior_noise)
        gap = critic_gap(self.model.critic, posterior_z, prior_z, context_vec)
        penalty = gradient_penalty(
            self.model.critic, posterior_z, prior_z, context_vec, self.noise_gen
        )
        loss = gap + self.cfg.lambda_gp * penalty
        loss.backward()
        self.opt_critic.step()
        self.model.zero_grad(set_to_none=True)
        self.critic_steps += 1
        return float(loss.detach())

    def ae_step(self, batch: ExchangeBatch) -> float:
        """Descend the reconstruction loss through encoders, recognition
        network, posterior latent map and decoder, with norm clipping."""
        self.model.train()
        self.model.zero_grad(set_to_none=True)
        latent, context_vec = self.model.posterior_latent(batch, self.noise_gen)
        loss = self.model.decoder.reconstruction_loss(
            latent, context_vec, batch.response, batch.response_lens
        )
        loss.backward()
        torch.nn.utils.clip_grad_norm_(self.model.ae_parameters(), self.cfg.ae_clip)
        self.opt_ae.step()
        self.model.zero_grad(set_to_none=True)
        self.ae_steps += 1
        return float(loss.detach())

    # ------------------------------------------------------------- epoch loop
    def _set_ae_lr(self, epoch: int) -> float:
        lr = ae_learning_rate(self.cfg, epoch)
        for group in self.opt_ae.param_groups:
            group["lr"] = lr
        return lr

    def train_epoch(self, epoch: int, exchanges: Sequence[Exchange]) -> Dict[str, float]:
        shuffle_seed = (self.cfg.seed * 1000003 + epoch) % (2**31)
        rec_total, disc_total, n_batches = 0.0, 0.0, 0
        for batch in batch_exchanges(exchanges, self.cfg.batch_size, shuffle_seed):
            disc_total += self.gan_generator_step(batch)
            for _ in range(self.cfg.n_critic):
                self.gan_critic_step(batch)
            rec_total += self.ae_step(batch)
            n_batches += 1
        if n_batches == 0:
            raise ValueError("no training batches")
        return {"l_rec": rec_total / n_batches, "l_disc": disc_total / n_batches}

    @torch.no_grad()
    def validation_loss(self, exchanges: Sequence[Exchange]) -> float:
        """Teacher-forced reconstruction loss at the posterior mean."""
        self.model.eval()
        total, n = 0.0, 0
        for batch in batch_exchanges(exchanges, self.cfg.batch_size, shuffle_seed=None):
            latent, context_vec = self.model.posterior_latent(batch, use_mean=True)
            loss = self.model.decoder.reconstruction_loss(
                latent, context_vec, batch.response, batch.response_lens
            )
            total += float(loss)
            n += 1
        return total / max(1, n)

    def validation_metrics(self, exchanges: Sequence[Exchange], epoch: int) -> Dict[str, float]:
        out = {"l_rec": self.validation_loss(exchanges)}
        if self.eval_embeddings is not None:
            sampler = ResponseSampler(self.model, seed=self.cfg.seed * 31 + epoch)
            report = evaluate(
                sampler,
                list(exchanges),
                self.eval_embeddings,
                EOS_ID,
                n_samples=self.cfg.n_samples,
                max_contexts=self.cfg.val_max_contexts,
            )
            out.update(report.to_dict())
        return out

    # ------------------------------------------------------------ checkpoints
    def save_checkpoint(
        self,
        epoch: int,
        val_record: Dict[str, float],
        run_config: Optional[RunConfig] = None,
    ) -> str:
        path = os.path.join(self.output_dir, "ckpt", "epoch-%d" % epoch)
        os.makedirs(path, exist_ok=True)
        torch.save(self.model.state_dict(), os.path.join(path, "params"))
        torch.save(
            {
                "gen": self.opt_gen.state_dict(),
                "critic": self.opt_critic.state_dict(),
                "ae": self.opt_ae.state_dict(),
            },
            os.path.join(path, "optim"),
        )
        torch.save(
            {"noise": self.noise_gen.get_state(), "epoch": epoch},
            os.path.join(path, "rng"),
        )
        if run_config is not None:
            config_dict = dict(run_config.to_dict())
        else:
            config_dict = dataclasses.asdict(self.cfg)
        config_dict["vocab_size"] = self.model.vocab_size
        with open(os.path.join(path, "config.json"), "w") as f:
            json.dump(config_dict, f, indent=2, sort_keys=True)
            f.write("\n")
        with open(os.path.join(path, "metrics.json"), "w") as f:
            json.dump(val_record, f, indent=2, sort_keys=True)
            f.write("\n")
        return path

    def load_checkpoint(self, path: str) -> int:
        state = torch.load(os.path.join(path, "params"), weights_only=True)
        self.model.load_state_dict(state)
        optim_path = os.path.join(path, "optim")
        if os.path.exists(optim_path):
            opt_state = torch.load(optim_path, weights_only=True)
            self.opt_gen.load_state_dict(opt_state["gen"])
            self.opt_critic.load_state_dict(opt_state["critic"])
            self.opt_ae.load_state_dict(opt_state["ae"])
        rng_path = os.path.join(path, "rng")
        epoch = 0
        if os.path.exists(rng_path):
            rng_state = torch.load(rng_path, weights_only=True)
            self.noise_gen.set_state(rng_state["noise"])
            epoch = int(rng_state.get("epoch", 0))
        return epoch

    # ------------------------------------------------------------------ train
    def train(
        self,
        train_exchanges: Sequence[Exchange],
        valid_exchanges: Sequence[Exchange],
        run_config: Optional[RunConfig] = None,
        max_epochs: Optional[int] = None,
    ) -> List[EpochRecord]:
        if not train_exchanges:
            raise ValueError("empty training set")
        max_epochs = max_epochs or self.cfg.max_epochs
        os.makedirs(self.output_dir, exist_ok=True)
        log_path = os.path.join(self.output_dir, "train_log.jsonl")
        records: List[EpochRecord] = []
        best_val = math.inf
        best_epoch = 0
        last_ckpt: Optional[str] = None

        with open(log_path, "w") as log_file:
            for epoch in range(1, max_epochs + 1):
                lr = self._set_ae_lr(epoch)
                stats = self.train_epoch(epoch, train_exchanges)
                if not math.isfinite(stats["l_rec"]):
                    raise TrainingDiverged(
                        "reconstruction loss became non-finite at epoch %d" % epoch,
                        last_checkpoint=last_ckpt,
                    )
                val_record = (
                    self.validation_metrics(valid_exchanges, epoch)
                    if valid_exchanges
                    else {"l_rec": stats["l_rec"]}
                )
                record = EpochRecord(
                    epoch=epoch,
                    l_rec=stats["l_rec"],
                    l_disc=stats["l_disc"],
                    lr_ae=lr,
                    val_metrics=val_record,
                )
                records.append(record)
                log_file.write(record.to_json() + "\n")
                log_file.flush()
                last_ckpt = self.save_checkpoint(epoch, val_record, run_config)
                logger.info(
                    "epoch %d l_rec %.4f l_disc %.4f lr %.4f val %.4f",
                    epoch,
                    stats["l_rec"],
                    stats["l_disc"],
                    lr,
                    val_record["l_rec"],
                )
                if val_record["l_rec"] < best_val:
                    best_val = val_record["l_rec"]
                    best_epoch = epoch
                    with open(os.path.join(self.output_dir, "ckpt", "best.json"), "w") as f:
                        json.dump(
                            {"epoch": best_epoch, "val_l_rec": best_val},
                            f,
                            indent=2,
                            sort_keys=True,
                        )
                        f.write("\n")
                if epoch - best_epoch >= self.cfg.patience:
                    logger.info("early stop at epoch %d (best %d)", epoch, best_epoch)
                    break
        return records


def load_model_for_eval(checkpoint_dir: str) -> DialogModel:
    """Rebuild a model from a checkpoint directory's config and params."""
    with open(os.path.join(checkpoint_dir, "config.json")) as f:
        config_dict = json.load(f)
    vocab_size = int(config_dict.pop("vocab_size"))
    train_keys = {f.name for f in dataclasses.fields(TrainConfig)}
    train_dict = {k: v for k, v in config_dict.items() if k in train_keys}
    cfg = TrainConfig(**train_dict)
    model = DialogModel(vocab_size, cfg)
    state = torch.load(os.path.join(checkpoint_dir, "params"), weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model


__all__ = [
    "Trainer",
    "TrainingDiverged",
    "EpochRecord",
    "ResponseSampler",
    "ae_learning_rate",
    "load_model_for_eval",
]
