"""Run configuration: one flat key-value document driving every subcommand."""

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    """Raised when a config file or field fails validation."""


@dataclass
class TrainConfig:
    """Model and optimization hyper-parameters.

    Defaults: SGD autoencoder phase with a stepped learning-rate schedule,
    RMSprop adversarial phase at fixed rates, five critic updates per
    generator update, and a three-component mixture prior sampled at
    Gumbel-Softmax temperature 0.1.
    """

    # architecture
    embed_dim: int = 200
    utt_hidden: int = 300          # per direction; utterance vectors are 2x this
    ctx_hidden: int = 300
    dec_hidden: int = 300
    latent_dim: int = 200
    noise_dim: int = 200
    prior_hidden: int = 200        # feed-forward trunk of the prior / recognition nets
    gen_hidden: int = 200          # prior- and posterior-side latent generators
    critic_hidden: int = 400
    vocab_limit: int = 10000
    context_window: int = 10
    max_utterance_len: int = 40

    # prior
    prior: str = "mixture"         # "gaussian" | "mixture"
    mixture_k: int = 3
    tau: float = 0.1
    point_mass_latent: bool = False  # ablation: noise collapses to its mean

    # decoder
    feed_latent_per_step: bool = False  # also concat [z; c] to every decoder input

    # optimization
    batch_size: int = 32
    ae_lr: float = 1.0
    ae_clip: float = 1.0
    lr_decay: float = 0.4
    lr_decay_every: int = 10
    gan_lr_generator: float = 5e-5
    gan_lr_critic: float = 1e-5
    n_critic: int = 5
    lambda_gp: float = 10.0
    max_epochs: int = 100
    patience: int = 10

    # evaluation
    n_samples: int = 10
    val_max_contexts: int = 64

    seed: int = 1

    def validate(self):
        positive = [
            "embed_dim", "utt_hidden", "ctx_hidden", "dec_hidden", "latent_dim",
            "noise_dim", "prior_hidden", "gen_hidden", "critic_hidden",
            "vocab_limit", "context_window", "max_utterance_len", "mixture_k",
            "batch_size", "ae_lr", "ae_clip", "lr_decay_every",
            "gan_lr_generator", "gan_lr_critic", "n_critic", "max_epochs",
            "patience", "n_samples", "val_max_contexts",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must be in (0, 1], got {self.tau!r}")
        if not 0.0 < self.lr_decay < 1.0:
            raise ConfigError(f"lr_decay must be in (0, 1), got {self.lr_decay!r}")
        if self.lambda_gp < 0:
            raise ConfigError(f"lambda_gp must be non-negative, got {self.lambda_gp!r}")
        if self.prior not in ("gaussian", "mixture"):
            raise ConfigError(f"prior must be 'gaussian' or 'mixture', got {self.prior!r}")
        # n-gram ids are packed into 16 bits per token by the compiled kernels
        if self.vocab_limit > 65000:
            raise ConfigError(f"vocab_limit must be <= 65000, got {self.vocab_limit}")


@dataclass
class RunConfig:
    """Everything a run needs: corpus locations, output root, hyper-parameters."""

    train_path: str = ""
    valid_path: str = ""
    test_path: str = ""
    corpus_format: str = "delimiter"   # "delimiter" | "jsonl"
    embedding_path: str = ""           # optional pretrained word vectors
    output_dir: str = "runs/default"
    train: TrainConfig = field(default_factory=TrainConfig)

    @property
    def seed(self) -> int:
        return self.train.seed

    def validate(self, require_paths: bool = True):
        self.train.validate()
        if self.corpus_format not in ("delimiter", "jsonl"):
            raise ConfigError(f"unknown corpus_format {self.corpus_format!r}")
        if require_paths:
            for name in ("train_path", "valid_path", "test_path"):
                p = getattr(self, name)
                if not p:
                    raise ConfigError(f"{name} is required")
                if not Path(p).exists():
                    raise ConfigError(f"{name} does not exist: {p}")
            if self.embedding_path and not Path(self.embedding_path).exists():
                raise ConfigError(f"embedding_path does not exist: {self.embedding_path}")

    def resolved_output_dir(self) -> Path:
        """Output directory, honoring the LATDIAL_OUTPUT_ROOT override."""
        root = os.environ.get("LATDIAL_OUTPUT_ROOT")
        out = Path(self.output_dir)
        if root and not out.is_absolute():
            out = Path(root) / out
        return out

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        train = d.pop("train")
        d.update(train)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw)
        run_fields = {f.name for f in dataclasses.fields(cls)} - {"train"}
        train_fields = {f.name for f in dataclasses.fields(TrainConfig)}
        run_kwargs, train_kwargs = {}, {}
        for key, value in raw.items():
            if key in run_fields:
                run_kwargs[key] = value
            elif key in train_fields:
                train_kwargs[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        return cls(train=TrainConfig(**train_kwargs), **run_kwargs)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Load a flat JSON config file; `overrides` (CLI flags) beat file values."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(raw)
