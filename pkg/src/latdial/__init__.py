"""Latent-matching dialogue response generator with multimodal priors."""

from .config import ConfigError, RunConfig, TrainConfig, load_config
from .corpus import (
    BOS_ID,
    EOS_ID,
    PAD_ID,
    UNK_ID,
    Exchange,
    ExchangeBatch,
    Utterance,
    Vocabulary,
)
from .metrics import MetricsReport, evaluate, smoothed_sentence_bleu
from .model import DialogModel
from .trainer import Trainer, TrainingDiverged

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "RunConfig",
    "TrainConfig",
    "load_config",
    "PAD_ID",
    "UNK_ID",
    "BOS_ID",
    "EOS_ID",
    "Utterance",
    "Exchange",
    "ExchangeBatch",
    "Vocabulary",
    "MetricsReport",
    "evaluate",
    "smoothed_sentence_bleu",
    "DialogModel",
    "Trainer",
    "TrainingDiverged",
    "__version__",
]
