"""Shared builders for the test suite: tiny configs, corpora, and models."""
import random
from pathlib import Path

import pytest
import torch

from latdial.config import TrainConfig
from latdial.corpus import (
    Dialogue,
    build_vocabulary,
    collate_exchanges,
    make_exchanges,
)
from latdial.model import DialogModel

torch.manual_seed(0)  # library calls that touch the global stream stay stable

# verdict lines recorded by the acceptance tests, replayed after capture ends
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance checklist")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def small_cfg(**overrides) -> TrainConfig:
    base = dict(
        embed_dim=16,
        utt_hidden=12,
        ctx_hidden=10,
        dec_hidden=14,
        latent_dim=8,
        noise_dim=8,
        prior_hidden=9,
        gen_hidden=9,
        critic_hidden=11,
        vocab_limit=200,
        context_window=10,
        max_utterance_len=40,
        prior="mixture",
        mixture_k=3,
        batch_size=4,
        max_epochs=2,
        patience=10,
        n_samples=3,
        val_max_contexts=8,
        seed=7,
    )
    base.update(overrides)
    return TrainConfig(**base)


def sample_dialogues():
    return [
        Dialogue(
            [["hi", "there"], ["how", "are", "you"], ["fine", "thanks"],
             ["good", "to", "hear"]],
            ["A", "B", "A", "B"],
        ),
        Dialogue(
            [["what", "time", "is", "it"], ["three", "pm"], ["thanks", "a", "lot"]],
            ["A", "B", "A"],
        ),
        Dialogue([["see", "you", "later"], ["bye", "now"]], ["A", "B"]),
    ]


def build_small_setup(**config_overrides):
    """(model, vocab, exchanges, batch, cfg) on the sample dialogues."""
    cfg = small_cfg(**config_overrides)
    dialogues = sample_dialogues()
    vocab = build_vocabulary(dialogues, cfg.vocab_limit)
    exchanges = make_exchanges(dialogues, vocab, cfg.context_window, cfg.max_utterance_len)
    model = DialogModel(len(vocab), cfg)
    batch = collate_exchanges(exchanges)
    return model, vocab, exchanges, batch, cfg


# ---------------------------------------------------------------- toy corpora
TEMPLATES = (
    ("red", "crimson", "scarlet"),
    ("blue", "azure", "navy"),
    ("green", "olive", "jade"),
)
TEMPLATE_VOCAB = tuple(word for tpl in TEMPLATES for word in tpl)


def template_corpus_lines(n_contexts=10, reps=1):
    """Delimiter-format corpus where every context admits responses from
    three disjoint word templates: (train_lines, test_lines).

    Each template contributes its three cyclic rotations, so for every
    context the first response slot is an exact nine-way tie and the
    response distribution stays genuinely multimodal."""
    train = []
    for c in range(n_contexts):
        context = f"topic ctx{c}"
        for template in TEMPLATES:
            for shift in range(len(template)):
                words = [template[(shift + j) % len(template)]
                         for j in range(len(template))]
                for _ in range(reps):
                    train.append(f"{context} __eou__ {' '.join(words)}")
    test = []
    for c in range(n_contexts):
        template = TEMPLATES[c % len(TEMPLATES)]
        test.append(f"topic ctx{c} __eou__ {' '.join(template)}")
    shuffler = random.Random(13)
    shuffler.shuffle(train)
    return train, test


def classify_template(tokens, vocab):
    """Index of the template the decoded response belongs to, or None."""
    words = vocab.decode(tokens)
    votes = [sum(w in tpl for w in words) for tpl in TEMPLATES]
    best = max(votes)
    if best == 0:
        return None
    return votes.index(best)


def overfit_corpus_lines(n=20):
    """n one-exchange dialogues with disjoint contexts and responses."""
    lines = []
    for i in range(n):
        context = f"cue{i} speaks now"
        response = f"mark{i}a mark{i}b mark{i}c"
        lines.append(f"{context} __eou__ {response}")
    return lines


def write_lines(path, lines):
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


@pytest.fixture
def toy_data_dir():
    return Path(__file__).resolve().parent.parent / "data" / "toy"
