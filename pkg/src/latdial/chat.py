"""Interactive terminal chat over a trained model.

Keeps a rolling utterance window as the dialogue context, tracks which side
spoke each utterance, and replies with one sampled response per user turn
(optionally printing every sample with its mixture-component weights).
"""
from __future__ import annotations

from typing import List, Optional, TextIO, Tuple

import torch

from .corpus import EOS_ID, UNK_ID, Exchange, Utterance, Vocabulary, collate_exchanges
from .model import DialogModel

USER = "user"
BOT = "bot"


class ChatSession:
    def __init__(
        self,
        model: DialogModel,
        vocab: Vocabulary,
        seed: int = 1,
        n_samples: int = 1,
        show_all: bool = False,
    ):
        self.model = model
        self.vocab = vocab
        self.n_samples = max(1, n_samples)
        self.show_all = show_all
        self.generator = torch.Generator().manual_seed(seed)
        self.history: List[Utterance] = []

    def reset(self) -> None:
        self.history.clear()

    @property
    def context_window(self) -> int:
        return self.model.cfg.context_window

    def _push(self, tokens: List[int], speaker: str) -> None:
        self.history.append(Utterance(tokens, speaker))

    def _windowed_context(self) -> List[Utterance]:
        return self.history[-self.context_window :]

    def respond(self, text: str) -> Tuple[List[str], Optional[List[List[float]]], bool]:
        """Process one user utterance.

        Returns (responses, per-sample component weights or None,
        all_unknown flag). The first response is also appended to the
        session history as the bot's turn.
        """
        words = text.split()
        if not words:
            return [], None, False
        ids = self.vocab.encode(words[: self.model.cfg.max_utterance_len])
        all_unknown = all(i == UNK_ID for i in ids)
        ids.append(EOS_ID)
        self._push(ids, USER)

        context = self._windowed_context()
        floors = [1 if u.speaker == BOT else 0 for u in context]
        exchange = Exchange(context, Utterance([EOS_ID], BOT), floors)
        batch = collate_exchanges([exchange])
        samples, weights = self.model.sample_responses(
            batch, self.n_samples, self.generator
        )
        decoded = [self.vocab.decode(s) for s in samples[0]]
        texts = [" ".join(words) for words in decoded]

        reply_ids = list(samples[0][0]) + [EOS_ID]
        self._push(reply_ids, BOT)

        weight_rows = None
        if weights is not None:
            weight_rows = [[float(w) for w in row] for row in weights[0]]
        return texts, weight_rows, all_unknown


def run_chat(
    session: ChatSession,
    in_stream: TextIO,
    out_stream: TextIO,
    prompt: str = "> ",
) -> int:
    """Line-oriented read-eval loop; returns the process exit code."""
    out_stream.write("type /quit to exit, /reset to clear the context\n")
    while True:
        out_stream.write(prompt)
        out_stream.flush()
        line = in_stream.readline()
        if not line:  # EOF behaves like /quit
            out_stream.write("\n")
            return 0
        line = line.strip()
        if not line:
            continue
        if line == "/quit":
            return 0
        if line == "/reset":
            session.reset()
            out_stream.write("context cleared\n")
            continue
        responses, weights, all_unknown = session.respond(line)
        if all_unknown:
            out_stream.write("(no known words in that, answering blind)\n")
        if not responses:
            continue
        if session.show_all and len(responses) > 1:
            for i, resp in enumerate(responses):
                tag = ""
                if weights is not None:
                    tag = "  [" + " ".join("%.2f" % w for w in weights[i]) + "]"
                out_stream.write("%2d: %s%s\n" % (i + 1, resp, tag))
        else:
            out_stream.write(responses[0] + "\n")


__all__ = ["ChatSession", "run_chat", "USER", "BOT"]
