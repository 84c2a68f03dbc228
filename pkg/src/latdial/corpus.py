"""Corpus ingestion: dialogues, vocabulary, embeddings, exchange batching.

Two on-disk corpus formats are supported:

* ``delimiter`` -- one dialogue per line, utterances separated by the literal
  token ``__eou__``, speakers alternating A/B.
* ``jsonl`` -- one JSON object per line with fields ``utterances`` (list of
  strings) and ``speakers`` (list of labels, one per utterance).

Tokenization is plain whitespace splitting; the text is used exactly as
stored. A dialogue needs at least two utterances to yield a training pair.
"""

import json
import logging
import pickle
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

logger = logging.getLogger(__name__)

PAD_ID, UNK_ID, BOS_ID, EOS_ID = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<unk>", "<s>", "</s>")

EOU = "__eou__"


class CorpusFormatError(ValueError):
    """A corpus file line that cannot be parsed; carries the line number."""


@dataclass
class Dialogue:
    """A raw multi-turn dialogue: whitespace tokens plus a speaker per turn."""
    utterances: list[list[str]]
    speakers: list[str]

    def __len__(self):
        return len(self.utterances)


@dataclass
class Utterance:
    """One turn, encoded to vocabulary ids (eos-terminated)."""
    tokens: list[int]
    speaker: str


@dataclass
class Exchange:
    """A (context, response) training pair with conversation-floor flags.

    ``floors[i]`` is 1 iff ``context[i]`` was spoken by the responder.
    """
    context: list[Utterance]
    response: Utterance
    floors: list[int]


@dataclass
class ExchangeBatch:
    """Padded tensors for one mini-batch of exchanges.

    Shapes: context (B, C, T); context_utt_lens (B, C); context_lens (B,);
    floors (B, C); response (B, R); response_lens (B,). Padding id occupies
    every position beyond a sequence's true length.
    """
    context: torch.Tensor
    context_utt_lens: torch.Tensor
    context_lens: torch.Tensor
    floors: torch.Tensor
    response: torch.Tensor
    response_lens: torch.Tensor

    @property
    def size(self) -> int:
        return self.context.shape[0]


def _parse_delimiter_line(line: str) -> Dialogue:
    parts = [seg.split() for seg in line.split(EOU)]
    utterances = [p for p in parts if p]  # trailing/duplicate separators
    speakers = ["A" if i % 2 == 0 else "B" for i in range(len(utterances))]
    return Dialogue(utterances, speakers)


def _parse_jsonl_line(line: str, lineno: int) -> Dialogue:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise CorpusFormatError(f"line {lineno}: invalid JSON: {e}") from e
    if not isinstance(obj, dict) or "utterances" not in obj or "speakers" not in obj:
        raise CorpusFormatError(f"line {lineno}: expected object with 'utterances' and 'speakers'")
    utts = obj["utterances"]
    speakers = obj["speakers"]
    if len(utts) != len(speakers):
        raise CorpusFormatError(
            f"line {lineno}: {len(utts)} utterances but {len(speakers)} speakers")
    tokenized = [u.split() for u in utts]
    if any(not t for t in tokenized):
        raise CorpusFormatError(f"line {lineno}: empty utterance")
    return Dialogue(tokenized, [str(s) for s in speakers])


def load_corpus(path, corpus_format: str = "delimiter") -> list[Dialogue]:
    """Read dialogues from `path`; dialogues with < 2 utterances are dropped."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    if corpus_format not in ("delimiter", "jsonl"):
        raise ValueError(f"unknown corpus format {corpus_format!r}")

    dialogues = []
    n_dropped = 0
    with path.open(encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if corpus_format == "delimiter":
                dlg = _parse_delimiter_line(line)
            else:
                dlg = _parse_jsonl_line(line, lineno)
            if len(dlg) < 2:
                n_dropped += 1
                logger.warning("%s line %d: dialogue with %d utterance(s) dropped",
                               path.name, lineno, len(dlg))
                continue
            dialogues.append(dlg)
    if n_dropped:
        logger.warning("%s: dropped %d dialogue(s) with fewer than 2 utterances",
                       path.name, n_dropped)
    return dialogues


class Vocabulary:
    """Token/id bijection with fixed reserved ids pad=0, unk=1, bos=2, eos=3."""

    def __init__(self, tokens: list[str]):
        self.id2token = list(RESERVED_TOKENS) + list(tokens)
        self.token2id = {t: i for i, t in enumerate(self.id2token)}
        if len(self.token2id) != len(self.id2token):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.id2token)

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.token2id.get(t, UNK_ID) for t in tokens]

    def decode(self, ids: list[int]) -> list[str]:
        return [self.id2token[i] for i in ids]

    def save(self, path):
        Path(path).write_text("\n".join(self.id2token) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if tuple(lines[:4]) != RESERVED_TOKENS:
            raise ValueError(f"{path} does not start with the reserved tokens")
        return cls(lines[4:])


def build_vocabulary(dialogues: list[Dialogue], limit: int) -> Vocabulary:
    """Keep the `limit` most frequent tokens; ties break by first occurrence."""
    if limit < 1:
        raise ValueError("vocabulary limit must be >= 1")
    counts: dict[str, int] = {}
    first_seen: dict[str, int] = {}
    order = 0
    for dlg in dialogues:
        for utt in dlg.utterances:
            for tok in utt:
                if tok in counts:
                    counts[tok] += 1
                else:
                    counts[tok] = 1
                    first_seen[tok] = order
                    order += 1
    candidates = [t for t in counts if t not in RESERVED_TOKENS]
    candidates.sort(key=lambda t: (-counts[t], first_seen[t]))
    return Vocabulary(candidates[:limit])


class EmbeddingTable:
    """Per-token real vectors: decoder/encoder input layer and BOW metrics."""

    def __init__(self, matrix: np.ndarray, coverage: float):
        self.matrix = matrix
        self.coverage = coverage  # fraction of vocab rows found in the file

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return self.matrix.shape[0]

    def save(self, path):
        np.save(path, self.matrix)


def load_embeddings(path, vocab: Vocabulary, dim: int, seed: int = 0) -> EmbeddingTable:
    """Copy pretrained rows for covered tokens; init the rest from U[-0.02, 0.02].

    `path` may be None/empty, in which case every row is randomly initialized.
    Raises ValueError if a file row's dimension differs from `dim`.
    """
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-0.02, 0.02, size=(len(vocab), dim))
    covered = 0
    if path:
        wanted = vocab.token2id
        seen = set()
        with Path(path).open(encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                parts = line.rstrip("\n").split(" ")
                if len(parts) < 2:
                    continue
                token = parts[0]
                idx = wanted.get(token)
                if idx is None or idx in seen:
                    continue
                values = parts[1:]
                if len(values) != dim:
                    raise ValueError(
                        f"{path} line {lineno}: vector has dim {len(values)}, expected {dim}")
                matrix[idx] = np.asarray([float(v) for v in values])
                seen.add(idx)
                covered += 1
    coverage = covered / len(vocab)
    if path:
        logger.info("embeddings: %d/%d vocabulary rows covered (%.1f%%)",
                    covered, len(vocab), 100 * coverage)
    return EmbeddingTable(matrix.astype(np.float32), coverage)


def _encode_utterance(tokens: list[str], vocab: Vocabulary, max_len: int) -> list[int]:
    # head-keeping truncation, then the guaranteed terminal symbol
    ids = vocab.encode(tokens[:max_len])
    ids.append(EOS_ID)
    return ids


def make_exchanges(dialogues: list[Dialogue], vocab: Vocabulary,
                   context_window: int, max_utterance_len: int) -> list[Exchange]:
    """Slide over each dialogue: response u_t for t=2..k, context = preceding
    min(t-1, context_window) utterances. Every utterance is eos-terminated."""
    if context_window < 1:
        raise ValueError("context_window must be >= 1")
    exchanges = []
    for dlg in dialogues:
        encoded = [Utterance(_encode_utterance(toks, vocab, max_utterance_len), spk)
                   for toks, spk in zip(dlg.utterances, dlg.speakers)]
        for t in range(1, len(encoded)):
            lo = max(0, t - context_window)
            context = encoded[lo:t]
            response = encoded[t]
            floors = [1 if u.speaker == response.speaker else 0 for u in context]
            exchanges.append(Exchange(context, response, floors))
    return exchanges


def collate_exchanges(exchanges: list[Exchange]) -> ExchangeBatch:
    """Pad a list of exchanges into one ExchangeBatch."""
    b = len(exchanges)
    max_ctx = max(len(e.context) for e in exchanges)
    max_utt = max(len(u.tokens) for e in exchanges for u in e.context)
    max_resp = max(len(e.response.tokens) for e in exchanges)

    context = torch.full((b, max_ctx, max_utt), PAD_ID, dtype=torch.long)
    context_utt_lens = torch.zeros((b, max_ctx), dtype=torch.long)
    context_lens = torch.zeros(b, dtype=torch.long)
    floors = torch.zeros((b, max_ctx), dtype=torch.float)
    response = torch.full((b, max_resp), PAD_ID, dtype=torch.long)
    response_lens = torch.zeros(b, dtype=torch.long)

    for i, ex in enumerate(exchanges):
        context_lens[i] = len(ex.context)
        for j, utt in enumerate(ex.context):
            context[i, j, :len(utt.tokens)] = torch.tensor(utt.tokens, dtype=torch.long)
            context_utt_lens[i, j] = len(utt.tokens)
        floors[i, :len(ex.floors)] = torch.tensor(ex.floors, dtype=torch.float)
        response[i, :len(ex.response.tokens)] = torch.tensor(ex.response.tokens, dtype=torch.long)
        response_lens[i] = len(ex.response.tokens)
    return ExchangeBatch(context, context_utt_lens, context_lens, floors,
                         response, response_lens)


def batch_exchanges(exchanges: list[Exchange], batch_size: int, shuffle_seed=None):
    """Yield ExchangeBatch objects; deterministic given `shuffle_seed`.

    The final partial batch is always emitted. With shuffle_seed=None the
    corpus order is kept.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = list(range(len(exchanges)))
    if shuffle_seed is not None:
        random.Random(shuffle_seed).shuffle(order)
    for start in range(0, len(order), batch_size):
        chunk = [exchanges[i] for i in order[start:start + batch_size]]
        if chunk:
            yield collate_exchanges(chunk)


def save_exchanges(exchanges: list[Exchange], path):
    """Byte-stable binary cache (identical inputs give identical files)."""
    payload = [
        (
            [(u.tokens, u.speaker) for u in ex.context],
            (ex.response.tokens, ex.response.speaker),
            ex.floors,
        )
        for ex in exchanges
    ]
    with Path(path).open("wb") as f:
        pickle.dump(payload, f, protocol=4)


def load_exchanges(path) -> list[Exchange]:
    with Path(path).open("rb") as f:
        payload = pickle.load(f)
    return [
        Exchange(
            [Utterance(toks, spk) for toks, spk in ctx],
            Utterance(resp[0], resp[1]),
            floors,
        )
        for ctx, resp, floors in payload
    ]
