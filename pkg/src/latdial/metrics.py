"""Automatic evaluation: smoothed sentence BLEU, BOW-embedding cosine
similarities, and distinct-n diversity, aggregated over sampled responses.

Per test context the evaluator draws `n_samples` responses and reports:

* BLEU precision = mean sentence BLEU over the samples, recall = max,
  F1 = harmonic mean. Sentence BLEU uses orders 1..3 with brevity penalty
  and smoothing 7 for zero-count orders (inverse-length discounting of
  method 4 composed with the neighborhood averaging of method 5).
* BOW embedding average / extrema / greedy cosine similarity against the
  reference; per context the max over the samples is reported.
* intra-dist: mean distinct-n within each sample; inter-dist: distinct-n
  over the n-gram multiset union of all samples.
"""

import dataclasses
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import ngrams

_SMOOTH_K = 5            # method-4 discounting constant
_SMOOTH5_EXTRA_ORDER = 5  # method-5's fixed top neighbor order


@dataclass
class MetricsReport:
    """One evaluation row; all fields are test-set means."""
    bleu_recall: float
    bleu_precision: float
    bleu_f1: float
    bow_average: float
    bow_extrema: float
    bow_greedy: float
    intra_dist1: float
    intra_dist2: float
    inter_dist1: float
    inter_dist2: float
    avg_length: float

    FIELDS = ("bleu_recall", "bleu_precision", "bleu_f1",
              "bow_average", "bow_extrema", "bow_greedy",
              "intra_dist1", "intra_dist2", "inter_dist1", "inter_dist2",
              "avg_length")

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def to_csv_row(self) -> str:
        return ",".join(f"{getattr(self, name):.6f}" for name in self.FIELDS)

    @classmethod
    def csv_header(cls) -> str:
        return ",".join(cls.FIELDS)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**{name: d[name] for name in cls.FIELDS})


def smoothed_sentence_bleu(hypothesis, reference, max_n: int = 3) -> float:
    """Sentence BLEU over n-grams 1..max_n with brevity penalty and smoothing 7.

    Zero-count orders are first given discounted counts shrinking with both
    the order of smoothing and the hypothesis length (method 4), then every
    order is averaged with its neighbors, seeded above by p1+1 and below by
    the raw fifth-order precision (method 5, which hardcodes that order).
    Returns 0 when the hypothesis shares no unigram with the reference. The
    neighborhood averaging can push a perfect match past 1, so the final
    score is capped at 1.
    """
    hypothesis, reference = list(hypothesis), list(reference)
    if not hypothesis:
        raise ValueError("empty hypothesis")
    if not reference:
        raise ValueError("empty reference")

    n_orders = max(max_n, _SMOOTH5_EXTRA_ORDER)
    stats = ngrams.clipped_ngram_matches(hypothesis, reference, n_orders)
    if stats[0][0] == 0:
        return 0.0
    p_n = [Fraction(m, max(1, t)) for m, t in stats[:max_n]]
    extra_m, extra_t = stats[_SMOOTH5_EXTRA_ORDER - 1]
    extra = Fraction(extra_m, max(1, extra_t))

    hyp_len, ref_len = len(hypothesis), len(reference)
    bp = 1.0 if hyp_len > ref_len else math.exp(1 - ref_len / hyp_len)

    # method 4: discounted counts for zero-match orders; the divisor is the
    # hypothesis n-gram count, not the reduced fraction's denominator
    smoothed = list(p_n)
    discount = 1
    for i, p in enumerate(p_n):
        if p.numerator == 0 and hyp_len > 1:
            count = max(1, stats[i][1])
            smoothed[i] = (1.0 / (2 ** discount * _SMOOTH_K / math.log(hyp_len))) / count
            discount += 1

    # method 5: average each order with its pre-averaging neighbors
    neighbors = smoothed + [extra]
    prev = smoothed[0] + 1
    averaged = []
    for i in range(max_n):
        value = (prev + smoothed[i] + neighbors[i + 1]) / 3
        averaged.append(value)
        prev = value

    w = 1.0 / max_n
    score = bp * math.exp(math.fsum(w * math.log(p) for p in averaged))
    return min(1.0, score)


def bleu_over_samples(samples, reference, max_n: int = 3):
    """(precision, recall, f1) over sampled hypotheses: mean, max, harmonic mean.

    Empty samples score 0 (greedy decoding may emit the terminal symbol
    immediately).
    """
    if not samples:
        raise ValueError("need at least one sample")
    scores = [smoothed_sentence_bleu(s, reference, max_n) if s else 0.0
              for s in samples]
    precision = sum(scores) / len(scores)
    recall = max(scores)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def _extrema_vector(vectors: np.ndarray) -> np.ndarray:
    # per dimension: the max unless the min has strictly larger magnitude
    hi = vectors.max(axis=0)
    lo = vectors.min(axis=0)
    return np.where(np.abs(hi) >= np.abs(lo), hi, lo)


def bow_similarity(hypothesis, reference, embeddings: np.ndarray):
    """(average, extrema, greedy) embedding similarity between two utterances.

    `embeddings` is the (vocab x dim) table; token ids index rows directly.
    An empty utterance (or a zero-norm comparison vector) scores 0.
    """
    if not hypothesis or not reference:
        return 0.0, 0.0, 0.0
    # float64 throughout: the scores are compared against exact oracles
    hyp_vecs = embeddings[np.asarray(hypothesis, dtype=np.int64)].astype(np.float64)
    ref_vecs = embeddings[np.asarray(reference, dtype=np.int64)].astype(np.float64)

    average = _cosine(hyp_vecs.mean(axis=0), ref_vecs.mean(axis=0))
    extrema = _cosine(_extrema_vector(hyp_vecs), _extrema_vector(ref_vecs))

    # symmetric greedy matching on the pairwise cosine matrix
    hyp_norms = np.linalg.norm(hyp_vecs, axis=1)
    ref_norms = np.linalg.norm(ref_vecs, axis=1)
    sims = hyp_vecs @ ref_vecs.T
    denom = np.outer(hyp_norms, ref_norms)
    sims = np.divide(sims, denom, out=np.zeros_like(sims), where=denom > 0)
    greedy = float(sims.max(axis=1).mean() + sims.max(axis=0).mean()) / 2
    # reported range is [0, 1]: floor anti-aligned pairs, absorb float spill
    clip = lambda v: min(1.0, max(0.0, v))  # noqa: E731
    return clip(average), clip(extrema), clip(greedy)


def _distinct_ratio(tokens, n) -> float:
    if len(tokens) < n:
        return 0.0
    unique, total = ngrams.distinct_counts(tokens, n)
    return unique / total


def distinct(samples):
    """(intra_d1, intra_d2, inter_d1, inter_d2) over a set of sampled responses.

    A response shorter than n tokens contributes d_n = 0 and still counts in
    the intra mean. The inter values pool every sample's n-grams.
    """
    if not samples:
        raise ValueError("need at least one sample")
    intra = []
    for n in (1, 2):
        intra.append(sum(_distinct_ratio(s, n) for s in samples) / len(samples))
    inter = []
    for n in (1, 2):
        unique, total = ngrams.inter_distinct_counts(samples, n)
        inter.append(unique / total if total else 0.0)
    return intra[0], intra[1], inter[0], inter[1]


def strip_special(tokens, eos_id: int, pad_id: int = 0):
    """Reference cleanup: keep tokens before the first eos, drop padding."""
    out = []
    for t in tokens:
        if t == eos_id:
            break
        if t != pad_id:
            out.append(t)
    return out


def evaluate(responder, exchanges, embeddings: np.ndarray, eos_id: int,
             n_samples: int = 10, max_contexts: int | None = None) -> MetricsReport:
    """Score a response sampler over test exchanges.

    `responder(exchange, n_samples)` must return n token-id sequences
    (already free of bos/eos). Per-context values are averaged over the test
    set with a fixed reduction order, so identical samplers give identical
    reports.
    """
    if not exchanges:
        raise ValueError("empty test set")
    if max_contexts is not None:
        exchanges = exchanges[:max_contexts]

    sums = np.zeros(len(MetricsReport.FIELDS))
    for ex in exchanges:
        reference = strip_special(ex.response.tokens, eos_id)
        samples = [list(s) for s in responder(ex, n_samples)]

        precision, recall, f1 = bleu_over_samples(samples, reference)
        bows = [bow_similarity(s, reference, embeddings) for s in samples]
        bow_avg = max(b[0] for b in bows)
        bow_ext = max(b[1] for b in bows)
        bow_gre = max(b[2] for b in bows)
        intra1, intra2, inter1, inter2 = distinct(samples)
        mean_len = sum(len(s) for s in samples) / len(samples)

        sums += np.asarray([recall, precision, f1, bow_avg, bow_ext, bow_gre,
                            intra1, intra2, inter1, inter2, mean_len])

    means = sums / len(exchanges)
    return MetricsReport(*[float(v) for v in means])
