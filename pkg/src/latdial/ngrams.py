"""n-gram kernel dispatch: compiled extension when available, else pure Python.

Set LATDIAL_PURE_NGRAMS=1 to force the pure backend (used by the parity tests
and the benchmark). The compiled kernels pack token ids into 16 bits each, so
sequences containing an id >= 2**16 are routed to the pure backend per call.
"""

import logging
import os

from . import _ngram_pure

logger = logging.getLogger(__name__)

_FAST_LIMIT = 1 << 16

if os.environ.get("LATDIAL_PURE_NGRAMS"):
    _fast = None
else:
    try:
        from . import _ngram_fast as _fast
    except ImportError:
        _fast = None
        logger.debug("compiled n-gram kernels unavailable; using pure Python")


def backend_name() -> str:
    return "fast" if _fast is not None else "pure"


def _fits_fast(tokens) -> bool:
    return not tokens or max(tokens) < _FAST_LIMIT


def distinct_counts(tokens, n):
    tokens = list(tokens)
    if _fast is not None and _fits_fast(tokens):
        return _fast.distinct_counts(tokens, n)
    return _ngram_pure.distinct_counts(tokens, n)


def inter_distinct_counts(seqs, n):
    seqs = [list(s) for s in seqs]
    if _fast is not None and all(_fits_fast(s) for s in seqs):
        return _fast.inter_distinct_counts(seqs, n)
    return _ngram_pure.inter_distinct_counts(seqs, n)


def clipped_ngram_matches(hyp, ref, max_n):
    hyp, ref = list(hyp), list(ref)
    if _fast is not None and _fits_fast(hyp) and _fits_fast(ref):
        # 16-bit packing caps the compiled kernel at order 4
        head = _fast.clipped_ngram_matches(hyp, ref, min(max_n, 4))
        if max_n <= 4:
            return head
        return head + _ngram_pure.clipped_ngram_matches_range(hyp, ref, 5, max_n)
    return _ngram_pure.clipped_ngram_matches(hyp, ref, max_n)
