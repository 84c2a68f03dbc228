"""Pure-Python n-gram counting kernels (fallback for the compiled module)."""

from collections import Counter


def _ngrams(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def distinct_counts(tokens, n):
    """(unique n-grams, total n-grams) of one token sequence."""
    grams = _ngrams(tokens, n)
    return len(set(grams)), len(grams)


def inter_distinct_counts(seqs, n):
    """(unique, total) over the multiset union of all sequences' n-grams."""
    unique = set()
    total = 0
    for tokens in seqs:
        grams = _ngrams(tokens, n)
        unique.update(grams)
        total += len(grams)
    return len(unique), total


def clipped_ngram_matches_range(hyp, ref, lo, hi):
    """Per order n=lo..hi: (reference-clipped matched count, hypothesis count)."""
    out = []
    for n in range(lo, hi + 1):
        hyp_counts = Counter(_ngrams(hyp, n))
        ref_counts = Counter(_ngrams(ref, n))
        matches = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        out.append((matches, sum(hyp_counts.values())))
    return out


def clipped_ngram_matches(hyp, ref, max_n):
    """Per order n=1..max_n: (reference-clipped matched count, hypothesis count)."""
    return clipped_ngram_matches_range(hyp, ref, 1, max_n)
