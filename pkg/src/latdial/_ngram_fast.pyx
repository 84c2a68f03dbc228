# distutils: language = c++
"""Compiled n-gram counting kernels.

n-grams up to order 4 are packed into 64-bit keys, 16 bits per token id, and
counted with C++ hash maps. Callers guarantee ids < 2**16 (the dispatcher in
`ngrams` checks and routes larger ids to the pure backend).
"""

from cython.operator cimport dereference, preincrement
from libcpp.unordered_map cimport unordered_map
from libcpp.unordered_set cimport unordered_set
from libc.stdint cimport uint64_t, int64_t


cdef inline uint64_t _pack(list tokens, Py_ssize_t start, int n):
    cdef uint64_t key = 0
    cdef int j
    for j in range(n):
        key = (key << 16) | (<uint64_t> tokens[start + j] & 0xFFFF)
    return key


def distinct_counts(list tokens, int n):
    """(unique n-grams, total n-grams) of one token sequence."""
    cdef unordered_set[uint64_t] seen
    cdef Py_ssize_t i, total = len(tokens) - n + 1
    if total < 0:
        total = 0
    for i in range(total):
        seen.insert(_pack(tokens, i, n))
    return seen.size(), total


def inter_distinct_counts(list seqs, int n):
    """(unique, total) over the multiset union of all sequences' n-grams."""
    cdef unordered_set[uint64_t] seen
    cdef Py_ssize_t i, count, total = 0
    cdef list tokens
    for tokens in seqs:
        count = len(tokens) - n + 1
        if count < 0:
            count = 0
        for i in range(count):
            seen.insert(_pack(tokens, i, n))
        total += count
    return seen.size(), total


def clipped_ngram_matches(list hyp, list ref, int max_n):
    """Per order n=1..max_n: (reference-clipped matched count, hypothesis count)."""
    cdef unordered_map[uint64_t, int64_t] hyp_counts, ref_counts
    cdef unordered_map[uint64_t, int64_t].iterator it, jt
    cdef Py_ssize_t i, hyp_total, ref_total
    cdef int64_t matches, c
    cdef int n
    out = []
    for n in range(1, max_n + 1):
        hyp_counts.clear()
        ref_counts.clear()
        hyp_total = len(hyp) - n + 1
        if hyp_total < 0:
            hyp_total = 0
        ref_total = len(ref) - n + 1
        if ref_total < 0:
            ref_total = 0
        for i in range(hyp_total):
            hyp_counts[_pack(hyp, i, n)] += 1
        for i in range(ref_total):
            ref_counts[_pack(ref, i, n)] += 1
        matches = 0
        it = hyp_counts.begin()
        while it != hyp_counts.end():
            jt = ref_counts.find(dereference(it).first)
            if jt != ref_counts.end():
                c = dereference(jt).second
                if dereference(it).second < c:
                    c = dereference(it).second
                matches += c
            preincrement(it)
        out.append((matches, hyp_total))
    return out
