"""Independent reference implementations of the text metrics.

These are written against the metric definitions directly, using different
algorithms from the package (memoized recursion instead of a DP table for
LCS, Counter intersection instead of manual clipping for BLEU, separator
insertion instead of run scanning for tokenization).  The equivalence
tests in test_evaluation.py compare the package against these on a frozen
pair corpus — agreement is evidence, shared code would prove nothing.
"""

import math
import re
from collections import Counter
from functools import lru_cache

_CAMEL = re.compile(r"(?<=[a-z])(?=[A-Z])")
_LETTER_DIGIT = re.compile(r"(?<=[A-Za-z])(?=[0-9])")
_DIGIT_LETTER = re.compile(r"(?<=[0-9])(?=[A-Za-z])")
_NON_ALNUM = re.compile(r"[^A-Za-z0-9]+")


def oracle_tokenize(text):
    """Lowercased tokens split on non-alphanumerics, camelCase and digits."""
    s = _CAMEL.sub(" ", text)
    s = _LETTER_DIGIT.sub(" ", s)
    s = _DIGIT_LETTER.sub(" ", s)
    return [w for w in _NON_ALNUM.split(s.lower()) if w]


def oracle_lcs_length(a, b):
    """Longest common subsequence length by memoized recursion."""
    a = tuple(a)
    b = tuple(b)

    @lru_cache(maxsize=None)
    def rec(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + rec(i + 1, j + 1)
        return max(rec(i + 1, j), rec(i, j + 1))

    return rec(0, 0)


def oracle_rouge_l(candidate, reference):
    c = oracle_tokenize(candidate)
    r = oracle_tokenize(reference)
    lcs = oracle_lcs_length(c, r) if c and r else 0
    precision = lcs / len(c) if c else 0.0
    recall = lcs / len(r) if r else 0.0
    if precision + recall == 0:
        return (precision, recall, 0.0)
    return (precision, recall, 2 * precision * recall / (precision + recall))


def oracle_bleu(candidate, reference):
    """Sentence BLEU-4, add-1 smoothed for n>=2, brevity penalty, x100."""
    c = oracle_tokenize(candidate)
    r = oracle_tokenize(reference)
    if not c:
        return 0.0
    log_sum = 0.0
    for n in (1, 2, 3, 4):
        c_ngrams = Counter(tuple(c[i : i + n]) for i in range(len(c) - n + 1))
        r_ngrams = Counter(tuple(r[i : i + n]) for i in range(len(r) - n + 1))
        matched = sum((c_ngrams & r_ngrams).values())
        total = sum(c_ngrams.values())
        if n == 1:
            if matched == 0:
                return 0.0
            p = matched / total
        else:
            p = (matched + 1) / (total + 1)
        log_sum += math.log(p) / 4
    if len(c) < len(r):
        bp = math.exp(1 - len(r) / len(c))
    else:
        bp = 1.0
    return 100.0 * bp * math.exp(log_sum)


def oracle_cosine(u, v):
    dot = sum(x * y for x, y in zip(u, v))
    nu = math.sqrt(sum(x * x for x in u))
    nv = math.sqrt(sum(y * y for y in v))
    return dot / (nu * nv)
