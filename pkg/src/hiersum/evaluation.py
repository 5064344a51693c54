"""Reference-based metrics, LLM-as-judge scoring, and the coverage audit.

ROUGE-L, BLEU and the coverage audit share one tokenizer (lowercase,
split on non-alphanumeric runs, camelCase and letter/digit boundaries) so
that a name like ``fillProductPrices`` and the phrase "fill product
prices" compare equal everywhere.  Judge scores and semantic similarity
go through a backend; everything else is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import prompts
from .backend import Backend, BackendError, ChatRequest
from .segmenter import SegmentKind

JUDGE_CRITERIA = tuple(prompts.JUDGE_CRITERIA)


@dataclass(frozen=True)
class MetricScores:
    rouge_l_precision: float
    rouge_l_recall: float
    rouge_l_f1: float
    bleu: float
    semantic_similarity: float

    def as_dict(self) -> Dict[str, float]:
        return {
            "rouge_l_precision": self.rouge_l_precision,
            "rouge_l_recall": self.rouge_l_recall,
            "rouge_l_f1": self.rouge_l_f1,
            "bleu": self.bleu,
            "semantic_similarity": self.semantic_similarity,
        }


@dataclass(frozen=True)
class JudgeScores:
    """Per-criterion scores in [0,1]; ``None`` marks a criterion whose
    samples all failed to parse (distinct from scoring zero)."""

    completeness: Optional[float]
    conciseness: Optional[float]
    correctness: Optional[float]
    cohesiveness: Optional[float]
    domain_specificity: Optional[float]
    samples_used: int
    warnings: int

    def as_dict(self) -> Dict[str, Optional[float]]:
        return {name: getattr(self, name) for name in JUDGE_CRITERIA}


@dataclass(frozen=True)
class CoverageEntry:
    name: str
    kind: str
    covered: bool


@dataclass
class CoverageReport:
    files: Dict[str, List[CoverageEntry]] = field(default_factory=dict)
    function_coverage: float = 1.0
    variable_coverage: float = 1.0


# --- tokenization ----------------------------------------------------------


def _split_run(run: str) -> List[str]:
    """Split one alphanumeric run at lower->upper and letter<->digit seams."""
    parts: List[str] = []
    start = 0
    for i in range(1, len(run)):
        prev, cur = run[i - 1], run[i]
        boundary = (
            (prev.islower() and cur.isupper())
            or (prev.isalpha() and cur.isdigit())
            or (prev.isdigit() and cur.isalpha())
        )
        if boundary:
            parts.append(run[start:i])
            start = i
    parts.append(run[start:])
    return parts


def tokenize(text: str) -> List[str]:
    """The shared metric tokenizer: ``fillProductPrices`` -> fill, product, prices."""
    tokens: List[str] = []
    run_start = None
    for i, ch in enumerate(text + "\x00"):
        alnum = ("a" <= ch <= "z") or ("A" <= ch <= "Z") or ("0" <= ch <= "9")
        if alnum:
            if run_start is None:
                run_start = i
        elif run_start is not None:
            tokens.extend(p.lower() for p in _split_run(text[run_start:i]))
            run_start = None
    return tokens


# --- ROUGE-L ---------------------------------------------------------------


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    if len(b) > len(a):
        a, b = b, a
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l(candidate: str, reference: str) -> Tuple[float, float, float]:
    """(precision, recall, f1) of the longest common token subsequence."""
    c = tokenize(candidate)
    r = tokenize(reference)
    lcs = _lcs_length(c, r)
    precision = lcs / len(c) if c else 0.0
    recall = lcs / len(r) if r else 0.0
    if precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return (precision, recall, f1)


# --- BLEU ------------------------------------------------------------------


def _ngram_counts(tokens: List[str], n: int) -> Dict[Tuple[str, ...], int]:
    counts: Dict[Tuple[str, ...], int] = {}
    for i in range(len(tokens) - n + 1):
        gram = tuple(tokens[i : i + n])
        counts[gram] = counts.get(gram, 0) + 1
    return counts


def bleu(candidate: str, reference: str) -> float:
    """Sentence-level BLEU-4 on a 0–100 scale.

    Modified n-gram precisions are add-1 smoothed (numerator and
    denominator) for n >= 2, so identical sentences score exactly 100 and
    short candidates are not annihilated by missing higher-order n-grams.
    """
    c = tokenize(candidate)
    r = tokenize(reference)
    if not c:
        return 0.0
    log_precision_sum = 0.0
    for n in range(1, 5):
        candidate_counts = _ngram_counts(c, n)
        reference_counts = _ngram_counts(r, n)
        matched = 0
        total = 0
        for gram, count in candidate_counts.items():
            total += count
            matched += min(count, reference_counts.get(gram, 0))
        if n == 1:
            if matched == 0:
                return 0.0
            precision = matched / total
        else:
            precision = (matched + 1) / (total + 1)
        log_precision_sum += math.log(precision)
    brevity = 1.0 if len(c) >= len(r) else math.exp(1.0 - len(r) / len(c))
    return 100.0 * brevity * math.exp(log_precision_sum / 4.0)


# --- semantic similarity ---------------------------------------------------


def _cosine(u: Sequence[float], v: Sequence[float]) -> float:
    norm_u = math.sqrt(sum(x * x for x in u))
    norm_v = math.sqrt(sum(y * y for y in v))
    if norm_u == 0.0 or norm_v == 0.0:
        raise ValueError("cannot take cosine of a zero-norm embedding")
    value = sum(x * y for x, y in zip(u, v)) / (norm_u * norm_v)
    return max(-1.0, min(1.0, value))  # rounding can stray past the ends


def semantic_similarity(a: str, b: str, backend: Backend) -> float:
    """Cosine similarity of the two texts' sentence embeddings."""
    if not a or not b:
        raise ValueError("semantic similarity requires two non-empty texts")
    vectors = backend.embed([a, b])
    return _cosine(vectors[0], vectors[1])


# --- pair scoring ----------------------------------------------------------


def score_pair(candidate: str, reference: str, backend: Optional[Backend] = None) -> MetricScores:
    """All reference-based metrics for one candidate/reference pair.

    Semantic similarity needs a backend for embeddings; without one — or
    when either side is empty — it is reported as 0.0.
    """
    precision, recall, f1 = rouge_l(candidate, reference)
    similarity = 0.0
    if backend is not None and candidate and reference:
        similarity = semantic_similarity(candidate, reference, backend)
    return MetricScores(
        rouge_l_precision=precision,
        rouge_l_recall=recall,
        rouge_l_f1=f1,
        bleu=bleu(candidate, reference),
        semantic_similarity=similarity,
    )


def evaluate_pairs(
    pairs: Iterable[dict], backend: Optional[Backend] = None
) -> Dict[str, MetricScores]:
    """Score a list of ``{"id", "candidate", "reference"}`` records."""
    results: Dict[str, MetricScores] = {}
    for pair in pairs:
        try:
            pair_id = pair["id"]
            candidate = pair["candidate"]
            reference = pair["reference"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed pair record {pair!r}: {exc}") from None
        if pair_id in results:
            raise ValueError(f"duplicate pair id {pair_id!r}")
        results[pair_id] = score_pair(candidate, reference, backend)
    return results


# --- LLM-as-judge ----------------------------------------------------------


def _parse_score(reply: str) -> Optional[int]:
    """The integer from the last ``SCORE: <n>`` line, if any and in 1..5."""
    for line in reversed(reply.splitlines()):
        stripped = line.strip()
        if stripped.upper().startswith("SCORE:"):
            digits = stripped.split(":", 1)[1].strip()
            if digits.isdigit() and 1 <= int(digits) <= 5:
                return int(digits)
            return None
    return None


def judge(summary: str, source: str, backend: Backend, samples: int = 1) -> JudgeScores:
    """Score a summary on the five criteria, ``samples`` completions each.

    Unparseable replies are retried once, then dropped; a criterion with
    no usable sample is reported as ``None`` and counted as a warning.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    scores: Dict[str, Optional[float]] = {}
    used = 0
    warnings = 0
    for criterion in JUDGE_CRITERIA:
        prompt = prompts.render_judge_prompt(summary, source, criterion)
        parsed: List[int] = []
        for _ in range(samples):
            value: Optional[int] = None
            for _attempt in range(2):
                try:
                    reply = backend.complete(
                        ChatRequest(
                            system_text=prompt.system_text,
                            user_text=prompt.user_text,
                            max_output_tokens=256,
                        )
                    )
                except BackendError:
                    continue
                value = _parse_score(reply.text)
                if value is not None:
                    break
            if value is None:
                warnings += 1
            else:
                parsed.append(value)
        if parsed:
            scores[criterion] = sum(parsed) / len(parsed) / 5.0
            used += len(parsed)
        else:
            scores[criterion] = None
    return JudgeScores(samples_used=used, warnings=warnings, **scores)


# --- coverage audit --------------------------------------------------------

AUDITED_KINDS = (SegmentKind.FUNCTION, SegmentKind.VARIABLE)


def _contains_subsequence(haystack: List[str], needle: List[str]) -> bool:
    if not needle:
        return False
    limit = len(haystack) - len(needle)
    first = needle[0]
    for i in range(limit + 1):
        if haystack[i] == first and haystack[i : i + len(needle)] == needle:
            return True
    return False


def name_covered(name: str, summary_tokens: List[str]) -> bool:
    """Whether a segment name is mentioned, whole or as a split phrase.

    ``fillProductPrices`` counts as covered if the summary contains the
    identifier itself (any casing) or the contiguous phrase "fill product
    prices"; "retrieves product prices" does not cover it.
    """
    name_tokens = tokenize(name)
    if not name_tokens:
        return False
    if _contains_subsequence(summary_tokens, name_tokens):
        return True
    return "".join(name_tokens) in summary_tokens


def coverage_audit(file_summary_text: str, segments: Sequence) -> List[CoverageEntry]:
    """Audit which function/variable segments a file summary mentions."""
    summary_tokens = tokenize(file_summary_text)
    entries = []
    for segment in segments:
        kind = SegmentKind(segment.kind)
        if kind not in AUDITED_KINDS:
            continue
        entries.append(
            CoverageEntry(
                name=segment.name,
                kind=kind.value,
                covered=name_covered(segment.name, summary_tokens),
            )
        )
    return entries


def build_coverage_report(per_file: Dict[str, List[CoverageEntry]]) -> CoverageReport:
    """Aggregate per-file audit entries; empty categories count as full."""
    report = CoverageReport(files=dict(sorted(per_file.items())))
    for kind, attr in (("function", "function_coverage"), ("variable", "variable_coverage")):
        entries = [e for entries in report.files.values() for e in entries if e.kind == kind]
        if entries:
            setattr(report, attr, sum(e.covered for e in entries) / len(entries))
    return report
