"""Response scoring: the LLM-judge correctness protocol, exact match and its
refined variant, next-step-navigation accuracy, and a Pearson utility for
re-running metric/human agreement studies.
"""

from __future__ import annotations

import math
import re
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import EvaluationError, ParseError
from .qa import QAPair

RUBRIC_PATH = Path(__file__).parent / "data" / "judge_rubric.txt"

# Table grouping used for per-category reporting.
CATEGORY_GROUPS = {
    "Count.": ("counting",),
    "Exist.": ("existence",),
    "Attr.": ("attribute", "description"),
    "Spatial": ("spatial", "refer"),
    "Navi.": ("navigation",),
    "Others": ("room_type", "affordance"),
}


@dataclass(frozen=True)
class JudgeScore:
    qa_id: str
    s: int
    raw: str
    judge_model: str = ""

    def __post_init__(self):
        if not 1 <= self.s <= 5:
            raise EvaluationError(f"judge score {self.s} outside [1, 5]")
        if parse_judge_output(self.raw) != self.s:
            raise EvaluationError("raw judge output does not parse to the stored score")


def correctness(scores: Sequence[JudgeScore | int]) -> float:
    """Mean of (s - 1) / 4 over judge scores, as a percentage."""
    if not scores:
        raise EvaluationError("correctness needs at least one score")
    values = [s.s if isinstance(s, JudgeScore) else int(s) for s in scores]
    for v in values:
        if not 1 <= v <= 5:
            raise EvaluationError(f"score {v} outside [1, 5]")
    return sum((v - 1) / 4 for v in values) / len(values) * 100.0


def build_judge_prompt(qa: QAPair, response: str) -> str:
    """Rubric, then the (question, ground truth, response) triple, then the
    output directive. Deterministic bytes for cache keying."""
    if not response:
        raise EvaluationError("response must be non-empty")
    rubric = RUBRIC_PATH.read_text().rstrip()
    return (
        f"{rubric}\n\n"
        f"Question: {qa.question.plain()}\n"
        f"Ground Truth: {qa.answer}\n"
        f"Response: {response}\n\n"
        "Output only the score."
    )


def parse_judge_output(raw: str) -> int:
    """The single 1..5 integer in a judge reply; labels like "Score: 4" are fine."""
    m = re.search(r"(?i)score\s*[:=]?\s*([1-5])\b", raw)
    if m is None:
        m = re.search(r"\b([1-5])\b", raw)
    if m is None:
        raise ParseError("no score in [1, 5] found in judge output", raw=raw)
    return int(m.group(1))


def judge_response(qa: QAPair, response: str, llm, judge_model: str = "") -> JudgeScore:
    raw = llm.complete(
        [{"role": "user", "content": build_judge_prompt(qa, response)}], model=judge_model or None
    )
    return JudgeScore(qa_id=qa.qa_id, s=parse_judge_output(raw), raw=raw, judge_model=judge_model)


# ---------------------------------------------------------------------------
# Exact match family


_ARTICLES = {"a", "an", "the"}
_NUMBER_WORDS = {
    "zero": "0", "one": "1", "two": "2", "three": "3", "four": "4", "five": "5",
    "six": "6", "seven": "7", "eight": "8", "nine": "9", "ten": "10",
    "eleven": "11", "twelve": "12", "thirteen": "13", "fourteen": "14",
    "fifteen": "15", "sixteen": "16", "seventeen": "17", "eighteen": "18",
    "nineteen": "19", "twenty": "20",
}

SHORT_PHRASE_TOKENS = 3


def _norm_basic(text: str) -> str:
    return " ".join(text.lower().split())


def _norm_refined(text: str) -> str:
    text = text.lower().translate(str.maketrans(string.punctuation, " " * len(string.punctuation)))
    tokens = [
        _NUMBER_WORDS.get(tok, tok) for tok in text.split() if tok not in _ARTICLES
    ]
    return " ".join(tokens)


def exact_match(response: str, gt: str) -> bool:
    return _norm_basic(response) == _norm_basic(gt)


def refined_exact_match(
    response: str, gt: str, short_phrase_tokens: int = SHORT_PHRASE_TOKENS
) -> bool:
    """Exact match after stripping articles/punctuation and mapping number
    words to digits, plus short-phrase containment in either direction."""
    r = _norm_refined(response)
    g = _norm_refined(gt)
    if r == g:
        return True
    if g and len(g.split()) <= short_phrase_tokens and f" {g} " in f" {r} ":
        return True
    if r and len(r.split()) <= short_phrase_tokens and f" {r} " in f" {g} ":
        return True
    return False


def msnn_accuracy(preds: Sequence[str], gts: Sequence[str]) -> float:
    if len(preds) != len(gts):
        raise EvaluationError(f"length mismatch: {len(preds)} preds vs {len(gts)} labels")
    if not gts:
        raise EvaluationError("empty inputs")
    return 100.0 * sum(p == g for p, g in zip(preds, gts)) / len(gts)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation; errors on zero variance."""
    if len(xs) != len(ys):
        raise EvaluationError("pearson needs equal-length inputs")
    if len(xs) < 2:
        raise EvaluationError("pearson needs at least two points")
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    cov = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    vx = math.fsum((x - mx) ** 2 for x in xs)
    vy = math.fsum((y - my) ** 2 for y in ys)
    if vx == 0 or vy == 0:
        raise EvaluationError("pearson is undefined for zero-variance input")
    return cov / math.sqrt(vx * vy)


# ---------------------------------------------------------------------------
# Reports


@dataclass
class EvalReport:
    n: int
    em: float
    em_refined: float
    correctness: Optional[float] = None
    per_category: dict[str, float] = field(default_factory=dict)
    msnn_accuracy: Optional[float] = None
    judge_model: str = ""
    skipped: int = 0

    def to_json(self) -> dict:
        d = {
            "n": self.n,
            "em": round(self.em, 4),
            "em_refined": round(self.em_refined, 4),
            "skipped": self.skipped,
        }
        if self.correctness is not None:
            d["correctness"] = round(self.correctness, 4)
            d["per_category"] = {k: round(v, 4) for k, v in self.per_category.items()}
            d["judge_model"] = self.judge_model
        if self.msnn_accuracy is not None:
            d["msnn_accuracy"] = round(self.msnn_accuracy, 4)
        return d


def evaluate_predictions(
    pairs: Iterable[QAPair],
    responses: dict[str, str],
    judge=None,
    judge_model: str = "",
) -> EvalReport:
    """Score responses keyed by qa_id. EM metrics always run; with a judge
    client the correctness protocol runs too, grouped per category."""
    matched = [(qa, responses[qa.qa_id]) for qa in pairs if qa.qa_id in responses]
    skipped = sum(1 for qa in pairs if qa.qa_id not in responses)
    if not matched:
        raise EvaluationError("no predictions matched the dataset qa ids")

    em = 100.0 * sum(exact_match(r, qa.answer) for qa, r in matched) / len(matched)
    emr = 100.0 * sum(refined_exact_match(r, qa.answer) for qa, r in matched) / len(matched)
    report = EvalReport(n=len(matched), em=em, em_refined=emr, skipped=skipped)

    if judge is not None:
        scores = [(qa, judge_response(qa, r, judge, judge_model)) for qa, r in matched]
        report.correctness = correctness([s for _, s in scores])
        report.judge_model = judge_model
        for group, cats in CATEGORY_GROUPS.items():
            subset = [s for qa, s in scores if qa.category in cats]
            if subset:
                report.per_category[group] = correctness(subset)
    return report
