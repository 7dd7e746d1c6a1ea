"""Post-processing for generated QA pairs: validation against scene graphs,
negative-response filtering, yes/no balancing, and human review verdicts.

Validators parse questions with a closed pattern grammar over this package's
own templates (plus the documented LLM output shapes). Anything the grammar
does not match is flagged for review, never silently kept as-is or guessed.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from random import Random
from typing import Iterable, Optional

from .errors import RefinementError
from .graph import SituatedGraph, graph_key
from .qa import QAPair, WildVocab, augment_negative_existence, match_nodes, pluralize
from .scene import Scene

ACTIONS = ("untouched", "corrected", "dropped", "flagged")

NEGATIVE_PATTERNS = ("unknown", "not specified", "cannot be determined", "n/a")

_DIR_PHRASES = {
    "on my left": "left",
    "on my right": "right",
    "in front of me": "front",
    "behind me": "behind",
}

_COUNTING_PATTERNS = [
    re.compile(r"^How many (?P<noun>.+?) are in the (?:room|scene)\?$", re.I),
    re.compile(
        r"^How many (?P<noun>.+?) are (?P<dir>on my left|on my right|in front of me|behind me)\?$",
        re.I,
    ),
    re.compile(r"^How many (?P<noun>.+?) are (?:at|on) my (?P<clock>\d{1,2}) o'clock\?$", re.I),
]

_EXISTENCE_PATTERNS = [
    re.compile(r"^Is there (?:a|an) (?P<noun>.+?) in the (?:room|scene)\?$", re.I),
    re.compile(
        r"^Is there (?:a|an) (?P<noun>.+?) (?P<dir>on my left|on my right|in front of me|behind me)\?$",
        re.I,
    ),
    re.compile(r"^Is there (?:a|an) (?P<noun>.+?) (?:at|on) my (?P<clock>\d{1,2}) o'clock\?$", re.I),
    re.compile(r"^Can I find (?:a|an) (?P<noun>.+?) in the (?:room|scene)\?$", re.I),
]

_NUMBER_WORDS = {
    "zero": 0, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11,
    "twelve": 12, "thirteen": 13, "fourteen": 14, "fifteen": 15, "sixteen": 16,
    "seventeen": 17, "eighteen": 18, "nineteen": 19, "twenty": 20,
}


@dataclass(frozen=True)
class ParsedPredicate:
    label: str
    attr_words: tuple[str, ...] = ()
    coarse: Optional[str] = None
    clock: Optional[int] = None

    def count(self, g: SituatedGraph) -> int:
        return len(
            match_nodes(
                g, self.label, coarse=self.coarse, clock=self.clock, attr_words=self.attr_words
            )
        )


def _resolve_noun(noun: str, g: SituatedGraph) -> tuple[str, tuple[str, ...]]:
    """Split '<attribute words> <label>' using the graph's label set; unmatched
    nouns stay as-is (their predicate is empty by construction)."""
    noun = noun.strip().lower()
    labels = sorted({o.label for o in g.objects()}, key=len, reverse=True)
    for label in labels:
        for form in (label, pluralize(label)):
            if noun == form:
                return label, ()
            if noun.endswith(" " + form):
                return label, tuple(noun[: -len(form)].strip().split())
    return noun, ()


def parse_question(question: str, category: str, g: SituatedGraph) -> Optional[ParsedPredicate]:
    """Predicate for a counting/existence question, or None when no pattern matches."""
    patterns = _COUNTING_PATTERNS if category == "counting" else _EXISTENCE_PATTERNS
    for pat in patterns:
        m = pat.match(question.strip())
        if not m:
            continue
        groups = m.groupdict()
        label, attr_words = _resolve_noun(groups["noun"], g)
        clock = int(groups["clock"]) if groups.get("clock") else None
        if clock is not None and not 1 <= clock <= 12:
            return None
        return ParsedPredicate(
            label=label,
            attr_words=attr_words,
            coarse=_DIR_PHRASES.get(groups.get("dir", "").lower()),
            clock=clock,
        )
    return None


def normalize_count_answer(answer: str) -> Optional[int]:
    """"two tables" -> 2; None when no count can be read."""
    tokens = re.findall(r"[a-z]+|\d+", answer.strip().lower())
    for tok in tokens:
        if tok.isdigit():
            return int(tok)
        if tok in _NUMBER_WORDS:
            return _NUMBER_WORDS[tok]
    return None


def normalize_yesno(answer: str) -> Optional[bool]:
    tokens = re.findall(r"[a-z]+", answer.strip().lower())
    if not tokens:
        return None
    if tokens[0] == "yes":
        return True
    if tokens[0] == "no":
        return False
    return None


# ---------------------------------------------------------------------------
# Per-pair validators


def verify_counting(qa: QAPair, g: SituatedGraph) -> tuple[QAPair, str]:
    """Recompute the counted predicate; mismatched answers are replaced."""
    pred = parse_question(qa.question.plain(), "counting", g)
    if pred is None:
        return qa, "flagged"
    true_count = pred.count(g)
    answered = normalize_count_answer(qa.answer)
    if answered is None:
        return replace(qa, answer=str(true_count), meta={**qa.meta, "corrected_from": qa.answer}), "corrected"
    if answered == true_count:
        return qa, "untouched"
    return (
        replace(qa, answer=str(true_count), meta={**qa.meta, "corrected_from": qa.answer}),
        "corrected",
    )


def verify_existence(qa: QAPair, g: SituatedGraph) -> tuple[QAPair, str]:
    """Re-evaluate the existence predicate; yes/no flipped on mismatch."""
    pred = parse_question(qa.question.plain(), "existence", g)
    if pred is None:
        return qa, "flagged"
    truth = pred.count(g) > 0
    answered = normalize_yesno(qa.answer)
    if answered is None:
        return qa, "flagged"
    if answered == truth:
        return qa, "untouched"
    return (
        replace(
            qa, answer="yes" if truth else "no", meta={**qa.meta, "corrected_from": qa.answer}
        ),
        "corrected",
    )


# ---------------------------------------------------------------------------
# Reports


@dataclass
class RefinementReport:
    checked: int = 0
    corrected: int = 0
    dropped: int = 0
    flagged: int = 0
    per_category: dict[str, dict[str, int]] = field(default_factory=dict)
    reasons: list[tuple[str, str, str]] = field(default_factory=list)  # (qa_id, action, reason)
    warnings: list[str] = field(default_factory=list)

    @property
    def untouched(self) -> int:
        return self.checked - self.corrected - self.dropped

    def record(self, qa: QAPair, action: str, reason: str = "") -> None:
        self.checked += 1
        cat = self.per_category.setdefault(
            qa.category, {"checked": 0, "corrected": 0, "dropped": 0}
        )
        cat["checked"] += 1
        if action == "corrected":
            self.corrected += 1
            cat["corrected"] += 1
        elif action == "dropped":
            self.dropped += 1
            cat["dropped"] += 1
        elif action == "flagged":
            self.flagged += 1
        if action != "untouched":
            self.reasons.append((qa.qa_id, action, reason))

    def to_json(self) -> dict:
        return {
            "checked": self.checked,
            "corrected": self.corrected,
            "dropped": self.dropped,
            "flagged": self.flagged,
            "untouched": self.untouched,
            "per_category": self.per_category,
            "reasons": [list(r) for r in self.reasons],
            "warnings": self.warnings,
        }

    def summary(self) -> str:
        lines = [
            f"checked {self.checked}: corrected {self.corrected}, dropped "
            f"{self.dropped}, flagged {self.flagged}, untouched {self.untouched}"
        ]
        for cat, c in sorted(self.per_category.items()):
            lines.append(
                f"  {cat}: checked {c['checked']}, corrected {c['corrected']}, "
                f"dropped {c['dropped']}"
            )
        lines.extend(f"  warning: {w}" for w in self.warnings)
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Batch operations


def drop_negative_responses(
    batch: list[QAPair], patterns: Iterable[str] = NEGATIVE_PATTERNS
) -> tuple[list[QAPair], RefinementReport]:
    """Remove pairs whose answer matches a negative-response pattern."""
    lowered = [p.lower() for p in patterns]
    report = RefinementReport()
    kept = []
    for qa in batch:
        answer = qa.answer.lower()
        hit = next((p for p in lowered if p in answer), None)
        if hit is not None:
            report.record(qa, "dropped", f"negative response pattern {hit!r}")
        else:
            report.record(qa, "untouched")
            kept.append(qa)
    return kept, report


def refine_batch(
    batch: list[QAPair],
    graphs: dict[str, SituatedGraph],
    negative_patterns: Iterable[str] = NEGATIVE_PATTERNS,
) -> tuple[list[QAPair], RefinementReport]:
    """Validate counting/existence answers against their graphs, then drop
    negative responses. Running the result through again is a no-op."""
    report = RefinementReport()
    lowered = [p.lower() for p in negative_patterns]
    out = []
    for qa in batch:
        hit = next((p for p in lowered if p in qa.answer.lower()), None)
        if hit is not None:
            report.record(qa, "dropped", f"negative response pattern {hit!r}")
            continue
        gid = graph_key(qa.scene_id, qa.situation)
        g = graphs.get(gid)
        if g is None:
            report.record(qa, "flagged", "no graph for situation")
            out.append(qa)
            continue
        if qa.category == "counting":
            qa, action = verify_counting(qa, g)
        elif qa.category == "existence":
            qa, action = verify_existence(qa, g)
        else:
            action = "untouched"
        reason = "answer disagreed with graph" if action == "corrected" else (
            "question outside validator grammar" if action == "flagged" else ""
        )
        report.record(qa, action, reason)
        out.append(qa)
    return out, report


def _is_yes(qa: QAPair) -> bool:
    return normalize_yesno(qa.answer) is True


def _is_no(qa: QAPair) -> bool:
    return normalize_yesno(qa.answer) is False


def balance_existence(
    batch: list[QAPair],
    scene_graphs: list[tuple[Scene, SituatedGraph]],
    vocab: WildVocab,
    rng: Random,
    tolerance: float = 0.05,
) -> tuple[list[QAPair], dict]:
    """Push the existence yes/no ratio toward 1:1.

    Adds verified-"no" pairs first (never fabricates "yes"); if the augmentation
    sources run dry, subsamples the majority class. Best effort plus a warning
    when the tolerance is unreachable.
    """
    if not 0 < tolerance < 0.5:
        raise RefinementError(f"tolerance must be in (0, 0.5), got {tolerance}")
    out = list(batch)
    info = {"added": 0, "removed": 0, "warning": None}

    def tally() -> tuple[int, int]:
        ex = [p for p in out if p.category == "existence"]
        return sum(1 for p in ex if _is_yes(p)), sum(1 for p in ex if _is_no(p))

    yes, no = tally()
    total = yes + no
    if total == 0 or abs(yes - no) / total <= tolerance:
        info.update(yes=yes, no=no, imbalance=0.0 if total == 0 else abs(yes - no) / total)
        return out, info

    if yes > no and scene_graphs:
        need = math.ceil((yes - no - tolerance * (yes + no)) / (1 + tolerance))
        existing = {p.question.plain() for p in out}
        added = []
        for i in range(len(scene_graphs) * 4):
            if len(added) >= need:
                break
            scene, g = scene_graphs[i % len(scene_graphs)]
            for qa in augment_negative_existence(scene, g, vocab, rng, need - len(added)):
                if qa.question.plain() not in existing:
                    existing.add(qa.question.plain())
                    added.append(qa)
                if len(added) >= need:
                    break
        out.extend(added)
        info["added"] = len(added)

    yes, no = tally()
    total = yes + no
    if total and abs(yes - no) / total > tolerance:
        majority_is_yes = yes > no
        majority, minority = (yes, no) if majority_is_yes else (no, yes)
        target = int(minority * (1 + tolerance) / (1 - tolerance))
        to_remove = majority - max(target, minority)
        idx = [
            i
            for i, p in enumerate(out)
            if p.category == "existence" and (_is_yes(p) if majority_is_yes else _is_no(p))
        ]
        removed = set(rng.sample(idx, min(to_remove, len(idx))))
        out = [p for i, p in enumerate(out) if i not in removed]
        info["removed"] = len(removed)

    yes, no = tally()
    total = yes + no
    imbalance = 0.0 if total == 0 else abs(yes - no) / total
    if imbalance > tolerance:
        info["warning"] = (
            f"could not reach tolerance {tolerance}: imbalance {imbalance:.3f} "
            f"({yes} yes / {no} no)"
        )
    info.update(yes=yes, no=no, imbalance=imbalance)
    return out, info


# ---------------------------------------------------------------------------
# Review verdicts


VERDICTS = ("accept", "reject", "fix")


@dataclass(frozen=True)
class ReviewVerdict:
    qa_id: str
    scores: dict[str, int]  # situation / question / answer, each 1..5
    verdict: str
    reviewer: str
    timestamp: str = ""
    fixed_answer: Optional[str] = None

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise RefinementError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "fix" and not self.fixed_answer:
            raise RefinementError("fix verdict requires fixed_answer")
        for aspect in ("situation", "question", "answer"):
            score = self.scores.get(aspect)
            if not isinstance(score, int) or not 1 <= score <= 5:
                raise RefinementError(f"score for {aspect!r} must be an int in [1, 5]")

    def to_json(self) -> dict:
        d = {
            "qa_id": self.qa_id,
            "scores": dict(self.scores),
            "verdict": self.verdict,
            "reviewer": self.reviewer,
            "timestamp": self.timestamp,
        }
        if self.fixed_answer is not None:
            d["fixed_answer"] = self.fixed_answer
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ReviewVerdict":
        return cls(
            qa_id=d["qa_id"],
            scores={k: int(v) for k, v in d["scores"].items()},
            verdict=d["verdict"],
            reviewer=d.get("reviewer", ""),
            timestamp=d.get("timestamp", ""),
            fixed_answer=d.get("fixed_answer"),
        )


def apply_verdicts(
    batch: list[QAPair], verdicts: list[ReviewVerdict]
) -> tuple[list[QAPair], RefinementReport]:
    """Apply review outcomes: reject drops, fix replaces the answer, accept keeps.

    The last verdict per qa_id wins (any reviewer), so replayed or duplicated
    verdict logs resolve identically.
    """
    by_id: dict[str, ReviewVerdict] = {}
    for v in verdicts:
        by_id[v.qa_id] = v
    known = {qa.qa_id for qa in batch}
    dangling = sorted(set(by_id) - known)
    if dangling:
        raise RefinementError("verdicts reference unknown qa ids: " + ", ".join(dangling))

    report = RefinementReport()
    out = []
    for qa in batch:
        v = by_id.get(qa.qa_id)
        if v is None:
            report.record(qa, "untouched")
            out.append(qa)
        elif v.verdict == "reject":
            report.record(qa, "dropped", f"rejected by {v.reviewer}")
        elif v.verdict == "fix":
            if qa.answer == v.fixed_answer:
                report.record(qa, "untouched")
                out.append(qa)
            else:
                fixed = replace(
                    qa,
                    answer=v.fixed_answer,
                    meta={**qa.meta, "fixed_by": v.reviewer, "fixed_from": qa.answer},
                )
                report.record(fixed, "corrected", f"fixed by {v.reviewer}")
                out.append(fixed)
        else:
            report.record(qa, "untouched")
            out.append(qa)
    return out, report
