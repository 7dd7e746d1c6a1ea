"""Scoring: correctness formula, judge prompt/parse, EM family, accuracy,
and the Pearson utility against a high-precision oracle."""

import math
from random import Random

import numpy as np
import pytest

from situgen.errors import EvaluationError, ParseError
from situgen.evaluation import (
    CATEGORY_GROUPS,
    JudgeScore,
    build_judge_prompt,
    correctness,
    evaluate_predictions,
    exact_match,
    msnn_accuracy,
    parse_judge_output,
    pearson,
    refined_exact_match,
)
from situgen.qa import QAPair, make_qa_id
from situgen.situations import Situation, interleave


def qa(question="Is there a chair on my left?", answer="yes", category="existence"):
    s = Situation(location=np.zeros(3), rotation=0.0, interaction="standing")
    return QAPair(
        qa_id=make_qa_id("s", "g", category, question, answer),
        scene_id="s",
        situation=s,
        question=interleave(question),
        answer=answer,
        category=category,
    )


# ---------------------------------------------------------------------------
# correctness


def test_correctness_fixtures():
    assert correctness([5, 5, 5]) == 100.0
    assert correctness([1, 1, 1, 1]) == 0.0
    assert correctness([5, 5, 1, 3]) == 62.5


def test_correctness_affine_single_step():
    rng = Random(12)
    for _ in range(50):
        n = rng.randrange(1, 30)
        scores = [rng.randrange(1, 6) for _ in range(n)]
        i = rng.randrange(n)
        if scores[i] == 5:
            scores[i] = 4
        bumped = list(scores)
        bumped[i] += 1
        assert correctness(bumped) - correctness(scores) == pytest.approx(25.0 / n)


def test_correctness_permutation_invariant():
    rng = Random(3)
    scores = [rng.randrange(1, 6) for _ in range(20)]
    shuffled = list(scores)
    rng.shuffle(shuffled)
    assert correctness(scores) == pytest.approx(correctness(shuffled))


def test_correctness_validates_inputs():
    with pytest.raises(EvaluationError):
        correctness([])
    with pytest.raises(EvaluationError):
        correctness([0])
    with pytest.raises(EvaluationError):
        correctness([6])


# ---------------------------------------------------------------------------
# judge prompt and parsing


def test_judge_prompt_contains_clock_rubric():
    prompt = build_judge_prompt(qa(), "Yes, a chair is there.")
    assert "At your 7 o'clock." in prompt
    assert "Score: 4 (Minor discrepancy)" in prompt
    assert "At your 10 o'clock." in prompt
    assert "Score: 1 (Major discrepancy)" in prompt


def test_judge_prompt_ends_with_directive_and_is_deterministic():
    a = build_judge_prompt(qa(), "yes")
    b = build_judge_prompt(qa(), "yes")
    assert a.endswith("Output only the score.")
    assert a == b
    assert "Question: Is there a chair on my left?" in a
    assert "Ground Truth: yes" in a
    assert "Response: yes" in a


def test_judge_prompt_rejects_empty_response():
    with pytest.raises(EvaluationError):
        build_judge_prompt(qa(), "")


def test_parse_judge_output():
    assert parse_judge_output("3") == 3
    assert parse_judge_output("Score: 5") == 5
    assert parse_judge_output("  score = 2 ") == 2
    with pytest.raises(ParseError):
        parse_judge_output("great answer")
    with pytest.raises(ParseError):
        parse_judge_output("7")  # out of range surfaces, never clamps
    with pytest.raises(ParseError):
        parse_judge_output("Score: 10")


def test_judge_score_consistency_invariant():
    JudgeScore(qa_id="x", s=4, raw="Score: 4")
    with pytest.raises(EvaluationError):
        JudgeScore(qa_id="x", s=4, raw="Score: 2")
    with pytest.raises(EvaluationError):
        JudgeScore(qa_id="x", s=9, raw="9")


# ---------------------------------------------------------------------------
# exact match family


def test_em_and_refined_em_fixture_two_tables():
    assert exact_match("two", "two tables") is False
    assert refined_exact_match("two", "two tables") is True


def test_refined_em_verbose_yes():
    assert refined_exact_match("Yes, there is a chair on the left.", "yes") is True
    assert exact_match("Yes, there is a chair on the left.", "yes") is False


def test_em_identical_and_implication():
    cases = ["yes", "two tables", "a brown wooden chair", "42"]
    for text in cases:
        assert exact_match(text, text)
        assert refined_exact_match(text, text)
    # EM implies refined EM on random-ish strings
    rng = Random(5)
    words = "red blue chair table two three on left right near far".split()
    for _ in range(100):
        s = " ".join(rng.choice(words) for _ in range(rng.randrange(1, 6)))
        t = " ".join(rng.choice(words) for _ in range(rng.randrange(1, 6)))
        if exact_match(s, t):
            assert refined_exact_match(s, t)


def test_refined_em_number_words_and_articles():
    assert refined_exact_match("Two", "2") is True
    assert refined_exact_match("the chair", "chair") is True
    assert refined_exact_match("seventeen", "17") is True


def test_refined_em_containment_limited_to_short_phrases():
    gt = "a long and very specific answer about many things"
    assert refined_exact_match(gt + " plus extra words here", gt) is False


def test_msnn_accuracy():
    assert msnn_accuracy(["turn_left"] * 4, ["turn_left"] * 4) == 100.0
    assert msnn_accuracy(["turn_left"] * 4, ["turn_right"] * 4) == 0.0
    assert msnn_accuracy(
        ["move_forward", "turn_left", "turn_right", "move_backward"],
        ["move_forward", "turn_left", "turn_right", "turn_right"],
    ) == 75.0
    with pytest.raises(EvaluationError):
        msnn_accuracy(["a"], ["a", "b"])
    with pytest.raises(EvaluationError):
        msnn_accuracy([], [])


# ---------------------------------------------------------------------------
# pearson


def test_pearson_perfect_linear():
    xs = [1.0, 2.0, 3.0, 4.0]
    assert pearson(xs, [2 * x + 1 for x in xs]) == pytest.approx(1.0)
    assert pearson(xs, [-x for x in xs]) == pytest.approx(-1.0)


def test_pearson_matches_high_precision_oracle():
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 50
    rng = Random(31)
    for _ in range(20):
        n = rng.randrange(2, 40)
        xs = [rng.uniform(-10, 10) for _ in range(n)]
        ys = [rng.uniform(-10, 10) for _ in range(n)]
        if len(set(xs)) < 2 or len(set(ys)) < 2:
            continue
        mx = mpmath.fsum(xs) / n
        my = mpmath.fsum(ys) / n
        cov = mpmath.fsum((mpmath.mpf(x) - mx) * (mpmath.mpf(y) - my) for x, y in zip(xs, ys))
        vx = mpmath.fsum((mpmath.mpf(x) - mx) ** 2 for x in xs)
        vy = mpmath.fsum((mpmath.mpf(y) - my) ** 2 for y in ys)
        expected = float(cov / mpmath.sqrt(vx * vy))
        assert pearson(xs, ys) == pytest.approx(expected, abs=1e-12)


def test_pearson_zero_variance_errors():
    with pytest.raises(EvaluationError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(EvaluationError):
        pearson([1], [2])


# ---------------------------------------------------------------------------
# evaluate_predictions with a stubbed judge


class StubJudge:
    """Deterministic judge: perfect match -> 5, else 2."""

    def __init__(self):
        self.calls = 0

    def complete(self, messages, model=None):
        self.calls += 1
        content = messages[0]["content"]
        # the rubric itself contains example triples; the scored one comes last
        gt = content.split("Ground Truth: ")[-1].splitlines()[0]
        response = content.split("Response: ")[-1].splitlines()[0]
        return "Score: 5" if gt == response else "Score: 2"


def test_evaluate_predictions_em_only():
    pairs = [qa("Q1?", "yes", "existence"), qa("Q2?", "two tables", "counting")]
    responses = {pairs[0].qa_id: "yes", pairs[1].qa_id: "two"}
    report = evaluate_predictions(pairs, responses)
    assert report.n == 2
    assert report.em == 50.0
    assert report.em_refined == 100.0
    assert report.correctness is None


def test_evaluate_predictions_with_judge_groups_categories():
    pairs = [
        qa("Q1?", "yes", "existence"),
        qa("Q2?", "3", "counting"),
        qa("Q3?", "blue", "attribute"),
        qa("Q4?", "a kitchen", "room_type"),
    ]
    responses = {p.qa_id: p.answer for p in pairs}
    responses[pairs[1].qa_id] = "4"  # one wrong
    judge = StubJudge()
    report = evaluate_predictions(pairs, responses, judge=judge, judge_model="stub")
    assert judge.calls == 4
    assert report.correctness == pytest.approx((100 + 25 + 100 + 100) / 4)
    assert report.per_category["Count."] == pytest.approx(25.0)
    assert report.per_category["Exist."] == pytest.approx(100.0)
    assert report.per_category["Others"] == pytest.approx(100.0)
    assert set(report.per_category) <= set(CATEGORY_GROUPS)


def test_evaluate_predictions_requires_overlap():
    with pytest.raises(EvaluationError):
        evaluate_predictions([qa()], {"missing": "yes"})
