"""Property-based checks for the geometric and scoring invariants."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from situgen.evaluation import correctness, exact_match, refined_exact_match
from situgen.geometry import normalize_angle, signed_angle
from situgen.graph import clock_direction
from situgen.scene import normalize_to_situation
from situgen.situations import InterleavedText, Segment, Situation

from conftest import make_scene, obj_dict

finite_angle = st.floats(-1000.0, 1000.0, allow_nan=False, allow_infinity=False)


@given(finite_angle)
def test_normalize_angle_range(theta):
    a = normalize_angle(theta)
    assert 0.0 <= a < 2 * math.pi


@given(finite_angle)
def test_signed_angle_range(theta):
    a = signed_angle(theta)
    assert -math.pi < a <= math.pi


@given(finite_angle)
def test_clock_total_and_periodic(bearing):
    h = clock_direction(bearing)
    assert 1 <= h <= 12
    assert clock_direction(bearing + 2 * math.pi) == h


@given(
    st.lists(st.tuples(st.floats(0.5, 7.5), st.floats(0.5, 7.5), st.floats(0.1, 2.0)),
             min_size=2, max_size=8),
    st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 6.2831),
)
@settings(max_examples=60, deadline=None)
def test_normalization_preserves_pairwise_distances(points, lx, ly, rot):
    scene = make_scene(
        scene_id="prop",
        polygon=[[0, 0], [8, 0], [8, 8], [0, 8]],
        objects=[
            obj_dict(i, "box", [x, y, z], [0.3, 0.3, 0.3])
            for i, (x, y, z) in enumerate(points)
        ],
    )
    s = Situation(location=np.array([lx, ly, 0.0]), rotation=normalize_angle(rot),
                  interaction="standing")
    out = normalize_to_situation(scene, s)
    before = np.array([o.centroid for o in scene.objects])
    after = np.array([o.centroid for o in out.objects])
    d0 = np.linalg.norm(before[:, None] - before[None], axis=-1)
    d1 = np.linalg.norm(after[:, None] - after[None], axis=-1)
    assert np.max(np.abs(d0 - d1)) <= 1e-9


@given(st.lists(st.integers(1, 5), min_size=1, max_size=50))
def test_correctness_bounds_and_extremes(scores):
    c = correctness(scores)
    assert 0.0 <= c <= 100.0
    if all(s == 5 for s in scores):
        assert c == 100.0
    if all(s == 1 for s in scores):
        assert c == 0.0


@given(st.text(min_size=1, max_size=40))
def test_refined_em_reflexive(text):
    assert refined_exact_match(text, text)


@given(st.text(max_size=30), st.text(max_size=30))
def test_em_implies_refined(a, b):
    if exact_match(a, b):
        assert refined_exact_match(a, b)


@given(st.lists(
    st.one_of(
        st.text(st.characters(blacklist_characters="\\", blacklist_categories=("Cs",)),
                min_size=1, max_size=20).map(lambda t: Segment("text", t)),
        st.integers(0, 99).map(lambda i: Segment("image_slot", f"<chair-{i}-IMG>")),
    ),
    max_size=6,
))
def test_interleaved_text_json_round_trip(segments):
    text = InterleavedText(tuple(segments))
    assert InterleavedText.from_json(text.to_json()).segments == text.segments
