import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcdgen.annotations import (
    AnnotationSet,
    Segment,
    annotation_from_dict,
    annotation_to_dict,
    motion,
    motions,
    parse_annotation,
    serialize_annotation,
    skill,
    skills,
    write_annotation,
)
from pcdgen.errors import InterleaveError, RangeError, SchemaError

FIXTURES = Path(__file__).parent.parent / "fixtures" / "annotations"
CASES = sorted(FIXTURES.glob("*.json"))


def load_case(path):
    return json.loads(path.read_text())


def write_body(tmp_path, case):
    f = tmp_path / "annotation.json"
    f.write_text(json.dumps(case["body"]))
    return f


@pytest.mark.parametrize("case_file", CASES, ids=lambda p: p.stem)
def test_fixture_corpus(tmp_path, case_file):
    case = load_case(case_file)
    path = write_body(tmp_path, case)
    expect = case["expect"]
    if "error" in expect:
        err = {"SchemaError": SchemaError, "InterleaveError": InterleaveError,
               "RangeError": RangeError}[expect["error"]]
        with pytest.raises(err):
            parse_annotation(path, case["objects"], case["horizon"])
        return
    if "warning" in expect:
        with pytest.warns(UserWarning, match=expect["warning"]):
            ann = parse_annotation(path, case["objects"], case["horizon"])
    else:
        ann = parse_annotation(path, case["objects"], case["horizon"])
    got = [{"kind": s.kind, "start": s.start_frame, "end": s.end_frame,
            **({"target": sorted(s.target),
                "hands": [sorted(h) for h in s.hands]} if s.kind == "skill" else {})}
           for s in ann.segments]
    assert got == expect["segments"]


class TestReferenceExample:
    """The canonical bimanual two-skill file, checked field by field."""

    @pytest.fixture
    def ann(self, tmp_path):
        case = load_case(FIXTURES / "valid_bimanual_two_skills.json")
        return parse_annotation(write_body(tmp_path, case), 3, 40)

    def test_segment_count(self, ann):
        assert len(ann.segments) == 4
        assert ann.skill_count == 2
        assert len(skills(ann)) == 2
        assert len(motions(ann)) == 2

    def test_boundaries(self, ann):
        spans = [(s.start_frame, s.end_frame) for s in ann.segments]
        assert spans == [(1, 11), (12, 22), (23, 30), (31, 40)]

    def test_id_sets(self, ann):
        s1, s2 = skills(ann)
        assert s1.target == {2} and s1.hands == (frozenset(), frozenset())
        assert s2.target == {1, 3}
        assert s2.hands[0] == {2} and s2.hands[1] == frozenset()
        assert s2.hand_union == {2}
        assert s2.group == {1, 2, 3}

    def test_horizon(self, ann):
        assert ann.horizon == 40

    def test_masks(self, ann):
        assert ann.mask_files[0] == "mask_gripper.png"
        assert len(ann.mask_files) == 4


class TestConstructionInvariants:
    def test_first_must_be_motion(self):
        with pytest.raises(InterleaveError):
            AnnotationSet(mask_files=(), arm_count=1,
                          segments=(skill(1, 5, [1]), motion(6, 10)))

    def test_last_must_be_skill(self):
        with pytest.raises(InterleaveError):
            AnnotationSet(mask_files=(), arm_count=1,
                          segments=(motion(1, 5), skill(6, 8, [1]), motion(9, 12)))

    def test_tiling_gap(self):
        with pytest.raises(RangeError):
            AnnotationSet(mask_files=(), arm_count=1,
                          segments=(motion(1, 5), skill(7, 9, [1])))

    def test_must_start_at_one(self):
        with pytest.raises(RangeError):
            AnnotationSet(mask_files=(), arm_count=1,
                          segments=(motion(2, 5), skill(6, 9, [1])))

    def test_hand_arity_checked(self):
        with pytest.raises(SchemaError):
            AnnotationSet(mask_files=(), arm_count=2,
                          segments=(motion(1, 5), skill(6, 9, [1], hands=[()])))

    def test_motion_with_ids_rejected(self):
        with pytest.raises(SchemaError):
            Segment(kind="motion", start_frame=1, end_frame=3, target=frozenset([1]))

    def test_segment_at(self):
        ann = AnnotationSet(mask_files=(), arm_count=1,
                            segments=(motion(1, 5), skill(6, 9, [1])))
        assert ann.segment_at(5).kind == "motion"
        assert ann.segment_at(6).kind == "skill"
        with pytest.raises(RangeError):
            ann.segment_at(10)


class TestRoundTrip:
    def test_serialize_parse_identity(self, tmp_path):
        ann = AnnotationSet(
            mask_files=("mask_gripper.png", "mask_1.png", "mask_2.png"),
            arm_count=2,
            segments=(motion(1, 4),
                      skill(5, 9, [1], hands=[(2,), ()]),
                      motion(10, 12),
                      skill(13, 20, [2], hands=[(), ()])))
        f = tmp_path / "a.json"
        write_annotation(ann, f)
        back = parse_annotation(f, 2, 20)
        assert back == ann

    def test_canonical_field_names(self):
        ann = AnnotationSet(mask_files=("g.png", "m1.png"), arm_count=1,
                            segments=(motion(1, 3), skill(4, 6, [1])))
        doc = annotation_to_dict(ann)
        assert list(doc) == ["masks", "arms", "annotations"]
        sk = doc["annotations"][1]
        assert list(sk) == ["frame", "type", "target", "hand"]
        assert sk["hand"] is None  # null encodes the empty set

    def test_bimanual_field_names(self):
        ann = AnnotationSet(mask_files=(), arm_count=2,
                            segments=(motion(1, 3), skill(4, 6, [1], hands=[(), (1,)])))
        sk = annotation_to_dict(ann)["annotations"][1]
        assert list(sk) == ["frame", "type", "target", "left_hand", "right_hand"]
        assert sk["right_hand"] == [1]

    def test_serialized_text_stable(self):
        ann = AnnotationSet(mask_files=("g.png",), arm_count=1,
                            segments=(motion(1, 3), skill(4, 6, ())))
        assert serialize_annotation(ann) == serialize_annotation(ann)
        assert serialize_annotation(ann).endswith("\n")


@st.composite
def annotation_sets(draw):
    arm_count = draw(st.sampled_from([1, 2]))
    n_pairs = draw(st.integers(1, 4))
    k = draw(st.integers(1, 5))
    bounds = sorted(draw(st.lists(st.integers(2, 60), min_size=2 * n_pairs - 1,
                                  max_size=2 * n_pairs - 1, unique=True)))
    starts = [1] + bounds
    ends = [b - 1 for b in bounds] + [draw(st.integers(bounds[-1], 70))]
    segs = []
    ids = st.frozensets(st.integers(1, k), max_size=k)
    for i, (s, e) in enumerate(zip(starts, ends)):
        if i % 2 == 0:
            segs.append(motion(s, e))
        else:
            segs.append(skill(s, e, draw(ids),
                              hands=[draw(ids) for _ in range(arm_count)]))
    if len(segs) % 2 == 1:
        segs.pop()
    masks = tuple(["mask_gripper.png"] + [f"mask_{i}.png" for i in range(1, k + 1)])
    return AnnotationSet(mask_files=masks, arm_count=arm_count,
                         segments=tuple(segs)), k


@settings(max_examples=60, deadline=None)
@given(data=annotation_sets())
def test_roundtrip_property(tmp_path_factory, data):
    ann, k = data
    f = tmp_path_factory.mktemp("ann") / "a.json"
    write_annotation(ann, f)
    assert parse_annotation(f, k, ann.horizon) == ann


@settings(max_examples=60, deadline=None)
@given(data=annotation_sets())
def test_tiling_property(data):
    ann, _ = data
    covered = []
    for s in ann.segments:
        covered.extend(range(s.start_frame, s.end_frame + 1))
    assert covered == list(range(1, ann.horizon + 1))
    kinds = [s.kind for s in ann.segments]
    assert kinds == ["motion", "skill"] * (len(kinds) // 2)


class TestStrictMode:
    def test_trailing_motion_strict(self, tmp_path):
        case = load_case(FIXTURES / "valid_trailing_motion_trimmed.json")
        path = write_body(tmp_path, case)
        with pytest.raises(InterleaveError):
            parse_annotation(path, case["objects"], case["horizon"], strict=True)

    def test_not_json(self, tmp_path):
        f = tmp_path / "a.json"
        f.write_text("{not json")
        with pytest.raises(SchemaError):
            parse_annotation(f, 1, 10)

    def test_mask_count_mismatch(self, tmp_path):
        doc = {"masks": ["g.png"], "arms": 1,
               "annotations": [{"frame": 1, "type": "motion"},
                               {"frame": 5, "type": "skill", "target": [1],
                                "hand": None}]}
        f = tmp_path / "a.json"
        f.write_text(json.dumps(doc))
        with pytest.raises(SchemaError):
            parse_annotation(f, 2, 10)

    def test_from_dict_direct(self):
        doc = {"masks": [], "arms": 1,
               "annotations": [{"frame": 1, "type": "motion"},
                               {"frame": 3, "type": "skill", "target": None,
                                "hand": None}]}
        ann = annotation_from_dict(doc, 6)
        assert ann.horizon == 6
        assert skills(ann)[0].target == frozenset()
