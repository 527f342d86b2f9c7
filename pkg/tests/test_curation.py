import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moco_kit.curation import (MOTION_LEXICON, ClipRecord, ExternalLLMExtractor, LexiconExtractor,
                               body_coverage, build_manifest, extract_motion_prompt, filter_clip,
                               has_motion_verb, offset_score, read_manifest)
from moco_kit.errors import GeneratorUnavailable, InvalidLength, NoMotionVerb
from moco_kit.trainkit.corpus import make_synthetic_corpus


@pytest.mark.parametrize("prompt, expected", [
    ("A man in a red coat runs along the beach at sunset", "a man runs"),
    ("a woman jumps", "a woman jumps"),
    ("The old man slowly walks his dog in the park", "the man walks his dog"),
    ("A tall man wearing a hat kicks a red ball on the grass", "a man kicks a ball"),
    ("A girl jumps and then spins in a studio", "a girl jumps and spins"),
])
def test_extraction_examples(prompt, expected):
    assert extract_motion_prompt(prompt) == expected


def test_no_motion_verb_returns_prompt_with_warning():
    p = "A sunny beach with palm trees"
    with pytest.warns(NoMotionVerb):
        assert extract_motion_prompt(p) == p
    assert not has_motion_verb(p)
    with pytest.raises(ValueError):
        extract_motion_prompt("  ")


def test_lexicon_size_and_adapters():
    assert 55 <= len(MOTION_LEXICON) <= 70
    assert LexiconExtractor().extract("a boy hops") == "a boy hops"
    with pytest.raises(GeneratorUnavailable):
        ExternalLLMExtractor().extract("a boy hops")


_WORDS = st.sampled_from("a the man woman red in on park runs walked jumping slowly "
                         "ball kicks and then with dog happily beach".split())


@settings(max_examples=100)
@given(st.lists(_WORDS, min_size=1, max_size=12))
def test_extraction_is_idempotent(words):
    p = " ".join(words)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoMotionVerb)
        once = extract_motion_prompt(p)
        assert extract_motion_prompt(once) == once


def test_offset_score_examples():
    assert offset_score(np.zeros((5, 3, 2))) == 0.0
    two = np.array([[[0.0, 0.0]], [[0.3, 0.4]]])
    assert math.isclose(offset_score(two), 0.5 / math.sqrt(2), rel_tol=1e-15)
    assert abs(offset_score(two) - 0.35355) < 1e-5
    with pytest.raises(InvalidLength):
        offset_score(np.zeros((1, 3, 2)))


@settings(max_examples=50)
@given(seed=st.integers(0, 10_000), scale=st.floats(1.0, 5.0))
def test_offset_score_reversal_and_scaling(seed, scale):
    kp = np.random.default_rng(seed).random((6, 4, 2))
    assert math.isclose(offset_score(kp[::-1]), offset_score(kp), rel_tol=1e-12)
    scaled = kp[:1] + scale * (kp - kp[:1])
    rec = filter_clip(ClipRecord("c"), keypoints2d=kp * 0.5 + 0.25)
    rec_scaled = filter_clip(ClipRecord("c"), keypoints2d=scaled * 0.5 + 0.25)
    assert rec_scaled.offset_score >= rec.offset_score - 1e-12
    if rec.offset_score > 0.1:
        assert rec_scaled.offset_score > 0.1


def _record(o, coverage=1.0):
    return ClipRecord("c", offset_score=o, body_coverage=coverage)


def test_threshold_boundary():
    assert not filter_clip(_record(0.1)).accepted
    assert filter_clip(_record(0.1)).reject_reason == "low_motion"
    assert filter_clip(_record(np.nextafter(0.1, 1.0))).accepted
    assert filter_clip(_record(0.5)).accepted
    r = filter_clip(_record(0.5, coverage=0.8))
    assert not r.accepted and r.reject_reason == "not_whole_body"
    assert filter_clip(_record(0.05, 0.5)).reject_reason == "low_motion+not_whole_body"


def test_body_coverage_counts_frames_with_every_joint_inside():
    kp = np.full((10, 22, 2), 0.5)
    kp[:2, 10, 1] = 1.2  # one ankle below the frame in 20% of frames
    assert body_coverage(kp) == 0.8
    rec = filter_clip(ClipRecord("c"), keypoints2d=kp + np.linspace(0, 0.3, 10)[:, None, None])
    assert rec.offset_score > 0.1 and not rec.whole_body and not rec.accepted


def test_empty_corpus_gives_header_only(tmp_path):
    (tmp_path / "corpus").mkdir()
    out = tmp_path / "m.jsonl"
    assert build_manifest(tmp_path / "corpus", out) == []
    lines = out.read_text().splitlines()
    assert len(lines) == 1
    header = json.loads(lines[0])
    assert header["manifest"] == "moco-kit/manifest/1" and "clip_id" in header["fields"]


def test_ten_clip_corpus_seven_accepted(tmp_path):
    motions = ("walk", "run", "jump", "wave", "walk", "run", "squat", "jump", "walk", "wave")
    make_synthetic_corpus(10, 3, tmp_path / "c", motions=motions)
    _, records = read_manifest(tmp_path / "c" / "manifest.jsonl")
    assert len(records) == 10
    assert sum(r.accepted for r in records) == 7
    assert {r.reject_reason for r in records if not r.accepted} == {"low_motion"}
    assert [r.clip_id for r in records] == sorted(r.clip_id for r in records)


def test_missing_files_are_flagged_not_dropped(tmp_path):
    make_synthetic_corpus(2, 0, tmp_path / "c", motions=("walk",))
    (tmp_path / "c" / "clips" / "clip_0001" / "mask.npy").unlink()
    (tmp_path / "c" / "clips" / "clip_0002").mkdir()
    records = build_manifest(tmp_path / "c" / "clips", tmp_path / "m.jsonl")
    assert len(records) == 3
    assert records[0].accepted
    assert records[1].reject_reason == "incomplete" and "missing:mask.npy" in records[1].flags
    assert records[2].reject_reason == "incomplete"


def test_manifest_is_deterministic(tmp_path):
    make_synthetic_corpus(3, 0, tmp_path / "c")
    a = build_manifest(tmp_path / "c" / "clips", tmp_path / "a.jsonl")
    b = build_manifest(tmp_path / "c" / "clips", tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert [r.to_json() for r in a] == [r.to_json() for r in b]
