"""Dataset curation: motion-prompt extraction, motion-richness and whole-body filters, manifests."""
from __future__ import annotations

import json
import os
import re
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import GeneratorUnavailable, InvalidLength, NoMotionVerb

MOTION_LEXICON = frozenset("""
walk run jog sprint jump hop leap skip dance wave squat crouch spin twirl turn
kick punch throw catch climb crawl swim stretch bend lift push pull swing march
stride stroll skate ski bow kneel sit stand lunge roll flip cartwheel box fight
chase hike pace shuffle step tiptoe limp stumble fall rise raise clap stomp
bounce sway rotate lean reach dive slide wander
""".split())

_IRREGULAR = {
    "ran": "run", "swam": "swim", "threw": "throw", "caught": "catch", "fell": "fall",
    "rose": "rise", "sat": "sit", "stood": "stand", "knelt": "kneel", "leapt": "leap",
    "dove": "dive", "slid": "slide", "strode": "stride", "spun": "spin", "swung": "swing",
    "fought": "fight", "bent": "bend",
}
DETERMINERS = frozenset("a an the this that one two three some his her their its my".split())
BOUNDARY = frozenset("""
in on at with wearing along across near by under over through from into onto of beside
behind around who which while and then toward towards against past during before after
""".split())

_LY_NOUNS = frozenset("family ally belly bully lily fly holly jelly".split())

MANIFEST_VERSION = "moco-kit/manifest/1"
OFFSET_THRESHOLD = 0.1


def lemma(word: str, lexicon=MOTION_LEXICON) -> str | None:
    """Lexicon verb for an inflected form, or None."""
    if word in lexicon:
        return word
    if word in _IRREGULAR and _IRREGULAR[word] in lexicon:
        return _IRREGULAR[word]
    candidates = []
    for suffix in ("ing", "ed"):
        if word.endswith(suffix) and len(word) > len(suffix) + 1:
            stem = word[: -len(suffix)]
            candidates += [stem, stem + "e"]
            if len(stem) > 2 and stem[-1] == stem[-2]:
                candidates.append(stem[:-1])
    if word.endswith("ies"):
        candidates.append(word[:-3] + "y")
    if word.endswith("es"):
        candidates.append(word[:-2])
    if word.endswith("s"):
        candidates.append(word[:-1])
    for c in candidates:
        if c in lexicon:
            return c
    return None


def _is_adverb(word: str) -> bool:
    return word.endswith("ly") and word not in _LY_NOUNS


def _noun_phrase(words: list[str]) -> list[str]:
    """Determiner (if any) plus head noun; adjectives in between are dropped."""
    words = [w for w in words if not _is_adverb(w)]
    if not words:
        return []
    head = words[-1]
    if words[0] in DETERMINERS and len(words) > 1:
        return [words[0], head]
    return [head]


def _split_prompt(p: str, lexicon) -> tuple[list[str], list[int]]:
    words = re.findall(r"[a-z']+", p.lower())
    verbs = [i for i, w in enumerate(words) if lemma(w, lexicon) is not None]
    return words, verbs


def _verb_phrase(words: list[str], i: int, lexicon) -> tuple[list[str], int]:
    """Verb at ``i`` plus an optional object noun phrase; returns (phrase, next index)."""
    phrase = [words[i]]
    j = i + 1
    while j < len(words) and _is_adverb(words[j]):
        j += 1
    if j < len(words) and words[j] in DETERMINERS:
        k = j + 1
        while k < len(words) and words[k] not in BOUNDARY and lemma(words[k], lexicon) is None:
            k += 1
        phrase += _noun_phrase(words[j:k])
        j = k
    return phrase, j


def extract_motion_prompt(p: str, lexicon=MOTION_LEXICON) -> str:
    """Rule-based motion-specific subset of a prompt.

    Keeps the subject (determiner + head noun) and every verb / verb-object
    phrase headed by a lexicon verb, joined by "and". When the prompt has no
    motion verb it is returned unchanged with a :class:`NoMotionVerb` warning.
    """
    if not p or not p.strip():
        raise ValueError("prompt must be non-empty")
    words, verbs = _split_prompt(p, lexicon)
    if not verbs:
        warnings.warn(NoMotionVerb(f"no motion verb in {p!r}"), stacklevel=2)
        return p
    first = verbs[0]
    subject_end = first
    for i in range(first):
        if words[i] in BOUNDARY:
            subject_end = i
            break
    out = _noun_phrase(words[:subject_end])
    phrase, j = _verb_phrase(words, first, lexicon)
    out += phrase
    while j < len(words):
        if words[j] in ("and", "then"):
            k = j + 1
            while k < len(words) and _is_adverb(words[k]) and lemma(words[k], lexicon) is None:
                k += 1
            if k < len(words) and lemma(words[k], lexicon) is not None:
                phrase, j = _verb_phrase(words, k, lexicon)
                out += ["and"] + phrase
                continue
        j += 1
    return " ".join(out)


class LexiconExtractor:
    """Default prompt extractor: the deterministic lexicon rule."""

    def __init__(self, lexicon=MOTION_LEXICON):
        self.lexicon = lexicon

    def extract(self, p: str) -> str:
        return extract_motion_prompt(p, self.lexicon)


class ExternalLLMExtractor:
    """Slot for a language-model extractor; no model ships with the package."""

    def __init__(self, endpoint: str | None = None):
        self.endpoint = endpoint

    def extract(self, p: str) -> str:
        raise GeneratorUnavailable(
            f"no language-model prompt extractor is available (endpoint={self.endpoint!r})")


def has_motion_verb(p: str, lexicon=MOTION_LEXICON) -> bool:
    return bool(_split_prompt(p, lexicon)[1])


# -- numeric filters ----------------------------------------------------------

def offset_score(keypoints2d: np.ndarray) -> float:
    """Average keypoint offset ō over the clip, in diagonal-normalized units.

    Each keypoint's offset is its accumulated frame-to-frame displacement
    √(Δu² + Δv²)/√2 over the whole video; ō averages that over keypoints.
    """
    kp = np.asarray(keypoints2d, dtype=np.float64)
    if kp.ndim != 3 or kp.shape[-1] != 2:
        raise ValueError(f"keypoints must be (T, K, 2), got {kp.shape}")
    if kp.shape[0] < 2:
        raise InvalidLength("offset score needs at least 2 frames")
    step = np.sqrt(np.sum(np.diff(kp, axis=0) ** 2, axis=-1)) / np.sqrt(2.0)
    return float(np.mean(np.sum(step, axis=0)))


def body_coverage(keypoints2d: np.ndarray, joints=None) -> float:
    """Fraction of frames in which every listed joint lies inside the unit image square."""
    kp = np.asarray(keypoints2d, dtype=np.float64)
    if joints is not None:
        kp = kp[:, list(joints)]
    inside = np.all((kp >= 0.0) & (kp < 1.0), axis=(-1, -2))
    return float(np.mean(inside))


@dataclass
class ClipRecord:
    clip_id: str
    prompt: str = ""
    motion_prompt: str = ""
    keypoint_path: str | None = None
    video_path: str | None = None
    mask_path: str | None = None
    skeleton_path: str | None = None
    offset_score: float | None = None
    body_coverage: float | None = None
    whole_body: bool = False
    accepted: bool = False
    reject_reason: str | None = None
    flags: list[str] = field(default_factory=list)
    # reserved for quality scores from an external video benchmark
    motion_smoothness: float | None = None
    dynamic_degree: float | None = None
    imaging_quality: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


MANIFEST_FIELDS = [f.name for f in fields(ClipRecord)]


def filter_clip(record: ClipRecord, threshold: float = OFFSET_THRESHOLD, whole_body_joints=None,
                min_frame_fraction: float = 0.9, keypoints2d: np.ndarray | None = None) -> ClipRecord:
    """Accept iff ō > threshold and the whole-body coverage reaches ``min_frame_fraction``."""
    if keypoints2d is not None:
        record.offset_score = offset_score(keypoints2d)
        record.body_coverage = body_coverage(keypoints2d, whole_body_joints)
    if record.offset_score is None or record.body_coverage is None:
        raise ValueError("record needs offset_score and body_coverage before filtering")
    record.whole_body = record.body_coverage >= min_frame_fraction
    reasons = []
    if not record.offset_score > threshold:
        reasons.append("low_motion")
    if not record.whole_body:
        reasons.append("not_whole_body")
    record.accepted = not reasons
    record.reject_reason = "+".join(reasons) or None
    return record


# -- manifest -----------------------------------------------------------------

CLIP_FILES = {
    "keypoint_path": "keypoints.json",
    "video_path": "video.npy",
    "mask_path": "mask.npy",
    "skeleton_path": "skeleton.npy",
}


def normalized_keypoints(clip_dir: Path) -> np.ndarray:
    """Project a clip's 3D keypoints with its camera and normalize by the image size."""
    from .motion import read_keypoints
    from .render import CameraModel, project

    seq = read_keypoints(clip_dir / "keypoints.json")
    cam = CameraModel.from_dict(json.loads((clip_dir / "camera.json").read_text()))
    uv = project(seq, cam)
    return uv / np.array([cam.width, cam.height], dtype=np.float64)


def curate_clip(clip_dir: Path, root: Path, threshold: float = OFFSET_THRESHOLD) -> ClipRecord:
    rec = ClipRecord(clip_id=clip_dir.name)
    missing = []
    for attr, fname in CLIP_FILES.items():
        path = clip_dir / fname
        if path.exists():
            setattr(rec, attr, path.relative_to(root).as_posix())
        else:
            missing.append(fname)
    for fname in ("prompt.txt", "camera.json"):
        if not (clip_dir / fname).exists():
            missing.append(fname)
    if (clip_dir / "prompt.txt").exists():
        rec.prompt = (clip_dir / "prompt.txt").read_text().strip()
        if rec.prompt:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                rec.motion_prompt = extract_motion_prompt(rec.prompt)
            if any(issubclass(w.category, NoMotionVerb) for w in caught):
                rec.flags.append("no_motion_verb")
    if missing:
        rec.accepted = False
        rec.reject_reason = "incomplete"
        rec.flags.append("missing:" + ",".join(sorted(missing)))
        return rec
    try:
        kp = normalized_keypoints(clip_dir)
        filter_clip(rec, threshold, keypoints2d=kp)
    except (ValueError, KeyError, OSError) as exc:
        rec.accepted = False
        rec.reject_reason = "incomplete"
        rec.flags.append(f"unreadable:{type(exc).__name__}")
    return rec


def build_manifest(corpus_dir, out_path=None, threshold: float = OFFSET_THRESHOLD) -> list[ClipRecord]:
    """One record per clip subdirectory, sorted by clip_id, written as JSON lines.

    The first line is a header carrying the format version, threshold and
    field list; rejected and incomplete clips are kept with a reason code.
    """
    root = Path(corpus_dir)
    clip_dirs = sorted((d for d in root.iterdir() if d.is_dir()), key=lambda d: d.name) \
        if root.exists() else []
    records = [curate_clip(d, root, threshold) for d in clip_dirs]
    if out_path is not None:
        write_manifest(out_path, records, threshold, root)
    return records


def write_manifest(path, records: list[ClipRecord], threshold: float = OFFSET_THRESHOLD,
                   root=None) -> None:
    """Header line then one record per line; ``root`` is stored relative to the manifest."""
    header = {"manifest": MANIFEST_VERSION, "threshold": threshold, "fields": MANIFEST_FIELDS}
    if root is not None:
        header["root"] = os.path.relpath(Path(root).resolve(), Path(path).resolve().parent)
    lines = [json.dumps(header, sort_keys=True)] + [r.to_json() for r in records]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> tuple[dict, list[ClipRecord]]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path} is empty")
    header = json.loads(lines[0])
    if header.get("manifest") != MANIFEST_VERSION:
        raise ValueError(f"{path} is not a {MANIFEST_VERSION} manifest")
    records = [ClipRecord(**json.loads(line)) for line in lines[1:] if line.strip()]
    return header, records


def manifest_root(path, header: dict) -> Path:
    """Directory that the record paths are relative to."""
    return (Path(path).resolve().parent / header.get("root", ".")).resolve()
