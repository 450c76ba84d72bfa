"""Motion, annotation and project files, plus per-stage seed derivation.

Motions and annotations are JSON with keys in a fixed order; floats are
written with ``repr`` so every value survives a round trip bit for bit.
Byte-level layouts are described in FORMATS.md.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autolabel import WeightlessAnnotation
from .errors import DimensionError, FormatError
from .kinematics import KinematicTree
from .motion import MotionSequence

MOTION_FORMAT_VERSION = 1
ANNOTATION_FORMAT_VERSION = 1
MANIFEST_FORMAT_VERSION = 1


def stage_seed(seed: int, stage: str) -> int:
    """A 63-bit seed for ``stage`` derived from the global ``seed``."""
    h = hashlib.sha256(f"{stage}:{int(seed)}".encode()).digest()
    return int.from_bytes(h[:8], "little") >> 1


def _read_json(path) -> dict:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise FormatError(f"{path}: invalid UTF-8 at byte {e.start}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        offset = len(text[:e.pos].encode("utf-8"))
        raise FormatError(f"{path}: parse error at byte {offset}: {e.msg}") from None
    if not isinstance(d, dict):
        raise FormatError(f"{path}: top level must be an object")
    return d


def _check_version(d: dict, expected: int, what: str, path) -> None:
    v = d.get("format_version")
    if v != expected:
        raise FormatError(f"{path}: unsupported {what} format_version {v!r} (this build reads {expected})")


def _row(a) -> str:
    return "[" + ",".join(repr(float(x)) for x in a) + "]"


def _rows(name: str, arr) -> str:
    body = ",\n".join("  " + _row(r) for r in arr)
    return f'"{name}":[\n{body}\n]'


# -- motion ----------------------------------------------------------------------

def motion_to_text(seq: MotionSequence) -> str:
    parts = [
        f'"format_version":{MOTION_FORMAT_VERSION}',
        f'"fps":{seq.fps!r}',
        f'"n_frames":{len(seq)}',
        f'"K":{seq.K}',
        _rows("root_positions", seq.root_positions),
        _rows("root_orientations", seq.root_orientations),
        _rows("q", seq.q),
        _rows("qd", seq.qd) if seq.qd is not None else '"qd":null',
    ]
    return "{\n" + ",\n".join(parts) + "\n}\n"


def save_motion(seq: MotionSequence, path) -> None:
    Path(path).write_text(motion_to_text(seq))


def motion_from_dict(d: dict, tree: KinematicTree | None = None, path="<motion>") -> MotionSequence:
    _check_version(d, MOTION_FORMAT_VERSION, "motion", path)
    try:
        seq = MotionSequence(d["fps"], d["root_positions"], d["root_orientations"], d["q"], d.get("qd"))
    except KeyError as e:
        raise FormatError(f"{path}: missing field {e.args[0]!r}") from None
    except (TypeError, ValueError) as e:
        if isinstance(e, DimensionError):
            raise DimensionError(f"{path}: {e}") from None
        raise FormatError(f"{path}: {e}") from None
    if d.get("n_frames", len(seq)) != len(seq) or d.get("K", seq.K) != seq.K:
        raise DimensionError(f"{path}: header says {d.get('n_frames')} frames x K={d.get('K')}, "
                             f"data has {len(seq)} x {seq.K}")
    if tree is not None and seq.K != tree.K:
        raise DimensionError(f"{path}: motion has K={seq.K}, tree {tree.name!r} has K={tree.K}")
    return seq


def load_motion(path, tree: KinematicTree | None = None) -> MotionSequence:
    return motion_from_dict(_read_json(path), tree, path)


# -- annotations -------------------------------------------------------------------

def rle_encode(column) -> list[int]:
    """Alternating run lengths of a 0/1 column, starting with a (possibly empty) run of 0."""
    col = np.asarray(column).astype(np.uint8)
    runs, cur, n = [], 0, 0
    for v in col:
        if v != cur:
            runs.append(n)
            cur, n = v, 0
        n += 1
    runs.append(n)
    return runs


def rle_decode(runs, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=np.uint8)
    pos, val = 0, 0
    for r in runs:
        if r < 0 or pos + r > n:
            raise FormatError(f"run lengths exceed {n} frames")
        out[pos:pos + r] = val
        pos += r
        val ^= 1
    if pos != n:
        raise FormatError(f"run lengths cover {pos} of {n} frames")
    return out


def annotation_to_dict(ann: WeightlessAnnotation) -> dict:
    n, K = ann.labels.shape
    sets = []  # consecutive frames with the same active set collapse to [count, indices]
    for s in ann.active_sets:
        idx = sorted(s)
        if sets and sets[-1][1] == idx:
            sets[-1][0] += 1
        else:
            sets.append([1, idx])
    return {
        "format_version": ANNOTATION_FORMAT_VERSION,
        "n_frames": n,
        "K": K,
        "intervals": [list(iv) for iv in ann.intervals],
        "labels_rle": [rle_encode(ann.labels[:, k]) for k in range(K)],
        "active_sets_rle": sets,
        "params": dict(sorted(ann.params.items())),
    }


def annotation_from_dict(d: dict, tree: KinematicTree | None = None, path="<annotation>") -> WeightlessAnnotation:
    _check_version(d, ANNOTATION_FORMAT_VERSION, "annotation", path)
    try:
        n, K = int(d["n_frames"]), int(d["K"])
        cols = d["labels_rle"]
        if len(cols) != K:
            raise DimensionError(f"{path}: {len(cols)} label columns for K={K}")
        labels = np.stack([rle_decode(c, n) for c in cols], axis=1) if K else np.zeros((n, 0), np.uint8)
        sets = []
        for count, idx in d["active_sets_rle"]:
            sets.extend([frozenset(idx)] * int(count))
        intervals = tuple(tuple(iv) for iv in d["intervals"])
    except KeyError as e:
        raise FormatError(f"{path}: missing field {e.args[0]!r}") from None
    if len(sets) != n:
        raise DimensionError(f"{path}: active sets cover {len(sets)} of {n} frames")
    if tree is not None and K != tree.K:
        raise DimensionError(f"{path}: annotation has K={K}, tree has K={tree.K}")
    return WeightlessAnnotation(intervals, labels, tuple(sets), dict(d.get("params", {})))


def save_annotation(ann: WeightlessAnnotation, path) -> None:
    Path(path).write_text(json.dumps(annotation_to_dict(ann), separators=(",", ":")) + "\n")


def load_annotation(path, tree: KinematicTree | None = None) -> WeightlessAnnotation:
    return annotation_from_dict(_read_json(path), tree, path)


# -- project manifest --------------------------------------------------------------

@dataclass(frozen=True)
class ProjectManifest:
    tree: str
    scenes: tuple[str, ...] = ()
    motions: tuple[str, ...] = ()
    annotations: tuple[str, ...] = ()
    checkpoints: tuple[str, ...] = ()
    seed: int = 0
    root: Path = field(default=Path("."), compare=False)

    def resolve(self, rel: str) -> Path:
        return (self.root / rel).resolve()

    def to_dict(self) -> dict:
        return {"format_version": MANIFEST_FORMAT_VERSION, "tree": self.tree, "scenes": list(self.scenes),
                "motions": list(self.motions), "annotations": list(self.annotations),
                "checkpoints": list(self.checkpoints), "seed": self.seed}


def load_manifest(path) -> ProjectManifest:
    d = _read_json(path)
    _check_version(d, MANIFEST_FORMAT_VERSION, "manifest", path)
    if "tree" not in d:
        raise FormatError(f"{path}: missing field 'tree'")
    m = ProjectManifest(d["tree"], *(tuple(d.get(k, ())) for k in ("scenes", "motions", "annotations",
                                                                   "checkpoints")),
                        int(d.get("seed", 0)), Path(path).parent)
    missing = [p for p in (m.tree, *m.scenes, *m.motions, *m.annotations, *m.checkpoints)
               if not m.resolve(p).exists()]
    if missing:
        raise FormatError(f"{path}: referenced files not found: {', '.join(missing)}")
    return m


def save_manifest(m: ProjectManifest, path) -> None:
    Path(path).write_text(json.dumps(m.to_dict(), indent=2) + "\n")
