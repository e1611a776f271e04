"""Skeleton sequence I/O: parsing, splits, frame sampling, synthetic data.

The on-disk unit is a text skeleton file (one action sample): line 1 holds the
frame count; each frame starts with a body count; each body is a 10-field
body-info line, a joint count (25), and 25 joint lines of 12 space-separated
fields whose first three are the x y z camera-space coordinates (the remaining
nine are read and discarded). Sample metadata is carried by the file name,
``SsssCcccPpppRrrrAaaa`` with zero-padded integers: setup, camera, performer
(subject), replication, action id.

In memory a sample is an :class:`ActionSequence` whose ``joints`` array has
shape (frames, 25, 3).
"""

from __future__ import annotations

import io
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

NUM_JOINTS = 25
DEFAULT_FRAMES = 25

# The 14 supported daily-action classes: (display name, action id in the
# source dataset's file names). Class index = position in this table. The
# table is configuration, not a constant of the format: pass a different
# table to the parser to retarget the label space.
DEFAULT_ACTION_TABLE: tuple[tuple[str, int], ...] = (
    ("pick up", 6),
    ("sit down", 8),
    ("stand up", 9),
    ("put on jacket", 14),
    ("hand waving", 23),
    ("take off jacket", 15),
    ("put on a shoe", 16),
    ("put on glasses", 18),
    ("take off glasses", 19),
    ("put on hat/cap", 20),
    ("take off hat/cap", 21),
    ("cheer up", 22),
    ("hopping", 26),
    ("jump up", 27),
)

# Published convention for the source dataset's two split definitions.
DEFAULT_TRAIN_SUBJECTS = frozenset(
    {1, 2, 4, 5, 8, 9, 13, 14, 15, 16, 17, 18, 19, 25, 27, 28, 31, 34, 35, 38}
)
DEFAULT_TRAIN_CAMERAS = frozenset({2, 3})

_FILENAME_RE = re.compile(r"S(\d{3})C(\d{3})P(\d{3})R(\d{3})A(\d{3})")


class ParseError(ValueError):
    """Malformed skeleton file; message names the offending line."""


class EmptySequenceError(ValueError):
    """Skeleton file contains no usable frames."""


def action_id_to_label(table: tuple[tuple[str, int], ...] = DEFAULT_ACTION_TABLE) -> dict[int, int]:
    return {action_id: idx for idx, (_, action_id) in enumerate(table)}


def label_to_action_id(table: tuple[tuple[str, int], ...] = DEFAULT_ACTION_TABLE) -> dict[int, int]:
    return {idx: action_id for idx, (_, action_id) in enumerate(table)}


def num_classes(table: tuple[tuple[str, int], ...] = DEFAULT_ACTION_TABLE) -> int:
    return len(table)


@dataclass
class ActionSequence:
    """One action sample: ordered frames of 25 three-dimensional joints."""

    joints: np.ndarray  # (frames, 25, 3) float64
    label: int
    subject_id: int
    camera_id: int
    source_id: str
    setup_id: int = 1
    replication_id: int = 1

    def __post_init__(self) -> None:
        self.joints = np.asarray(self.joints, dtype=np.float64)
        if self.joints.ndim != 3 or self.joints.shape[1:] != (NUM_JOINTS, 3):
            raise ValueError(
                f"joints must have shape (frames, {NUM_JOINTS}, 3), got {self.joints.shape}"
            )
        if self.joints.shape[0] < 1:
            raise EmptySequenceError("sequence must contain at least one frame")
        if not np.isfinite(self.joints).all():
            raise ValueError("joint coordinates must be finite")

    @property
    def num_frames(self) -> int:
        return self.joints.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ActionSequence):
            return NotImplemented
        return (
            np.array_equal(self.joints, other.joints)
            and self.label == other.label
            and self.subject_id == other.subject_id
            and self.camera_id == other.camera_id
            and self.source_id == other.source_id
        )


@dataclass(frozen=True)
class SplitPolicy:
    """Train/test split rule: by performer identity or by camera viewpoint."""

    kind: str  # "cross_subject" | "cross_view"
    train_subjects: frozenset[int] = DEFAULT_TRAIN_SUBJECTS
    train_cameras: frozenset[int] = DEFAULT_TRAIN_CAMERAS

    def __post_init__(self) -> None:
        if self.kind not in ("cross_subject", "cross_view"):
            raise ValueError(f"unknown split kind {self.kind!r}")

    def is_train(self, seq: ActionSequence) -> bool:
        if self.kind == "cross_subject":
            return seq.subject_id in self.train_subjects
        return seq.camera_id in self.train_cameras


def parse_filename_metadata(filename: str) -> dict[str, int]:
    """Decode setup/camera/subject/replication/action ids from a file name."""
    m = _FILENAME_RE.search(Path(filename).name)
    if m is None:
        raise ParseError(
            f"file name {filename!r} does not follow the SsssCcccPpppRrrrAaaa pattern"
        )
    setup, camera, subject, repl, action = (int(g) for g in m.groups())
    return {
        "setup_id": setup,
        "camera_id": camera,
        "subject_id": subject,
        "replication_id": repl,
        "action_id": action,
    }


def parse_skeleton_file(
    data: bytes | str | io.IOBase,
    filename: str,
    action_table: tuple[tuple[str, int], ...] = DEFAULT_ACTION_TABLE,
) -> ActionSequence | None:
    """Parse one skeleton text file into an ActionSequence.

    When a frame holds multiple tracked bodies, the first body record is
    taken; frames with zero bodies are dropped. Returns None (a skip, not an
    error) when the file's action id is outside ``action_table``.

    Raises ParseError naming the offending line on malformed input and
    EmptySequenceError when no frame carries a body.
    """
    meta = parse_filename_metadata(filename)
    label_of = action_id_to_label(action_table)
    if meta["action_id"] not in label_of:
        return None

    if isinstance(data, bytes):
        text = data.decode("utf-8")
    elif isinstance(data, str):
        text = data
    else:
        raw = data.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    lines = text.splitlines()
    lineno = 0

    def next_line() -> str:
        nonlocal lineno
        if lineno >= len(lines):
            raise ParseError(f"{filename}: unexpected end of file after line {lineno}")
        lineno += 1
        return lines[lineno - 1]

    def next_int(what: str) -> int:
        token = next_line().strip()
        try:
            return int(token)
        except ValueError:
            raise ParseError(f"{filename}:{lineno}: expected {what}, got {token!r}") from None

    frame_count = next_int("frame count")
    if frame_count <= 0:
        raise EmptySequenceError(f"{filename}: file declares {frame_count} frames")

    frames: list[np.ndarray] = []
    for _ in range(frame_count):
        body_count = next_int("body count")
        frame_joints = None
        for b in range(body_count):
            next_line()  # body-info line: 10 tracking fields, not used
            joint_count = next_int("joint count")
            if joint_count != NUM_JOINTS:
                raise ParseError(
                    f"{filename}:{lineno}: expected {NUM_JOINTS} joints, got {joint_count}"
                )
            joints = np.empty((NUM_JOINTS, 3), dtype=np.float64)
            for k in range(NUM_JOINTS):
                tokens = next_line().split()
                if len(tokens) < 3:
                    raise ParseError(
                        f"{filename}:{lineno}: joint line has {len(tokens)} fields, expected 12"
                    )
                try:
                    joints[k] = [float(tokens[0]), float(tokens[1]), float(tokens[2])]
                except ValueError:
                    raise ParseError(
                        f"{filename}:{lineno}: non-numeric joint coordinate in {tokens[:3]!r}"
                    ) from None
            if b == 0:  # first body record wins; later bodies are read and dropped
                frame_joints = joints
        if frame_joints is not None:
            frames.append(frame_joints)

    if not frames:
        raise EmptySequenceError(f"{filename}: no frame contains a body")

    return ActionSequence(
        joints=np.stack(frames),
        label=label_of[meta["action_id"]],
        subject_id=meta["subject_id"],
        camera_id=meta["camera_id"],
        source_id=Path(filename).stem,
        setup_id=meta["setup_id"],
        replication_id=meta["replication_id"],
    )


def sequence_filename(
    seq: ActionSequence,
    action_table: tuple[tuple[str, int], ...] = DEFAULT_ACTION_TABLE,
) -> str:
    """Canonical ``SsssCcccPpppRrrrAaaa.skeleton`` name for a sequence."""
    action_id = label_to_action_id(action_table)[seq.label]
    return (
        f"S{seq.setup_id:03d}C{seq.camera_id:03d}P{seq.subject_id:03d}"
        f"R{seq.replication_id:03d}A{action_id:03d}.skeleton"
    )


def serialize_skeleton(seq: ActionSequence) -> str:
    """Render a sequence back to the text format; parse round-trips exactly.

    Coordinates use shortest round-trip float formatting; body-info fields
    and the nine trailing joint fields are written as zeros.
    """
    out = [str(seq.num_frames)]
    for t in range(seq.num_frames):
        out.append("1")
        out.append(" ".join(["0"] * 10))
        out.append(str(NUM_JOINTS))
        for k in range(NUM_JOINTS):
            x, y, z = (float(v) for v in seq.joints[t, k])
            out.append(f"{x!r} {y!r} {z!r} " + " ".join(["0"] * 9))
    return "\n".join(out) + "\n"


def sample_frames(seq: ActionSequence, T: int = DEFAULT_FRAMES) -> ActionSequence:
    """Reduce (or pad) a sequence to exactly T frames.

    With at least 3*T input frames, frame i of the output is input frame 3*i
    (the first of each consecutive triple, truncated to T). Shorter inputs of
    at least T frames are resampled uniformly at indices floor(i*len/T);
    inputs shorter than T are extended by repeating the last frame.
    """
    if T < 1:
        raise ValueError(f"T must be positive, got {T}")
    n = seq.num_frames
    if n >= 3 * T:
        idx = 3 * np.arange(T)
    elif n >= T:
        idx = (np.arange(T) * n) // T
    else:
        idx = np.concatenate([np.arange(n), np.full(T - n, n - 1)])
    return replace(seq, joints=seq.joints[idx].copy())


def split_dataset(
    samples: list[ActionSequence], policy: SplitPolicy
) -> tuple[list[ActionSequence], list[ActionSequence]]:
    """Partition samples into (train, test) under a split policy."""
    train = [s for s in samples if policy.is_train(s)]
    test = [s for s in samples if not policy.is_train(s)]
    return train, test


# --- synthetic data -------------------------------------------------------

_SYNTH_SUBJECTS = 40
_SYNTH_CAMERAS = 3


def _class_motion_params(class_id: int) -> dict[str, np.ndarray]:
    """Fixed per-class trajectory family, independent of the sample seed.

    Classes differ in oscillation frequency and in per-joint amplitude and
    phase patterns; these survive the per-channel min-max normalisation of
    the pseudo-image codec, keeping classes separable by design.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=9_131, spawn_key=(class_id,)))
    return {
        "freq": 1.0 + 0.35 * class_id + rng.uniform(0.0, 0.25),
        "amp": rng.uniform(0.15, 0.75, size=(NUM_JOINTS, 3)),
        "phase": rng.uniform(0.0, 2.0 * np.pi, size=(NUM_JOINTS, 3)),
        "drift": rng.uniform(-0.4, 0.4, size=(1, NUM_JOINTS, 3)),
    }


def _base_pose(rng: np.random.Generator) -> np.ndarray:
    # A loose standing pose: joints spread vertically with small lateral jitter.
    y = np.linspace(-0.9, 0.9, NUM_JOINTS)
    pose = np.stack([0.1 * np.sin(np.arange(NUM_JOINTS)), y, 2.5 + 0.05 * np.cos(np.arange(NUM_JOINTS))], axis=1)
    return pose + rng.normal(0.0, 0.02, size=pose.shape)


def synth_generate(class_id: int, n_samples: int, seed: int) -> list[ActionSequence]:
    """Generate labelled synthetic skeleton sequences for one class.

    Deterministic given (class_id, n_samples, seed). Frame counts are drawn
    from [40, 120]; subject and camera ids cycle through the standard ranges
    so the split policies remain meaningful on synthetic data.
    """
    if not 0 <= class_id < len(DEFAULT_ACTION_TABLE):
        raise ValueError(f"class_id must be in [0, {len(DEFAULT_ACTION_TABLE)}), got {class_id}")
    params = _class_motion_params(class_id)
    samples = []
    for i in range(n_samples):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(class_id, i))
        )
        n_frames = int(rng.integers(40, 121))
        t = np.arange(n_frames)[:, None, None] / n_frames  # phase-normalised time
        pose = _base_pose(rng)[None, :, :]
        jitter = rng.uniform(-0.3, 0.3)
        wave = params["amp"][None, :, :] * np.sin(
            2.0 * np.pi * params["freq"] * t + params["phase"][None, :, :] + jitter
        )
        drift = params["drift"] * t
        noise = rng.normal(0.0, 0.03, size=(n_frames, NUM_JOINTS, 3))
        joints = pose + wave + drift + noise
        subject = 1 + (i % _SYNTH_SUBJECTS)
        camera = 1 + (i % _SYNTH_CAMERAS)
        samples.append(
            ActionSequence(
                joints=joints,
                label=class_id,
                subject_id=subject,
                camera_id=camera,
                source_id=f"synth-a{class_id:02d}-{i:05d}",
                setup_id=1 + (i // (_SYNTH_SUBJECTS * _SYNTH_CAMERAS)),
                replication_id=1,
            )
        )
    return samples


# --- dataset directories ---------------------------------------------------


def dump_dataset(
    samples: list[ActionSequence],
    out_dir: str | Path,
    action_table: tuple[tuple[str, int], ...] = DEFAULT_ACTION_TABLE,
) -> Path:
    """Write one skeleton file per sample plus a manifest; returns the dir.

    File names follow the SsssCcccPpppRrrrAaaa pattern; colliding names are
    disambiguated by bumping the replication counter.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    used: set[str] = set()
    for seq in samples:
        candidate = seq
        name = sequence_filename(candidate, action_table)
        while name in used:
            candidate = replace(candidate, replication_id=candidate.replication_id + 1)
            name = sequence_filename(candidate, action_table)
        used.add(name)
        (out_dir / name).write_text(serialize_skeleton(candidate))
        manifest.append(
            {
                "file": name,
                "source_id": seq.source_id,
                "label": seq.label,
                "subject_id": seq.subject_id,
                "camera_id": seq.camera_id,
            }
        )
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return out_dir


def load_dataset_dir(
    data_dir: str | Path,
    action_table: tuple[tuple[str, int], ...] = DEFAULT_ACTION_TABLE,
) -> list[ActionSequence]:
    """Parse every ``*.skeleton`` file in a directory, skipping other actions."""
    data_dir = Path(data_dir)
    samples = []
    for path in sorted(data_dir.glob("*.skeleton")):
        seq = parse_skeleton_file(path.read_bytes(), path.name, action_table)
        if seq is not None:
            samples.append(seq)
    return samples
