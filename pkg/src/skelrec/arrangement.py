"""Joint arrangements: sampling, dissimilarity scoring, and subset selection.

A joint arrangement is a permutation of the M skeleton joint indices; it fixes
the column order of a pseudo-image. An arrangement set holds L such
permutations, one per downstream classifier. Sets whose members place each
joint at widely scattered positions are preferred: the dissimilarity score of
a set sums, over every joint and every ordered pair of members, the absolute
difference between the positions the two members assign to that joint.
``select_best`` draws N random sets and keeps the highest-scoring one.

An arrangement set is represented as an int64 array of shape (L, M) whose
rows are permutations of ``range(M)``.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

__all__ = [
    "sample_set",
    "draw_seeds",
    "positions",
    "joint_displacement",
    "dissimilarity",
    "max_dissimilarity",
    "select_best",
    "save_arrangement_set",
    "load_arrangement_set",
    "arrangement_file_sha256",
]


def validate_set(members: np.ndarray) -> np.ndarray:
    """Check that every row of ``members`` is a permutation of range(M)."""
    members = np.asarray(members)
    if not np.issubdtype(members.dtype, np.integer):
        raise ValueError(f"arrangement indices must be integers, got dtype {members.dtype}")
    members = members.astype(np.int64)
    if members.ndim != 2:
        raise ValueError(f"arrangement set must be 2-D (L, M), got shape {members.shape}")
    L, M = members.shape
    expected = np.arange(M)
    for l in range(L):
        if not np.array_equal(np.sort(members[l]), expected):
            raise ValueError(f"member {l} is not a permutation of range({M}): {members[l]}")
    return members


def sample_set(rng_seed: int, L: int, M: int) -> np.ndarray:
    """Draw L independent uniform random permutations of range(M).

    Deterministic given ``rng_seed``. Duplicate members may occur; they are
    kept (a duplicate only lowers the set's dissimilarity score).
    """
    if L < 1 or M < 1:
        raise ValueError(f"L and M must be positive, got L={L}, M={M}")
    rng = np.random.default_rng(rng_seed)
    return np.stack([rng.permutation(M) for _ in range(L)]).astype(np.int64)


def draw_seeds(rng_seed: int, N: int) -> np.ndarray:
    """Per-draw seeds for N candidate sets, split from one root seed.

    This is part of the selection contract: draw i of ``select_best`` is
    exactly ``sample_set(draw_seeds(seed, N)[i], L, M)``, so any worker
    layout (or an external replay) enumerates identical candidates.
    """
    return np.random.SeedSequence(rng_seed).generate_state(N, dtype=np.uint64)


def positions(members: np.ndarray) -> np.ndarray:
    """Position of each joint in each member.

    Returns pos of shape (L, M) with ``pos[l, m]`` the column index at which
    joint ``m`` appears in member ``l`` (the inverse permutation of each row).
    """
    members = np.asarray(members, dtype=np.int64)
    return np.argsort(members, axis=1)


def joint_displacement(m: int, l: int, members: np.ndarray) -> int:
    """Total displacement of joint ``m`` in member ``l`` against all others.

    Sum over members q != l of |pos_l(m) - pos_q(m)|, where pos_a(m) is the
    position joint m occupies in member a.
    """
    pos = positions(members)
    L = pos.shape[0]
    if not (0 <= l < L):
        raise ValueError(f"member index {l} out of range for L={L}")
    if not (0 <= m < pos.shape[1]):
        raise ValueError(f"joint index {m} out of range for M={pos.shape[1]}")
    diffs = np.abs(pos[l, m] - pos[:, m])
    return int(diffs.sum() - diffs[l])  # diffs[l] is 0; kept explicit


def dissimilarity(members: np.ndarray) -> int:
    """Dissimilarity score of an arrangement set.

    Exact integer double sum of ``joint_displacement`` over every member l
    and joint m. Zero iff all members are identical; at most
    ``max_dissimilarity(L, M)``.
    """
    pos = positions(members)
    # |pos[l, m] - pos[q, m]| over all ordered pairs (l, q) and joints m.
    diff = np.abs(pos[:, None, :] - pos[None, :, :])
    return int(diff.sum())


def max_dissimilarity(L: int, M: int) -> int:
    """Upper bound L*(L-1)*floor(M^2/2), tight for L=2 with a reversal pair."""
    return L * (L - 1) * (M * M // 2)


def select_best(rng_seed: int, N: int, L: int, M: int) -> tuple[np.ndarray, int]:
    """Draw N candidate arrangement sets and return the highest-scoring one.

    Candidate i is ``sample_set(draw_seeds(rng_seed, N)[i], L, M)``. Ties are
    broken in favour of the earliest draw. Deterministic given the seed.

    Returns (members, score).
    """
    if N < 1:
        raise ValueError(f"N must be positive, got {N}")
    seeds = draw_seeds(rng_seed, N)
    best_members = None
    best_score = -1
    for s in seeds:
        members = sample_set(int(s), L, M)
        score = dissimilarity(members)
        if score > best_score:
            best_members = members
            best_score = score
    return best_members, best_score


def save_arrangement_set(
    path: str | Path,
    members: np.ndarray,
    *,
    N: int,
    seed: int,
    score: int | None = None,
) -> None:
    """Write a selected arrangement set to its text interchange format.

    Header line carries M, L, N, seed, and the set's score; each following
    line is one permutation as space-separated joint indices. This file is
    the contract between the selection stage and the classifier stage.
    """
    members = validate_set(members)
    L, M = members.shape
    if score is None:
        score = dissimilarity(members)
    lines = [f"M={M} L={L} N={N} seed={seed} score={score}"]
    lines += [" ".join(str(int(j)) for j in row) for row in members]
    Path(path).write_text("\n".join(lines) + "\n")


def load_arrangement_set(path: str | Path) -> tuple[np.ndarray, dict]:
    """Read an arrangement-set file; returns (members, header dict)."""
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty arrangement file")
    header = {}
    for field in lines[0].split():
        key, _, value = field.partition("=")
        header[key] = int(value)
    for key in ("M", "L", "N", "seed", "score"):
        if key not in header:
            raise ValueError(f"{path}: header missing {key!r}")
    members = np.array([[int(tok) for tok in ln.split()] for ln in lines[1:]], dtype=np.int64)
    if members.shape != (header["L"], header["M"]):
        raise ValueError(
            f"{path}: body shape {members.shape} does not match header "
            f"(L={header['L']}, M={header['M']})"
        )
    validate_set(members)
    if dissimilarity(members) != header["score"]:
        raise ValueError(f"{path}: header score {header['score']} does not match body")
    return members, header


def arrangement_file_sha256(path: str | Path) -> str:
    """Hex digest of an arrangement file, for controlled-comparison checks."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
