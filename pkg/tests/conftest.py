import numpy as np
import pytest

from skelrec import skeleton as skel
from skelrec.pseudoimage import encode


def dissimilarity_oracle(members) -> int:
    """Brute-force dissimilarity: literal triple loop over the definition.

    For every member l and joint m, the joint's displacement is the sum over
    the other members q of |position of m in l - position of m in q|; the
    set's score is the sum over all (l, m). Written independently of the
    library implementation on purpose.
    """
    members = [list(int(v) for v in row) for row in members]
    L = len(members)
    total = 0
    for l in range(L):
        for m in members[l]:
            for q in range(L):
                if q == l:
                    continue
                total += abs(members[l].index(m) - members[q].index(m))
    return total


def random_members(rng: np.random.Generator, L: int, M: int) -> np.ndarray:
    return np.stack([rng.permutation(M) for _ in range(L)]).astype(np.int64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240816)


def make_sequence(rng: np.random.Generator, frames: int = 25, label: int = 0) -> skel.ActionSequence:
    joints = rng.normal(size=(frames, skel.NUM_JOINTS, 3))
    return skel.ActionSequence(
        joints=joints,
        label=label,
        subject_id=1,
        camera_id=1,
        source_id="fixture",
        setup_id=1,
        replication_id=1,
    )


def encode_identity(seq: skel.ActionSequence) -> np.ndarray:
    return encode(seq, np.arange(skel.NUM_JOINTS), seq.num_frames)[0]
