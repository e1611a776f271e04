"""Verify analytic gradients of all three model families by central differences.

Each model is built with float64 parameters, dropout disabled (eval mode is
the default), and checked against (f(w+h) - f(w-h)) / 2h on a seeded
subsample of entries per parameter block.
"""

import numpy as np

from skelrec.autodiff import cross_entropy, grad_check
from skelrec.models import (
    CnnClassifier,
    CnnConfig,
    ConsensusConfig,
    ConsensusMlp,
    VitClassifier,
    VitConfig,
)

rng = np.random.default_rng(0)


def check(name, model, forward):
    report = grad_check(forward, model.params, entries_per_block=4)
    print(f"{name}: {'PASS' if report.passed else 'FAIL'} "
          f"max_rel_err={report.max_rel_err:.3e} "
          f"({sum(b.checked for b in report.blocks)} entries over {len(report.blocks)} blocks)")
    if not report.passed:
        print(report.summary())


imgs = rng.integers(0, 256, size=(2, 25, 25, 3), dtype=np.uint8)
labels = np.array([3, 11])

vit = VitClassifier(VitConfig(num_blocks=2, embed_dim=32, num_heads=4, mlp_hidden=48),
                    seed=1, dtype=np.float64)
check("vit      ", vit, lambda: cross_entropy(vit.logits(imgs), labels))

cnn = CnnClassifier(CnnConfig(), seed=1, dtype=np.float64)
check("cnn      ", cnn, lambda: cross_entropy(cnn.logits(imgs), labels))

posts = rng.random((4, 5 * 14))
post_labels = np.array([0, 5, 9, 13])
mlp = ConsensusMlp(ConsensusConfig(num_classifiers=5), seed=1, dtype=np.float64)
check("consensus", mlp, lambda: cross_entropy(mlp.logits(posts), post_labels))
