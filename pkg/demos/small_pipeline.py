"""Run the full three-level pipeline end to end on a small synthetic dataset.

Finishes in about a minute on one core and prints the per-classifier,
average, and consensus metric table plus the written artifacts.
"""

import sys
import time
from pathlib import Path

from skelrec.pipeline import RunConfig, format_rows, result_rows, run_pipeline

out = sys.argv[1] if len(sys.argv) > 1 else "runs/small_demo"

cfg = RunConfig(
    dataset="synthetic",
    classifier="cnn",
    ensemble_size=3,
    num_draws=200,
    seed=0,
    epochs=8,
    batch_size=32,
    synth_train_per_class=20,
    synth_test_per_class=10,
    out_dir=out,
)

start = time.perf_counter()
result = run_pipeline(cfg)
elapsed = time.perf_counter() - start

print(format_rows(result_rows(result)))
print(f"\narrangement score {result.arrangement_score} "
      f"(sha256 {result.arrangement_sha256[:12]}...)")
print(f"finished in {elapsed:.1f}s; artifacts:")
for path in sorted(Path(out).rglob("*")):
    if path.is_file():
        print(f"  {path}")
