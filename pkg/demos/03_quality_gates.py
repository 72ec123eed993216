"""Quality gating: multi-scale SSIM plus a pass/fail judge.

A pair survives when (a) its MS-SSIM composite clears the threshold, so the
edit did not wreck the rest of the scene, and (b) the judge confirms the
instruction was realized. Videos score five uniformly sampled frames and
need four of five judge passes. Run: python3 demos/03_quality_gates.py
"""

import tempfile
from pathlib import Path

import numpy as np

from editsynth import (
    RngState,
    StorePlan,
    StubJudge,
    build_store,
    filter_dataset,
    generate_entity_edit,
    ms_ssim,
    sample_frame_indices,
)

store = build_store(Path(tempfile.mkdtemp()) / "store", StorePlan(seed=11))
canvas = (256, 256)

# A real edit pair scores high: the change is local. A scrambled pair does not.
sample = generate_entity_edit("remove", "object", store, canvas, RngState(3, 0))
report = ms_ssim(sample.source, sample.target)
noise = np.random.default_rng(0).integers(0, 256, sample.source.shape, dtype=np.uint8)
garbage = ms_ssim(sample.source, noise)
print(f"edit pair   composite {report.composite:.4f}  per-scale {[f'{s:.3f}' for s in report.per_scale_scores]}")
print(f"noise pair  composite {garbage.composite:.4f}")
print(f"identity    composite {ms_ssim(sample.source, sample.source).composite:.6f}")

print("\nvideo judge frames (uniform, endpoints inclusive):")
for frames in (73, 77, 81, 85):
    print(f"  {frames} frames -> indices {sample_frame_indices(frames)}")

# The stub judge is a deterministic keyed hash, so gate decisions reproduce
# run to run; swap in HttpJudge(url) to call a real endpoint with retries.
samples = [
    generate_entity_edit("remove", "object", store, canvas, RngState(3, i))
    for i in range(6)
]
accepted, rejections = filter_dataset(samples, judge=StubJudge(pass_rate=0.8))
print(f"\nfiltered {len(samples)} pairs with a pass_rate-0.8 stub judge:")
for result in accepted:
    print(f"  accepted {result.sample.sample_id}  ssim {result.ssim:.4f}  judge {result.verdicts}")
for rec in rejections:
    print(f"  {rec.status:>8} {rec.sample_id}  at stage {rec.stage}")

# Decisions are per-sample: shuffling the input batch flips nothing.
reordered, _ = filter_dataset(list(reversed(samples)), judge=StubJudge(pass_rate=0.8))
same = {r.sample.sample_id for r in accepted} == {r.sample.sample_id for r in reordered}
print(f"\norder-independent decisions: {same}")
