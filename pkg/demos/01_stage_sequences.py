"""
Stage sequences: estimation and constrained sampling
====================================================

A cell's life is a sequence of mitotic stages (1=interphase .. 6=telophase).
This demo estimates a transition model from a few annotated sequences,
then samples new sequences that honor the per-stage dwell-time bounds.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from cellsynth import defaults
from cellsynth.stages import (
    estimate_transition_model,
    find_division_events,
    sample_stage_sequence,
)

# --- estimate a model from hand-made "annotations" ------------------------
annotated = [
    [1, 1, 1, 1, 2, 2, 3, 3, 3, 4, 4, 5, 5, 6, 6, 6, 1, 1],
    [1, 1, 2, 2, 2, 3, 3, 4, 4, 4, 5, 5, 6, 6, 1, 1, 1, 1],
    [1, 1, 1, 2, 2, 3, 3, 3, 3, 4, 4, 4, 5, 5, 6, 6, 6, 1],
]
model = estimate_transition_model(annotated)
print("estimated transition matrix:")
print(np.round(model.transition, 2))
print("dwell bounds:", list(zip(model.min_duration, model.max_duration)))

# --- sample new sequences --------------------------------------------------
# the shipped default model has hand-tuned (non-physical) dynamics and is
# handier for long simulations
model = defaults.default_transition_model()
rng = np.random.default_rng(0)
sequences = [sample_stage_sequence(model, 120, rng) for _ in range(8)]

for seq in sequences[:3]:
    print("divisions at frames:", find_division_events(seq))

# --- visualize -------------------------------------------------------------
fig, ax = plt.subplots(figsize=(9, 3))
ax.imshow(np.stack(sequences), aspect="auto", cmap="viridis",
          interpolation="nearest", vmin=1, vmax=6)
ax.set_xlabel("frame")
ax.set_ylabel("cell")
ax.set_title("sampled stage sequences (colors = stages 1..6)")
fig.tight_layout()
fig.savefig("demos/output/stage_sequences.png", dpi=120)
print("wrote demos/output/stage_sequences.png")
