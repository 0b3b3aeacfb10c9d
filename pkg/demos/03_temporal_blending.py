"""
Temporal blending of stage models
=================================

Along a stage sequence, the shape at each time point is a convex
combination of all six stage models. Gaussian kernels sit at the run
boundaries (sigma = source run length); evaluated on the continuous time
axis they hand over smoothly, with an exact 50/50 split at each boundary
midpoint.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from cellsynth import defaults
from cellsynth.shapes import ShapeSampleParams, blend_shape, transition_weights

models = defaults.default_shape_models()
sequence = [1] * 10 + [2] * 4 + [3] * 5 + [4] * 6 + [5] * 3 + [6] * 6 + [1] * 10

# --- weight curves on a fine time grid --------------------------------------
ts = np.linspace(0, len(sequence) - 1, 1200)
weights = np.stack([transition_weights(sequence, float(t)).w for t in ts])

fig, ax = plt.subplots(figsize=(9, 3))
for stage in range(6):
    ax.plot(ts, weights[:, stage], label=f"stage {stage + 1}")
ax.plot(range(len(sequence)), [0.02] * len(sequence), "k.", ms=2)
ax.set_xlabel("time (frames as dots)")
ax.set_ylabel("blend weight")
ax.legend(fontsize=7, ncol=6)
fig.tight_layout()
fig.savefig("demos/output/blend_weights.png", dpi=120)
print("wrote demos/output/blend_weights.png")

# --- morphing shape across a boundary ---------------------------------------
params = ShapeSampleParams(b={}, epsilon=0.0)  # pure mean shapes
fig, axes = plt.subplots(1, 7, figsize=(16, 2.6), sharex=True, sharey=True)
times = [26.0, 27.0, 27.5, 27.75, 28.0, 28.5, 29.0]  # around the 4 -> 5 boundary
for t, ax in zip(times, axes):
    pts = blend_shape(models, transition_weights(sequence, t), params)
    closed = np.vstack([pts, pts[:1]])
    ax.plot(closed[:, 0], closed[:, 1], "tab:purple")
    ax.set_title(f"t = {t}", fontsize=8)
    ax.set_aspect("equal")
fig.suptitle("metaphase-to-anaphase handover on the continuous time axis")
fig.tight_layout()
fig.savefig("demos/output/blend_morph.png", dpi=120)
print("wrote demos/output/blend_morph.png")
