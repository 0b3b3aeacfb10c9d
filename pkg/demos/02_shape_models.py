"""
Per-stage statistical shape models
==================================

Each mitotic stage gets its own landmark shape model: a mean 60-gon plus
principal variation modes of the landmark covariance. Here we build the
models from the bundled synthetic corpus and draw the classic
mean +/- sqrt(lambda_1) * e_1 picture for every stage.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from cellsynth import defaults
from cellsynth.shapes import as_points, draw_shape_params, sample_shape

models = defaults.default_shape_models()

stage_names = ["interphase", "prophase", "prometaphase",
               "metaphase", "anaphase", "telophase"]

fig, axes = plt.subplots(1, 6, figsize=(16, 3), sharex=True, sharey=True)
for stage, ax in zip(range(1, 7), axes):
    model = models[stage]
    mean = model.mean_points()
    mode = np.sqrt(model.eigenvalues[0]) * model.eigenvectors[0]
    plus = as_points(model.mean + mode)
    minus = as_points(model.mean - mode)

    for pts, color, label in ((mean, "tab:green", "mean"),
                              (plus, "tab:red", "+mode 1"),
                              (minus, "tab:blue", "-mode 1")):
        closed = np.vstack([pts, pts[:1]])
        ax.plot(closed[:, 0], closed[:, 1], color=color, lw=1.2, label=label)
    ax.set_title(f"{stage}: {stage_names[stage - 1]}", fontsize=9)
    ax.set_aspect("equal")
axes[0].legend(fontsize=7)
fig.suptitle("stage shape models: mean and first variation mode")
fig.tight_layout()
fig.savefig("demos/output/shape_models.png", dpi=120)
print("wrote demos/output/shape_models.png")

# --- random samples from one model ------------------------------------------
rng = np.random.default_rng(3)
fig, ax = plt.subplots(figsize=(4, 4))
for _ in range(12):
    params = draw_shape_params(models, rng)
    pts = sample_shape(models[4], params)
    closed = np.vstack([pts, pts[:1]])
    ax.plot(closed[:, 0], closed[:, 1], lw=0.8, alpha=0.7)
ax.set_aspect("equal")
ax.set_title("random metaphase samples")
fig.tight_layout()
fig.savefig("demos/output/shape_samples.png", dpi=120)
print("wrote demos/output/shape_samples.png")
