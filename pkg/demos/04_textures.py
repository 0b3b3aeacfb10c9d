"""
Conditioned texture synthesis
=============================

Texture providers receive a three-channel conditioning patch (stage label
mask, target mean intensity mask, uniform noise) and return the textured
cell. The procedural provider modulates a plateau with stage-dependent
band-limited noise: smooth interphase chromatin, grainy prometaphase.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from cellsynth import defaults
from cellsynth.shapes import draw_shape_params, rasterize, sample_shape
from cellsynth.textures import make_conditioning, procedural_texture

models = defaults.default_shape_models()
rng = np.random.default_rng(5)

# --- one conditioning triplet ------------------------------------------------
mask = rasterize(sample_shape(models[1], draw_shape_params(models, rng)), (96, 96))
cond = make_conditioning(mask, stage=1, mean_intensity=0.55, rng=rng)

fig, axes = plt.subplots(1, 3, figsize=(8, 3))
for ax, channel, title in zip(
    axes,
    (cond.stage_channel, cond.intensity_channel, cond.noise_channel),
    ("stage channel", "intensity channel", "noise channel"),
):
    ax.imshow(channel, cmap="magma")
    ax.set_title(title, fontsize=9)
    ax.axis("off")
fig.tight_layout()
fig.savefig("demos/output/conditioning.png", dpi=120)
print("wrote demos/output/conditioning.png")

# --- stage conditioning sweep: same mask and intensity, different stage ------
fig, axes = plt.subplots(1, 6, figsize=(14, 2.6))
for stage, ax in zip(range(1, 7), axes):
    cond = make_conditioning(mask, stage, 0.55, np.random.default_rng(7))
    patch = procedural_texture(cond)
    ax.imshow(patch.image, cmap="gray", vmin=0, vmax=1)
    ax.set_title(f"stage {stage}", fontsize=9)
    ax.axis("off")
fig.suptitle("stage conditioning changes granularity at fixed intensity")
fig.tight_layout()
fig.savefig("demos/output/texture_stages.png", dpi=120)
print("wrote demos/output/texture_stages.png")

# --- intensity conditioning sweep ---------------------------------------------
fig, axes = plt.subplots(1, 6, figsize=(14, 2.6))
for target, ax in zip(np.linspace(0.15, 0.9, 6), axes):
    cond = make_conditioning(mask, 3, float(target), np.random.default_rng(7))
    patch = procedural_texture(cond)
    realized = patch.image[cond.support()].mean()
    ax.imshow(patch.image, cmap="gray", vmin=0, vmax=1)
    ax.set_title(f"target {target:.2f}\nrealized {realized:.2f}", fontsize=8)
    ax.axis("off")
fig.suptitle("intensity conditioning at fixed stage")
fig.tight_layout()
fig.savefig("demos/output/texture_intensity.png", dpi=120)
print("wrote demos/output/texture_intensity.png")
