"""Texture conditioning contract and texture providers.

A texture provider turns a three-channel conditioning patch (stage label
mask, target mean intensity mask, uniform noise) into a 96x96 intensity
patch. Two providers exist: a procedural synthesizer used by default, and
an ingestion path for patches generated externally (e.g. by an adversarial
network) following the patch exchange layout.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .pngio import read_gray01, write_gray16
from .stages import N_STAGES

log = logging.getLogger(__name__)

PATCH_SIZE = 96

# 16-bit file encoding of the stage conditioning channel: label * 1000
STAGE_FILE_SCALE = 1000


@dataclass
class StageIntensityTable:
    """Per-stage mean fluorescence intensity and jitter, normalized units.

    The shipped defaults are PLACEHOLDERS chosen for visual plausibility,
    not measured from any microscope; derive a real table with the
    ingestion tool before drawing physical conclusions.
    """

    mean: np.ndarray = field(
        default_factory=lambda: np.array([0.35, 0.45, 0.60, 0.65, 0.55, 0.40])
    )
    std: np.ndarray = field(default_factory=lambda: np.full(N_STAGES, 0.02))

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        if self.mean.shape != (N_STAGES,) or self.std.shape != (N_STAGES,):
            raise ValueError("intensity table needs 6 means and 6 stds")
        if np.any(self.mean <= 0) or np.any(self.mean > 1):
            raise ValueError("stage mean intensities must be in (0, 1]")
        if np.any(self.std < 0):
            raise ValueError("stage intensity stds must be >= 0")

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "StageIntensityTable":
        return cls(mean=np.array(d["mean"]), std=np.array(d["std"]))


@dataclass
class ConditioningPatch:
    """Three-channel conditioning input shared by all texture providers.

    ``stage_channel`` holds the stage label (1..6) on the foreground and 0
    elsewhere; ``intensity_channel`` the target mean intensity on the same
    support; ``noise_channel`` i.i.d. uniform [0,1] everywhere.
    """

    stage_channel: np.ndarray
    intensity_channel: np.ndarray
    noise_channel: np.ndarray

    def support(self) -> np.ndarray:
        return self.stage_channel > 0

    @property
    def stage(self) -> int:
        return int(self.stage_channel.max())

    @property
    def target_intensity(self) -> float:
        sup = self.support()
        return float(self.intensity_channel[sup].mean()) if sup.any() else 0.0


@dataclass
class TexturePatch:
    """A generated 96x96 intensity patch plus its provenance."""

    image: np.ndarray
    provenance: str = "procedural"


def make_conditioning(
    mask: np.ndarray,
    stage: int,
    mean_intensity: float,
    rng: np.random.Generator,
) -> ConditioningPatch:
    """Fill the conditioning channels for one cell patch."""
    mask = np.asarray(mask) > 0
    if mask.shape != (PATCH_SIZE, PATCH_SIZE):
        raise ValueError(f"conditioning mask must be {PATCH_SIZE}x{PATCH_SIZE}")
    if not mask.any():
        raise ValueError("empty mask")
    if not 1 <= stage <= N_STAGES:
        raise ValueError(f"stage {stage} outside 1..{N_STAGES}")
    if not 0.0 <= mean_intensity <= 1.0:
        raise ValueError("mean_intensity must be in [0, 1]")
    return ConditioningPatch(
        stage_channel=np.where(mask, float(stage), 0.0),
        intensity_channel=np.where(mask, float(mean_intensity), 0.0),
        noise_channel=rng.uniform(0.0, 1.0, size=(PATCH_SIZE, PATCH_SIZE)),
    )


@dataclass
class TextureParams:
    """Per-stage granularity and contrast of the procedural texture.

    ``grain_sigma`` is the Gaussian smoothing scale applied to the noise
    channel (larger = smoother, blobbier chromatin); ``contrast`` the
    relative intensity modulation depth.
    """

    grain_sigma: np.ndarray = field(
        default_factory=lambda: np.array([3.0, 2.0, 1.2, 1.5, 1.8, 2.5])
    )
    contrast: np.ndarray = field(
        default_factory=lambda: np.array([0.06, 0.14, 0.30, 0.24, 0.20, 0.10])
    )

    def __post_init__(self):
        self.grain_sigma = np.asarray(self.grain_sigma, dtype=float)
        self.contrast = np.asarray(self.contrast, dtype=float)
        if self.grain_sigma.shape != (N_STAGES,) or self.contrast.shape != (N_STAGES,):
            raise ValueError("texture parameter tables need 6 entries each")


def procedural_texture(
    cond: ConditioningPatch, params: TextureParams | None = None
) -> TexturePatch:
    """Band-limited multiplicative noise texture honoring the conditioning.

    The conditioning noise channel is low-pass filtered at the stage's
    grain scale, standardized over the foreground and used to modulate a
    constant plateau; the result is iteratively rescaled (with clipping)
    until the foreground mean matches the conditioned intensity.
    """
    if params is None:
        params = TextureParams()
    sup = cond.support()
    if not sup.any():
        raise ValueError("conditioning has empty support")
    stage = cond.stage
    target = cond.target_intensity

    img = np.zeros_like(cond.noise_channel)
    if target <= 0.0:
        return TexturePatch(image=img)

    smooth = gaussian_filter(cond.noise_channel, params.grain_sigma[stage - 1],
                             mode="reflect")
    fg = smooth[sup]
    spread = fg.std()
    z = (smooth - fg.mean()) / spread if spread > 0 else np.zeros_like(smooth)
    modulation = np.clip(1.0 + params.contrast[stage - 1] * z, 0.0, None)

    img[sup] = target * modulation[sup]
    for _ in range(25):
        img = np.clip(img, 0.0, 1.0)
        mean = img[sup].mean()
        if abs(mean - target) <= 1e-4 or mean == 0.0:
            break
        img[sup] *= target / mean
    return TexturePatch(image=np.clip(img, 0.0, 1.0))


class ProceduralTextureProvider:
    """Default texture source: procedural synthesis from conditioning alone."""

    def __init__(self, params: TextureParams | None = None):
        self.params = params or TextureParams()

    def __call__(self, cond: ConditioningPatch, cell_id=None, frame=None) -> TexturePatch:
        return procedural_texture(cond, self.params)


class ExternalPatchProvider:
    """Serve pre-generated patches from a patch exchange directory.

    Missing keys fall back to procedural synthesis with a logged warning,
    so a partially generated directory still yields a complete simulation.
    """

    def __init__(self, patches: dict[str, np.ndarray],
                 fallback: ProceduralTextureProvider | None = None):
        self.patches = patches
        self.fallback = fallback or ProceduralTextureProvider()
        self._warned: set[str] = set()

    def __call__(self, cond: ConditioningPatch, cell_id=None, frame=None) -> TexturePatch:
        key = patch_key(cell_id, frame)
        patch = self.patches.get(key)
        if patch is None:
            if key not in self._warned:
                log.warning("no external patch for %s, falling back to procedural", key)
                self._warned.add(key)
            return self.fallback(cond, cell_id, frame)
        return TexturePatch(image=patch.copy(), provenance="external")


def patch_key(cell_id, frame) -> str:
    return f"{int(cell_id)}_{int(frame)}"


def load_external_patches(directory) -> ExternalPatchProvider:
    """Load a patch exchange directory (index.json + 16-bit grayscale PNGs).

    Every indexed patch is read and validated eagerly: it must be a 96x96
    grayscale image whose normalized values lie in [0,1].
    """
    index_path = os.path.join(directory, "index.json")
    patches: dict[str, np.ndarray] = {}
    if os.path.exists(index_path):
        try:
            with open(index_path) as fh:
                index = json.load(fh)
            if not isinstance(index, dict):
                raise ValueError("index.json must map keys to filenames")
        except (json.JSONDecodeError, ValueError) as exc:
            raise ValueError(f"malformed patch index {index_path}: {exc}")
        for key, filename in index.items():
            path = os.path.join(directory, filename)
            img = read_gray01(path)
            if img.shape != (PATCH_SIZE, PATCH_SIZE):
                raise ValueError(
                    f"{path}: patch shape {img.shape} != ({PATCH_SIZE}, {PATCH_SIZE})"
                )
            patches[str(key)] = img
    return ExternalPatchProvider(patches)


def save_patches(directory, patches: dict[str, np.ndarray]):
    """Write patches plus index.json in the exchange layout."""
    os.makedirs(directory, exist_ok=True)
    index = {}
    for key in sorted(patches):
        filename = f"{key}.png"
        write_gray16(os.path.join(directory, filename), patches[key])
        index[key] = filename
    with open(os.path.join(directory, "index.json"), "w") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)


def write_conditioning_triplet(directory, key: str, cond: ConditioningPatch):
    """Export one conditioning patch as 16-bit PNG triplet for the GAN side.

    The stage channel stores ``label * 1000`` in 16-bit counts; intensity
    and noise channels use the plain [0,1] -> uint16 normalization.
    """
    stage_file = cond.stage_channel * STAGE_FILE_SCALE / 65535.0
    write_gray16(os.path.join(directory, f"{key}_stage.png"), stage_file)
    write_gray16(os.path.join(directory, f"{key}_intensity.png"), cond.intensity_channel)
    write_gray16(os.path.join(directory, f"{key}_noise.png"), cond.noise_channel)


def read_conditioning_triplet(directory, key: str) -> ConditioningPatch:
    stage_raw = read_gray01(os.path.join(directory, f"{key}_stage.png"))
    return ConditioningPatch(
        stage_channel=np.rint(stage_raw * 65535.0 / STAGE_FILE_SCALE),
        intensity_channel=read_gray01(os.path.join(directory, f"{key}_intensity.png")),
        noise_channel=read_gray01(os.path.join(directory, f"{key}_noise.png")),
    )
