"""Built-in defaults: a synthetic shape corpus and placeholder dynamics.

These let the simulator run out of the box. The transition matrix, dwell
times and shape families below are hand-tuned placeholders that look
plausible but were NOT fitted to microscopy data; replace them with models
estimated via the ingestion tools for quantitative work.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import shapes as sh
from .stages import N_STAGES, StageTransitionModel

# radial shape families per stage: overall size, vertical elongation,
# upward asymmetry (keeps the orientation sign test stable) and a
# two-lobe pinch used for the post-metaphase stages
_FAMILY = {
    1: dict(radius=26.0, elong=0.10, asym=0.06, lobe=0.00),
    2: dict(radius=22.0, elong=0.12, asym=0.06, lobe=0.00),
    3: dict(radius=16.0, elong=0.18, asym=0.08, lobe=0.00),
    4: dict(radius=15.0, elong=0.55, asym=0.08, lobe=0.00),
    5: dict(radius=17.0, elong=0.35, asym=0.10, lobe=0.35),
    6: dict(radius=14.0, elong=0.25, asym=0.08, lobe=0.45),
}

_DEFAULT_CORPUS_SEED = 7
_DEFAULT_N_TRAIN = 40


def synthetic_stage_shape(stage: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one randomized member of the stage's radial shape family.

    The raw radial outline is passed once through rasterize/extract so the
    returned landmarks live in the same canonical frame (mask centroid,
    moment-aligned axes) that ingestion of real masks would produce.
    """
    fam = _FAMILY[stage]
    radius = fam["radius"] * (1.0 + 0.08 * rng.standard_normal())
    elong = fam["elong"] + 0.05 * rng.standard_normal()
    asym = fam["asym"] + 0.02 * rng.standard_normal()
    wobble = 0.03 * abs(rng.standard_normal())
    phase = rng.uniform(0.0, 2.0 * np.pi)

    theta = sh.ANGLES
    r = radius * (
        1.0
        + elong * (np.sin(theta) ** 2 - 0.5)
        + asym * np.sin(theta)
        + fam["lobe"] * (np.abs(np.sin(theta)) - 2.0 / np.pi)
        + wobble * np.cos(3.0 * theta + phase)
    )
    r = np.clip(r, 2.0, None)
    points = r[:, None] * sh.RAY_DIRECTIONS
    return sh.extract_landmarks(sh.rasterize(points - points.mean(axis=0), (96, 96)))


def synthetic_corpus(
    n_per_stage: int = _DEFAULT_N_TRAIN, seed: int = _DEFAULT_CORPUS_SEED
) -> dict[int, list[np.ndarray]]:
    """Per-stage lists of synthetic training shapes, deterministic in seed."""
    corpus = {}
    for stage in range(1, N_STAGES + 1):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stage,)))
        corpus[stage] = [synthetic_stage_shape(stage, rng) for _ in range(n_per_stage)]
    return corpus


@lru_cache(maxsize=8)
def default_shape_models(
    n_per_stage: int = _DEFAULT_N_TRAIN, seed: int = _DEFAULT_CORPUS_SEED
) -> dict[int, sh.StageShapeModel]:
    """Stage shape models built from the synthetic corpus (cached; treat
    the returned models as read-only)."""
    return {
        stage: sh.build_shape_model(shapes_, stage)
        for stage, shapes_ in synthetic_corpus(n_per_stage, seed).items()
    }


def default_transition_model() -> StageTransitionModel:
    """Placeholder stage dynamics: long interphase, brisk mitosis."""
    transition = np.array(
        [
            [0.95, 0.05, 0.00, 0.00, 0.00, 0.00],
            [0.00, 0.55, 0.45, 0.00, 0.00, 0.00],
            [0.00, 0.00, 0.60, 0.40, 0.00, 0.00],
            [0.00, 0.00, 0.00, 0.60, 0.40, 0.00],
            [0.00, 0.00, 0.00, 0.00, 0.50, 0.50],
            [0.30, 0.00, 0.00, 0.00, 0.00, 0.70],
        ]
    )
    min_duration = np.array([5.0, 2.0, 2.0, 2.0, 2.0, 3.0])
    max_duration = np.array([80.0, 8.0, 10.0, 12.0, 6.0, 10.0])
    return StageTransitionModel(transition, min_duration, max_duration)
