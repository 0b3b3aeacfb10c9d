"""cellsynth: seedable synthetic 2D+t microscopy sequences of cell nuclei.

The package is organized along the generation pipeline:

- :mod:`cellsynth.stages` -- mitotic stage sequence model
- :mod:`cellsynth.shapes` -- landmarks, statistical shape models, blending
- :mod:`cellsynth.textures` -- conditioning contract and texture providers
- :mod:`cellsynth.population` -- whole-population 2D+t simulation
- :mod:`cellsynth.acquisition` -- imaging chain (PSF, shot/sensor noise)
- :mod:`cellsynth.dataset_io` -- ingestion of annotated data, dataset export
- :mod:`cellsynth.defaults` -- built-in placeholder models
"""

from .acquisition import AcquisitionParams, apply_acquisition
from .population import (
    CellTrack,
    FrameState,
    SimConfig,
    SimulationResult,
    assign_intensity,
    division_placement,
    resolve_repulsion,
    simulate,
    step_motion,
)
from .shapes import (
    StageShapeModel,
    ShapeSampleParams,
    TransitionWeights,
    blend_shape,
    build_shape_model,
    draw_shape_params,
    extract_landmarks,
    load_shape_models,
    rasterize,
    sample_shape,
    save_shape_models,
    transition_weights,
)
from .stages import (
    StageTransitionModel,
    estimate_transition_model,
    find_division_events,
    sample_stage_sequence,
)
from .textures import (
    ConditioningPatch,
    StageIntensityTable,
    TexturePatch,
    TextureParams,
    load_external_patches,
    make_conditioning,
    procedural_texture,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionParams",
    "CellTrack",
    "ConditioningPatch",
    "FrameState",
    "ShapeSampleParams",
    "SimConfig",
    "SimulationResult",
    "StageIntensityTable",
    "StageShapeModel",
    "StageTransitionModel",
    "TexturePatch",
    "TextureParams",
    "TransitionWeights",
    "apply_acquisition",
    "assign_intensity",
    "blend_shape",
    "build_shape_model",
    "division_placement",
    "draw_shape_params",
    "estimate_transition_model",
    "extract_landmarks",
    "find_division_events",
    "load_external_patches",
    "load_shape_models",
    "make_conditioning",
    "procedural_texture",
    "rasterize",
    "resolve_repulsion",
    "sample_shape",
    "sample_stage_sequence",
    "save_shape_models",
    "simulate",
    "step_motion",
    "transition_weights",
]
