import numpy as np
import pytest

from cellsynth.stages import N_STAGES, StageTransitionModel


@pytest.fixture()
def division_model_path(tmp_path):
    """A chain that divides exactly once per lineage branch:
    metaphase is pinned to 5 frames, then 4 -> 5 -> 6 -> 1 (absorbing)."""
    trans = np.zeros((N_STAGES, N_STAGES))
    trans[0, 0] = 1.0
    trans[1, 1] = 1.0
    trans[2, 2] = 1.0
    trans[3, 4] = 1.0
    trans[4, 4], trans[4, 5] = 0.5, 0.5
    trans[5, 5], trans[5, 0] = 0.7, 0.3
    model = StageTransitionModel(
        trans,
        min_duration=[1, 1, 1, 5, 2, 2],
        max_duration=[np.inf, np.inf, np.inf, 5, 6, 8],
    )
    path = tmp_path / "division.json"
    model.save(path)
    return str(path)


@pytest.fixture()
def no_division_model_path(tmp_path):
    trans = np.zeros((N_STAGES, N_STAGES))
    trans[0, 0] = 0.5
    trans[0, 1] = 0.5
    trans[1, 1] = 0.6
    trans[1, 2] = 0.4
    trans[2, 2] = 1.0
    trans[3, 3] = 1.0
    trans[4, 4] = 1.0
    trans[5, 5] = 1.0
    path = tmp_path / "nodiv.json"
    StageTransitionModel(trans).save(path)
    return str(path)
