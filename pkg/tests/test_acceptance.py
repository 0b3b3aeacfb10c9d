"""Acceptance suite: one test per release criterion, each printing a
single [PASS]/[FAIL] line (run with ``pytest tests/test_acceptance.py -v -s``).

Every tolerance is pinned here; no criterion defers to later calibration.
"""

import time

import numpy as np
import pytest

from cellsynth import defaults
from cellsynth.acquisition import AcquisitionParams, apply_acquisition
from cellsynth.dataset_io import export_dataset, validate_export
from cellsynth.population import SimConfig, simulate
from cellsynth.shapes import (
    N_LANDMARKS,
    as_vector,
    blend_shape,
    build_shape_model,
    draw_shape_params,
    rasterize,
    shape_half_extents,
    transition_weights,
)
from cellsynth.stages import (
    N_STAGES,
    StageTransitionModel,
    estimate_transition_model,
    run_lengths,
    sample_stage_sequence,
)
from cellsynth.textures import make_conditioning, procedural_texture


def _report(name, ok, detail=""):
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def test_c1_transition_model_round_trip():
    rng = np.random.default_rng(7)
    trans = rng.uniform(0.05, 1.0, size=(N_STAGES, N_STAGES))
    trans /= trans.sum(axis=1, keepdims=True)
    model = StageTransitionModel(trans)  # durations default to [1, inf)

    start = time.perf_counter()
    seqs = [sample_stage_sequence(model, 5000, rng) for _ in range(24)]
    estimate = estimate_transition_model(seqs)
    elapsed = time.perf_counter() - start

    n_frames = sum(len(s) for s in seqs)
    err = float(np.abs(estimate.transition - trans).max())
    ok = n_frames >= 100_000 and err <= 0.02 and elapsed < 10.0
    _report(
        "transition-model round trip",
        ok,
        f"{n_frames} frames, max entry error {err:.4f} (tol 0.02), "
        f"{elapsed:.2f}s (limit 10s)",
    )


def test_c2_ssm_oracle_equivalence():
    rng = np.random.default_rng(11)
    worst_frob = 0.0
    worst_recon = 0.0
    for _ in range(10):
        shapes = [rng.normal(0, 5, size=(N_LANDMARKS, 2)) for _ in range(5)]
        data = np.stack([as_vector(s) for s in shapes])
        mean = data.mean(axis=0)
        oracle = np.zeros((2 * N_LANDMARKS, 2 * N_LANDMARKS))
        for row in data:  # brute-force double-loop estimator
            dev = row - mean
            oracle += np.outer(dev, dev)
        oracle /= len(shapes) - 1

        model = build_shape_model(shapes, stage=1)
        worst_frob = max(worst_frob,
                         float(np.linalg.norm(model.covariance() - oracle)))
        basis = model.eigenvectors[: model.n_modes]
        for row in data:
            recon = model.mean + (basis @ (row - model.mean)) @ basis
            worst_recon = max(worst_recon, float(np.abs(recon - row).max()))

    ok = worst_frob <= 1e-9 and worst_recon <= 1e-6
    _report(
        "SSM oracle equivalence",
        ok,
        f"covariance Frobenius {worst_frob:.2e} (tol 1e-9), "
        f"reconstruction {worst_recon:.2e} (tol 1e-6)",
    )


def test_c3_blend_weight_normalization():
    transition = defaults.default_transition_model()
    rng = np.random.default_rng(13)
    worst_sum_dev = 0.0
    for _ in range(100):
        seq = sample_stage_sequence(transition, 60, rng)
        for t in range(len(seq)):
            tw = transition_weights(seq, t)
            worst_sum_dev = max(worst_sum_dev, abs(float(tw.w.sum()) - 1.0))

    worst_mid_dev = 0.0
    for length in range(2, 21):
        seq = [1] * length + [2] * length
        w = transition_weights(seq, length - 0.5).w
        worst_mid_dev = max(worst_mid_dev, abs(w[0] - 0.5), abs(w[1] - 0.5),
                            float(np.abs(w[2:]).max()))

    ok = worst_sum_dev <= 1e-9 and worst_mid_dev <= 1e-6
    _report(
        "blend-weight normalization",
        ok,
        f"max |sum-1| {worst_sum_dev:.2e} (tol 1e-9), "
        f"symmetric midpoint deviation {worst_mid_dev:.2e} (tol 1e-6)",
    )


def test_c4_shape_continuity():
    models = defaults.default_shape_models()
    transition = defaults.default_transition_model()
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(100):
        seq = sample_stage_sequence(transition, 60, rng)
        for stage, start, length in run_lengths(seq):
            params = draw_shape_params(models, rng)  # fixed b within the run
            prev = None
            for t in range(start, start + length):
                shape = blend_shape(models, transition_weights(seq, t), params)
                if prev is not None:
                    worst = max(
                        worst, float(np.linalg.norm(shape - prev, axis=1).max())
                    )
                prev = shape
    ok = worst <= 2.0
    _report(
        "shape continuity",
        ok,
        f"max per-landmark displacement within a run {worst:.3f} px (tol 2 px)",
    )


def test_c5_noise_statistics():
    start = time.perf_counter()
    c, scale = 0.5, 1000.0
    poisson_only = AcquisitionParams(enable_dark=False, enable_blur=False,
                                     enable_gaussian=False, photon_scale=scale)
    out = apply_acquisition(np.full((1024, 1024), c), poisson_only,
                            np.random.default_rng(19))
    var = float(out.var())

    gauss_only = AcquisitionParams(enable_dark=False, enable_blur=False,
                                   enable_poisson=False, gaussian_sigma=0.001)
    img = np.full((1024, 1024), 0.5)
    noisy = apply_acquisition(img, gauss_only, np.random.default_rng(23))
    std = float((noisy - img).std())
    elapsed = time.perf_counter() - start

    ok = (
        abs(var - c / scale) <= 0.05 * c / scale
        and abs(std - 0.001) <= 0.05 * 0.001
        and elapsed < 5.0
    )
    _report(
        "noise statistics",
        ok,
        f"Poisson variance {var:.3e} (target 5e-4 +-5%), "
        f"Gaussian std {std:.3e} (target 1e-3 +-5%), {elapsed:.2f}s (limit 5s)",
    )


def test_c6_repulsion_dense_population():
    config = SimConfig(n_initial_cells=20, n_frames=50, canvas_size=(384, 384),
                       seed=2)
    result = simulate(config)
    tracks = {t.id: t for t in result.tracks}

    worst_margin = np.inf
    for frame_state in result.frames:
        ids = sorted(frame_state.cells)
        pos = {c: frame_state.cells[c]["position"] for c in ids}
        minor = {
            c: shape_half_extents(
                tracks[c].shapes[frame_state.index - tracks[c].begin]
            )[0]
            for c in ids
        }
        for i, a in enumerate(ids):
            for b in ids[i + 1 :]:
                d = float(np.linalg.norm(pos[a] - pos[b]))
                bound = 0.5 * (minor[a] + minor[b])
                worst_margin = min(worst_margin, d - bound)

    worst_pair_sum = 0.0
    n_pairs = 0
    for frame_state in result.frames:
        for (_a, _b), (vec_i, vec_j) in frame_state.repulsion.items():
            worst_pair_sum = max(worst_pair_sum,
                                 float(np.abs(vec_i + vec_j).max()))
            n_pairs += 1

    ok = worst_margin >= 0.0 and worst_pair_sum <= 1e-9
    _report(
        "repulsion",
        ok,
        f"min distance-over-bound margin {worst_margin:.3f} px (>=0), "
        f"max |pair correction sum| {worst_pair_sum:.2e} over {n_pairs} "
        f"interactions (tol 1e-9)",
    )


def test_c7_lineage_ground_truth_consistency(tmp_path):
    config = SimConfig(n_initial_cells=5, n_frames=100, canvas_size=(512, 512),
                       seed=1)
    start = time.perf_counter()
    result = simulate(config)
    out1 = tmp_path / "run1"
    export_dataset(result, out1)
    elapsed = time.perf_counter() - start

    divisions = sum(1 for t in result.tracks if t.parent_id != 0) // 2
    problems = validate_export(out1)

    result2 = simulate(config)
    out2 = tmp_path / "run2"
    manifest2 = export_dataset(result2, out2)
    identical = all(
        (out1 / name).read_bytes() == (out2 / name).read_bytes()
        for name in manifest2.files + ["manifest.json"]
    )

    ok = divisions >= 3 and not problems and identical and elapsed < 60.0
    _report(
        "lineage/ground-truth consistency",
        ok,
        f"{divisions} divisions (>=3), {len(problems)} cross-check violations, "
        f"byte-identical re-run: {identical}, {elapsed:.1f}s (limit 60s)",
    )


def test_c8_texture_contract():
    rng = np.random.default_rng(29)
    worst_mean_dev = 0.0
    worst_background = 0.0
    for _ in range(1000):
        a = rng.uniform(8, 28)
        b = rng.uniform(8, 28)
        theta = np.arange(N_LANDMARKS) * 2 * np.pi / N_LANDMARKS
        radius = a * b / np.sqrt((b * np.cos(theta)) ** 2 + (a * np.sin(theta)) ** 2)
        points = radius[:, None] * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        mask = rasterize(points, (96, 96))

        stage = int(rng.integers(1, N_STAGES + 1))
        target = float(rng.uniform(0.05, 0.9))
        cond = make_conditioning(mask, stage, target, rng)
        patch = procedural_texture(cond)

        sup = cond.support()
        worst_mean_dev = max(worst_mean_dev,
                             abs(float(patch.image[sup].mean()) - target))
        if (~sup).any():
            worst_background = max(worst_background,
                                   float(patch.image[~sup].max()))

    ok = worst_mean_dev <= 0.02 and worst_background <= 0.02
    _report(
        "texture contract",
        ok,
        f"max |foreground mean - target| {worst_mean_dev:.4f} (tol 0.02), "
        f"max background value {worst_background:.4f} (tol 0.02) "
        f"over 1000 patches",
    )
