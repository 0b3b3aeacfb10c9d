import numpy as np
import pytest

from cellsynth.population import (
    SimConfig,
    assign_intensity,
    division_placement,
    draw_motion_delta,
    resolve_repulsion,
    simulate,
    step_motion,
    substream,
)
from cellsynth.shapes import shape_half_extents
from cellsynth.stages import N_STAGES, StageTransitionModel
from cellsynth.textures import StageIntensityTable


class TestMotion:
    def test_zero_variance_stationary(self):
        config = SimConfig(motion_variance=0.0, rotation_variance=0.0)
        pos, ori, dori = step_motion((100.0, 100.0), 0.7,
                                     np.random.default_rng(0), config)
        np.testing.assert_array_equal(pos, [100.0, 100.0])
        assert ori == 0.7 and dori == 0.0

    def test_displacement_variance(self):
        config = SimConfig(canvas_size=(100000, 100000))
        rng = np.random.default_rng(1)
        start = np.array([50000.0, 50000.0])
        deltas = np.array(
            [step_motion(start, 0.0, rng, config)[0] - start for _ in range(100_000)]
        )
        assert deltas[:, 0].var() == pytest.approx(2.0, rel=0.05)
        assert deltas[:, 1].var() == pytest.approx(2.0, rel=0.05)

    def test_rotation_delta_recorded_exactly(self):
        config = SimConfig()
        rng = np.random.default_rng(2)
        ori = 1.2
        new_pos, new_ori, dori = step_motion((200.0, 200.0), ori, rng, config)
        assert new_ori - ori == dori

    def test_degrees_unit(self):
        rng = np.random.default_rng(3)
        draws = np.array(
            [draw_motion_delta(rng, 0.0, 1.0, "degrees")[1] for _ in range(50_000)]
        )
        assert draws.std() == pytest.approx(np.deg2rad(1.0), rel=0.05)

    def test_position_clamped_to_canvas(self):
        config = SimConfig(motion_variance=10000.0, canvas_size=(128, 128))
        rng = np.random.default_rng(4)
        for _ in range(50):
            pos, _, _ = step_motion((5.0, 5.0), 0.0, rng, config)
            assert (pos >= 0).all()
            assert pos[0] <= 127 and pos[1] <= 127


class TestDivisionPlacement:
    def shape(self):
        from cellsynth import defaults

        return defaults.default_shape_models(n_per_stage=8)[4].mean_points()

    def test_vertical_major_axis_gives_horizontal_displacement(self):
        pa, pb = division_placement((50.0, 80.0), 0.0, self.shape())
        assert abs(pa[0] - 50.0) <= 1e-9
        assert abs(pb[0] - 50.0) <= 1e-9

    def test_symmetric_placement(self):
        mother = np.array([70.0, 40.0])
        pa, pb = division_placement(mother, 0.8, self.shape())
        np.testing.assert_allclose(pa - mother, -(pb - mother), atol=1e-12)

    def test_displacement_magnitude_is_minor_half_axis(self):
        shape = self.shape()
        minor, _ = shape_half_extents(shape)
        pa, pb = division_placement((0.0, 0.0), 0.3, shape)
        assert np.linalg.norm(pa) == pytest.approx(minor)


class TestRepulsion:
    def test_single_cell_zero(self):
        pos, corr, pairs = resolve_repulsion(np.array([[10.0, 10.0]]), [5.0], [8.0])
        np.testing.assert_array_equal(corr, 0.0)
        assert pairs == {}

    def test_distant_pair_zero(self):
        positions = np.array([[0.0, 0.0], [100.0, 0.0]])
        pos, corr, pairs = resolve_repulsion(positions, [5.0, 5.0], [8.0, 8.0])
        np.testing.assert_array_equal(corr, 0.0)
        np.testing.assert_array_equal(pos, positions)

    def test_symmetric_two_body_matches_independent_recurrence(self):
        r = 10.0
        gain, core_gain, iters, tol = 1.0, 4.0, 10, 0.1
        positions = np.array([[50.0, 50.0], [50.0, 60.0]])  # d = r
        pos, corr, pairs = resolve_repulsion(
            positions, [r, r], [r, r],
            gain=gain, core_gain=core_gain, iterations=iters, tolerance=tol,
        )
        # independent scalar oracle: circular cells, both radii r, so every
        # sweep moves each cell m(d) apart along the center line
        d = r
        for _ in range(iters):
            m = gain * (1 - d / (2 * r)) ** 2
            if d < 2 * r:
                m += core_gain * gain * (1 - d / (2 * r)) ** 2
            if m == 0:
                break
            d += 2 * m
            if m < tol:
                break
        assert np.linalg.norm(pos[1] - pos[0]) == pytest.approx(d)
        assert np.linalg.norm(pos[1] - pos[0]) >= 10.0
        (vec_i, vec_j) = pairs[(0, 1)]
        np.testing.assert_allclose(vec_i + vec_j, 0.0, atol=1e-9)
        np.testing.assert_allclose(corr[0], -corr[1], atol=1e-9)

    def test_coincident_centers_separated_deterministically(self):
        positions = np.array([[30.0, 30.0], [30.0, 30.0]])
        out1 = resolve_repulsion(positions, [4.0, 4.0], [6.0, 6.0],
                                 rng=np.random.default_rng(5))[0]
        out2 = resolve_repulsion(positions, [4.0, 4.0], [6.0, 6.0],
                                 rng=np.random.default_rng(5))[0]
        assert np.linalg.norm(out1[1] - out1[0]) > 0
        np.testing.assert_array_equal(out1, out2)

    def test_hard_overlap_bound_dense_cluster(self):
        rng = np.random.default_rng(6)
        n = 12
        positions = rng.uniform(40, 90, size=(n, 2))
        minor = rng.uniform(4, 8, size=n)
        major = minor + rng.uniform(0, 6, size=n)
        pos, corr, pairs = resolve_repulsion(positions, minor, major,
                                             rng=np.random.default_rng(7))
        for i in range(n):
            for j in range(i + 1, n):
                d = np.linalg.norm(pos[j] - pos[i])
                assert d >= 0.5 * (minor[i] + minor[j])
        # per-pair zero sum and the per-cell totals consistent with pairs
        total = np.zeros_like(corr)
        for (i, j), (vi, vj) in pairs.items():
            np.testing.assert_allclose(vi + vj, 0.0, atol=1e-9)
            total[i] += vi
            total[j] += vj
        np.testing.assert_allclose(total, corr, atol=1e-9)


class TestIntensity:
    def test_deterministic_when_no_randomness(self):
        table = StageIntensityTable(std=np.zeros(N_STAGES))
        rng = np.random.default_rng(0)
        for stage in range(1, N_STAGES + 1):
            value = assign_intensity(stage, table, 0.0, rng)
            assert value == table.mean[stage - 1]

    def test_offset_shift(self):
        table = StageIntensityTable(std=np.zeros(N_STAGES))
        assert assign_intensity(1, table, 0.1, np.random.default_rng(0)) == (
            pytest.approx(table.mean[0] + 0.1)
        )

    def test_jitter_std(self):
        table = StageIntensityTable(
            mean=np.full(N_STAGES, 0.5), std=np.full(N_STAGES, 0.02)
        )
        rng = np.random.default_rng(1)
        draws = np.array([assign_intensity(2, table, 0.0, rng) for _ in range(10_000)])
        assert draws.std() == pytest.approx(0.02, rel=0.05)

    def test_clamped(self):
        table = StageIntensityTable(std=np.zeros(N_STAGES))
        assert assign_intensity(4, table, 0.9, np.random.default_rng(0)) == 1.0


class TestSimulate:
    def test_no_division_single_track_per_founder(self, no_division_model_path):
        config = SimConfig(
            n_initial_cells=2, n_frames=8, canvas_size=(256, 256), seed=3,
            transition_model_path=no_division_model_path,
        )
        result = simulate(config)
        assert len(result.tracks) == 2
        assert all(t.parent_id == 0 for t in result.tracks)

    def test_single_frame(self):
        config = SimConfig(n_initial_cells=4, n_frames=1, canvas_size=(256, 256),
                           seed=4)
        result = simulate(config)
        assert len(result.frames) == 1
        assert set(np.unique(result.frames[0].labels)) == {0, 1, 2, 3, 4}

    def test_division_bookkeeping(self, division_model_path):
        config = SimConfig(
            n_initial_cells=1, n_frames=10, canvas_size=(256, 256), seed=5,
            initial_stage=4, lineage_offset_std=0.3,
            transition_model_path=division_model_path,
        )
        result = simulate(config)
        tracks = {t.id: t for t in result.tracks}
        assert len(tracks) == 3
        mother, a, b = tracks[1], tracks[2], tracks[3]
        assert mother.end == 4 and a.begin == 5 and b.begin == 5
        assert a.parent_id == 1 and b.parent_id == 1
        assert mother.labels[-1] == 4
        assert a.labels[0] == 5 and b.labels[0] == 5
        # shared anaphase initialization: identical first-frame shapes
        np.testing.assert_array_equal(a.shapes[0], b.shapes[0])
        # lineage offset inherited from the founder
        assert a.lineage_offset == mother.lineage_offset
        assert b.lineage_offset == mother.lineage_offset

    def test_daughters_placed_symmetric_about_mother(self, division_model_path):
        config = SimConfig(
            n_initial_cells=1, n_frames=7, canvas_size=(512, 512), seed=6,
            initial_stage=4, motion_variance=0.0, rotation_variance=0.0,
            repulsion_gain=0.0, repulsion_iterations=0,
            transition_model_path=division_model_path,
        )
        result = simulate(config)
        tracks = {t.id: t for t in result.tracks}
        mother_last = tracks[1].positions[-1]
        da = tracks[2].positions[0] - mother_last
        db = tracks[3].positions[0] - mother_last
        np.testing.assert_allclose(da, -db, atol=1e-9)

    def test_descendant_intensity_shifted_by_founder_offset(self, division_model_path):
        table = StageIntensityTable(std=np.zeros(N_STAGES))
        config = SimConfig(
            n_initial_cells=1, n_frames=10, canvas_size=(256, 256), seed=7,
            initial_stage=4, lineage_offset_std=0.2, intensity_table=table,
            transition_model_path=division_model_path,
        )
        result = simulate(config)
        tracks = {t.id: t for t in result.tracks}
        offset = tracks[1].lineage_offset
        assert offset != 0.0
        for track in result.tracks:
            for t_rel, stage in enumerate(track.labels):
                expected = np.clip(table.mean[stage - 1] + offset, 0, 1)
                assert track.intensities[t_rel] == pytest.approx(expected)

    def test_stage_ground_truth_matches_sequences(self):
        config = SimConfig(n_initial_cells=3, n_frames=15, canvas_size=(256, 256),
                           seed=8)
        result = simulate(config)
        tracks = {t.id: t for t in result.tracks}
        for frame_state in result.frames:
            for cid, info in frame_state.cells.items():
                track = tracks[cid]
                assert info["stage"] == track.labels[frame_state.index - track.begin]

    def test_mask_labels_subset_of_live_ids(self):
        config = SimConfig(n_initial_cells=4, n_frames=10, canvas_size=(256, 256),
                           seed=9)
        result = simulate(config)
        for frame_state in result.frames:
            present = {int(v) for v in np.unique(frame_state.labels)} - {0}
            assert present <= set(frame_state.cells)

    def test_every_live_cell_visible_in_mask(self):
        # crowded canvas: nearest-center composition must keep every
        # instance at least partially visible
        config = SimConfig(n_initial_cells=8, n_frames=12, canvas_size=(256, 256),
                           seed=10)
        result = simulate(config)
        for frame_state in result.frames:
            present = {int(v) for v in np.unique(frame_state.labels)} - {0}
            assert present == set(frame_state.cells)

    def test_bit_reproducible(self):
        config = SimConfig(n_initial_cells=3, n_frames=10, canvas_size=(256, 256),
                           seed=11)
        r1 = simulate(config)
        r2 = simulate(config)
        for f1, f2 in zip(r1.frames, r2.frames):
            np.testing.assert_array_equal(f1.labels, f2.labels)
        for a, b in zip(r1.raw, r2.raw):
            np.testing.assert_array_equal(a, b)
        for t1, t2 in zip(r1.tracks, r2.tracks):
            np.testing.assert_array_equal(t1.positions, t2.positions)
            np.testing.assert_array_equal(t1.labels, t2.labels)

    def test_raw_frames_in_unit_range(self):
        config = SimConfig(n_initial_cells=2, n_frames=5, canvas_size=(256, 256),
                           seed=12)
        result = simulate(config)
        for frame in result.raw:
            assert frame.min() >= 0.0 and frame.max() <= 1.0


class TestSimConfig:
    def test_json_round_trip(self, tmp_path):
        config = SimConfig(n_initial_cells=7, seed=42, rotation_unit="degrees",
                           n_eigenmodes=3)
        path = tmp_path / "config.json"
        config.save(path)
        back = SimConfig.load(path)
        assert back.to_dict() == config.to_dict()

    def test_canvas_too_small(self):
        with pytest.raises(ValueError, match="128"):
            SimConfig(canvas_size=(64, 64))

    def test_bad_rotation_unit(self):
        with pytest.raises(ValueError, match="rotation_unit"):
            SimConfig(rotation_unit="gradians")

    def test_counts_validated(self):
        with pytest.raises(ValueError):
            SimConfig(n_initial_cells=0)


def test_substream_independence():
    a = substream(1, 1, 5).uniform(size=4)
    b = substream(1, 1, 6).uniform(size=4)
    c = substream(1, 1, 5).uniform(size=4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, c)
