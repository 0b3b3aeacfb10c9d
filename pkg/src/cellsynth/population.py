"""Whole-population 2D+t simulation.

Builds complete image sequences: per-cell stage sequences, temporally
blended shapes, Brownian motion, division events with lineage bookkeeping,
pairwise repulsion, stage/lineage-driven intensities, texture composition
and the acquisition chain. Everything is keyed off named RNG substreams so
runs are bit-reproducible from (config, seed) regardless of scheduling.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import shapes as sh
from . import stages as st
from .acquisition import AcquisitionParams, apply_acquisition
from .textures import (
    PATCH_SIZE,
    ProceduralTextureProvider,
    StageIntensityTable,
    load_external_patches,
    make_conditioning,
)

# substream domains: one namespace per consumer so streams never collide
_DOM_CELL = 1
_DOM_ACQ = 2
_DOM_REPULSION = 3
_DOM_PATCH_NOISE = 4


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key...), stable across runs."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass
class SimConfig:
    """All generation parameters; serializable to/from the config JSON."""

    n_initial_cells: int = 5
    n_frames: int = 60
    canvas_size: tuple[int, int] = (512, 512)
    seed: int = 0
    motion_variance: float = 2.0
    rotation_variance: float = 1.0
    rotation_unit: str = "radians"  # "radians" or "degrees"
    repulsion_gain: float = 1.0
    repulsion_core_gain: float = 4.0
    repulsion_iterations: int = 10
    repulsion_tolerance: float = 0.1
    lineage_offset_std: float = 0.05
    n_eigenmodes: int | None = None
    initial_stage: int | None = None  # None: uniform over usable stages
    texture: str = "procedural"  # or "external:<patch dir>"
    intensity_table: StageIntensityTable = field(default_factory=StageIntensityTable)
    acquisition: AcquisitionParams = field(default_factory=AcquisitionParams)
    transition_model_path: str | None = None
    shape_model_path: str | None = None

    def __post_init__(self):
        self.canvas_size = (int(self.canvas_size[0]), int(self.canvas_size[1]))
        if self.n_initial_cells < 1 or self.n_frames < 1:
            raise ValueError("cell and frame counts must be >= 1")
        if self.canvas_size[0] < 128 or self.canvas_size[1] < 128:
            raise ValueError("canvas must be at least 128x128")
        if self.rotation_unit not in ("radians", "degrees"):
            raise ValueError("rotation_unit must be 'radians' or 'degrees'")
        if self.motion_variance < 0 or self.rotation_variance < 0:
            raise ValueError("variances must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "n_initial_cells": self.n_initial_cells,
            "n_frames": self.n_frames,
            "canvas_size": list(self.canvas_size),
            "seed": self.seed,
            "motion_variance": self.motion_variance,
            "rotation_variance": self.rotation_variance,
            "rotation_unit": self.rotation_unit,
            "repulsion_gain": self.repulsion_gain,
            "repulsion_core_gain": self.repulsion_core_gain,
            "repulsion_iterations": self.repulsion_iterations,
            "repulsion_tolerance": self.repulsion_tolerance,
            "lineage_offset_std": self.lineage_offset_std,
            "n_eigenmodes": self.n_eigenmodes,
            "initial_stage": self.initial_stage,
            "texture": self.texture,
            "intensity_table": self.intensity_table.to_dict(),
            "acquisition": self.acquisition.to_dict(),
            "transition_model_path": self.transition_model_path,
            "shape_model_path": self.shape_model_path,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        if "canvas_size" in d:
            d["canvas_size"] = tuple(d["canvas_size"])
        if "intensity_table" in d and isinstance(d["intensity_table"], dict):
            d["intensity_table"] = StageIntensityTable.from_dict(d["intensity_table"])
        if "acquisition" in d and isinstance(d["acquisition"], dict):
            d["acquisition"] = AcquisitionParams.from_dict(d["acquisition"])
        return cls(**d)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "SimConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class CellTrack:
    """One cell's full per-frame state plus lineage links."""

    id: int
    parent_id: int  # 0 for founder cells
    begin: int
    labels: np.ndarray            # stage per frame
    lineage_offset: float
    orientations: np.ndarray      # radians per frame
    intensities: np.ndarray       # [0,1] per frame
    shapes: list = field(default_factory=list)   # (60,2) per frame
    positions: np.ndarray = None  # (len, 2) (row, col), filled frame by frame

    @property
    def end(self) -> int:
        return self.begin + len(self.labels) - 1

    def rel(self, frame: int) -> int:
        if not self.begin <= frame <= self.end:
            raise IndexError(f"frame {frame} outside track {self.id}")
        return frame - self.begin


@dataclass
class FrameState:
    """Instance mask plus per-instance metadata for one frame."""

    index: int
    labels: np.ndarray  # uint16 instance mask
    cells: dict         # id -> {"position", "orientation", "stage", "intensity"}
    # repulsion ledger: (id_i, id_j) -> [correction_i, correction_j]
    repulsion: dict = field(default_factory=dict)


@dataclass
class SimulationResult:
    config: SimConfig
    tracks: list
    frames: list       # FrameState per frame
    raw: list          # acquired [0,1] frames (float32)

    def live_ids(self, frame: int) -> list[int]:
        return [t.id for t in self.tracks if t.begin <= frame <= t.end]


# ---------------------------------------------------------------------------
# motion
# ---------------------------------------------------------------------------

def draw_motion_delta(rng, motion_variance, rotation_variance, rotation_unit):
    """One Brownian step: (d_row, d_col) displacement and rotation delta."""
    dpos = rng.normal(0.0, np.sqrt(motion_variance), size=2)
    dori = rng.normal(0.0, np.sqrt(rotation_variance))
    if rotation_unit == "degrees":
        dori = np.deg2rad(dori)
    return dpos, float(dori)


def apply_motion(position, orientation, dpos, dori, canvas_size):
    pos = np.clip(
        np.asarray(position, dtype=float) + dpos,
        [0.0, 0.0],
        [canvas_size[0] - 1.0, canvas_size[1] - 1.0],
    )
    return pos, orientation + dori


def step_motion(position, orientation, rng, config: SimConfig):
    """Displace and rotate one cell by its Brownian increments.

    Returns the clamped position, new orientation, and the drawn rotation
    delta (recorded in the ground truth).
    """
    dpos, dori = draw_motion_delta(
        rng, config.motion_variance, config.rotation_variance, config.rotation_unit
    )
    pos, ori = apply_motion(position, orientation, dpos, dori, config.canvas_size)
    return pos, ori, dori


# ---------------------------------------------------------------------------
# division
# ---------------------------------------------------------------------------

def division_placement(position, orientation, shape_points):
    """Daughter positions: mother center displaced perpendicular to the
    major axis by the mother's minor half-axis, symmetrically."""
    d = sh.shape_half_extents(shape_points)[0]
    # shape-frame x axis (perpendicular to the vertical major axis),
    # rotated by the cell orientation, expressed as (row, col)
    offset = d * np.array([-np.sin(orientation), np.cos(orientation)])
    position = np.asarray(position, dtype=float)
    return position + offset, position - offset


# ---------------------------------------------------------------------------
# repulsion
# ---------------------------------------------------------------------------

def resolve_repulsion(
    positions,
    r_minor,
    r_major,
    gain=1.0,
    core_gain=4.0,
    iterations=10,
    tolerance=0.1,
    rng=None,
    hard_bound=True,
):
    """Push overlapping cells apart along their center lines.

    Pairs closer than the sum of their major half-axes receive
    equal-and-opposite displacements of magnitude
    ``gain * (1 - d/sum_major)^2``, with an additional steeper quadratic
    ramp ``core_gain * gain * (1 - d/sum_minor)^2`` once the minor-axis
    envelopes overlap. Sweeps repeat until the largest correction drops
    below ``tolerance`` or ``iterations`` is hit; a final projection pass
    enforces the hard bound ``d >= 0.5 * (r_minor_i + r_minor_j)``.

    Returns
    -------
    (new_positions, corrections, pair_corrections) where ``corrections``
    is the per-cell total displacement and ``pair_corrections`` maps each
    interacting pair (i, j) to the two accumulated correction vectors.
    """
    pos = np.asarray(positions, dtype=float).copy()
    r_minor = np.asarray(r_minor, dtype=float)
    r_major = np.asarray(r_major, dtype=float)
    n = len(pos)
    corrections = np.zeros_like(pos)
    pair_corrections: dict = {}
    if rng is None:
        rng = np.random.default_rng(0)

    def _direction(i, j):
        delta = pos[j] - pos[i]
        d = float(np.linalg.norm(delta))
        if d == 0.0:
            theta = rng.uniform(0.0, 2.0 * np.pi)
            return 0.0, np.array([np.cos(theta), np.sin(theta)])
        return d, delta / d

    def _book(i, j, vec_j):
        key = (i, j)
        if key not in pair_corrections:
            pair_corrections[key] = [np.zeros(2), np.zeros(2)]
        pair_corrections[key][0] -= vec_j
        pair_corrections[key][1] += vec_j

    for _ in range(max(iterations, 0)):
        # frame-level barrier: all pair forces from the same snapshot
        sweep = np.zeros_like(pos)
        for i in range(n):
            for j in range(i + 1, n):
                d, u = _direction(i, j)
                reach = r_major[i] + r_major[j]
                if d >= reach:
                    continue
                m = gain * (1.0 - d / reach) ** 2
                core = r_minor[i] + r_minor[j]
                if d < core:
                    m += core_gain * gain * (1.0 - d / core) ** 2
                sweep[i] -= m * u
                sweep[j] += m * u
                _book(i, j, m * u)
        max_step = np.linalg.norm(sweep, axis=1).max() if n else 0.0
        if max_step == 0.0:
            break
        corrections += sweep
        pos += sweep
        if max_step < tolerance:
            break

    if hard_bound:
        for _ in range(200):
            clean = True
            for i in range(n):
                for j in range(i + 1, n):
                    bound = 0.5 * (r_minor[i] + r_minor[j])
                    d, u = _direction(i, j)
                    if d >= bound:
                        continue
                    shift = 0.5 * (bound - d) + 1e-6
                    _book(i, j, shift * u)
                    corrections[i] -= shift * u
                    corrections[j] += shift * u
                    pos[i] -= shift * u
                    pos[j] += shift * u
                    clean = False
            if clean:
                break
    return pos, corrections, pair_corrections


def assign_intensity(stage, table: StageIntensityTable, lineage_offset, rng):
    """Stage mean + inherited lineage offset + per-frame jitter, clamped."""
    jitter = rng.normal(0.0, table.std[stage - 1]) if table.std[stage - 1] > 0 else 0.0
    return float(np.clip(table.mean[stage - 1] + lineage_offset + jitter, 0.0, 1.0))


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def _texture_provider(config: SimConfig):
    if config.texture == "procedural":
        return ProceduralTextureProvider()
    if config.texture.startswith("external:"):
        return load_external_patches(config.texture.split(":", 1)[1])
    raise ValueError(f"unknown texture provider {config.texture!r}")


def _load_models(config: SimConfig):
    from . import defaults

    if config.transition_model_path:
        transition = st.StageTransitionModel.load(config.transition_model_path)
    else:
        transition = defaults.default_transition_model()
    if config.shape_model_path:
        models = sh.load_shape_models(config.shape_model_path)
    else:
        models = defaults.default_shape_models()
    return transition, models


def _build_tracks(config: SimConfig, transition, models):
    """Sample every track: stage sequences, shapes, orientations,
    intensities and pre-drawn motion deltas (positions come later)."""
    margin = PATCH_SIZE // 2
    h, w = config.canvas_size
    tracks = {}
    motion_deltas = {}
    placements = {}
    queue = deque()
    for cid in range(1, config.n_initial_cells + 1):
        queue.append(
            {"id": cid, "parent": 0, "begin": 0, "initial": config.initial_stage,
             "shared_params": None, "offset": None, "orientation": None}
        )
    next_id = config.n_initial_cells + 1

    while queue:
        item = queue.popleft()
        cid = item["id"]
        rng = substream(config.seed, _DOM_CELL, cid)

        if item["parent"] == 0:
            placement = np.array(
                [rng.uniform(margin, h - 1 - margin), rng.uniform(margin, w - 1 - margin)]
            )
            orientation0 = rng.uniform(0.0, 2.0 * np.pi)
            offset = rng.normal(0.0, config.lineage_offset_std) \
                if config.lineage_offset_std > 0 else 0.0
        else:
            placement = None  # placed at division time from the mother state
            orientation0 = item["orientation"]
            offset = item["offset"]

        horizon = config.n_frames - item["begin"]
        seq = st.sample_stage_sequence(transition, horizon, rng, initial=item["initial"])
        events = st.find_division_events(seq)
        divides = bool(events)
        labels = seq[: events[0]] if divides else seq
        n = len(labels)

        runs = st.run_lengths(labels)
        run_of_frame = np.empty(n, dtype=int)
        for ridx, (_stage, start, length) in enumerate(runs):
            run_of_frame[start : start + length] = ridx
        run_params = []
        for ridx in range(len(runs)):
            if ridx == 0 and item["shared_params"] is not None:
                run_params.append(item["shared_params"])
            else:
                run_params.append(sh.draw_shape_params(models, rng, config.n_eigenmodes))

        cell_shapes = []
        for t_rel in range(n):
            params = run_params[run_of_frame[t_rel]]
            if t_rel == 0 and item["shared_params"] is not None:
                # daughters open on the pure anaphase model they share
                model = models[st.ANAPHASE]
                k = model.n_modes if config.n_eigenmodes is None \
                    else min(config.n_eigenmodes, model.n_modes)
                cell_shapes.append(sh.sample_shape(model, params, k))
                continue
            weights = sh.transition_weights(labels, t_rel)
            cell_shapes.append(
                sh.blend_shape(models, weights, params, config.n_eigenmodes)
            )

        deltas = [None] + [
            draw_motion_delta(rng, config.motion_variance,
                              config.rotation_variance, config.rotation_unit)
            for _ in range(n - 1)
        ]
        orientations = np.empty(n)
        orientations[0] = orientation0
        for t_rel in range(1, n):
            orientations[t_rel] = orientations[t_rel - 1] + deltas[t_rel][1]

        intensities = np.array(
            [
                assign_intensity(int(labels[t_rel]), config.intensity_table, offset, rng)
                for t_rel in range(n)
            ]
        )

        track = CellTrack(
            id=cid, parent_id=item["parent"], begin=item["begin"],
            labels=labels, lineage_offset=offset,
            orientations=orientations, intensities=intensities,
            shapes=cell_shapes,
            positions=np.full((n, 2), np.nan),
        )
        tracks[cid] = track
        motion_deltas[cid] = deltas
        placements[cid] = placement

        if divides:
            shared = sh.draw_shape_params(models, rng, config.n_eigenmodes)
            div_frame = item["begin"] + events[0]
            for _ in range(2):
                queue.append(
                    {"id": next_id, "parent": cid, "begin": div_frame,
                     "initial": st.ANAPHASE, "shared_params": shared,
                     "offset": offset, "orientation": orientations[-1]}
                )
                next_id += 1

    return tracks, motion_deltas, placements


def local_patch(track: CellTrack, frame: int) -> tuple[np.ndarray, np.ndarray]:
    """Rasterize one cell into its 96x96 patch at the subpixel offset it
    occupies on the canvas. Returns (patch mask, integer anchor position)."""
    t_rel = track.rel(frame)
    pos = track.positions[t_rel]
    anchor = np.rint(pos).astype(int)
    frac = pos - anchor
    half = PATCH_SIZE // 2
    local = sh.rasterize(
        track.shapes[t_rel], (PATCH_SIZE, PATCH_SIZE),
        position=(half + frac[0], half + frac[1]),
        rotation=track.orientations[t_rel], label=1,
    )
    return local, anchor


def conditioning_for(config: SimConfig, track: CellTrack, frame: int):
    """The exact conditioning patch the simulator uses for (cell, frame)."""
    local, _ = local_patch(track, frame)
    if not local.any():
        return None
    t_rel = track.rel(frame)
    noise_rng = substream(config.seed, _DOM_PATCH_NOISE, track.id, frame)
    return make_conditioning(
        local, int(track.labels[t_rel]), track.intensities[t_rel], noise_rng
    )


def iter_conditionings(result: SimulationResult):
    """Yield (key, ConditioningPatch) for every live (cell, frame) pair."""
    by_id = {t.id: t for t in result.tracks}
    for frame_state in result.frames:
        for cid in sorted(frame_state.cells):
            cond = conditioning_for(result.config, by_id[cid], frame_state.index)
            if cond is not None:
                yield f"{cid}_{frame_state.index}", cond


def _compose_frame(config, tracks, live, frame, provider):
    """Paste instance masks (nearest-center wins on overlap) and textures
    (per-pixel maximum) for all live cells of one frame."""
    h, w = config.canvas_size
    half = PATCH_SIZE // 2
    label_mask = np.zeros((h, w), dtype=np.uint16)
    dist_map = np.full((h, w), np.inf)
    raw = np.zeros((h, w), dtype=float)
    meta = {}

    for cid in sorted(live):
        track = tracks[cid]
        t_rel = track.rel(frame)
        pos = track.positions[t_rel]
        ori = track.orientations[t_rel]
        stage = int(track.labels[t_rel])
        intensity = track.intensities[t_rel]
        meta[cid] = {"position": pos.copy(), "orientation": float(ori),
                     "stage": stage, "intensity": float(intensity)}

        local, anchor = local_patch(track, frame)
        r0, c0 = anchor[0] - half, anchor[1] - half
        rr0, cc0 = max(r0, 0), max(c0, 0)
        rr1, cc1 = min(r0 + PATCH_SIZE, h), min(c0 + PATCH_SIZE, w)
        if rr1 <= rr0 or cc1 <= cc0 or not local.any():
            continue
        lr0, lc0 = rr0 - r0, cc0 - c0
        local_view = local[lr0 : lr0 + (rr1 - rr0), lc0 : lc0 + (cc1 - cc0)] > 0

        if local_view.any():
            rows = np.arange(rr0, rr1, dtype=float)[:, None]
            cols = np.arange(cc0, cc1, dtype=float)[None, :]
            d2 = (rows - pos[0]) ** 2 + (cols - pos[1]) ** 2
            region_labels = label_mask[rr0:rr1, cc0:cc1]
            region_dist = dist_map[rr0:rr1, cc0:cc1]
            claim = local_view & (d2 < region_dist)
            region_labels[claim] = cid
            region_dist[claim] = d2[claim]

        noise_rng = substream(config.seed, _DOM_PATCH_NOISE, cid, frame)
        cond = make_conditioning(local, stage, intensity, noise_rng)
        patch = provider(cond, cid, frame)
        region_raw = raw[rr0:rr1, cc0:cc1]
        np.maximum(
            region_raw,
            patch.image[lr0 : lr0 + (rr1 - rr0), lc0 : lc0 + (cc1 - cc0)],
            out=region_raw,
        )
    return label_mask, raw, meta


def simulate(config: SimConfig) -> SimulationResult:
    """Run the full population simulation described by ``config``."""
    transition, models = _load_models(config)
    provider = _texture_provider(config)
    tracks, motion_deltas, placements = _build_tracks(config, transition, models)
    h, w = config.canvas_size

    frames = []
    raw_frames = []
    for frame in range(config.n_frames):
        live = [cid for cid, t in tracks.items() if t.begin <= frame <= t.end]

        for cid in sorted(live):
            track = tracks[cid]
            t_rel = track.rel(frame)
            if t_rel == 0:
                if track.parent_id == 0:
                    track.positions[0] = placements[cid]
                else:
                    mother = tracks[track.parent_id]
                    m_rel = mother.rel(frame - 1)
                    pa, pb = division_placement(
                        mother.positions[m_rel],
                        mother.orientations[m_rel],
                        mother.shapes[m_rel],
                    )
                    siblings = sorted(
                        c for c, t in tracks.items()
                        if t.parent_id == track.parent_id and t.begin == frame
                    )
                    chosen = pa if cid == siblings[0] else pb
                    track.positions[0] = np.clip(chosen, [0, 0], [h - 1, w - 1])
            else:
                dpos, _ = motion_deltas[cid][t_rel]
                track.positions[t_rel] = apply_motion(
                    track.positions[t_rel - 1], 0.0, dpos, 0.0, config.canvas_size
                )[0]

        ids = sorted(live)
        pair_ledger = {}
        if ids:
            pos = np.stack([tracks[c].positions[tracks[c].rel(frame)] for c in ids])
            minor = np.array(
                [sh.shape_half_extents(tracks[c].shapes[tracks[c].rel(frame)])[0] for c in ids]
            )
            major = np.array(
                [sh.shape_half_extents(tracks[c].shapes[tracks[c].rel(frame)])[1] for c in ids]
            )
            new_pos, _, pairs = resolve_repulsion(
                pos, minor, major,
                gain=config.repulsion_gain,
                core_gain=config.repulsion_core_gain,
                iterations=config.repulsion_iterations,
                tolerance=config.repulsion_tolerance,
                rng=substream(config.seed, _DOM_REPULSION, frame),
            )
            for k, cid in enumerate(ids):
                tracks[cid].positions[tracks[cid].rel(frame)] = new_pos[k]
            pair_ledger = {(ids[i], ids[j]): vecs for (i, j), vecs in pairs.items()}

        label_mask, clean, meta = _compose_frame(config, tracks, live, frame, provider)
        acq_rng = substream(config.seed, _DOM_ACQ, frame)
        acquired = apply_acquisition(clean, config.acquisition, acq_rng)
        frames.append(
            FrameState(index=frame, labels=label_mask, cells=meta,
                       repulsion=pair_ledger)
        )
        raw_frames.append(acquired.astype(np.float32))

    ordered = [tracks[cid] for cid in sorted(tracks)]
    return SimulationResult(config=config, tracks=ordered, frames=frames, raw=raw_frames)
