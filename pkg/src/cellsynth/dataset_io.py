"""Dataset ingestion and export.

Ingestion turns annotated single-cell snippets (96x96 image crops plus a
per-cell stage CSV) into the three estimated models. Export writes a
simulated sequence with its complete ground truth: 16-bit raw frames and
instance masks, a four-column track file, a per-frame stage table and a
manifest that pins the config and seed for bit-exact reproduction.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from PIL import Image
from scipy import ndimage
from skimage.filters import threshold_otsu
from skimage.morphology import h_maxima
from skimage.segmentation import watershed
from skimage.transform import resize

from . import shapes as sh
from . import stages as st
from .pngio import read_gray, read_gray01, write_gray16, write_label16
from .population import SimulationResult
from .textures import PATCH_SIZE, StageIntensityTable

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def snippet_filename(cell: int, frame: int) -> str:
    return f"cell{cell:03d}_t{frame:03d}.png"


def segment_snippet(image01: np.ndarray, min_prominence: float = 3.0) -> np.ndarray | None:
    """Isolate the central object: Otsu threshold, then a seeded watershed
    on the inverted distance transform to split touching neighbors.

    Seeds are h-maxima of the distance transform, so two cells joined by a
    thin neck are split while a single pinched nucleus (e.g. the two
    anaphase chromatin lobes) stays whole: a distance peak only seeds its
    own segment when it rises more than ``min_prominence`` pixels above
    the saddle connecting it to a higher peak.

    Returns a binary mask of the object owning the patch center, or None
    when the snippet has no usable foreground.
    """
    img = np.asarray(image01, dtype=float)
    if img.max() <= img.min():
        return None
    binary = img > threshold_otsu(img)
    binary = ndimage.binary_fill_holes(binary)
    if binary.sum() < 8:
        return None

    distance = ndimage.distance_transform_edt(binary)
    seed_regions = h_maxima(distance, min_prominence)
    markers, n_markers = ndimage.label(seed_regions)
    if n_markers == 0:
        markers[np.unravel_index(np.argmax(distance), distance.shape)] = 1
    labels = watershed(-distance, markers, mask=binary)

    center = (np.array(img.shape) - 1) / 2.0
    center_label = labels[int(round(center[0])), int(round(center[1]))]
    if center_label == 0:
        # fall back to the segment whose centroid is nearest the center
        ids = np.unique(labels)
        ids = ids[ids > 0]
        centroids = ndimage.center_of_mass(binary, labels, ids)
        center_label = ids[
            int(np.argmin([np.hypot(r - center[0], c - center[1]) for r, c in centroids]))
        ]
    mask = labels == center_label
    return mask if mask.sum() >= 8 else None


def ingest_annotated(snippet_dir, csv_path):
    """Estimate all three models from annotated snippets.

    Parameters
    ----------
    snippet_dir : directory of ``cellCCC_tTTT.png`` grayscale crops.
    csv_path : stage CSV, one row per cell, comma-separated labels.

    Returns
    -------
    (StageTransitionModel, {stage: StageShapeModel}, StageIntensityTable)

    Stages with fewer than two usable shapes are omitted from the model
    dict with a warning; shape blending then excludes them.
    """
    sequences = st.read_stage_csv(csv_path)
    transition = st.estimate_transition_model(sequences)

    shapes_by_stage: dict[int, list] = {s: [] for s in range(1, st.N_STAGES + 1)}
    fg_means: dict[int, list] = {s: [] for s in range(1, st.N_STAGES + 1)}
    for cell, seq in enumerate(sequences):
        for frame, stage in enumerate(seq):
            path = os.path.join(snippet_dir, snippet_filename(cell, frame))
            if not os.path.exists(path):
                continue
            img = read_gray01(path)
            if img.shape != (PATCH_SIZE, PATCH_SIZE):
                img = resize(img, (PATCH_SIZE, PATCH_SIZE), order=1,
                             preserve_range=True, anti_aliasing=True)
            mask = segment_snippet(img)
            if mask is None:
                warnings.warn(f"{path}: no usable object, skipped")
                continue
            try:
                shapes_by_stage[int(stage)].append(sh.extract_landmarks(mask))
            except ValueError as exc:
                warnings.warn(f"{path}: landmarking failed ({exc}), skipped")
                continue
            fg_means[int(stage)].append(float(img[mask].mean()))

    models = {}
    for stage, shape_list in shapes_by_stage.items():
        if len(shape_list) >= 2:
            models[stage] = sh.build_shape_model(shape_list, stage)
        else:
            warnings.warn(
                f"stage {stage}: only {len(shape_list)} usable shapes, model omitted"
            )

    placeholder = StageIntensityTable()
    mean = placeholder.mean.copy()
    std = placeholder.std.copy()
    for stage, values in fg_means.items():
        if values:
            mean[stage - 1] = np.mean(values)
            std[stage - 1] = np.std(values)
    table = StageIntensityTable(mean=mean, std=std)
    return transition, models, table


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

@dataclass
class DatasetManifest:
    """Index of one exported dataset; pins config and seed for re-runs."""

    format_version: int
    frame_count: int
    cell_count: int
    seed: int
    files: list[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "format_version": self.format_version,
                "frame_count": self.frame_count,
                "cell_count": self.cell_count,
                "seed": self.seed,
                "files": self.files,
                "config": self.config,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        with open(path) as fh:
            d = json.load(fh)
        return cls(
            format_version=d["format_version"],
            frame_count=d["frame_count"],
            cell_count=d["cell_count"],
            seed=d["seed"],
            files=d["files"],
            config=d["config"],
        )


def raw_filename(frame: int) -> str:
    return f"t{frame:03d}.png"


def mask_filename(frame: int) -> str:
    return f"mask{frame:03d}.png"


def export_dataset(result: SimulationResult, out_dir) -> DatasetManifest:
    """Write raw frames, instance masks, tracks, stage table and manifest."""
    os.makedirs(out_dir, exist_ok=True)
    files = []

    for frame_state, raw in zip(result.frames, result.raw):
        t = frame_state.index
        write_gray16(os.path.join(out_dir, raw_filename(t)), raw.astype(float))
        write_label16(os.path.join(out_dir, mask_filename(t)), frame_state.labels)
        files += [raw_filename(t), mask_filename(t)]

    track_lines = [
        f"{tr.id} {tr.begin} {tr.end} {tr.parent_id}"
        for tr in sorted(result.tracks, key=lambda tr: tr.id)
    ]
    with open(os.path.join(out_dir, "tracks.txt"), "w") as fh:
        fh.write("\n".join(track_lines) + "\n")
    files.append("tracks.txt")

    with open(os.path.join(out_dir, "stages.csv"), "w") as fh:
        fh.write("frame,id,stage\n")
        for frame_state in result.frames:
            for cid in sorted(frame_state.cells):
                fh.write(f"{frame_state.index},{cid},{frame_state.cells[cid]['stage']}\n")
    files.append("stages.csv")

    manifest = DatasetManifest(
        format_version=FORMAT_VERSION,
        frame_count=len(result.frames),
        cell_count=len(result.tracks),
        seed=result.config.seed,
        files=sorted(files),
        config=result.config.to_dict(),
    )
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        fh.write(manifest.to_json())
    return manifest


def read_tracks(path) -> list[tuple[int, int, int, int]]:
    """Read the four-column track file: (id, begin, end, parent)."""
    tracks = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                tid, begin, end, parent = (int(v) for v in line.split())
                tracks.append((tid, begin, end, parent))
    return tracks


def validate_export(out_dir) -> list[str]:
    """Cross-check an exported dataset; returns a list of violations.

    Checks every manifest file exists, mask labels and track spans agree
    in both directions, and the stage table covers exactly the live
    (frame, cell) pairs.
    """
    problems = []
    manifest = DatasetManifest.load(os.path.join(out_dir, "manifest.json"))
    for name in manifest.files:
        if not os.path.exists(os.path.join(out_dir, name)):
            problems.append(f"missing file {name}")

    tracks = {tid: (begin, end, parent)
              for tid, begin, end, parent in read_tracks(os.path.join(out_dir, "tracks.txt"))}

    stage_rows = set()
    with open(os.path.join(out_dir, "stages.csv")) as fh:
        header = fh.readline()
        if header.strip() != "frame,id,stage":
            problems.append("stages.csv header mismatch")
        for line in fh:
            if line.strip():
                frame, cid, stage = (int(v) for v in line.strip().split(","))
                stage_rows.add((frame, cid))
                if not 1 <= stage <= st.N_STAGES:
                    problems.append(f"stage {stage} out of range at frame {frame}")

    expected_rows = set()
    for frame in range(manifest.frame_count):
        mask = read_gray(os.path.join(out_dir, mask_filename(frame)))
        mask_ids = {int(v) for v in np.unique(mask) if v != 0}
        live_ids = {tid for tid, (b, e, _p) in tracks.items() if b <= frame <= e}
        for cid in mask_ids - live_ids:
            problems.append(f"frame {frame}: label {cid} not live in tracks.txt")
        for cid in live_ids - mask_ids:
            problems.append(f"frame {frame}: live track {cid} absent from mask")
        expected_rows |= {(frame, cid) for cid in live_ids}

    if stage_rows != expected_rows:
        problems.append(
            f"stages.csv rows {len(stage_rows)} != live (frame, cell) pairs "
            f"{len(expected_rows)}"
        )

    for tid, (begin, end, parent) in tracks.items():
        if parent != 0:
            if parent not in tracks:
                problems.append(f"track {tid}: unknown parent {parent}")
            elif tracks[parent][1] != begin - 1:
                problems.append(
                    f"track {tid} starts at {begin} but parent {parent} ends at "
                    f"{tracks[parent][1]}"
                )
    return problems


def preview_montage(dataset_dir, frames, out_path) -> str:
    """Tile selected raw frames into one 8-bit montage PNG."""
    panels = []
    for frame in frames:
        img = read_gray01(os.path.join(dataset_dir, raw_filename(frame)))
        panels.append((img * 255).astype(np.uint8))
    sep = np.full((panels[0].shape[0], 2), 255, dtype=np.uint8)
    tiled = panels[0]
    for panel in panels[1:]:
        tiled = np.hstack([tiled, sep, panel])
    Image.fromarray(tiled).save(out_path)
    return out_path
