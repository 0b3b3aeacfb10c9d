"""Landmark shapes and per-stage statistical shape models.

A shape is a set of 60 boundary landmarks sampled on rays at 6-degree
increments around the object centroid, expressed in a normalized frame:
centroid at the origin, major axis vertical, x right / y up (so image row
``r`` maps to ``y = -r``). Shapes are stored as ``(60, 2)`` float arrays;
the statistical machinery works on the flattened 120-vectors
``(x0, y0, ..., x59, y59)``.
"""

from __future__ import annotations

import base64
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .stages import N_STAGES, run_lengths, validate_sequence

N_LANDMARKS = 60
ANGLES = np.arange(N_LANDMARKS) * (2.0 * np.pi / N_LANDMARKS)
RAY_DIRECTIONS = np.stack([np.cos(ANGLES), np.sin(ANGLES)], axis=1)

# N(0, 0.1) for the per-run eigenvector scaling, read as variance 0.1
EPSILON_STD = np.sqrt(0.1)

# eigenvalues below this fraction of the largest are treated as zero
EIGENVALUE_FLOOR = 1e-10

KERNEL_TRUNCATION_SIGMAS = 4.0


def as_vector(points: np.ndarray) -> np.ndarray:
    """Flatten a (60, 2) landmark array to the 120-vector layout."""
    points = np.asarray(points, dtype=float)
    if points.shape != (N_LANDMARKS, 2):
        raise ValueError(f"expected ({N_LANDMARKS}, 2) landmarks, got {points.shape}")
    return points.reshape(-1)

def as_points(vector: np.ndarray) -> np.ndarray:
    """Reshape a 120-vector back to (60, 2) landmark points."""
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (2 * N_LANDMARKS,):
        raise ValueError(f"expected {2 * N_LANDMARKS}-vector, got {vector.shape}")
    return vector.reshape(N_LANDMARKS, 2)


# ---------------------------------------------------------------------------
# landmark extraction
# ---------------------------------------------------------------------------

def _mask_coordinates(mask: np.ndarray) -> np.ndarray:
    """Foreground pixel centers in math coordinates (x right, y up)."""
    rows, cols = np.nonzero(mask)
    return np.stack([cols.astype(float), -rows.astype(float)], axis=1)


def principal_axis_angle(points: np.ndarray) -> float:
    """Major-axis angle from second central moments, sign-fixed by skewness.

    Returns the angle (radians, from +x) of the major axis, oriented so the
    third-order moment of the point cloud along the axis is nonnegative.
    """
    centered = points - points.mean(axis=0)
    mu20, mu02 = np.mean(centered**2, axis=0)
    mu11 = np.mean(centered[:, 0] * centered[:, 1])
    alpha = 0.5 * np.arctan2(2.0 * mu11, mu20 - mu02)
    axis = np.array([np.cos(alpha), np.sin(alpha)])
    if np.sum((centered @ axis) ** 3) < 0:
        alpha += np.pi
    return alpha


def extract_landmarks(mask: np.ndarray) -> np.ndarray:
    """Sample 60 angular landmarks from a single-object binary mask.

    The mask is normalized in place of the result: centered on its centroid
    and rotated so the major axis points up (+y); landmark ``k`` is the
    farthest boundary crossing along the ray at angle ``6 * k`` degrees.

    Parameters
    ----------
    mask : 2-D array, nonzero pixels are foreground.

    Returns
    -------
    (60, 2) array of landmark coordinates, recentered to zero mean.
    """
    mask = np.asarray(mask) > 0
    if not mask.any():
        raise ValueError("empty mask")
    n_components = ndimage.label(mask)[1]
    if n_components != 1:
        raise ValueError("ambiguous object: mask has multiple components")
    if mask.sum() < 8:
        raise ValueError("object too small for landmarking (area < 8)")

    pts = _mask_coordinates(mask)
    centroid = pts.mean(axis=0)
    alpha = principal_axis_angle(pts)

    # ray directions in the mask frame: rotate the canonical directions so
    # the normalized +y axis lands on the measured major axis
    rot = alpha - np.pi / 2.0
    c, s = np.cos(rot), np.sin(rot)
    dirs = RAY_DIRECTIONS @ np.array([[c, s], [-s, c]])

    radii = _farthest_crossings(mask, centroid, dirs)
    points = radii[:, None] * RAY_DIRECTIONS
    return points - points.mean(axis=0)


def _inside(mask_float, xy):
    """Subpixel foreground test for math-frame points, (n,) bool.

    Bilinear interpolation of the binary mask thresholded at 0.5; its 0.5
    iso-contour tracks the underlying polygon much closer than the raw
    pixel staircase.
    """
    coords = np.stack([-xy[:, 1], xy[:, 0]])  # (row, col)
    values = ndimage.map_coordinates(mask_float, coords, order=1,
                                     mode="constant", cval=0.0)
    return values >= 0.5


def _farthest_crossings(mask, centroid, dirs, step=0.5):
    """Distance to the farthest mask boundary along each ray from centroid."""
    mask_float = mask.astype(float)
    r_max = float(np.hypot(*mask.shape)) + 1.0
    radii_grid = np.arange(r_max, -step, -step)  # outside -> in
    n_rays = len(dirs)

    samples = centroid[None, None, :] + radii_grid[None, :, None] * dirs[:, None, :]
    inside = _inside(mask_float, samples.reshape(-1, 2)).reshape(n_rays, -1)
    first_in = np.argmax(inside, axis=1)
    any_in = inside.any(axis=1)

    lo = np.where(any_in, radii_grid[first_in], 0.0)         # inside
    hi = np.where(any_in, lo + step, 0.0)                    # outside
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        mid_inside = _inside(mask_float, centroid[None, :] + mid[:, None] * dirs)
        lo = np.where(mid_inside, mid, lo)
        hi = np.where(mid_inside, hi, mid)
    return np.where(any_in, 0.5 * (lo + hi), 0.0)


# ---------------------------------------------------------------------------
# statistical shape model
# ---------------------------------------------------------------------------

@dataclass
class StageShapeModel:
    """Mean shape and eigendecomposed landmark covariance of one stage.

    Eigenpairs are sorted by descending eigenvalue; eigenvalues below
    ``EIGENVALUE_FLOOR * lambda_max`` (and beyond the ``n_train - 1`` rank
    bound) are clamped to zero but their eigenvectors are kept so the full
    orthonormal basis remains available.
    """

    stage: int
    mean: np.ndarray
    eigenvectors: np.ndarray  # (n, 120), row i is the i-th mode
    eigenvalues: np.ndarray   # (n,), descending
    n_train: int

    @property
    def n_modes(self) -> int:
        """Number of retained (strictly positive) variance modes."""
        return int(np.count_nonzero(self.eigenvalues > 0))

    def covariance(self) -> np.ndarray:
        """Reassemble the covariance matrix from the eigenpairs."""
        return (self.eigenvectors.T * self.eigenvalues) @ self.eigenvectors

    def mean_points(self) -> np.ndarray:
        return as_points(self.mean)


def build_shape_model(shapes, stage: int) -> StageShapeModel:
    """Build a stage model from normalized landmark shapes.

    Mean and covariance use the standard sample estimators (covariance with
    the 1/(N-1) factor); the covariance is eigendecomposed with a symmetric
    solver.
    """
    data = np.stack([as_vector(s) for s in shapes])
    n = data.shape[0]
    if n < 2:
        raise ValueError("insufficient shapes: need at least 2")

    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered / (n - 1)

    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order].T

    evals = np.clip(evals, 0.0, None)
    # relative floor plus an absolute one tied to the coordinate scale, so
    # identical training shapes yield a genuinely zero-variance model
    floor = EIGENVALUE_FLOOR * max(evals[0], 1e-9 * float(np.mean(data**2)))
    evals[evals < floor] = 0.0
    evals[n - 1 :] = 0.0  # sample covariance of n shapes has rank <= n-1
    return StageShapeModel(
        stage=int(stage),
        mean=mean,
        eigenvectors=evecs,
        eigenvalues=evals,
        n_train=n,
    )


@dataclass
class ShapeSampleParams:
    """Random draw backing one cell's shape during a stage run.

    ``b`` maps stage label to its standard-normal coefficient vector;
    ``epsilon`` is the shared per-run scaling factor.
    """

    b: dict[int, np.ndarray] = field(default_factory=dict)
    epsilon: float = 0.0


def draw_shape_params(
    models: dict[int, StageShapeModel],
    rng: np.random.Generator,
    n_e: int | None = None,
) -> ShapeSampleParams:
    """Draw fresh coefficients for every available stage model."""
    b = {}
    for stage, model in models.items():
        k = model.n_modes if n_e is None else min(n_e, model.n_modes)
        b[stage] = rng.standard_normal(k)
    return ShapeSampleParams(b=b, epsilon=float(rng.normal(0.0, EPSILON_STD)))


def sample_shape(
    model: StageShapeModel,
    params: ShapeSampleParams,
    n_e: int | None = None,
) -> np.ndarray:
    """Mean shape plus epsilon-scaled eigenvector combination.

    Landmarks are ``mean + sum_i epsilon * sqrt(lambda_i) * b_i * e_i`` over
    the first ``n_e`` modes.
    """
    if n_e is None:
        n_e = model.n_modes
    if n_e > model.n_modes:
        raise ValueError(
            f"n_e={n_e} exceeds the {model.n_modes} positive modes of stage "
            f"{model.stage}"
        )
    b = params.b.get(model.stage)
    vec = model.mean.copy()
    if n_e and b is not None:
        k = min(n_e, len(b))
        scale = params.epsilon * np.sqrt(model.eigenvalues[:k]) * b[:k]
        vec = vec + scale @ model.eigenvectors[:k]
    return as_points(vec)


# ---------------------------------------------------------------------------
# temporal blending
# ---------------------------------------------------------------------------

def gaussian_kernel(t, mu, sigma):
    """Normalized Gaussian kernel value; peak 1/sqrt(2*pi*sigma^2)."""
    return np.exp(-((t - mu) ** 2) / (2.0 * sigma**2)) / np.sqrt(
        2.0 * np.pi * sigma**2
    )


@dataclass
class TransitionWeights:
    """Per-stage convex blending weights at one time point."""

    w: np.ndarray                     # (6,), nonnegative, sums to 1
    centers: tuple[float, ...] = ()   # transition frames contributing mass
    sigmas: tuple[float, ...] = ()    # kernel width per transition


def transition_weights(labels, t: float) -> TransitionWeights:
    """Gaussian-kernel stage weights for time ``t`` of a stage sequence.

    One kernel sits at each stage-run boundary (centered on the midpoint
    between the last source frame and the first target frame) with sigma
    equal to the source run length. A kernel's value at ``t`` is credited
    to the stage owning the side of the boundary that ``t`` lies on (both
    stages at the center itself); kernels beyond 4 sigma are skipped. With
    no transitions in reach, the frame's own run stage takes all the mass.

    ``t`` may be fractional; integer frames therefore never sit exactly on
    a kernel center, and evaluating at a boundary midpoint between two
    equal-length runs yields the exact 0.5/0.5 split.

    Each kernel's support is clipped to its own two runs (besides the
    4-sigma truncation): letting a wide kernel reach across unrelated runs
    would credit frames deep inside another stage to a non-local stage.
    """
    arr = validate_sequence(labels)
    if not 0 <= t <= len(arr) - 1:
        raise ValueError(f"t={t} outside sequence of length {len(arr)}")

    runs = run_lengths(arr)
    w = np.zeros(N_STAGES)
    centers = []
    sigmas = []
    for (src_stage, src_start, src_len), (dst_stage, dst_start, dst_len) in zip(
        runs[:-1], runs[1:]
    ):
        mu = dst_start - 0.5
        sigma = float(src_len)
        centers.append(mu)
        sigmas.append(sigma)
        if abs(t - mu) > KERNEL_TRUNCATION_SIGMAS * sigma:
            continue
        if not src_start <= t <= dst_start + dst_len - 1:
            continue
        v = gaussian_kernel(t, mu, sigma)
        if t < mu:
            w[src_stage - 1] += v
        elif t > mu:
            w[dst_stage - 1] += v
        else:
            w[src_stage - 1] += v
            w[dst_stage - 1] += v

    total = w.sum()
    if total <= 0.0:
        frame = min(max(int(round(t)), 0), len(arr) - 1)
        w[arr[frame] - 1] = 1.0
    else:
        w /= total
    return TransitionWeights(w=w, centers=tuple(centers), sigmas=tuple(sigmas))


def blend_shape(
    models: dict[int, StageShapeModel],
    weights: TransitionWeights,
    params: ShapeSampleParams,
    n_e: int | None = None,
) -> np.ndarray:
    """Weighted sum of per-stage sampled shapes.

    Stages without a model are excluded and the remaining weights are
    renormalized; per-stage mode counts are capped at each model's rank.
    """
    w = np.asarray(weights.w, dtype=float)
    active = [
        (s, w[s - 1]) for s in range(1, N_STAGES + 1)
        if w[s - 1] > 0 and s in models
    ]
    if not active:
        raise ValueError("no stage with positive weight has a shape model")
    total = sum(v for _, v in active)

    out = np.zeros((N_LANDMARKS, 2))
    for stage, v in active:
        model = models[stage]
        k = model.n_modes if n_e is None else min(n_e, model.n_modes)
        out += (v / total) * sample_shape(model, params, k)
    return out


# ---------------------------------------------------------------------------
# rasterization
# ---------------------------------------------------------------------------

def polygon_area(points: np.ndarray) -> float:
    """Shoelace area of a closed polygon given as (n, 2) vertices."""
    x, y = np.asarray(points, dtype=float).T
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def shape_half_extents(points: np.ndarray) -> tuple[float, float]:
    """(minor, major) half extents of a shape in its own frame."""
    spans = points.max(axis=0) - points.min(axis=0)
    half = spans / 2.0
    return float(min(half)), float(max(half))


def rasterize(
    points: np.ndarray,
    canvas_size: tuple[int, int],
    position: tuple[float, float] = None,
    rotation: float = 0.0,
    label: int = 1,
) -> np.ndarray:
    """Scan-line fill a landmark polygon into a label mask.

    Parameters
    ----------
    points : (60, 2) landmarks in the normalized shape frame (y up).
    canvas_size : (rows, cols) of the output mask.
    position : (row, col) of the shape origin; defaults to canvas center.
    rotation : counterclockwise rotation (radians) applied in the shape
        frame before placement.
    label : value written into covered pixels.

    Returns
    -------
    uint16 mask; pixels whose centers fall inside the polygon hold
    ``label``. The polygon is clipped at the canvas bounds.
    """
    h, w = int(canvas_size[0]), int(canvas_size[1])
    if position is None:
        position = ((h - 1) / 2.0, (w - 1) / 2.0)

    c, s = np.cos(rotation), np.sin(rotation)
    rotated = np.asarray(points, dtype=float) @ np.array([[c, s], [-s, c]])
    rows = position[0] - rotated[:, 1]
    cols = position[1] + rotated[:, 0]

    mask = np.zeros((h, w), dtype=np.uint16)
    if polygon_area(np.stack([cols, rows], axis=1)) < 1.0:
        warnings.warn("degenerate polygon (area < 1 px), returning empty mask")
        return mask

    r0 = max(int(np.ceil(rows.min())), 0)
    r1 = min(int(np.floor(rows.max())), h - 1)
    next_rows = np.roll(rows, -1)
    next_cols = np.roll(cols, -1)
    for r in range(r0, r1 + 1):
        lo = np.minimum(rows, next_rows)
        hi = np.maximum(rows, next_rows)
        hit = (lo <= r) & (r < hi)
        if not hit.any():
            continue
        frac = (r - rows[hit]) / (next_rows[hit] - rows[hit])
        crossings = np.sort(cols[hit] + frac * (next_cols[hit] - cols[hit]))
        for ca, cb in zip(crossings[0::2], crossings[1::2]):
            a = max(int(np.ceil(ca)), 0)
            b = min(int(np.floor(cb)), w - 1)
            if a <= b:
                mask[r, a : b + 1] = label
    return mask


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _encode_array(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def _decode_array(entry: dict) -> np.ndarray:
    raw = base64.b64decode(entry["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(entry["shape"]).copy()


def save_shape_models(models: dict[int, StageShapeModel], path):
    """Write stage models as JSON with base64 float64 arrays, keyed by stage."""
    payload = {"format_version": 1, "stages": {}}
    for stage, model in sorted(models.items()):
        payload["stages"][str(stage)] = {
            "mean": _encode_array(model.mean),
            "eigenvalues": _encode_array(model.eigenvalues),
            "eigenvectors": _encode_array(model.eigenvectors),
            "n_train": model.n_train,
        }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def load_shape_models(path) -> dict[int, StageShapeModel]:
    with open(path) as fh:
        payload = json.load(fh)
    models = {}
    for key, entry in payload["stages"].items():
        stage = int(key)
        models[stage] = StageShapeModel(
            stage=stage,
            mean=_decode_array(entry["mean"]),
            eigenvalues=_decode_array(entry["eigenvalues"]),
            eigenvectors=_decode_array(entry["eigenvectors"]),
            n_train=int(entry["n_train"]),
        )
    return models
