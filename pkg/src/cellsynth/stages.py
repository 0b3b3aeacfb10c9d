"""Mitotic stage sequences: estimation from annotations and constrained sampling.

Stages are labeled 1..6 (interphase, prophase, prometaphase, metaphase,
anaphase, telophase). A cell's life is modeled as a Markov chain over the
six stages with per-stage minimum/maximum dwell times enforced as hard
constraints during sampling.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

N_STAGES = 6
INTERPHASE, PROPHASE, PROMETAPHASE, METAPHASE, ANAPHASE, TELOPHASE = range(1, 7)


def validate_sequence(labels) -> np.ndarray:
    """Coerce to an int array and check all labels are in 1..6."""
    arr = np.asarray(labels, dtype=int)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("stage sequence must be a nonempty 1-D sequence")
    if arr.min() < 1 or arr.max() > N_STAGES:
        bad = arr[(arr < 1) | (arr > N_STAGES)][0]
        raise ValueError(f"stage label {bad} outside 1..{N_STAGES}")
    return arr


def run_lengths(labels) -> list[tuple[int, int, int]]:
    """Decompose a sequence into maximal runs.

    Returns
    -------
    list of (stage, start, length) triples in temporal order.
    """
    arr = validate_sequence(labels)
    runs = []
    start = 0
    for t in range(1, len(arr) + 1):
        if t == len(arr) or arr[t] != arr[start]:
            runs.append((int(arr[start]), start, t - start))
            start = t
    return runs


@dataclass
class StageTransitionModel:
    """Row-stochastic 6x6 transition matrix plus per-stage dwell bounds.

    ``transition[i, j]`` is the probability of moving from stage ``i+1`` to
    stage ``j+1`` in one frame. ``min_duration``/``max_duration`` hold the
    dwell-time bounds in frames; ``max_duration`` may contain ``inf``.
    """

    transition: np.ndarray
    min_duration: np.ndarray = field(
        default_factory=lambda: np.ones(N_STAGES)
    )
    max_duration: np.ndarray = field(
        default_factory=lambda: np.full(N_STAGES, np.inf)
    )

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=float)
        self.min_duration = np.asarray(self.min_duration, dtype=float)
        self.max_duration = np.asarray(self.max_duration, dtype=float)
        if self.transition.shape != (N_STAGES, N_STAGES):
            raise ValueError("transition matrix must be 6x6")
        if np.any(self.transition < 0):
            raise ValueError("transition probabilities must be nonnegative")
        row_sums = self.transition.sum(axis=1)
        live = row_sums > 0
        if np.any(np.abs(row_sums[live] - 1.0) > 1e-9):
            raise ValueError("each nonzero transition row must sum to 1")
        if np.any(self.min_duration < 1):
            raise ValueError("minimum durations must be >= 1 frame")
        if np.any(self.max_duration < self.min_duration):
            raise ValueError("max_duration must be >= min_duration")

    def to_json(self) -> str:
        """Serialize to JSON; infinite max durations are stored as null."""
        payload = {
            "transition": self.transition.tolist(),
            "min_duration": self.min_duration.tolist(),
            "max_duration": [
                None if not np.isfinite(v) else v for v in self.max_duration
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "StageTransitionModel":
        payload = json.loads(text)
        max_dur = [np.inf if v is None else v for v in payload["max_duration"]]
        return cls(
            transition=np.array(payload["transition"], dtype=float),
            min_duration=np.array(payload["min_duration"], dtype=float),
            max_duration=np.array(max_dur, dtype=float),
        )

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "StageTransitionModel":
        with open(path) as fh:
            return cls.from_json(fh.read())


def estimate_transition_model(sequences) -> StageTransitionModel:
    """Estimate transition probabilities and dwell-time bounds from annotations.

    Transition probabilities are relative frequencies of consecutive-frame
    stage pairs. Dwell bounds come from observed maximal run lengths,
    including runs truncated by the observation window. Stages with no
    outgoing observations get a self-loop of probability 1 and dwell bounds
    [1, inf) so the matrix stays row-stochastic.

    Parameters
    ----------
    sequences : iterable of per-cell stage label sequences.
    """
    sequences = [validate_sequence(s) for s in sequences]
    if not sequences:
        raise ValueError("no sequences")

    counts = np.zeros((N_STAGES, N_STAGES), dtype=float)
    min_dur = np.full(N_STAGES, np.inf)
    max_dur = np.zeros(N_STAGES)
    for seq in sequences:
        for a, b in zip(seq[:-1], seq[1:]):
            counts[a - 1, b - 1] += 1
        for stage, _start, length in run_lengths(seq):
            min_dur[stage - 1] = min(min_dur[stage - 1], length)
            max_dur[stage - 1] = max(max_dur[stage - 1], length)

    transition = np.zeros_like(counts)
    outgoing = counts.sum(axis=1)
    for s in range(N_STAGES):
        if outgoing[s] > 0:
            transition[s] = counts[s] / outgoing[s]
        else:
            transition[s, s] = 1.0

    # a stage that never appears gets the self-loop default and open dwell
    # bounds; a stage observed only terminally keeps its observed run
    # lengths (sampling such a model can then legitimately dead-end with
    # "absorbing stage at max duration")
    unobserved = ~np.isfinite(min_dur)
    min_dur[unobserved] = 1.0
    max_dur[unobserved] = np.inf
    return StageTransitionModel(transition, min_dur, max_dur)


def sample_stage_sequence(
    model: StageTransitionModel,
    n_frames: int,
    rng: np.random.Generator,
    initial: int | None = None,
) -> np.ndarray:
    """Sample a stage sequence honoring dwell-time hard constraints.

    The chain stays in the current stage until its minimum duration is met
    and is forced out (drawing from the row renormalized over non-self
    targets) once the maximum duration is reached. When ``initial`` is not
    given the first stage is drawn uniformly from stages with nonzero row
    mass.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    trans = model.transition
    row_mass = trans.sum(axis=1)
    if initial is None:
        candidates = np.flatnonzero(row_mass > 0)
        if candidates.size == 0:
            raise ValueError("transition matrix has no usable rows")
        state = int(candidates[rng.integers(candidates.size)])
    else:
        if not 1 <= initial <= N_STAGES:
            raise ValueError(f"initial stage {initial} outside 1..{N_STAGES}")
        state = initial - 1

    # cumulative rows + inverse-cdf lookups keep the per-frame cost at one
    # uniform draw, which matters for the multi-100k-frame estimation runs
    cum = np.cumsum(trans, axis=1)
    jump_cum = np.full_like(cum, np.nan)
    min_dur = model.min_duration
    max_dur = model.max_duration

    labels = np.empty(n_frames, dtype=int)
    labels[0] = state + 1
    run_len = 1
    for t in range(1, n_frames):
        if run_len < min_dur[state]:
            nxt = state
        elif run_len >= max_dur[state]:
            if np.isnan(jump_cum[state, 0]):
                row = trans[state].copy()
                row[state] = 0.0
                mass = row.sum()
                if mass <= 0:
                    raise ValueError("absorbing stage at max duration")
                jump_cum[state] = np.cumsum(row / mass)
            nxt = min(
                int(np.searchsorted(jump_cum[state], rng.random(), side="right")),
                N_STAGES - 1,
            )
        else:
            nxt = min(
                int(np.searchsorted(cum[state], rng.random() * cum[state, -1],
                                    side="right")),
                N_STAGES - 1,
            )
        run_len = run_len + 1 if nxt == state else 1
        state = nxt
        labels[t] = state + 1
    return labels


def find_division_events(labels) -> list[int]:
    """Frame indices where a metaphase-to-anaphase transition occurs.

    The returned index is the first anaphase frame of each 4 -> 5 boundary.
    """
    arr = validate_sequence(labels)
    return [
        t
        for t in range(1, len(arr))
        if arr[t - 1] == METAPHASE and arr[t] == ANAPHASE
    ]


def read_stage_csv(path) -> list[np.ndarray]:
    """Read annotated sequences: one CSV row per cell, labels as columns."""
    sequences = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            cells = [c.strip() for c in row if c.strip()]
            if not cells:
                continue
            try:
                labels = [int(c) for c in cells]
            except ValueError as exc:
                raise ValueError(f"non-integer stage label in {path}: {exc}")
            sequences.append(validate_sequence(labels))
    if not sequences:
        raise ValueError(f"no sequences found in {path}")
    return sequences


def write_stage_csv(path, sequences):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for seq in sequences:
            writer.writerow([int(v) for v in seq])
