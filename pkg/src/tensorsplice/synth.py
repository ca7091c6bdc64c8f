"""Synthetic streams with one planted dense block, plus scoring and scaling.

The generator writes raw tuple lines (background noise sampled uniformly
over its own id ranges and bins, planted cells sampled inside the block's
index product) so the full ingestion path is exercised. Planted entities
use ids beyond the background ranges, and the ground truth records their
raw labels, the occupied bin span, and the binning origin so evaluation
can replay the stream exactly.

Scoring counts per-mode entity membership: an entity is a hit when its
raw label appears both in some reported block and in the planted block.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .blocks import Event, TensorSlice
from .engine import EngineConfig, EngineState, StepOutput, step
from .errors import DensityInfeasible
from .ingest import ModeDictionary
from .detect import DetectParams, detect_top_blocks

_PREFIXES = ("u", "i", "a", "b", "c", "d")


def _label(mode: int, idx: int) -> str:
    prefix = _PREFIXES[mode] if mode < len(_PREFIXES) else f"m{mode}x"
    return f"{prefix}{idx}"


@dataclass(frozen=True)
class InjectionSpec:
    """One planted block inside uniform background noise.

    ``density`` is the planted cell fraction: entries = round(density *
    block volume), volume counting the time span. In ``cells`` mode the
    entries are distinct cells (density at most 1); in ``multi`` mode
    cells are drawn with replacement so values above 1 appear and density
    may exceed 1.
    """

    block_shape: tuple[int, ...]
    density: float
    span_bins: int
    n_bins: int
    background_tuples: int
    background_shape: tuple[int, ...]
    seed: int
    start_bin: int = 0
    stride: int = 100
    value_mode: str = "cells"  # or "multi"

    def __post_init__(self):
        if len(self.block_shape) != len(self.background_shape):
            raise DensityInfeasible("block and background mode counts differ")
        if not self.block_shape or any(c < 1 for c in self.block_shape):
            raise DensityInfeasible("block cardinalities must be positive")
        if self.span_bins < 1 or self.start_bin < 0:
            raise DensityInfeasible("span must cover at least one bin")
        if self.start_bin + self.span_bins > self.n_bins:
            raise DensityInfeasible("span exceeds the stream's bins")
        if self.value_mode not in ("cells", "multi"):
            raise DensityInfeasible(f"unknown value mode {self.value_mode!r}")
        if self.injected_nnz < 1:
            raise DensityInfeasible("density too small: no cells to inject")
        if self.value_mode == "cells" and self.injected_nnz > self.volume:
            raise DensityInfeasible(
                f"{self.injected_nnz} cells exceed the block volume {self.volume}; "
                "use value_mode='multi' for densities above 1"
            )

    @property
    def volume(self) -> int:
        return math.prod(self.block_shape) * self.span_bins

    @property
    def injected_nnz(self) -> int:
        return round(self.density * self.volume)

    @property
    def n_modes(self) -> int:
        return len(self.block_shape) + 1


@dataclass
class InjectedTruth:
    """What was planted, in raw-label terms, plus replay parameters."""

    mode_ids: list[list[str]]
    span: tuple[int, int]  # [start, end) bins
    density: float
    seed: int
    stride: int
    t0: int
    n_bins: int
    cells: list | None = None

    def to_json(self) -> dict:
        return {
            "schema": "tensorsplice/1",
            "mode_ids": self.mode_ids,
            "span": list(self.span),
            "density": self.density,
            "seed": self.seed,
            "stride": self.stride,
            "t0": self.t0,
            "n_bins": self.n_bins,
            "cells": self.cells,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "InjectedTruth":
        return cls(
            mode_ids=obj["mode_ids"],
            span=tuple(obj["span"]),
            density=obj["density"],
            seed=obj["seed"],
            stride=obj["stride"],
            t0=obj["t0"],
            n_bins=obj["n_bins"],
            cells=obj.get("cells"),
        )


@dataclass
class EvalReport:
    """Detection quality against the planted block."""

    precision: float
    recall: float
    f_measure: float
    density_series: list[float] | None = None


def _decode_cell(offset: int, shape: Sequence[int]) -> list[int]:
    out = []
    for card in reversed(shape):
        out.append(offset % card)
        offset //= card
    out.reverse()
    return out


def generate_stream(spec: InjectionSpec) -> tuple[list[str], InjectedTruth]:
    """Deterministically build the raw tuple lines and their ground truth.

    Lines are tab-separated ``label.. timestamp value`` records, shuffled
    within each bin and ordered by bin, values all 1 (multi-mode repeats
    the same cell instead).
    """
    rng = random.Random(spec.seed)
    by_bin: list[list[str]] = [[] for _ in range(spec.n_bins)]

    for _ in range(spec.background_tuples):
        ids = [rng.randrange(card) for card in spec.background_shape]
        b = rng.randrange(spec.n_bins)
        t = b * spec.stride + rng.randrange(spec.stride)
        fieldsets = [_label(m, idx) for m, idx in enumerate(ids)]
        by_bin[b].append("\t".join(fieldsets + [str(t), "1"]))

    cell_shape = (*spec.block_shape, spec.span_bins)
    if spec.value_mode == "cells":
        offsets = rng.sample(range(spec.volume), spec.injected_nnz)
    else:
        offsets = [rng.randrange(spec.volume) for _ in range(spec.injected_nnz)]
    truth_cells = []
    for offset in offsets:
        *mode_idx, bin_off = _decode_cell(offset, cell_shape)
        b = spec.start_bin + bin_off
        t = b * spec.stride + rng.randrange(spec.stride)
        labels = [
            _label(m, spec.background_shape[m] + idx)
            for m, idx in enumerate(mode_idx)
        ]
        truth_cells.append(labels + [b])
        by_bin[b].append("\t".join(labels + [str(t), "1"]))

    for bucket in by_bin:
        rng.shuffle(bucket)
    lines = [line for bucket in by_bin for line in bucket]

    truth = InjectedTruth(
        mode_ids=[
            [_label(m, spec.background_shape[m] + j) for j in range(card)]
            for m, card in enumerate(spec.block_shape)
        ],
        span=(spec.start_bin, spec.start_bin + spec.span_bins),
        density=spec.density,
        seed=spec.seed,
        stride=spec.stride,
        t0=0,
        n_bins=spec.n_bins,
        cells=truth_cells,
    )
    return lines, truth


def score(
    detected: StepOutput,
    truth: InjectedTruth,
    dicts: ModeDictionary,
    per_entry: bool = False,
) -> EvalReport:
    """Precision/recall/F over planted vs reported entities.

    Entities are (mode, raw label) pairs pooled across the non-time
    modes; membership in any reported block counts. ``per_entry`` scores
    reported entry cells against planted cells instead (requires the
    truth to carry them).
    """
    if per_entry:
        if truth.cells is None:
            raise ValueError("truth has no cells; regenerate with cells included")
        truth_set = {tuple(c) for c in truth.cells}
        got = set()
        for block in detected.top_k:
            n = block.n_modes
            for key in block.entries:
                got.add(
                    tuple(dicts.decode(m, key[m]) for m in range(n - 1)) + (key[-1],)
                )
    else:
        truth_set = {
            (mode, label)
            for mode, labels in enumerate(truth.mode_ids)
            for label in labels
        }
        got = set()
        for block in detected.top_k:
            for mode in range(block.n_modes - 1):
                for idx in block.index_sets[mode]:
                    got.add((mode, dicts.decode(mode, idx)))

    hits = len(got & truth_set)
    precision = hits / len(got) if got else 0.0
    recall = hits / len(truth_set) if truth_set else 0.0
    if precision + recall == 0:
        f_measure = 0.0
    else:
        f_measure = 2 * precision * recall / (precision + recall)
    return EvalReport(precision=precision, recall=recall, f_measure=f_measure)


# ---------------------------------------------------------------------------
# Runtime scaling


@dataclass
class ScalingReport:
    slope: float
    ci_low: float
    ci_high: float
    points: list[tuple[int, float]] = field(default_factory=list)


# Two-sided 95% critical values of Student's t by degrees of freedom.
_T95 = {
    1: 12.706, 2: 4.303, 3: 3.182, 4: 2.776, 5: 2.571, 6: 2.447, 7: 2.365,
    8: 2.306, 9: 2.262, 10: 2.228, 12: 2.179, 15: 2.131, 20: 2.086, 30: 2.042,
}


def _t95(df: int) -> float:
    if df <= 0:
        return float("inf")
    for bound in sorted(_T95):
        if df <= bound:
            return _T95[bound]
    return 1.96


def fit_loglog(points: Sequence[tuple[float, float]]) -> ScalingReport:
    """Least-squares slope of log(y) on log(x) with a 95% interval."""
    if len(points) < 3:
        raise ValueError("need at least 3 points for a slope estimate")
    xs = [math.log(x) for x, _ in points]
    ys = [math.log(max(y, 1e-12)) for _, y in points]
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = my - slope * mx
    sse = sum((y - (intercept + slope * x)) ** 2 for x, y in zip(xs, ys))
    se = math.sqrt(max(sse, 0.0) / (n - 2) / sxx) if n > 2 else 0.0
    width = _t95(n - 2) * se
    return ScalingReport(
        slope=slope,
        ci_low=slope - width,
        ci_high=slope + width,
        points=[(int(x), y) for x, y in points],
    )


def _random_slice(
    nnz: int, shape: tuple[int, ...], bin_: int, rng: random.Random,
    id_offset: int = 0,
) -> TensorSlice:
    slice_ = TensorSlice(len(shape) + 1, (bin_, bin_ + 1))
    for _ in range(nnz):
        ids = tuple(id_offset + rng.randrange(card) for card in shape) + (bin_,)
        slice_.add(Event(ids, 1))
    return slice_


def _default_step_timer(cfg: EngineConfig, seed: int, repeats: int) -> Callable[[int], float]:
    def run(nnz: int) -> float:
        # Id ranges scale with the slice so sparsity stays comparable
        # across sizes.
        shape = (max(nnz // 2, 4), max(nnz // 4, 4))
        best = float("inf")
        for rep in range(repeats):
            rng = random.Random(seed * 1_000_003 + nnz * 31 + rep)
            slice_ = _random_slice(nnz, shape, 0, rng)
            _, out = step(EngineState.initial(), slice_, cfg)
            best = min(best, out.timing["detect"] + out.timing["splice"])
        return best

    return run


def scaling_run(
    sizes: Sequence[int],
    cfg: EngineConfig | None = None,
    seed: int = 0,
    repeats: int = 3,
    timer: Callable[[int], float] | None = None,
) -> ScalingReport:
    """Per-step engine cost against slice nnz, as a fitted log-log slope.

    ``timer`` maps an nnz target to measured seconds; the default builds
    a uniform random slice of that many entries and times one engine
    step on it (best of ``repeats``).
    """
    if len(sizes) < 4:
        raise ValueError("need at least 4 sizes")
    if max(sizes) < 16 * min(sizes):
        raise ValueError("sizes must span at least a 16x range")
    if timer is None:
        cfg = cfg or EngineConfig(n_modes=3, stride=1, k=3, l=2)
        timer = _default_step_timer(cfg, seed, repeats)
    points = [(size, timer(size)) for size in sizes]
    return fit_loglog(points)


def rerun_scaling_run(
    n_steps: int,
    slice_nnz: int,
    cfg: EngineConfig | None = None,
    seed: int = 0,
) -> ScalingReport:
    """Cumulative cost of the from-scratch re-run baseline.

    Feeds constant-size slices whose id ranges augment per stride, as a
    streaming tensor's modes do, and re-detects on the full accumulated
    tensor at every step; returns the slope of cumulative seconds against
    cumulative nnz. Re-running over all history makes this superlinear.
    """
    if n_steps < 4:
        raise ValueError("need at least 4 steps")
    cfg = cfg or EngineConfig(n_modes=3, stride=1, k=3, l=2)
    shape = (max(slice_nnz // 2, 4), max(slice_nnz // 4, 4))
    rng = random.Random(seed)
    accumulated = TensorSlice(cfg.n_modes, (0, n_steps))
    points = []
    total_time = 0.0
    total_nnz = 0
    params = DetectParams(cfg.pool_size, cfg.n_modes)
    for b in range(n_steps):
        offset = b * shape[0]
        for _ in range(slice_nnz):
            ids = tuple(offset + rng.randrange(card) for card in shape) + (b,)
            accumulated.add(Event(ids, 1))
        total_nnz += slice_nnz
        started = time.perf_counter()
        detect_top_blocks(accumulated, params)
        total_time += time.perf_counter() - started
        points.append((total_nnz, total_time))
    return fit_loglog(points)
