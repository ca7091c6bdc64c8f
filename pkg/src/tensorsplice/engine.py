"""The per-stride tracking loop.

Each step detects seed blocks in the incoming slice, pools them with the
blocks retained from earlier strides, and runs pairwise splicing sweeps
over the pool until a sweep moves nothing or the epoch cap is reached.
The densest k+l survivors are retained for the next step and the top k
are reported.

The stream is append-only: retained blocks never lose entries to later
slices, they only gain mass through splicing.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .blocks import Block, Event, TensorSlice
from .detect import DetectParams, detect_top_blocks
from .errors import OutOfOrderSlice, TimeRegression
from .splice import splice_pair


@dataclass(frozen=True)
class EngineConfig:
    """Stream-tracking knobs.

    ``stride`` is the time-bin width in source units (binning itself
    happens at ingestion; the engine consumes bin ordinals). ``k`` blocks
    are reported, ``l`` extra ones are retained as splice material.
    """

    n_modes: int
    stride: int | float
    k: int = 10
    l: int = 5
    max_epochs: int = 5

    def __post_init__(self):
        if self.n_modes < 2:
            raise ValueError("n_modes must be at least 2")
        if self.stride <= 0:
            raise ValueError("stride must be positive")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.l < 0:
            raise ValueError("l must be non-negative")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")

    @property
    def pool_size(self) -> int:
        return self.k + self.l


@dataclass
class EngineState:
    """Retained blocks plus the time frontier, between steps."""

    retained: list[Block] = field(default_factory=list)
    frontier: int = 0  # next bin ordinal to be processed
    step_counter: int = 0
    total_nnz: int = 0

    @classmethod
    def initial(cls) -> "EngineState":
        return cls()


@dataclass
class StepOutput:
    """What one step reports: the top blocks and how long the phases took."""

    step_index: int
    time_range: tuple[int, int]
    top_k: list[Block]
    timing: dict[str, float]


def _order_key(block: Block):
    # Total, deterministic order: density desc, then mass desc, then size,
    # then the canonical id tuples.
    return (
        -(block.mass / block.size),
        -block.mass,
        block.size,
        tuple(tuple(block.sorted_ids(m)) for m in range(block.n_modes)),
    )


def _denser_first(a: Block, b: Block) -> bool:
    """True when a qualifies as the splice target against b (exact compare)."""
    return a.mass * b.size >= b.mass * a.size


def step(
    state: EngineState, slice_: TensorSlice, cfg: EngineConfig
) -> tuple[EngineState, StepOutput]:
    """Process one stride window and report the current top blocks."""
    expected = (state.frontier, state.frontier + 1)
    if tuple(slice_.time_range) != expected:
        raise OutOfOrderSlice(
            f"slice covers bins {slice_.time_range}, engine expected {expected}"
        )

    started = time.perf_counter()
    if slice_.nnz:
        incoming = detect_top_blocks(slice_, DetectParams(cfg.pool_size, cfg.n_modes))
    else:
        incoming = []
    detected_at = time.perf_counter()

    pool = list(state.retained) + incoming
    # Sterile pairs are remembered by object identity; a productive splice
    # returns fresh objects, so staleness cannot hide behind the memo.
    sterile: dict[tuple[int, int], tuple[Block, Block]] = {}
    for _ in range(cfg.max_epochs):
        pool.sort(key=_order_key)
        changed = False
        for i in range(len(pool)):
            for j in range(i + 1, len(pool)):
                a, b = pool[i], pool[j]
                if a.is_empty or b.is_empty:
                    continue
                pair_key = (id(a), id(b))
                if pair_key in sterile:
                    continue
                if _denser_first(a, b):
                    donor_nnz = b.nnz
                    a, b = splice_pair(a, b)
                    moved = b.nnz != donor_nnz
                else:
                    donor_nnz = a.nnz
                    b, a = splice_pair(b, a)
                    moved = a.nnz != donor_nnz
                if moved:
                    changed = True
                    pool[i], pool[j] = a, b
                else:
                    sterile[pair_key] = (a, b)
        pool = [blk for blk in pool if not blk.is_empty]
        if not changed:
            break
    spliced_at = time.perf_counter()

    pool.sort(key=_order_key)
    retained = pool[: cfg.pool_size]
    output = StepOutput(
        step_index=state.step_counter,
        time_range=expected,
        top_k=retained[: cfg.k],
        timing={
            "detect": detected_at - started,
            "splice": spliced_at - detected_at,
        },
    )
    new_state = EngineState(
        retained=retained,
        frontier=state.frontier + 1,
        step_counter=state.step_counter + 1,
        total_nnz=state.total_nnz + slice_.nnz,
    )
    return new_state, output


def run_stream(events: Iterable[Event], cfg: EngineConfig) -> Iterator[StepOutput]:
    """Partition a bin-ordered event stream into strides and step through it.

    Empty bins between occupied ones still produce a StepOutput, so
    per-step series keep a uniform time axis.
    """
    state = EngineState.initial()
    current_bin = 0
    current = TensorSlice(cfg.n_modes, (0, 1))
    saw_events = False
    for event in events:
        t = event.ids[-1]
        if t < current_bin:
            raise TimeRegression(
                f"event in bin {t} after the engine advanced to bin {current_bin}"
            )
        while t > current_bin:
            state, output = step(state, current, cfg)
            yield output
            current_bin += 1
            current = TensorSlice(cfg.n_modes, (current_bin, current_bin + 1))
        current.add(event)
        saw_events = True
    if saw_events:
        _, output = step(state, current, cfg)
        yield output
