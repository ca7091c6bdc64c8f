"""Sparse coordinate tensors and the block algebra everything else runs on.

Entries live in plain dicts keyed by N-tuples of dense integer ids, one id
per mode, and every stored value is strictly positive. By convention the
time-bin ordinal is the last mode. A Block restricts a tensor to explicit
per-mode id sets and keeps two aggregates consistent with its entries at
all times:

* ``mass`` is the sum of entry values,
* ``size`` is the summed cardinality of the per-mode id sets,

and ``density`` is their ratio. The mass cache is always computed from the
entry dict the block holds, so recomputing it later from the same dict
reproduces the cache bit for bit, including for float values.

Blocks behave as values: operations return new instances and never mutate
their arguments, so instances are safe to share across threads. Index sets
are exposed sorted wherever iteration order can leak into output.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DegenerateBlock, NotASubblock, ShapeMismatch

Key = tuple


@dataclass(frozen=True, slots=True)
class Event:
    """One time-stamped tuple: a dense id per mode plus a positive value.

    ``ids[-1]`` is the time-bin ordinal assigned at ingestion.
    """

    ids: tuple
    value: int | float = 1


class TensorSlice:
    """All tuples of one stream window, accumulated in coordinate form.

    ``time_range`` is the half-open ``[lo, hi)`` interval of bin ordinals
    the slice covers; streaming slices always span exactly one bin while
    the full-rerun baseline accumulates a growing range.
    """

    __slots__ = ("n_modes", "entries", "mode_index_sets", "time_range")

    def __init__(self, n_modes: int, time_range: tuple[int, int]):
        if n_modes < 2:
            raise ValueError("a slice needs at least two modes")
        self.n_modes = n_modes
        self.entries: dict[Key, int | float] = {}
        self.mode_index_sets: list[set[int]] = [set() for _ in range(n_modes)]
        self.time_range = time_range

    def add(self, event: Event) -> None:
        """Accumulate one event; duplicate keys sum their values."""
        if len(event.ids) != self.n_modes:
            raise ShapeMismatch(
                f"event has {len(event.ids)} ids, slice expects {self.n_modes}"
            )
        if not event.value > 0:
            raise ValueError("slice entries must have positive values")
        key = tuple(event.ids)
        self.entries[key] = self.entries.get(key, 0) + event.value
        for mode, idx in enumerate(key):
            self.mode_index_sets[mode].add(idx)

    @property
    def nnz(self) -> int:
        return len(self.entries)

    @property
    def mass(self) -> int | float:
        return sum(self.entries.values())

    def to_block(self) -> "Block":
        """Snapshot the whole slice as a block."""
        return Block._adopt(self.n_modes, dict(self.entries))


class Block:
    """A subtensor: per-mode id sets plus the entries they support.

    Index sets are derived from the entries at construction, so the
    structural invariants (no dangling id, no empty mode while entries
    exist, positive values) hold for every instance.
    """

    __slots__ = ("n_modes", "entries", "index_sets", "mass")

    def __init__(self, n_modes: int, entries: dict | None = None):
        self._init(n_modes, dict(entries) if entries else {}, validate=True)

    @classmethod
    def _adopt(cls, n_modes: int, entries: dict) -> "Block":
        # Internal fast path: takes ownership of a freshly built dict.
        self = cls.__new__(cls)
        self._init(n_modes, entries, validate=False)
        return self

    @classmethod
    def _from_parts(cls, n_modes: int, entries: dict, index_sets: list) -> "Block":
        # Internal fast path for callers that maintained the id sets
        # themselves; the mass cache is still recomputed from the entries.
        self = cls.__new__(cls)
        self.n_modes = n_modes
        self.entries = entries
        self.index_sets = index_sets
        self.mass = sum(entries.values())
        return self

    def _init(self, n_modes: int, entries: dict, validate: bool) -> None:
        if validate:
            for key, value in entries.items():
                if len(key) != n_modes:
                    raise ShapeMismatch(
                        f"entry key {key!r} has {len(key)} ids, expected {n_modes}"
                    )
                if not value > 0:
                    raise ValueError(f"entry {key!r} has non-positive value {value!r}")
        index_sets: list[set[int]] = [set() for _ in range(n_modes)]
        for key in entries:
            for mode, idx in enumerate(key):
                index_sets[mode].add(idx)
        self.n_modes = n_modes
        self.entries = entries
        self.index_sets = index_sets
        self.mass = sum(entries.values())

    @classmethod
    def empty(cls, n_modes: int) -> "Block":
        return cls._adopt(n_modes, {})

    @property
    def size(self) -> int:
        return sum(len(s) for s in self.index_sets)

    @property
    def nnz(self) -> int:
        return len(self.entries)

    @property
    def is_empty(self) -> bool:
        return not self.entries

    @property
    def density(self) -> float:
        """Mass over size; undefined for a size-0 block."""
        size = self.size
        if size == 0:
            raise DegenerateBlock("density of an empty block is undefined")
        return self.mass / size

    def sorted_ids(self, mode: int) -> list[int]:
        return sorted(self.index_sets[mode])

    def union_with(self, addition: "Block") -> "Block":
        """Per-mode id-set union; colliding entry keys sum their values."""
        if addition.n_modes != self.n_modes:
            raise ShapeMismatch(
                f"cannot merge a {addition.n_modes}-mode block into "
                f"a {self.n_modes}-mode block"
            )
        merged = dict(self.entries)
        for key, value in addition.entries.items():
            merged[key] = merged.get(key, 0) + value
        return Block._adopt(self.n_modes, merged)

    def subtract(self, removal: "Block") -> "Block":
        """Remove the given entries; ids left without support are pruned."""
        if removal.n_modes != self.n_modes:
            raise ShapeMismatch(
                f"cannot subtract a {removal.n_modes}-mode block from "
                f"a {self.n_modes}-mode block"
            )
        result = dict(self.entries)
        for key, value in removal.entries.items():
            present = result.get(key)
            if present is None or value > present:
                raise NotASubblock(
                    f"entry {key!r} (value {value!r}) is not contained in the block"
                )
            left = present - value
            if left > 0:
                result[key] = left
            else:
                del result[key]
        return Block._adopt(self.n_modes, result)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Block):
            return NotImplemented
        return self.n_modes == other.n_modes and self.entries == other.entries

    __hash__ = None  # mutable-container semantics

    def __repr__(self) -> str:
        return (
            f"Block(n_modes={self.n_modes}, nnz={self.nnz}, "
            f"mass={self.mass}, size={self.size})"
        )
