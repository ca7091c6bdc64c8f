"""Parsing delimited tuple files into dense-id events, and writing results.

Mode layout convention, used everywhere downstream: the categorical
columns come first in their configured order, then any extra time-binned
columns, and the streaming time bin is always the last mode.

Timestamps are shifted by the stream origin ``t0`` (the first tuple's
timestamp unless configured) and binned with floor semantics, so a tuple
at time t lands in bin ``floor((t - t0) / stride)``. The same origin and
stride apply to extra time-binned columns.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import datetime
from math import floor
from typing import Iterable, Iterator

from .blocks import Block, Event
from .engine import StepOutput
from .errors import BadTimestamp, ConfigError, MalformedLine, NegativeValue

log = logging.getLogger(__name__)

SCHEMA_VERSION = "tensorsplice/1"

CATEGORICAL = "categorical"
BINNED = "binned"
TIME = "time"


@dataclass
class IngestConfig:
    """Column roles and binning for one tuple file."""

    mode_cols: tuple[int, ...]
    time_col: int
    stride: int | float
    value_col: int | None = None
    binned_cols: tuple[int, ...] = ()
    t0: int | float | None = None
    delimiter: str = "\t"
    time_format: str = "epoch"  # or "iso"
    has_header: bool = False
    on_error: str = "abort"  # or "skip"

    def __post_init__(self):
        if len(self.mode_cols) < 1:
            raise ConfigError("need at least one categorical mode column")
        if self.stride <= 0:
            raise ConfigError("stride must be positive")
        if self.time_col in self.mode_cols or self.time_col in self.binned_cols:
            raise ConfigError("the time column cannot double as a mode column")
        if self.time_format not in ("epoch", "iso"):
            raise ConfigError(f"unknown time format {self.time_format!r}")
        if self.on_error not in ("abort", "skip"):
            raise ConfigError(f"unknown error policy {self.on_error!r}")

    @property
    def n_modes(self) -> int:
        return len(self.mode_cols) + len(self.binned_cols) + 1

    @property
    def mode_kinds(self) -> tuple[str, ...]:
        return (
            (CATEGORICAL,) * len(self.mode_cols)
            + (BINNED,) * len(self.binned_cols)
            + (TIME,)
        )


class ModeDictionary:
    """Per-mode raw-value <-> dense-id maps.

    Categorical modes assign dense ids in first-seen order; time-binned
    modes and the streaming time mode are identity (the bin ordinal is
    the id).
    """

    def __init__(self, kinds: tuple[str, ...]):
        self.kinds = kinds
        self._to_id: list[dict[str, int]] = [{} for _ in kinds]
        self._to_raw: list[list[str]] = [[] for _ in kinds]

    @classmethod
    def for_config(cls, cfg: IngestConfig) -> "ModeDictionary":
        return cls(cfg.mode_kinds)

    @property
    def n_modes(self) -> int:
        return len(self.kinds)

    def encode(self, mode: int, raw: str) -> int:
        if self.kinds[mode] != CATEGORICAL:
            return int(raw)
        table = self._to_id[mode]
        idx = table.get(raw)
        if idx is None:
            idx = len(table)
            table[raw] = idx
            self._to_raw[mode].append(raw)
        return idx

    def decode(self, mode: int, idx: int) -> str | int:
        if self.kinds[mode] != CATEGORICAL:
            return idx
        return self._to_raw[mode][idx]

    def size(self, mode: int) -> int:
        return len(self._to_raw[mode])


def _parse_timestamp(raw: str, fmt: str, lineno: int) -> float:
    if fmt == "epoch":
        try:
            return float(raw)
        except ValueError:
            raise BadTimestamp(f"not an epoch timestamp: {raw!r}", lineno) from None
    try:
        return datetime.fromisoformat(raw).timestamp()
    except ValueError:
        raise BadTimestamp(f"not an ISO-8601 timestamp: {raw!r}", lineno) from None


def _parse_value(raw: str, lineno: int) -> int | float:
    try:
        value = int(raw)
    except ValueError:
        try:
            value = float(raw)
        except ValueError:
            raise MalformedLine(f"bad value field: {raw!r}", lineno) from None
    if value < 0:
        raise NegativeValue(f"negative value {value!r}", lineno)
    return value


def parse_tuples(
    lines: Iterable[str], cfg: IngestConfig, dicts: ModeDictionary
) -> Iterator[Event]:
    """Yield dense-id events from delimited text, one tuple per line.

    Dictionaries extend as unseen raw values appear. Zero-valued tuples
    are dropped. Under ``on_error="skip"`` bad lines are logged and
    skipped instead of aborting.
    """
    needed = max(
        (*cfg.mode_cols, cfg.time_col, *cfg.binned_cols),
        default=0,
    )
    if cfg.value_col is not None:
        needed = max(needed, cfg.value_col)
    t0 = cfg.t0
    warned_extra = False
    for lineno, raw_line in enumerate(lines, 1):
        if cfg.has_header and lineno == 1:
            continue
        line = raw_line.rstrip("\r\n")
        if not line:
            continue
        try:
            parts = line.split(cfg.delimiter)
            if len(parts) <= needed:
                raise MalformedLine(
                    f"has {len(parts)} columns, need at least {needed + 1}", lineno
                )
            if len(parts) > needed + 1 and not warned_extra:
                log.warning("line %d: extra columns beyond %d are ignored", lineno, needed + 1)
                warned_extra = True

            ts = _parse_timestamp(parts[cfg.time_col], cfg.time_format, lineno)
            if t0 is None:
                t0 = ts
            time_bin = floor((ts - t0) / cfg.stride)
            if time_bin < 0:
                raise BadTimestamp(
                    f"timestamp {parts[cfg.time_col]!r} precedes the stream origin",
                    lineno,
                )

            value = 1 if cfg.value_col is None else _parse_value(parts[cfg.value_col], lineno)
            if value == 0:
                continue

            ids = [dicts.encode(m, parts[col]) for m, col in enumerate(cfg.mode_cols)]
            for col in cfg.binned_cols:
                extra_ts = _parse_timestamp(parts[col], cfg.time_format, lineno)
                extra_bin = floor((extra_ts - t0) / cfg.stride)
                if extra_bin < 0:
                    raise BadTimestamp(
                        f"binned column {col} precedes the stream origin", lineno
                    )
                ids.append(extra_bin)
            ids.append(time_bin)
            yield Event(tuple(ids), value)
        except (MalformedLine, BadTimestamp, NegativeValue) as exc:
            if cfg.on_error == "abort":
                raise
            log.warning("skipping %s", exc)


def _sig12(x: float) -> float:
    # At most 12 significant digits so serialized numbers are stable.
    return float(f"{x:.12g}")


def _number(x: int | float) -> int | float:
    return x if isinstance(x, int) else _sig12(x)


def block_payload(block: Block, dicts: ModeDictionary) -> dict:
    """One block as a JSON-ready mapping with a fixed key order."""
    return {
        "density": _sig12(block.density),
        "mass": _number(block.mass),
        "size": block.size,
        "modes": [
            [dicts.decode(m, idx) for idx in block.sorted_ids(m)]
            for m in range(block.n_modes)
        ],
    }


def emit_step_output(out: StepOutput, dicts: ModeDictionary) -> str:
    """Serialize one step as a single JSON line, byte-stable across runs."""
    obj = {
        "schema": SCHEMA_VERSION,
        "step": out.step_index,
        "time_range": list(out.time_range),
        "blocks": [block_payload(block, dicts) for block in out.top_k],
    }
    return json.dumps(obj, separators=(",", ":"))
