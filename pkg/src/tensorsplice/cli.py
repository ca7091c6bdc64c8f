"""Command-line front end.

Subcommands:

* ``run``       stream a tuple file and emit one JSON line per stride
* ``oracle``    same schema, but re-detect on the full accumulated tensor
                at every stride (the expensive from-scratch baseline)
* ``generate``  write a synthetic stream with one planted dense block
* ``evaluate``  run the engine on a generated stream and score it
* ``scale``     runtime-vs-size measurements for engine and baseline

Exit codes: 0 on success, 2 when parsing aborts, 3 on configuration
errors. Detection output never contains wall-clock numbers, so a fixed
input and seed reproduce byte-identical files; timings go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from typing import Iterable, Iterator, TextIO

from .blocks import Event, TensorSlice
from .detect import DetectParams, detect_top_blocks
from .engine import EngineConfig, StepOutput, run_stream
from .errors import (
    ConfigError,
    DensityInfeasible,
    IngestError,
    TensorSpliceError,
    TimeRegression,
)
from .ingest import (
    SCHEMA_VERSION,
    IngestConfig,
    ModeDictionary,
    emit_step_output,
    parse_tuples,
)
from .synth import (
    InjectedTruth,
    InjectionSpec,
    generate_stream,
    rerun_scaling_run,
    scaling_run,
    score,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are config errors (exit 3)
        raise ConfigError(message)


def _csv_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part != "")
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _shape(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"expected a shape like 50x20, got {text!r}") from None


def _add_ingest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="tuple file, one per line")
    p.add_argument("--modes", default="0,1",
                   help="comma-separated categorical column indices (default 0,1)")
    p.add_argument("--time-col", type=int, default=2,
                   help="streaming timestamp column (default 2)")
    p.add_argument("--value-col", type=int, default=None,
                   help="value column; omitted means every tuple counts 1")
    p.add_argument("--binned-cols", default="",
                   help="extra timestamp columns binned with the stride "
                        "and kept as ordinary modes")
    p.add_argument("--stride", type=float, required=True,
                   help="time-bin width in source units (no default)")
    p.add_argument("--t0", type=float, default=None,
                   help="stream origin; defaults to the first tuple's time")
    p.add_argument("--delimiter", default="\t")
    p.add_argument("--time-format", choices=("epoch", "iso"), default="epoch")
    p.add_argument("--header", action="store_true", help="skip the first line")
    p.add_argument("--on-error", choices=("abort", "skip"), default="abort")


def _add_engine_flags(p: argparse.ArgumentParser, k_default: int = 10) -> None:
    p.add_argument("--k", type=int, default=k_default,
                   help=f"blocks reported per step (default {k_default})")
    p.add_argument("--l", type=int, default=5,
                   help="extra retained blocks kept as splice material (default 5)")
    p.add_argument("--max-epochs", type=int, default=5,
                   help="splicing sweeps per step (default 5)")
    p.add_argument("--workers", type=int, default=1,
                   help="reserved concurrency knob; the current implementation "
                        "is single-process")


def _ingest_config(args) -> IngestConfig:
    stride = args.stride
    if stride == int(stride):
        stride = int(stride)
    t0 = args.t0
    if t0 is not None and t0 == int(t0):
        t0 = int(t0)
    return IngestConfig(
        mode_cols=_csv_ints(args.modes),
        time_col=args.time_col,
        stride=stride,
        value_col=args.value_col,
        binned_cols=_csv_ints(args.binned_cols),
        t0=t0,
        delimiter=args.delimiter,
        time_format=args.time_format,
        has_header=args.header,
        on_error=args.on_error,
    )


def _open_output(path: str | None) -> TextIO:
    return open(path, "w", encoding="utf-8") if path else sys.stdout


def _counting(events: Iterable[Event], box: dict) -> Iterator[Event]:
    for event in events:
        box["nnz"] += 1
        box["mass"] = box.get("mass", 0) + event.value
        yield event


def cmd_run(args) -> int:
    cfg = _ingest_config(args)
    engine_cfg = EngineConfig(
        n_modes=cfg.n_modes, stride=cfg.stride, k=args.k, l=args.l,
        max_epochs=args.max_epochs,
    )
    dicts = ModeDictionary.for_config(cfg)
    counters = {"nnz": 0}
    steps = 0
    detect_s = splice_s = 0.0
    started = time.perf_counter()
    out = _open_output(args.output)
    try:
        with open(args.input, "r", encoding="utf-8") as handle:
            events = _counting(parse_tuples(handle, cfg, dicts), counters)
            for output in run_stream(events, engine_cfg):
                out.write(emit_step_output(output, dicts))
                out.write("\n")
                steps += 1
                detect_s += output.timing["detect"]
                splice_s += output.timing["splice"]
    finally:
        if out is not sys.stdout:
            out.close()
    wall = time.perf_counter() - started
    print(
        f"steps={steps} nnz={counters['nnz']} detect={detect_s:.3f}s "
        f"splice={splice_s:.3f}s wall={wall:.3f}s",
        file=sys.stderr,
    )
    return 0


def iter_rerun_outputs(
    events: Iterable[Event], cfg: EngineConfig
) -> Iterator[StepOutput]:
    """Re-detect on the full accumulated tensor at every stride."""
    params = DetectParams(cfg.pool_size, cfg.n_modes)
    accumulated = TensorSlice(cfg.n_modes, (0, 1))
    current_bin = 0
    saw_events = False

    def detect_now(step_index: int) -> StepOutput:
        accumulated.time_range = (0, step_index + 1)
        begun = time.perf_counter()
        found = detect_top_blocks(accumulated, params) if accumulated.nnz else []
        elapsed = time.perf_counter() - begun
        return StepOutput(
            step_index=step_index,
            time_range=(step_index, step_index + 1),
            top_k=found[: cfg.k],
            timing={"detect": elapsed, "splice": 0.0},
        )

    for event in events:
        t = event.ids[-1]
        if t < current_bin:
            raise TimeRegression(
                f"event in bin {t} after the baseline advanced to bin {current_bin}"
            )
        while t > current_bin:
            yield detect_now(current_bin)
            current_bin += 1
        accumulated.add(event)
        saw_events = True
    if saw_events:
        yield detect_now(current_bin)


def cmd_oracle(args) -> int:
    cfg = _ingest_config(args)
    engine_cfg = EngineConfig(
        n_modes=cfg.n_modes, stride=cfg.stride, k=args.k, l=args.l,
        max_epochs=args.max_epochs,
    )
    dicts = ModeDictionary.for_config(cfg)
    counters = {"nnz": 0}
    steps = 0
    detect_s = 0.0
    started = time.perf_counter()
    out = _open_output(args.output)
    try:
        with open(args.input, "r", encoding="utf-8") as handle:
            events = _counting(parse_tuples(handle, cfg, dicts), counters)
            for output in iter_rerun_outputs(events, engine_cfg):
                out.write(emit_step_output(output, dicts))
                out.write("\n")
                steps += 1
                detect_s += output.timing["detect"]
    finally:
        if out is not sys.stdout:
            out.close()
    wall = time.perf_counter() - started
    print(
        f"steps={steps} nnz={counters['nnz']} detect={detect_s:.3f}s wall={wall:.3f}s",
        file=sys.stderr,
    )
    return 0


def cmd_generate(args) -> int:
    spec = InjectionSpec(
        block_shape=_shape(args.block),
        density=args.density,
        span_bins=args.span,
        n_bins=args.bins,
        background_tuples=args.background_tuples,
        background_shape=_shape(args.background),
        seed=args.seed,
        start_bin=args.start_bin,
        stride=int(args.gen_stride),
        value_mode=args.density_mode,
    )
    lines, truth = generate_stream(spec)
    with open(args.output, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines))
        handle.write("\n")
    with open(args.truth, "w", encoding="utf-8") as handle:
        json.dump(truth.to_json(), handle, separators=(",", ":"))
        handle.write("\n")
    print(f"tuples={len(lines)} injected={spec.injected_nnz}", file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    with open(args.truth, "r", encoding="utf-8") as handle:
        truth = InjectedTruth.from_json(json.load(handle))
    n_categorical = len(truth.mode_ids)
    cfg = IngestConfig(
        mode_cols=tuple(range(n_categorical)),
        time_col=n_categorical,
        stride=truth.stride,
        value_col=n_categorical + 1,
        t0=truth.t0,
    )
    engine_cfg = EngineConfig(
        n_modes=cfg.n_modes, stride=cfg.stride, k=args.k, l=args.l,
        max_epochs=args.max_epochs,
    )
    dicts = ModeDictionary.for_config(cfg)
    density_series: list[float] = []
    timings: list[float] = []
    last_output = None
    with open(args.input, "r", encoding="utf-8") as handle:
        for output in run_stream(parse_tuples(handle, cfg, dicts), engine_cfg):
            last_output = output
            density_series.append(
                round(output.top_k[0].density, 9) if output.top_k else 0.0
            )
            timings.append(output.timing["detect"] + output.timing["splice"])
    if last_output is None:
        raise ConfigError("input stream is empty, nothing to evaluate")
    report = score(last_output, truth, dicts, per_entry=args.per_entry)
    payload = {
        "schema": SCHEMA_VERSION,
        "precision": round(report.precision, 9),
        "recall": round(report.recall, 9),
        "f_measure": round(report.f_measure, 9),
        "density_series": density_series,
    }
    if args.timings:
        payload["timings"] = timings
    out = _open_output(args.output)
    try:
        json.dump(payload, out, separators=(",", ":"))
        out.write("\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_scale(args) -> int:
    cfg = EngineConfig(n_modes=3, stride=1, k=args.k, l=args.l,
                       max_epochs=args.max_epochs)
    engine = scaling_run(
        _csv_ints(args.sizes), cfg=cfg, seed=args.seed, repeats=args.repeats
    )
    baseline = rerun_scaling_run(
        args.oracle_steps, args.oracle_slice_nnz, cfg=cfg, seed=args.seed
    )
    payload = {
        "schema": SCHEMA_VERSION,
        "engine": {
            "slope": engine.slope,
            "ci95": [engine.ci_low, engine.ci_high],
            "points": engine.points,
        },
        "rerun_baseline": {
            "slope": baseline.slope,
            "ci95": [baseline.ci_low, baseline.ci_high],
            "points": baseline.points,
        },
    }
    out = _open_output(args.output)
    try:
        json.dump(payload, out, separators=(",", ":"))
        out.write("\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="tensorsplice",
                     description="streaming top-k dense block tracking")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="stream a tuple file, one JSON line per stride")
    _add_ingest_flags(p)
    _add_engine_flags(p)
    p.add_argument("--output", default=None, help="default: stdout")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("oracle", help="full re-detection baseline, same schema")
    _add_ingest_flags(p)
    _add_engine_flags(p)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("generate", help="synthesize a stream with a planted block")
    p.add_argument("--block", required=True, help="planted shape, e.g. 50x20")
    p.add_argument("--density", type=float, required=True,
                   help="planted cell fraction of the block volume")
    p.add_argument("--span", type=int, required=True, help="bins the block occupies")
    p.add_argument("--bins", type=int, required=True, help="total stream bins")
    p.add_argument("--background-tuples", type=int, required=True)
    p.add_argument("--background", required=True,
                   help="background id ranges, e.g. 3000x2000")
    p.add_argument("--start-bin", type=int, default=0)
    p.add_argument("--gen-stride", type=int, default=100,
                   help="source time units per bin in the written file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--density-mode", choices=("cells", "multi"), default="cells",
                   help="cells: distinct cells (density <= 1); multi: draw with "
                        "replacement so entry values exceed 1")
    p.add_argument("--output", required=True, help="tuple file to write")
    p.add_argument("--truth", required=True, help="ground-truth JSON to write")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="run the engine on a generated stream "
                                        "and score against its truth")
    p.add_argument("--input", required=True)
    p.add_argument("--truth", required=True)
    _add_engine_flags(p, k_default=1)
    p.add_argument("--per-entry", action="store_true",
                   help="score planted cells instead of entities")
    p.add_argument("--timings", action="store_true",
                   help="include per-step seconds (breaks byte-stable output)")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("scale", help="log-log runtime slopes for engine and baseline")
    p.add_argument("--sizes", default="1000,2000,4000,8000,16000",
                   help="per-slice nnz targets for the engine measurement")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--oracle-steps", type=int, default=8)
    p.add_argument("--oracle-slice-nnz", type=int, default=4000)
    _add_engine_flags(p, k_default=3)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_scale)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigError, DensityInfeasible) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (IngestError, TimeRegression) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TensorSpliceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
