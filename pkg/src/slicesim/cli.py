"""Experiment driver.

Verbs:
  run <spec>       execute every (mode x seed) run, write per-run windows.csv,
                   a merged summary.csv and, for comparison runs, a
                   comparison.csv of depsac - dsara deltas
  validate <spec>  print all config diagnostics without running
  trace <spec>     emit the traffic traces (and substrate dumps) only
  report <dir>     render figures from a finished run directory

Both modes of a comparison run consume the identical trace file; its checksum
is printed so runs can be audited.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import replace
from pathlib import Path

from . import substrate as subnet
from .config import ExperimentSpec, SpecError, load_spec, validate_spec
from .engine import (
    ExperimentResult,
    SimulationConfig,
    run_experiment,
    write_events_log,
    write_windows_csv,
)
from .slicegen import SliceType, write_trace_csv
from .engine import _child_seeds  # shared seed derivation
from .slicegen import generate_trace

SUMMARY_HEADER = [
    "mode", "seed", "trace_sha256", "cum_profit",
    "ar_total", "ar_embb", "ar_urllc", "ar_mmtc",
    "mean_delay_total", "mean_delay_embb", "mean_delay_urllc", "mean_delay_mmtc",
    "mean_qdelay_total", "mean_qdelay_embb", "mean_qdelay_urllc", "mean_qdelay_mmtc",
    "mean_consumption",
]

COMPARISON_HEADER = [
    "seed", "profit_delta",
    "ar_total_delta", "ar_embb_delta", "ar_urllc_delta", "ar_mmtc_delta",
    "mean_delay_total_delta", "mean_qdelay_urllc_delta", "mean_consumption_delta",
]


def _fmt(value) -> str:
    return "" if value is None else repr(value)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _summary_row(mode: str, seed: int, checksum: str, result: ExperimentResult) -> list[str]:
    row = [mode, str(seed), checksum, _fmt(result.cumulative_profit())]
    row += [_fmt(result.acceptance())] + [_fmt(result.acceptance(st)) for st in SliceType]
    row += [_fmt(result.mean_delay())] + [_fmt(result.mean_delay(st)) for st in SliceType]
    row += [_fmt(result.mean_qdelay())] + [_fmt(result.mean_qdelay(st)) for st in SliceType]
    row.append(_fmt(result.mean_consumption()))
    return row


def _delta(a, b):
    if a is None or b is None:
        return None
    return a - b


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _emit_trace(sim: SimulationConfig, seed: int, out_dir: Path) -> Path:
    cfg = replace(sim, seed=seed)
    trace_seed, _, _ = _child_seeds(seed)
    trace = generate_trace(
        horizon=cfg.n_windows * cfg.window_length,
        rate=cfg.traffic.rate,
        mix=cfg.traffic.mix,
        demands=cfg.traffic.demands,
        seed=trace_seed,
    )
    path = out_dir / f"trace_seed{seed}.csv"
    write_trace_csv(trace, path)
    return path


def cmd_validate(args) -> int:
    try:
        spec = load_spec(args.spec)
    except SpecError as exc:
        for diag in exc.diagnostics:
            print(diag)
        return 1
    diags = validate_spec(spec)
    for diag in diags:
        print(diag)
    return 1 if diags else 0


def cmd_trace(args) -> int:
    spec, rc = _load_and_validate(args)
    if spec is None:
        return rc
    out_dir = Path(args.out or spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for seed in spec.seeds:
        path = _emit_trace(spec.sim, seed, out_dir)
        sn = subnet.generate(
            spec.sim.substrate.n_nodes,
            spec.sim.substrate.attach_m,
            spec.sim.substrate.edge_fraction,
            spec.sim.substrate.profile,
            seed=seed,
        )
        (out_dir / f"substrate_seed{seed}.txt").write_text(subnet.to_text(sn))
        print(f"trace seed={seed} sha256={_sha256(path)} -> {path}")
    return 0


def cmd_run(args) -> int:
    spec, rc = _load_and_validate(args)
    if spec is None:
        return rc
    out_dir = Path(args.out or spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    modes = list(args.mode and [args.mode] or (["depsac", "dsara"] if spec.comparison else [spec.mode]))

    summary_rows: list[list[str]] = []
    results: dict[tuple[str, int], ExperimentResult] = {}
    for seed in spec.seeds:
        trace_path = _emit_trace(spec.sim, seed, out_dir)
        checksum = _sha256(trace_path)
        print(f"trace seed={seed} sha256={checksum}")
        from .slicegen import read_trace_csv

        trace = read_trace_csv(trace_path)
        for mode in modes:
            cfg = replace(spec.sim, mode=mode, seed=seed)
            result = run_experiment(cfg, trace=trace, record_events=args.events)
            run_dir = out_dir / f"{mode}_seed{seed}"
            run_dir.mkdir(parents=True, exist_ok=True)
            write_windows_csv(result.records, run_dir / "windows.csv")
            result.policy.save(run_dir / "agent.ckpt")
            if args.events:
                write_events_log(result.events, run_dir / "events.log")
            summary_rows.append(_summary_row(mode, seed, checksum, result))
            results[(mode, seed)] = result
            print(
                f"run mode={mode} seed={seed} profit={result.cumulative_profit():.1f} "
                f"ar={result.acceptance():.3f}" if result.acceptance() is not None
                else f"run mode={mode} seed={seed} (no offered requests)"
            )

    _write_csv(out_dir / "summary.csv", SUMMARY_HEADER, summary_rows)

    if len(modes) == 2 and set(modes) == {"depsac", "dsara"}:
        rows = []
        for seed in spec.seeds:
            a, b = results[("depsac", seed)], results[("dsara", seed)]
            rows.append([
                str(seed),
                _fmt(_delta(a.cumulative_profit(), b.cumulative_profit())),
                _fmt(_delta(a.acceptance(), b.acceptance())),
                _fmt(_delta(a.acceptance(SliceType.EMBB), b.acceptance(SliceType.EMBB))),
                _fmt(_delta(a.acceptance(SliceType.URLLC), b.acceptance(SliceType.URLLC))),
                _fmt(_delta(a.acceptance(SliceType.MMTC), b.acceptance(SliceType.MMTC))),
                _fmt(_delta(a.mean_delay(), b.mean_delay())),
                _fmt(_delta(a.mean_qdelay(SliceType.URLLC), b.mean_qdelay(SliceType.URLLC))),
                _fmt(_delta(a.mean_consumption(), b.mean_consumption())),
            ])
        _write_csv(out_dir / "comparison.csv", COMPARISON_HEADER, rows)

    if args.figures:
        from .report import render_report

        for path in render_report(out_dir):
            print(f"figure -> {path}")
    return 0


def cmd_report(args) -> int:
    from .report import render_report

    try:
        paths = render_report(Path(args.dir))
    except FileNotFoundError as exc:
        print(exc)
        return 1
    for path in paths:
        print(f"figure -> {path}")
    return 0


def _load_and_validate(args) -> tuple[ExperimentSpec | None, int]:
    try:
        spec = load_spec(args.spec)
    except SpecError as exc:
        for diag in exc.diagnostics:
            print(diag)
        return None, 2
    if getattr(args, "seed_override", None) is not None:
        spec = replace(spec, seeds=(args.seed_override,))
    diags = validate_spec(spec)
    if diags:
        for diag in diags:
            print(diag)
        return None, 1
    return spec, 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="slicesim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment spec")
    p_run.add_argument("spec")
    p_run.add_argument("--seed-override", type=int, default=None)
    p_run.add_argument("--mode", choices=["depsac", "dsara"], default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--events", action="store_true", help="write per-request events.log")
    p_run.add_argument("--figures", action="store_true", help="render figures after the runs")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="check a spec without running")
    p_val.add_argument("spec")
    p_val.set_defaults(func=cmd_validate)

    p_trace = sub.add_parser("trace", help="emit traffic traces only")
    p_trace.add_argument("spec")
    p_trace.add_argument("--seed-override", type=int, default=None)
    p_trace.add_argument("--out", default=None)
    p_trace.set_defaults(func=cmd_trace)

    p_report = sub.add_parser("report", help="render figures from run outputs")
    p_report.add_argument("dir")
    p_report.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # runtime failure -> nonzero, completed outputs stay
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
