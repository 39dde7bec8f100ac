"""Figure rendering for finished runs.

Reads the per-run windows.csv files under an output directory and writes one
PNG per metric family (profit, URLLC queuing delay, acceptance rates,
consumption) into <dir>/figures. Thin lines are individual seeds, bold lines
the per-mode mean across seeds.
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

RUN_DIR_RE = re.compile(r"^(depsac|dsara)_seed(\d+)$")

MODE_COLORS = {"depsac": "tab:blue", "dsara": "tab:orange"}
MODE_LABELS = {"depsac": "delay-aware (depsac)", "dsara": "profit-only (dsara)"}


def _load_windows(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    cols: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        cols[name] = np.array([float(r[j]) if r[j] != "" else np.nan for r in rows])
    return cols


def discover_runs(out_dir: Path) -> dict[str, list[dict[str, np.ndarray]]]:
    runs: dict[str, list[dict[str, np.ndarray]]] = {}
    for child in sorted(out_dir.iterdir()):
        match = RUN_DIR_RE.match(child.name)
        if not match or not (child / "windows.csv").exists():
            continue
        runs.setdefault(match.group(1), []).append(_load_windows(child / "windows.csv"))
    if not runs:
        raise FileNotFoundError(f"no <mode>_seed<k>/windows.csv runs under {out_dir}")
    return runs


def _rolling(values: np.ndarray, width: int = 25) -> np.ndarray:
    out = np.full(len(values), np.nan)
    for i in range(len(values)):
        window = values[max(0, i - width + 1) : i + 1]
        finite = window[np.isfinite(window)]
        if finite.size:
            out[i] = finite.mean()
    return out


def _cumulative_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    c_num, c_den = np.cumsum(num), np.cumsum(den)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(c_den > 0, c_num / c_den, np.nan)


def _plot_series(ax, runs, series_fn, ylabel: str) -> None:
    for mode, run_list in sorted(runs.items()):
        color = MODE_COLORS[mode]
        stack = []
        for cols in run_list:
            y = series_fn(cols)
            stack.append(y)
            ax.plot(y, color=color, alpha=0.25, linewidth=0.8)
        mean = np.nanmean(np.vstack(stack), axis=0)
        ax.plot(mean, color=color, linewidth=2.0, label=MODE_LABELS[mode])
    ax.set_xlabel("window")
    ax.set_ylabel(ylabel)
    ax.legend()
    ax.grid(alpha=0.3)


def render_report(out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    runs = discover_runs(out_dir)
    fig_dir = out_dir / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)

    panels = [
        ("profit.png", "cumulative profit",
         lambda c: np.cumsum(c["profit_total"])),
        ("urllc_qdelay.png", "URLLC queuing delay (rolling mean, windows)",
         lambda c: _rolling(c["qdelay_urllc"])),
        ("acceptance.png", "cumulative URLLC acceptance rate",
         lambda c: _cumulative_ratio(c["accepted_urllc"], c["offered_urllc"])),
        ("consumption.png", "resource consumption (rolling mean)",
         lambda c: _rolling(c["consumption"])),
    ]
    written: list[Path] = []
    for filename, ylabel, series_fn in panels:
        fig, ax = plt.subplots(figsize=(7, 4.2))
        _plot_series(ax, runs, series_fn, ylabel)
        fig.tight_layout()
        path = fig_dir / filename
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)
    return written
