"""Matplotlib figure rendering for the report path.

Renders the standard set of figures from a spike train and its analysis
report: raster, per-neuron rate distribution, participation vs window
length, and Fano-factor time series.  Figures are written to files; no
interactive backend is required.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .analysis import SpikeTrain  # noqa: E402


def raster_figure(train: SpikeTrain, path, max_points: int = 200_000) -> Path:
    times = train.times_ms / 1000.0
    ids = train.neuron_ids
    if len(times) > max_points:
        stride = len(times) // max_points + 1
        times, ids = times[::stride], ids[::stride]
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.scatter(times, ids, s=1.0, marker=".", linewidths=0, color="k")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("neuron id")
    ax.set_xlim(0, train.duration_s)
    ax.set_ylim(-1, train.n_neurons)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def rates_figure(report: dict, path) -> Path:
    rates = report["rates"]
    fig, ax = plt.subplots(figsize=(10, 3.2))
    ax.bar(range(len(rates)), rates, width=1.0, color="tab:blue")
    ax.set_xlabel("neuron id")
    ax.set_ylabel("mean rate (Hz)")
    mean = report["population_rate_mean_hz"]
    std = report["population_rate_std_hz"]
    ax.set_title(f"mean rate {mean:.2f} +/- {std:.2f} Hz")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def participation_figure(report: dict, path) -> Path:
    windows = sorted(report["participation"], key=float)
    means = [report["participation"][w]["mean_pct"] for w in windows]
    stds = [report["participation"][w]["std_pct"] for w in windows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(range(len(windows)), means, yerr=stds, fmt="o-", capsize=4)
    ax.set_xticks(range(len(windows)), [f"{w} s" for w in windows])
    ax.set_xlabel("window length")
    ax.set_ylabel("participation (%)")
    ax.set_ylim(0, 105)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def fano_figure(report: dict, path) -> Path:
    fig, ax = plt.subplots(figsize=(8, 3.5))
    for w in sorted(report["fano"], key=float):
        series = report["fano"][w]
        t = series["t_s"]
        mean = [float("nan") if m is None else m for m in series["mean"]]
        lo = [float("nan") if m is None else m for m in series["min"]]
        hi = [float("nan") if m is None else m for m in series["max"]]
        (line,) = ax.plot(t, mean, label=f"{w} s window")
        ax.fill_between(t, lo, hi, alpha=0.15, color=line.get_color())
    ax.set_xlabel("time (s)")
    ax.set_ylabel("Fano factor")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_all(train: SpikeTrain, report: dict, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    written = [
        raster_figure(train, out_dir / "raster.png"),
        rates_figure(report, out_dir / "rates.png"),
        participation_figure(report, out_dir / "participation.png"),
    ]
    if report["fano"]:
        written.append(fano_figure(report, out_dir / "fano.png"))
    return written
