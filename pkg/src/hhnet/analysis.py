"""Spike-train statistics.

Per-neuron mean rates with <1 / 1-5 / >5 Hz classification, windowed
participation, sliding-window Fano factors, and raster export.  All
statistics are pure functions of an immutable SpikeTrain and are invariant
to the row order of the input spike file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class SpikeTrain:
    duration_s: float
    n_neurons: int
    times_ms: np.ndarray = field(default_factory=lambda: np.empty(0))
    neuron_ids: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        times = np.asarray(self.times_ms, dtype=np.float64)
        ids = np.asarray(self.neuron_ids, dtype=np.int64)
        if times.shape != ids.shape:
            raise ValueError("times and ids must have the same length")
        if len(times) and (times.min() < 0 or times.max() > self.duration_s * 1000.0):
            raise ValueError("spike times must lie in [0, duration]")
        if len(ids) and (ids.min() < 0 or ids.max() >= self.n_neurons):
            raise ValueError("neuron ids out of range")
        order = np.lexsort((ids, times))
        object.__setattr__(self, "times_ms", times[order])
        object.__setattr__(self, "neuron_ids", ids[order])

    @property
    def n_spikes(self) -> int:
        return len(self.times_ms)


def load_spikes_csv(path, duration_s: float, n_neurons: int) -> SpikeTrain:
    """Read a `time_ms,neuron_id` CSV into a SpikeTrain.

    Malformed rows raise ValueError naming the line number.
    """
    times, ids = [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["time_ms", "neuron_id"]:
            raise ValueError(f"{path}:1: expected header 'time_ms,neuron_id'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t = float(row[0])
                nid = int(row[1])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row {row!r}") from exc
            times.append(t)
            ids.append(nid)
    return SpikeTrain(duration_s=duration_s, n_neurons=n_neurons,
                      times_ms=np.array(times, dtype=np.float64),
                      neuron_ids=np.array(ids, dtype=np.int64))


def mean_rates(train: SpikeTrain) -> dict:
    """Per-neuron mean rates, <1 / 1-5 / >5 Hz class fractions, mean +/- std.

    Rates are spike count / duration; the population std uses the n
    denominator (census statistic).
    """
    if train.duration_s <= 0:
        raise ValueError("duration must be > 0")
    counts = np.bincount(train.neuron_ids, minlength=train.n_neurons)
    rates = counts / train.duration_s
    classes = {
        "lt_1hz": int(np.sum(rates < 1.0)),
        "1_to_5hz": int(np.sum((rates >= 1.0) & (rates <= 5.0))),
        "gt_5hz": int(np.sum(rates > 5.0)),
    }
    return {
        "rates_hz": rates,
        "class_counts": classes,
        "class_fractions": {k: v / train.n_neurons for k, v in classes.items()},
        "mean_hz": float(rates.mean()),
        "std_hz": float(rates.std()),  # population (n) denominator
    }


def participation(train: SpikeTrain, window_s: float) -> dict:
    """Percentage of neurons spiking at least once per non-overlapping window.

    The trailing partial window is dropped.  Returns mean and std (n
    denominator) across windows.
    """
    if window_s <= 0:
        raise ValueError("window must be > 0")
    if window_s > train.duration_s:
        raise ValueError("window must not exceed the train duration")
    n_windows = int(train.duration_s / window_s + 1e-9)
    window_ms = window_s * 1000.0
    pcts = np.empty(n_windows, dtype=np.float64)
    times = train.times_ms
    ids = train.neuron_ids
    for w in range(n_windows):
        lo, hi = w * window_ms, (w + 1) * window_ms
        # windows partition [0, duration): [lo, hi)
        mask = (times >= lo) & (times < hi)
        pcts[w] = 100.0 * len(np.unique(ids[mask])) / train.n_neurons
    return {"window_s": window_s, "per_window_pct": pcts,
            "mean_pct": float(pcts.mean()), "std_pct": float(pcts.std())}


def fano(train: SpikeTrain, window_s: float, bin_s: float = 1.0) -> dict:
    """Sliding-window Fano factors of binned per-neuron spike counts.

    The window slides in steps of one bin; within each window position,
    each neuron's Fano factor is the unbiased sample variance over mean of
    its per-bin counts.  Neurons with zero mean count are excluded; window
    positions where every neuron is silent report NaN.
    """
    bins_per_window = int(round(window_s / bin_s))
    if abs(window_s - bins_per_window * bin_s) > 1e-9 or bins_per_window < 2:
        raise ValueError("bin must divide the window (>= 2 bins per window)")
    if window_s > train.duration_s:
        raise ValueError("window must not exceed the train duration")
    n_bins = int(train.duration_s / bin_s + 1e-9)
    bin_ms = bin_s * 1000.0
    # counts[neuron, bin]
    bin_idx = np.minimum((train.times_ms / bin_ms).astype(np.int64), n_bins - 1)
    counts = np.zeros((train.n_neurons, n_bins), dtype=np.float64)
    np.add.at(counts, (train.neuron_ids, bin_idx), 1.0)

    starts = np.arange(0, n_bins - bins_per_window + 1)
    t_out, mean_out, min_out, max_out = [], [], [], []
    for s in starts:
        seg = counts[:, s:s + bins_per_window]
        means = seg.mean(axis=1)
        active = means > 0
        t_out.append(s * bin_s)
        if not active.any():
            mean_out.append(np.nan)
            min_out.append(np.nan)
            max_out.append(np.nan)
            continue
        var = seg[active].var(axis=1, ddof=1)
        f = var / means[active]
        mean_out.append(float(f.mean()))
        min_out.append(float(f.min()))
        max_out.append(float(f.max()))
    return {"window_s": window_s, "bin_s": bin_s,
            "t_s": np.array(t_out), "mean": np.array(mean_out),
            "min": np.array(min_out), "max": np.array(max_out)}


def raster_export(train: SpikeTrain, path, downsample_per_s: int | None = None) -> int:
    """Write the train as a `time_ms,neuron_id` CSV, optionally down-sampled.

    Down-sampling keeps at most `downsample_per_s` spikes per second of
    simulated time (an evenly strided subset of each second's spikes);
    every emitted row is present in the original train.
    """
    times = train.times_ms
    ids = train.neuron_ids
    if downsample_per_s is not None and len(times):
        keep = np.zeros(len(times), dtype=bool)
        secs = (times / 1000.0).astype(np.int64)
        for s in np.unique(secs):
            idx = np.nonzero(secs == s)[0]
            if len(idx) <= downsample_per_s:
                keep[idx] = True
            else:
                stride = np.linspace(0, len(idx) - 1, downsample_per_s).astype(np.int64)
                keep[idx[np.unique(stride)]] = True
        times, ids = times[keep], ids[keep]
    with open(path, "w", newline="") as f:
        f.write("time_ms,neuron_id\n")
        for t, nid in zip(times, ids):
            f.write(f"{t:.3f},{nid}\n")
    return len(times)


def build_report(train: SpikeTrain, participation_windows_s=(1.0, 10.0, 50.0),
                 fano_windows_s=(5.0, 10.0, 50.0), fano_bin_s: float = 1.0) -> dict:
    """Full analysis report with a stable key schema (JSON-serializable)."""
    rates = mean_rates(train)
    report = {
        "duration_s": train.duration_s,
        "n_neurons": train.n_neurons,
        "n_spikes": train.n_spikes,
        "rates": rates["rates_hz"].tolist(),
        "rate_classes": rates["class_fractions"],
        "population_rate_mean_hz": rates["mean_hz"],
        "population_rate_std_hz": rates["std_hz"],
        "participation": {},
        "fano": {},
    }
    for w in participation_windows_s:
        if w <= train.duration_s:
            p = participation(train, w)
            report["participation"][str(w)] = {
                "mean_pct": p["mean_pct"], "std_pct": p["std_pct"]}
    for w in fano_windows_s:
        if w <= train.duration_s:
            fr = fano(train, w, fano_bin_s)
            report["fano"][str(w)] = {
                "bin_s": fr["bin_s"],
                "t_s": fr["t_s"].tolist(),
                "mean": [None if np.isnan(x) else x for x in fr["mean"]],
                "min": [None if np.isnan(x) else x for x in fr["min"]],
                "max": [None if np.isnan(x) else x for x in fr["max"]],
            }
    return report


def write_report_csvs(report: dict, out_dir) -> list[Path]:
    """Plot-ready CSVs alongside the JSON report (rates, participation, fano)."""
    out_dir = Path(out_dir)
    written = []

    p = out_dir / "rates_per_neuron.csv"
    with open(p, "w", newline="") as f:
        f.write("neuron_id,rate_hz\n")
        for i, r in enumerate(report["rates"]):
            f.write(f"{i},{r:.6g}\n")
    written.append(p)

    p = out_dir / "participation.csv"
    with open(p, "w", newline="") as f:
        f.write("window_s,mean_pct,std_pct\n")
        for w, stats in report["participation"].items():
            f.write(f"{w},{stats['mean_pct']:.6g},{stats['std_pct']:.6g}\n")
    written.append(p)

    for w, series in report["fano"].items():
        p = out_dir / f"fano_w{w}.csv"
        with open(p, "w", newline="") as f:
            f.write("t_s,mean,min,max\n")
            for t, m, lo, hi in zip(series["t_s"], series["mean"],
                                    series["min"], series["max"]):
                def fmt(x):
                    return "" if x is None else f"{x:.6g}"
                f.write(f"{t:.6g},{fmt(m)},{fmt(lo)},{fmt(hi)}\n")
        written.append(p)
    return written
