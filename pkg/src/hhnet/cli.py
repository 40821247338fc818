"""Command-line interface.

Subcommands:
  simulate  run the network and write spikes.csv (+ voltages, manifest)
  analyze   compute the statistics report from a spike CSV
  raster    (re-)export a spike CSV, optionally down-sampled for plotting
  report    analyze + render matplotlib figures next to the CSV outputs

Exit codes: 0 success, 1 validation/usage error, 2 numeric abort.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from importlib.metadata import PackageNotFoundError, version as pkg_version
from pathlib import Path

from . import analysis, config, engine


def _code_version() -> str:
    try:
        return pkg_version("hhnet")
    except PackageNotFoundError:
        return "unknown"


def _resolve_workers(args_workers: int | None, cfg_workers: int) -> int:
    env = os.environ.get("HHNET_THREADS")
    if env is not None:
        return int(env)
    if args_workers is not None:
        return args_workers
    return cfg_workers


def cmd_simulate(args) -> int:
    try:
        cfg = config.load(args.config)
    except config.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.duration is not None:
        overrides["duration_s"] = args.duration
    workers = _resolve_workers(args.workers, cfg.sim.workers)
    overrides["workers"] = workers
    if args.checkpoint_every is not None:
        overrides["checkpoint_period_s"] = args.checkpoint_every
    try:
        cfg = cfg.replace("sim", **overrides)
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spikes_path = out_dir / "spikes.csv"
    voltage_path = out_dir / "voltages.hhv"
    checkpoint_path = out_dir / "checkpoint.hhck"

    try:
        if args.resume:
            world = engine.World.load_checkpoint(
                args.resume, cfg.neuron, cfg.synapse, cfg.stdp, cfg.sim)
        else:
            world = engine.build_world(cfg.network, cfg.stimulus, cfg.neuron,
                                       cfg.synapse, cfg.stdp, cfg.sim)
    except (engine.CheckpointError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    t_start = time.time()
    try:
        summary = engine.run(
            world,
            spikes_path=spikes_path,
            voltage_path=voltage_path if cfg.sim.record_voltage else None,
            checkpoint_path=checkpoint_path if cfg.sim.checkpoint_period_s else None,
        )
    except engine.NumericAbort as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        # mark partial outputs invalid
        for p in (spikes_path, voltage_path):
            if p.exists():
                p.rename(p.with_suffix(p.suffix + ".invalid"))
        return 2

    manifest = {
        "config": cfg.to_dict(),
        "seed": cfg.sim.seed,
        "code_version": _code_version(),
        "python": platform.python_version(),
        "started_unix": t_start,
        "wall_time_s": summary["wall_time_s"],
        "spike_count": summary["spike_count"],
        "membrane_updates_per_s": summary["membrane_updates_per_s"],
    }
    with open(out_dir / "run_manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
    print(f"simulated {cfg.sim.duration_s} s: {summary['spike_count']} spikes, "
          f"{summary['wall_time_s']:.1f} s wall "
          f"({summary['membrane_updates_per_s']:.3g} membrane updates/s)")
    return 0


def cmd_analyze(args, render_figures: bool = False) -> int:
    out_dir = Path(args.out)
    try:
        train = analysis.load_spikes_csv(args.spikes, args.duration, args.neurons)
        windows = [float(w) for w in args.windows.split(",")]
        fano_windows = [float(w) for w in args.fano_windows.split(",")]
        report = analysis.build_report(train, participation_windows_s=windows,
                                       fano_windows_s=fano_windows)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.json", "w") as f:
        json.dump(report, f, indent=2)
    analysis.write_report_csvs(report, out_dir)
    if render_figures:
        from . import plots
        plots.render_all(train, report, out_dir)

    cf = report["rate_classes"]
    print(f"neurons: {report['n_neurons']}, spikes: {report['n_spikes']}, "
          f"duration: {report['duration_s']} s")
    print(f"rate classes: <1 Hz {100 * cf['lt_1hz']:.1f}%  "
          f"1-5 Hz {100 * cf['1_to_5hz']:.1f}%  >5 Hz {100 * cf['gt_5hz']:.1f}%")
    print(f"population rate: {report['population_rate_mean_hz']:.3f} "
          f"+/- {report['population_rate_std_hz']:.3f} Hz")
    for w, stats in report["participation"].items():
        print(f"participation {w} s: {stats['mean_pct']:.2f} "
              f"+/- {stats['std_pct']:.2f} %")
    return 0


def cmd_raster(args) -> int:
    try:
        train = analysis.load_spikes_csv(args.spikes, args.duration, args.neurons)
        analysis.raster_export(train, args.out, downsample_per_s=args.downsample)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hhnet",
        description="Recurrent Hodgkin-Huxley network simulator and analysis tools")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a simulation")
    sim.add_argument("--config", required=True,
                     help="TOML config file or run_manifest.json")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--duration", type=float, default=None, help="seconds")
    sim.add_argument("--workers", type=int, default=None)
    sim.add_argument("--checkpoint-every", type=float, default=None, help="seconds")
    sim.add_argument("--resume", default=None, help="checkpoint file to resume from")
    sim.set_defaults(func=cmd_simulate)

    def add_analysis_args(p):
        p.add_argument("--spikes", required=True, help="spike CSV path")
        p.add_argument("--duration", type=float, required=True, help="seconds")
        p.add_argument("--neurons", type=int, required=True)
        p.add_argument("--windows", default="1,10,50",
                       help="participation window lengths, seconds (comma list)")
        p.add_argument("--fano-windows", default="5,10,50",
                       help="Fano window lengths, seconds (comma list)")
        p.add_argument("--out", required=True, help="output directory")

    ana = sub.add_parser("analyze", help="compute statistics from a spike CSV")
    add_analysis_args(ana)
    ana.set_defaults(func=cmd_analyze)

    ras = sub.add_parser("raster", help="export (optionally down-sampled) raster CSV")
    ras.add_argument("--spikes", required=True)
    ras.add_argument("--duration", type=float, required=True, help="seconds")
    ras.add_argument("--neurons", type=int, required=True)
    ras.add_argument("--out", required=True, help="output CSV path")
    ras.add_argument("--downsample", type=int, default=None,
                     help="max spikes kept per second")
    ras.set_defaults(func=cmd_raster)

    rep = sub.add_parser("report",
                         help="analyze and render figures (raster, rates, "
                              "participation, Fano)")
    add_analysis_args(rep)
    rep.set_defaults(func=lambda a: cmd_analyze(a, render_figures=True))

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
