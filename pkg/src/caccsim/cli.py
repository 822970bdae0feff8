"""Command-line front end: scenario runs, safety-curve and delay analyses.

Exit codes: 0 success, 2 config/validation error, 3 solver or runtime
failure.  Set CACCSIM_LOG=debug|info|warning to control verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, canonical_json, config_digest, load_config
from .safety import BrakingSpec, min_distance_curve, required_delay_for_clearance
from .sim import ScenarioConfig, SimTrace, metrics, run

log = logging.getLogger("caccsim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


@dataclass
class RunReport:
    config_digest: str
    metrics: dict
    outputs: dict
    wall_time_s: float

    def as_dict(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "metrics": self.metrics,
            "outputs": self.outputs,
            "wall_time_s": self.wall_time_s,
        }


def _plot_trace(trace: SimTrace, outdir: Path) -> dict:
    """Write the distance/speed/acceleration panels as standalone SVGs."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = {}
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(trace.time, trace.gap, label="distance")
    ax.plot(trace.time, trace.d_safe, "r--", label="minimum safety distance")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("distance [m]")
    ax.legend()
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    p = outdir / "distance.svg"
    fig.savefig(p)
    plt.close(fig)
    paths["distance"] = str(p)

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(trace.time, trace.lead_vel, label="lead")
    ax.plot(trace.time, trace.ego_vel, "r--", label="ego")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("speed [m/s]")
    ax.legend()
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    p = outdir / "speeds.svg"
    fig.savefig(p)
    plt.close(fig)
    paths["speeds"] = str(p)

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(trace.time, trace.lead_acc, label="lead")
    ax.plot(trace.time, trace.a_act, "r--", label="ego actuated")
    ax.plot(trace.time, trace.u_cmd, "g:", alpha=0.7, label="ego commanded")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("acceleration [m/s$^2$]")
    ax.legend()
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    p = outdir / "accelerations.svg"
    fig.savefig(p)
    plt.close(fig)
    paths["accelerations"] = str(p)
    return paths


def cmd_run(args) -> int:
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = ScenarioConfig()
    if args.mode is not None:
        cfg = replace(cfg, mode=args.mode)
    if args.seed is not None:
        cfg = replace(cfg, channel=replace(cfg.channel, seed=args.seed))

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    trace = run(cfg)
    wall = time.perf_counter() - t0
    m = metrics(trace)

    outputs = {}
    trace_path = outdir / "trace.csv"
    trace.to_csv(trace_path)
    outputs["trace"] = str(trace_path)
    metrics_path = outdir / "metrics.json"
    with open(metrics_path, "w") as fh:
        json.dump(m.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs["metrics"] = str(metrics_path)
    config_path = outdir / "config.json"
    with open(config_path, "w") as fh:
        fh.write(canonical_json(cfg))
    outputs["config"] = str(config_path)
    if not args.no_plots:
        outputs.update(_plot_trace(trace, outdir))

    report = RunReport(
        config_digest=config_digest(cfg),
        metrics=m.as_dict(),
        outputs=outputs,
        wall_time_s=round(wall, 3),
    )
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_safety_curve(args) -> int:
    if args.lead_braking_min <= 0 or args.lead_braking_max < args.lead_braking_min:
        raise ConfigError("lead-braking", "need 0 < min <= max")
    if args.speed is None:
        args.speed = [35.0, 25.0]
    a_l_range = np.linspace(args.lead_braking_min, args.lead_braking_max, args.points)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    rows = []
    curves = {}
    for v in args.speed:
        if v < 0:
            raise ConfigError("speed", f"must be nonnegative, got {v}")
        curve = min_distance_curve(v, args.ego_braking, a_l_range, args.delay)
        curves[v] = curve
        rows.extend((v, a_l, d) for a_l, d in curve)

    csv_path = outdir / "safety_curve.csv"
    with open(csv_path, "w") as fh:
        fh.write("speed_mps,lead_braking_mps2,d_safe_m\n")
        for v, a_l, d in rows:
            fh.write(f"{v:.9g},{a_l:.9g},{d:.9g}\n")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for v, curve in curves.items():
        xs = [a for a, _ in curve]
        ys = [d for _, d in curve]
        ax.plot(xs, ys, label=f"v = {v:g} m/s")
    ax.set_xlabel("lead braking capacity [m/s$^2$]")
    ax.set_ylabel("minimum safety distance [m]")
    ax.legend()
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    svg_path = outdir / "safety_curve.svg"
    fig.savefig(svg_path)
    plt.close(fig)

    print(json.dumps({"csv": str(csv_path), "svg": str(svg_path), "rows": len(rows)}))
    return EXIT_OK


def cmd_delay_table(args) -> int:
    if args.clearance < 0:
        raise ConfigError("clearance", f"must be nonnegative, got {args.clearance}")
    speeds = []
    for tok in args.speeds.split(","):
        v = float(tok)
        if v <= 0:
            raise ConfigError("speeds", f"speeds must be positive, got {v}")
        speeds.append(v)
    rows = [(v, required_delay_for_clearance(args.clearance, v)) for v in speeds]
    print(f"{'speed_mps':>10}  {'required_delay_s':>16}")
    for v, phi in rows:
        print(f"{v:>10.3f}  {phi:>16.6f}")
    if args.out is not None:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w") as fh:
            fh.write("speed_mps,required_delay_s\n")
            for v, phi in rows:
                fh.write(f"{v:.9g},{phi:.9g}\n")
    return EXIT_OK


def cmd_batch(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    reports = []
    for cfg_path in args.configs:
        cfg = load_config(cfg_path)
        sub = outdir / Path(cfg_path).stem
        run_args = argparse.Namespace(
            config=cfg_path, mode=args.mode, seed=None, out=str(sub), no_plots=args.no_plots
        )
        code = cmd_run(run_args)
        if code != EXIT_OK:
            return code
        reports.append(str(sub))
    log.info("batch finished: %d scenarios", len(reports))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caccsim",
        description="Safety-distance analysis and robust platooning control simulation",
    )
    parser.add_argument("--version", action="version", version=f"caccsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write trace/metrics/plots")
    p_run.add_argument("--config", help="scenario config JSON (defaults built in)")
    p_run.add_argument("--mode", choices=("nominal", "robust"), help="controller mode override")
    p_run.add_argument("--seed", type=int, help="channel seed override")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--no-plots", action="store_true", help="skip SVG plots")
    p_run.set_defaults(func=cmd_run)

    p_curve = sub.add_parser("safety-curve", help="minimum distance vs lead braking capacity")
    p_curve.add_argument("--speed", type=float, action="append", default=None,
                         help="cruise speed m/s (repeatable; default 35 and 25)")
    p_curve.add_argument("--ego-braking", type=float, default=9.0, help="ego braking capacity m/s^2")
    p_curve.add_argument("--lead-braking-min", type=float, default=4.0)
    p_curve.add_argument("--lead-braking-max", type=float, default=12.0)
    p_curve.add_argument("--points", type=int, default=50)
    p_curve.add_argument("--delay", type=float, default=0.27, help="worst-case delay s")
    p_curve.add_argument("--out", required=True, help="output directory")
    p_curve.set_defaults(func=cmd_safety_curve)

    p_delay = sub.add_parser("delay-table", help="delay budget required for a clearance")
    p_delay.add_argument("--clearance", type=float, required=True, help="target clearance m")
    p_delay.add_argument("--speeds", required=True, help="comma-separated speeds m/s")
    p_delay.add_argument("--out", help="optional CSV path")
    p_delay.set_defaults(func=cmd_delay_table)

    p_batch = sub.add_parser("batch", help="run several scenario configs")
    p_batch.add_argument("--configs", nargs="+", required=True, help="config JSON paths")
    p_batch.add_argument("--mode", choices=("nominal", "robust"), help="mode override for all")
    p_batch.add_argument("--out", required=True, help="output root directory")
    p_batch.add_argument("--no-plots", action="store_true")
    p_batch.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("CACCSIM_LOG", "warning").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # solver or runtime failure
        log.exception("run failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
