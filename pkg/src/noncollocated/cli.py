"""``noncollocated`` command line: run experiments, export analysis data."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import LOOP_NAMES, analyze, reshape_metrics
from .config import ConfigError, apply_overrides, load_config, load_plant
from .sim.engine import ScenarioConfig, TraceTable, run_scenario
from .sim.plant import NonFinite
from .sim.scenarios import scenario_registry
from .ssm import PhysicalParams, build_ssm_from_physical, paper_plant

log = logging.getLogger("noncollocated")

EXIT_OK, EXIT_NONFINITE, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

SENSOR_REPEATABILITY = 12e-6  # m
WINDOW = 5.0  # s, amplitude-trend windows


# ---------------------------------------------------------------- summaries

def steady_band(cfg: ScenarioConfig) -> float:
    """Acceptable steady tracking error: sensor repeatability plus 3 noise sigmas."""
    return SENSOR_REPEATABILITY + 3.0 * cfg.noise.std


def amplitude_trend(tr: TraceTable, t0: float) -> tuple[float, float] | None:
    """Peak-to-peak y over ``[t0, t0+5)`` and ``[t0+5, t0+10)``; None if too short."""
    if tr["t"][-1] < t0 + 2 * WINDOW - 1e-9:
        return None
    return (float(np.ptp(tr.window("y", t0, t0 + WINDOW))),
            float(np.ptp(tr.window("y", t0 + WINDOW, t0 + 2 * WINDOW))))


def settling_time(tr: TraceTable, band: float, t_from: float) -> float | None:
    """Time after ``t_from`` from which ``|y - r|`` stays within ``band``."""
    t = tr["t"]
    m = t >= t_from
    err = np.abs(tr["y"][m] - tr["r"][m])
    out = np.nonzero(err > band)[0]
    if out.size == 0:
        return 0.0
    if out[-1] == err.size - 1:
        return None
    return float(t[m][out[-1] + 1] - t_from)


def summarize(cfg: ScenarioConfig, tr: TraceTable) -> dict:
    band = steady_band(cfg)
    refs = cfg.events.times("reference_step")
    last_event = max(cfg.events.times(), default=0.0)
    t_trend = refs[0] if refs else 0.0
    trend = amplitude_trend(tr, t_trend)
    s = {
        "scenario": cfg.name,
        "variant": cfg.label,
        "controller": cfg.controller.kind,
        "backend": tr.meta.get("backend"),
        "t_end_s": float(tr["t"][-1]),
        "final_y_m": float(tr["y"][-1]),
        "final_r": float(tr["r"][-1]),
        "steady_band_m": band,
        "saturation_fraction": float(np.mean(tr["sat_flag"])),
        "u_raw_range_V": (float(tr["u_raw"].min()), float(tr["u_raw"].max())),
        "z_range_m": (float(tr["z"].min()), float(tr["z"].max())),
    }
    if cfg.controller.kind.startswith("pi"):
        s["final_error_m"] = float(tr["y"][-1] - tr["r"][-1])
        s["settling_time_after_last_event_s"] = settling_time(tr, band, last_event)
    if trend is not None:
        s["pp_y_window1_m"], s["pp_y_window2_m"] = trend
        s["growing_amplitude"] = trend[1] > trend[0]
    if "omega_t" in tr:
        s["final_omega_estimate_rad_s"] = float(tr["omega_t"][-1])
        s["theta_wraps"] = tr.meta.get("theta_wraps", 0)
    if "theta" in tr:
        s["final_theta_s"] = float(tr["theta"][-1])
    return s


def format_summary(s: dict) -> str:
    return "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n"
                   for k, v in s.items())


# ------------------------------------------------------------------- run

def _resolve_run_target(target: str) -> list[ScenarioConfig]:
    p = Path(target)
    if p.suffix or p.exists():
        return [load_config(p)]
    reg = scenario_registry()
    name, _, label = target.partition(":")
    if name not in reg:
        raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(sorted(reg))}")
    sc = reg[name]
    if label:
        try:
            return [sc[label]]
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None
    return list(sc.variants)


def _run_one(cfg: ScenarioConfig, out: Path, decimation: int) -> tuple[ScenarioConfig, str]:
    tr = run_scenario(cfg)
    out.mkdir(parents=True, exist_ok=True)
    tr.to_csv(out / "trace.csv", decimation=decimation)
    text = format_summary(summarize(cfg, tr))
    (out / "summary.txt").write_text(text)
    return cfg, text


def cmd_run(args) -> int:
    if args.decimation < 1:
        raise ConfigError("--decimation must be >= 1")
    cfgs = _resolve_run_target(args.target)
    cfgs = [apply_overrides(c, args.override) for c in cfgs]
    if args.seed is not None:
        cfgs = [dataclasses.replace(c, noise=dataclasses.replace(c.noise, seed=args.seed))
                for c in cfgs]
    out = Path(args.out)
    dirs = [out] if len(cfgs) == 1 else [out / c.label for c in cfgs]
    # variants are independent jobs with distinct output files
    with ThreadPoolExecutor(max_workers=max(1, len(cfgs))) as pool:
        results = list(pool.map(_run_one, cfgs, dirs, [args.decimation] * len(cfgs)))
    for (cfg, text), d in zip(results, dirs):
        print(f"[{cfg.name}/{cfg.label}] -> {d}")
        print(text, end="")
    return EXIT_OK


# --------------------------------------------------------------- analysis

def _plant(path):
    if path is None:
        return paper_plant()
    plant = load_plant(path)
    return build_ssm_from_physical(plant) if isinstance(plant, PhysicalParams) else plant


def cmd_analyze(args) -> int:
    rep = analyze(_plant(args.plant))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, resp in rep.responses.items():
        resp.to_csv(out / f"{name}.csv")
    (out / "margins.txt").write_text(rep.margins_text())
    print(rep.margins_text(), end="")
    print(f"wrote {len(rep.responses)} CSV files and margins.txt to {out}")
    return EXIT_OK


def cmd_margins(args) -> int:
    rep = analyze(_plant(args.plant))
    for name in LOOP_NAMES:
        s = rep.sensitivity[name]
        print(f"S_max({name}) = {s.s_max_db:.3f} dB at {s.s_max_freq:.4g} rad/s")
    m = rep.pi_margins
    print(f"PI loop: gain margin {m.gain_margin_db:.3f} dB at {m.phase_crossover:.4g} rad/s, "
          f"phase margin {m.phase_margin_deg:.3f} deg at {m.gain_crossover:.4g} rad/s"
          f"{' (closed loop unstable)' if m.closed_loop_unstable else ''}")
    return EXIT_OK


def cmd_reshape(args) -> int:
    sysm = _plant(args.plant)
    print(reshape_metrics(sysm, alpha=args.alpha, theta=args.theta).text(), end="")
    if args.out:
        rep = analyze(sysm, alpha=args.alpha)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rep.responses["reshape_R"].to_csv(out / "reshape_R.csv")
    return EXIT_OK


def cmd_list(args) -> int:
    for name, sc in scenario_registry().items():
        print(f"{name}: {sc.description}")
        for v in sc.variants:
            print(f"    {v.label}: controller={v.controller.kind} t_end={v.t_end:g} s")
    return EXIT_OK


# ------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="noncollocated", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a registry scenario or a config file")
    r.add_argument("target", help="scenario name, name:variant, or config file path")
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="set a config key (short names allowed when unambiguous)")
    r.add_argument("--out", default="out", help="output directory")
    r.add_argument("--seed", type=int, default=None, help="noise seed for every variant")
    r.add_argument("--decimation", type=int, default=10, help="write every Nth step")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="write frequency responses and margins")
    a.add_argument("--plant", default=None, help="plant file (plant.* keys)")
    a.add_argument("--out", default="analysis", help="output directory")
    a.set_defaults(func=cmd_analyze)

    m = sub.add_parser("margins", help="print sensitivity peaks and PI-loop margins")
    m.add_argument("--plant", default=None)
    m.set_defaults(func=cmd_margins)

    s = sub.add_parser("reshape", help="print delay-reshaping band metrics")
    s.add_argument("--plant", default=None)
    s.add_argument("--alpha", type=float, default=100.0)
    s.add_argument("--theta", type=float, default=None, help="delay in s (default: from phase)")
    s.add_argument("--out", default=None, help="also write reshape_R.csv here")
    s.set_defaults(func=cmd_reshape)

    ls = sub.add_parser("list", help="list registry scenarios")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonFinite as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
