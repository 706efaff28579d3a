"""Command-line front end.

Exit codes: 0 success, 1 check or numerical failure, 2 configuration error, 3 I/O error.

Time conventions: ``simulate`` and the agent part of ``compare``/``reproduce-paper``
measure time in grazing units ``tau = gamma * t`` of the pair process, while
``meanfield`` and ``quantile`` use mean-field time. One unit of the former equals
:data:`hieropinion.agent_sim.MEANFIELD_TIME_FACTOR` units of the latter.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import agent_sim, meanfield, metrics, quantile_solver
from .consensus import Regime, consensus_limits
from .model import ConfigError, ModelConfig, check
from .scenarios import reference_scenarios
from .timeseries import TimeSeries

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

MEAN_TOL = 0.03
LAYER_TOL = 1e-8
WIDTH_RTOL = 1e-6
RATIO_RTOL = 0.15

STUBBORN_NOTE = (
    "stubborn agents without an explicit s_initial start from their level's "
    "non-stubborn initial distribution"
)


class IOFailure(Exception):
    pass


def positive_float(text: str) -> float:
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"{text} is not positive")
    return x


def positive_int(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return n


def load_config(args) -> ModelConfig:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{args.config}: not valid JSON ({e})") from e
    except OSError as e:
        raise IOFailure(f"cannot read {args.config}: {e.strerror or e}") from e
    try:
        cfg = ModelConfig.from_dict(raw)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{args.config}: malformed config ({e!r})") from e
    changes = {}
    for name in ("p", "gamma", "agents"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    if getattr(args, "exact_init", False):
        changes["exact_init"] = True
    return check(cfg.with_(**changes))


def write_text(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as e:
        raise IOFailure(f"cannot write {path}: {e.strerror or e}") from e


def seed_list(args) -> list[int]:
    return [args.seed + k for k in range(args.seeds)]


def seed_path(out: Path, seed: int) -> Path:
    return out.with_name(f"{out.stem}_seed{seed}{out.suffix}")


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    sched = agent_sim.SimSchedule(args.t_end, args.record_every)
    seeds = seed_list(args)
    runs, mean = agent_sim.run_ensemble(cfg, sched, seeds)
    mean.meta = {"seeds": seeds, "time": "grazing", "note": STUBBORN_NOTE}
    if args.out is None:
        write_text(None, mean.dumps(args.format))
        return EXIT_OK
    out = Path(args.out)
    for seed, ts in zip(seeds, runs):
        write_text(seed_path(out, seed), ts.dumps(args.format))
    write_text(out, mean.dumps(args.format))
    return EXIT_OK


def meanfield_series(cfg: ModelConfig, t_end: float, dt: float, record_every: float) -> TimeSeries:
    sys_ = meanfield.build_system(cfg)
    stride = max(1, int(round(record_every / dt)))
    times, states = meanfield.integrate(sys_, cfg.ns_means(), t_end, dt, stride)
    n_steps = meanfield.n_steps_for(t_end, dt)
    if n_steps % stride:
        # keep the final state when the horizon is not a multiple of the record stride
        _, s_last = meanfield.integrate(sys_, states[-1], (n_steps % stride) * dt, dt)
        times = np.append(times, n_steps * dt)
        states = np.vstack([states, s_last[-1]])
    return meanfield.trajectory_series(sys_, times, states, cfg.h)


def cmd_meanfield(args) -> int:
    cfg = load_config(args)
    ts = meanfield_series(cfg, args.t_end, args.dt, args.record_every)
    write_text(args.out, ts.dumps(args.format))
    return EXIT_OK


def quantile_dump(states) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tau", "level", "r", "x"])
    for tau, level, r, x in quantile_solver.quantile_rows(states):
        writer.writerow([f"{tau:.17g}", level, f"{r:.17g}", f"{x:.17g}"])
    return buf.getvalue()


def cmd_quantile(args) -> int:
    cfg = load_config(args)
    state0 = quantile_solver.initial_state(cfg, args.quantiles)
    if args.dump_quantiles:
        states = list(quantile_solver.trajectory(state0, args.t_end, args.dt, args.record_every))
        write_text(args.dump_quantiles, quantile_dump(states))
    ts = quantile_solver.integrate(state0, args.t_end, args.dt, args.record_every)
    write_text(args.out, ts.dumps(args.format))
    return EXIT_OK


def cmd_limits(args) -> int:
    cfg = load_config(args)
    result = consensus_limits(cfg)
    write_text(args.out, result.to_json() + "\n")
    return EXIT_OK


def _check(name: str, value: float, tol: float) -> dict:
    return {"check": name, "value": float(value), "tol": tol, "pass": bool(value <= tol)}


def compare_report(cfg: ModelConfig, args) -> dict:
    """Run every layer on ``cfg`` and collect per-level discrepancies and checks."""
    tau = args.t_end
    t_mf = agent_sim.MEANFIELD_TIME_FACTOR * tau
    seeds = seed_list(args)
    _, agent = agent_sim.run_ensemble(cfg, agent_sim.SimSchedule(tau, args.record_every), seeds)
    every = agent_sim.MEANFIELD_TIME_FACTOR * args.record_every
    mf = meanfield_series(cfg, t_mf, args.dt, every)
    state0 = quantile_solver.initial_state(cfg, args.quantiles)
    qs = quantile_solver.integrate(state0, t_mf, args.dt, every)
    theory = consensus_limits(cfg)
    rates = state0.rates

    agent_final = agent.final("mean_ns")
    mf_final = mf.final("mean_ns")
    levels = []
    for i in range(cfg.n_levels):
        row = {
            "level": i,
            "h": float(cfg.h[i]),
            "agent": float(agent_final[i]),
            "meanfield": float(mf_final[i]),
            "quantile": float(qs.final("mean_ns")[i]),
            "theory": None if theory.m_inf_ns is None else float(theory.m_inf_ns[i]),
        }
        row["agent_vs_theory"] = None if row["theory"] is None else abs(row["agent"] - row["theory"])
        levels.append(row)

    checks = []
    valid = np.isfinite(agent_final)
    checks.append(_check("agent vs meanfield at final time", np.abs(agent_final - mf_final)[valid].max(), MEAN_TOL))
    if theory.m_inf_ns is not None:
        checks.append(_check("agent vs theory", np.abs(agent_final - theory.m_inf_ns)[valid].max(), MEAN_TOL))
    checks.append(_check("quantile vs meanfield means", np.abs(qs.mean_ns - mf.mean_ns).max(), LAYER_TOL))
    w0 = qs.support_ns[0]
    expected = w0[None, :] * np.exp(-np.outer(qs.times, rates))
    live = w0 > 0
    rel = np.abs(qs.support_ns[:, live] - expected[:, live]) / expected[:, live] if live.any() else np.zeros(1)
    checks.append(_check("quantile width contraction (relative)", rel.max(), WIDTH_RTOL))

    ratio_rows = []
    try:
        fitted, r2 = metrics.fit_level_rates(agent.times, agent.support_ns)
        fitted = fitted / agent_sim.MEANFIELD_TIME_FACTOR
        for i in range(1, cfg.n_levels):
            got, want = fitted[i] / fitted[0], rates[i] / rates[0]
            ratio_rows.append({"levels": [i, 0], "fitted": float(got), "theory": float(want), "rel_err": float(abs(got / want - 1))})
        rate_info = {"fitted": fitted.tolist(), "theory": rates.tolist(), "r2": r2.tolist(), "ratios": ratio_rows}
    except metrics.InsufficientData as e:
        rate_info = {"error": str(e), "theory": rates.tolist(), "ratios": []}
    if args.check_rates:
        worst = max((r["rel_err"] for r in ratio_rows), default=np.inf)
        checks.append(_check("agent decay-rate ratios (relative)", worst, RATIO_RTOL))

    return {
        "regime": theory.regime.value,
        "tau_end": tau,
        "meanfield_t_end": t_mf,
        "seeds": seeds,
        "note": STUBBORN_NOTE,
        "levels": levels,
        "rates": rate_info,
        "checks": checks,
        "pass": all(c["pass"] for c in checks),
    }


def format_report(rep: dict) -> str:
    def num(x):
        return f"{x:+.6f}" if x is not None else ""

    lines = [f"regime: {rep['regime']}", f"note: {rep['note']}", ""]
    lines.append(f"{'level':>5} {'h':>6} {'agent':>10} {'meanfield':>10} {'quantile':>10} {'theory':>18} {'|agent-theory|':>15}")
    for r in rep["levels"]:
        if r["theory"] is None:
            theory, gap = "n/a (UNSOLVED)", "n/a"
        else:
            theory, gap = num(r["theory"]), f"{r['agent_vs_theory']:.6f}"
        lines.append(
            f"{r['level']:>5} {r['h']:>6.3f} {num(r['agent']):>10} {num(r['meanfield']):>10} "
            f"{num(r['quantile']):>10} {theory:>18} {gap:>15}"
        )
    lines.append("")
    if rep["rates"]["ratios"]:
        lines.append("decay-rate ratios (level i / level 0): fitted vs theory")
        for r in rep["rates"]["ratios"]:
            lines.append(f"  {r['levels'][0]}/0: {r['fitted']:.4f} vs {r['theory']:.4f} (rel err {r['rel_err']:.3f})")
    else:
        lines.append(f"decay-rate fit unavailable: {rep['rates'].get('error', '')}")
    lines.append("")
    for c in rep["checks"]:
        lines.append(f"[{'PASS' if c['pass'] else 'FAIL'}] {c['check']}: {c['value']:.3e} (tol {c['tol']:g})")
    lines.append(f"overall: {'PASS' if rep['pass'] else 'FAIL'}")
    return "\n".join(lines) + "\n"


def cmd_compare(args) -> int:
    cfg = load_config(args)
    rep = compare_report(cfg, args)
    text = json.dumps(rep, indent=2) + "\n" if args.format == "json" else format_report(rep)
    write_text(args.out, text)
    return EXIT_OK if rep["pass"] else EXIT_CHECK


def cmd_reproduce(args) -> int:
    out = Path(args.out or "reproduce_out")
    seeds = seed_list(args)
    sched = agent_sim.SimSchedule(args.t_end, args.record_every)
    manifest = {"seeds": seeds, "gamma": args.gamma, "agents": args.agents, "tau_end": args.t_end, "note": STUBBORN_NOTE, "scenarios": []}
    print(f"note: {STUBBORN_NOTE}", file=sys.stderr)
    for name, cfg in reference_scenarios(args.gamma, args.agents):
        check(cfg)
        _, mean = agent_sim.run_ensemble(cfg, sched, seeds)
        mean.meta = {"scenario": name, "seeds": seeds, "time": "grazing"}
        data_file = f"{name}.{args.format}"
        write_text(out / data_file, mean.dumps(args.format))
        entry = {"name": name, "p": cfg.p, "stubborn": bool(cfg.stubborn_fractions.any()), "data": data_file}
        limits = consensus_limits(cfg)
        entry["regime"] = limits.regime.value
        if limits.regime is not Regime.UNSOLVED:
            entry["limits"] = f"{name}_limits.json"
            write_text(out / entry["limits"], limits.to_json() + "\n")
        manifest["scenarios"].append(entry)
        print(f"{name}: done", file=sys.stderr)
    write_text(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hieropinion", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, config=True, seeds=False, t_end=20.0, record_every=0.1, dt=False, quantiles=False, formats=("csv", "json")):
        if config:
            p.add_argument("--config", required=True, help="model configuration JSON")
            p.add_argument("--p", type=float, help="override the disruption probability")
            p.add_argument("--gamma", type=positive_float, help="override the interaction strength")
            p.add_argument("--agents", type=int, help="override the population size")
            p.add_argument("--exact-init", action="store_true", help="place initial opinions at midpoint quantiles")
        if seeds:
            p.add_argument("--seed", type=int, default=0, help="first seed (default 0)")
            p.add_argument("--seeds", type=positive_int, default=8, help="number of consecutive seeds (default 8)")
        if t_end is not None:
            p.add_argument("--t-end", type=positive_float, default=t_end, help=f"final time (default {t_end:g})")
            p.add_argument("--record-every", type=positive_float, default=record_every, help=f"recording interval (default {record_every:g})")
        if dt:
            p.add_argument("--dt", type=positive_float, default=1e-3, help="RK4 step (default 1e-3)")
        if quantiles:
            p.add_argument("--quantiles", type=positive_int, default=256, help="quantiles per level (default 256)")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=formats, default=formats[0])

    p = sub.add_parser("simulate", help="agent simulation over an ensemble of seeds")
    common(p, seeds=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("meanfield", help="integrate the mean-opinion ODE")
    common(p, dt=True)
    p.set_defaults(func=cmd_meanfield)

    p = sub.add_parser("quantile", help="integrate the quantile transport equation")
    common(p, dt=True, quantiles=True)
    p.add_argument("--dump-quantiles", help="also write every recorded quantile to this CSV")
    p.set_defaults(func=cmd_quantile)

    p = sub.add_parser("limits", help="closed-form consensus limits")
    common(p, t_end=None)
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser("compare", help="cross-check all layers on one config")
    common(p, seeds=True, dt=True, quantiles=True, formats=("text", "json"))
    p.add_argument("--check-rates", action="store_true", help="fail when fitted decay-rate ratios miss theory by > 15%%")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("reproduce-paper", help="run the eight reference scenarios")
    common(p, config=False, seeds=True)
    p.add_argument("--gamma", type=positive_float, default=0.01, help="interaction strength (default 0.01)")
    p.add_argument("--agents", type=positive_int, default=10000, help="population size (default 10000)")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except IOFailure as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
