"""Command-line harness: backtests, oracles, verification pipelines, and
scaled-wealth experiments from one JSON config.

Exit codes: 0 all checks pass, 2 deterministic check failed,
3 statistical check failed, 4 capacity exceeded, 5 config error.
"""

from __future__ import annotations

import argparse
import csv
import functools
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from fractions import Fraction

from . import __version__
from .analysis import (BoundReport, check_frame_drift, compute_constants,
                       measure_memory_epsilon, verify_queue_band,
                       verify_slot_optimality, verify_thm1_profit,
                       verify_thm2_profit, verify_thm3, FAIL, PASS)
from .config import ExperimentConfig, config_to_json, load_config
from .errors import (CapacityError, ConfigError, LyaptradeError, ParseError,
                     StatisticalPowerError, StructuralError)
from .market import TradeDecision
from .money import cents_to_str
from .oracles import brute_force_slot_min, drift_rebalance, lookahead_psi, \
    solve_phi_opt
from .prices import load_trace, make_rng, save_trace, stationary_distribution
from .trader import (Trajectory, placeholder_wrap, run_backtest, run_profit,
                     scaled_windows_run)

EXIT_OK, EXIT_DETERMINISTIC, EXIT_STATISTICAL = 0, 2, 3
EXIT_CAPACITY, EXIT_CONFIG = 4, 5

DETERMINISTIC_CHECKS = ("dynamics", "queue_band", "slot_optimality",
                        "frame_drift", "thm3")
STATISTICAL_CHECKS = ("thm1", "thm2")


def _resolved(cfg: ExperimentConfig):
    """(source, spec, params) with trace caps and placeholder applied."""
    source, spec = cfg.source.resolve(cfg.market)
    params = cfg.trader
    if params.placeholder:
        params = placeholder_wrap(replace(params, placeholder=False), spec)
    return source, spec, params


def _bundle(cfg: ExperimentConfig, body: dict) -> dict:
    bundle = {"version": __version__, "config": config_to_json(cfg), **body}
    canon = json.dumps(bundle, sort_keys=True, default=str)
    bundle["content_hash"] = hashlib.sha256(canon.encode()).hexdigest()
    return bundle


def _emit(bundle: dict, out_dir, name="summary.json"):
    text = json.dumps(bundle, indent=2, default=str)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, name), "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _run_one(spec, params, source, horizon, seed, records, r):
    if records:
        return r, run_backtest(spec, params, source, horizon,
                               seed=seed, stream=r)
    total, queue = run_profit(spec, params, source, horizon,
                              seed=seed, stream=r)
    return r, (total, queue)


def _deterministic_checks(cfg, spec, params, traj: Trajectory, rep: int):
    reports = {}
    opts = cfg.options
    for name in cfg.verify:
        if name == "dynamics":
            try:
                traj.check_dynamics()
                reports[name] = BoundReport(PASS, detail={"check": "dynamics"})
            except StructuralError as exc:
                reports[name] = BoundReport(FAIL, -1.0, rep,
                                            {"check": "dynamics",
                                             "error": str(exc)})
        elif name == "queue_band":
            reports[name] = verify_queue_band(traj)
        elif name == "slot_optimality":
            k = int(opts.get("optimality_slots", 50))
            rng = make_rng(cfg.seed, 10 ** 6 + rep)
            slots = sorted(set(
                int(t) for t in rng.integers(0, traj.n_slots, size=k)))
            alts = []
            for t in slots:
                alts.append((t, brute_force_slot_min(
                    params, spec, traj.prices[t], traj.queue_at(t))))
                alts.append((t, TradeDecision.zero(spec.n_stocks)))
            reports[name] = verify_slot_optimality(traj, alts)
        elif name == "frame_drift":
            T = int(opts.get("window", 4))
            ok = all(check_frame_drift(traj, t0, T)
                     for t0 in range(0, traj.n_slots - T + 1, T))
            reports[name] = BoundReport(
                PASS if ok else FAIL, 0.0 if ok else -1.0, rep,
                {"check": "frame_drift", "window": T})
        elif name == "thm3":
            T = int(opts.get("window", 4))
            M = traj.n_slots // T
            psi = [lookahead_psi(spec, traj.prices[m * T:(m + 1) * T]).psi_cents
                   for m in range(M)]
            reports[name] = verify_thm3(traj, psi, M, T)
    return reports


def _statistical_checks(cfg, spec, params, totals):
    reports = {}
    opts = cfg.options
    for name in cfg.verify:
        if name == "thm1":
            if cfg.source.kind != "iid":
                raise ConfigError("thm1 needs an iid source",
                                  location="/verify")
            phi = solve_phi_opt(spec, cfg.source.dist).phi_opt
            reports[name] = verify_thm1_profit(totals, cfg.horizon, spec,
                                               params, phi)
        elif name == "thm2":
            if cfg.source.kind != "markov":
                raise ConfigError("thm2 needs a markov source",
                                  location="/verify")
            T = int(opts.get("window", 4))
            if cfg.horizon % T:
                raise ConfigError("horizon must be a multiple of the window",
                                  location="/horizon")
            model = cfg.source.model
            sol = solve_phi_opt(spec, stationary_distribution(model))
            sol = drift_rebalance(sol)
            eps = measure_memory_epsilon(model, sol, T)
            reports[name] = verify_thm2_profit(totals, cfg.horizon // T, T,
                                               eps, spec, params, sol.phi_opt)
    return reports


def _merge(reports_by_rep):
    merged = {}
    for reports in reports_by_rep:
        for name, rep in reports.items():
            merged[name] = rep if name not in merged \
                else merged[name].merge(rep)
    return merged


def _exit_for(reports: dict) -> int:
    for name in DETERMINISTIC_CHECKS:
        if name in reports and not reports[name].ok:
            return EXIT_DETERMINISTIC
    for name in STATISTICAL_CHECKS:
        if name in reports and not reports[name].ok:
            return EXIT_STATISTICAL
    return EXIT_OK


def cmd_run(cfg: ExperimentConfig, out_dir, jobs: int) -> int:
    source, spec, params = _resolved(cfg)
    records = bool(cfg.verify and set(cfg.verify) & set(DETERMINISTIC_CHECKS)) \
        or cfg.write_trajectories
    worker = functools.partial(_run_one, spec, params, source,
                               cfg.horizon, cfg.seed, records)
    reps = range(cfg.replications)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = sorted(pool.map(worker, reps))
    else:
        results = [worker(r) for r in reps]
    totals = []
    det_reports = []
    for r, payload in results:
        if records:
            traj = payload
            totals.append(traj.cumulative_profit())
            det_reports.append(_deterministic_checks(cfg, spec, params,
                                                     traj, r))
            if cfg.write_trajectories and out_dir:
                os.makedirs(out_dir, exist_ok=True)
                with open(os.path.join(out_dir, f"trajectory_{r}.csv"),
                          "w") as fh:
                    traj.to_csv(fh)
        else:
            totals.append(payload[0])
    reports = _merge(det_reports)
    reports.update(_statistical_checks(cfg, spec, params, totals))
    avg = [float(Fraction(t, 100 * cfg.horizon)) for t in totals]
    body = {
        "results": {
            "replications": cfg.replications,
            "horizon": cfg.horizon,
            "total_profit": [cents_to_str(t) for t in totals],
            "time_avg_profit_mean": sum(avg) / len(avg),
        },
        "reports": {k: v.to_json() for k, v in reports.items()},
    }
    _emit(_bundle(cfg, body), out_dir)
    return _exit_for(reports)


def _policy_json(sol):
    table = []
    for price, acts in sol.policy.table:
        table.append({
            "price": [cents_to_str(p) for p in price],
            "actions": [{"buys": list(d.buys), "sells": list(d.sells),
                         "prob": str(q)} for d, q in acts],
        })
    return {"phi_opt": str(sol.phi_opt), "phi_opt_float": float(sol.phi_opt),
            "drifts": [str(d) for d in sol.drifts], "policy": table}


def cmd_oracle(cfg: ExperimentConfig, out_dir, jobs: int) -> int:
    source, spec, _ = _resolved(cfg)
    mode = cfg.oracle.get("mode", "phi_opt")
    if mode == "phi_opt":
        if cfg.source.kind == "iid":
            dist = cfg.source.dist
        elif cfg.source.kind == "markov":
            dist = stationary_distribution(cfg.source.model)
        else:
            raise ConfigError("phi_opt oracle needs an iid or markov source",
                              location="/oracle")
        sol = solve_phi_opt(spec, dist)
        balanced = drift_rebalance(sol)
        body = {"oracle": {"mode": "phi_opt",
                           "solution": _policy_json(sol),
                           "rebalanced": _policy_json(balanced)}}
    elif mode == "lookahead":
        if cfg.source.kind != "trace":
            raise ConfigError("lookahead oracle needs a trace source",
                              location="/oracle")
        T = int(cfg.oracle.get("window", 4))
        if T < 1:
            raise ConfigError("lookahead window must be >= 1",
                              location="/oracle/window")
        M = min(cfg.horizon, len(source)) // T
        frames = [source.sequence[m * T:(m + 1) * T] for m in range(M)]
        worker = functools.partial(lookahead_psi, spec)
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                values = list(pool.map(worker, frames))
        else:
            values = [worker(f) for f in frames]
        body = {"oracle": {"mode": "lookahead", "window": T,
                           "psi": [cents_to_str(v.psi_cents) for v in values],
                           "psi_total": cents_to_str(
                               sum(v.psi_cents for v in values))}}
    else:
        raise ConfigError(f"unknown oracle mode {mode!r}",
                          location="/oracle/mode")
    _emit(_bundle(cfg, body), out_dir)
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, trajectory_path, out_dir) -> int:
    bad = set(cfg.verify) & set(STATISTICAL_CHECKS)
    if bad:
        raise ConfigError(f"{sorted(bad)} need a replication ensemble; "
                          "use the run subcommand", location="/verify")
    if not trajectory_path:
        raise ConfigError("verify needs --trajectory <csv>")
    _, spec, params = _resolved(cfg)
    with open(trajectory_path) as fh:
        traj = Trajectory.from_csv(fh, spec, params)
    traj.check_dynamics()
    reports = _deterministic_checks(cfg, spec, params, traj, 0)
    body = {"reports": {k: v.to_json() for k, v in reports.items()}}
    _emit(_bundle(cfg, body), out_dir)
    return _exit_for(reports)


def cmd_scaled(cfg: ExperimentConfig, out_dir) -> int:
    source, spec, params = _resolved(cfg)
    sc = cfg.scaled
    beta = sc.get("beta", 0)
    frame = int(sc.get("frame", 4))
    frames_per_window = int(sc.get("frames_per_window",
                                   cfg.horizon // max(frame, 1) or 1))
    windows = int(sc.get("windows", 1))
    results = scaled_windows_run(spec, params, beta, frame,
                                 frames_per_window, windows, source,
                                 seed=cfg.seed)
    W = frame * frames_per_window
    rows = []
    wealth = Fraction(0)
    for w, (q_w, scale) in enumerate(results):
        wealth += q_w * W
        rows.append({"window": w, "profit_rate": float(q_w),
                     "scale": float(scale), "cumulative_wealth": float(wealth)})
    body = {"scaled": {"frame": frame, "frames_per_window": frames_per_window,
                       "windows": rows}}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "scaled_windows.csv"), "w") as fh:
            writer = csv.DictWriter(
                fh, ["window", "profit_rate", "scale", "cumulative_wealth"],
                lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    _emit(_bundle(cfg, body), out_dir)
    return EXIT_OK


def cmd_trace_convert(cfg: ExperimentConfig, input_path, cap_policy,
                      out_dir) -> int:
    if not input_path:
        if cfg.source.kind != "trace":
            raise ConfigError("trace-convert needs --input or a trace source")
        input_path = cfg.source.path
    with open(input_path) as fh:
        trace, caps = load_trace(fh, cfg.market, cap_policy=cap_policy)
    body = {"trace": {"rows": len(trace),
                      "effective_caps": [cents_to_str(c) for c in caps]}}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "trace.csv"), "w") as fh:
            save_trace(trace, fh)
    _emit(_bundle(cfg, body), out_dir)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lyaptrade",
        description="Queue-driven trading engine: backtests, exact "
                    "comparison oracles, and bound verification.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "backtest with optional verification"),
                        ("oracle", "price-only LP or frame lookahead"),
                        ("verify", "re-check a saved trajectory CSV"),
                        ("scaled", "windowed runs with wealth re-scaling"),
                        ("trace-convert", "validate/normalize a price trace")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="experiment JSON")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel worker processes")
        if name == "verify":
            p.add_argument("--trajectory", default=None,
                           help="trajectory CSV to verify")
        if name == "trace-convert":
            p.add_argument("--input", default=None, help="trace CSV to read")
            p.add_argument("--cap-policy", default="reject",
                           choices=("reject", "auto_expand"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.command == "run":
            return cmd_run(cfg, args.out, args.jobs)
        if args.command == "oracle":
            return cmd_oracle(cfg, args.out, args.jobs)
        if args.command == "verify":
            return cmd_verify(cfg, args.trajectory, args.out)
        if args.command == "scaled":
            return cmd_scaled(cfg, args.out)
        if args.command == "trace-convert":
            return cmd_trace_convert(cfg, args.input, args.cap_policy,
                                     args.out)
        raise ConfigError(f"unknown command {args.command!r}")
    except CapacityError as exc:
        print(f"capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except StatisticalPowerError as exc:
        print(f"statistical power: {exc}", file=sys.stderr)
        return EXIT_STATISTICAL
    except (ConfigError, ParseError, StructuralError, LyaptradeError) as exc:
        print(f"config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
