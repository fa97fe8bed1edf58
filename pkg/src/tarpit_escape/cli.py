"""Command-line front end.

Exit codes: 0 success, 1 bad flags or parameters, 2 scenario errors,
3 advisor configuration errors, 4 failed comparison cells or failed checks.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .advisors import AdvisorConfigError, HttpChatAdvisor, ReplayAdvisor, ScriptedAdvisor
from .detector import DetectorConfig
from .driver import CampaignConfig, CampaignReport, MetricSummary, Mode, compute_metrics, run_campaign
from .escape import EscapeConfig
from .experiments import (
    analytic_trap_model,
    iqr,
    median,
    oracle_factory,
    simulate_bug,
    simulate_trap,
)
from .memory import MemoryConfig
from .simulator.generator import GeneratorParams, generate_app
from .simulator.model import AppModel, ScenarioError
from .simulator.scenario import builtin_scenario, load_scenario, parse_scenario, dump_scenario, save_scenario

log = logging.getLogger("tarpit_escape")

EXIT_OK, EXIT_USAGE, EXIT_SCENARIO, EXIT_ADVISOR, EXIT_FAILED = 0, 1, 2, 3, 4

MODES = [m.value for m in Mode]
ADVISORS = ("oracle", "scripted", "http", "replay")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; ours reserves 2 for scenario errors."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def resolve_scenario(spec: str) -> AppModel:
    path = Path(spec)
    if path.exists():
        return load_scenario(path)
    app = builtin_scenario(path.name)
    if app is None:
        raise ScenarioError(f"{spec}: no such scenario file")
    return app


# --- advisors ---------------------------------------------------------------


def make_advisor(args, app: AppModel, seed: int):
    """Advisor (or runtime-bound factory) for ``args.advisor``."""
    kind = args.advisor
    if kind == "oracle":
        return oracle_factory(app, args.epsilon, seed)
    if kind == "scripted":
        if args.script:
            try:
                replies = json.loads(Path(args.script).read_text())
            except (OSError, ValueError) as exc:
                raise AdvisorConfigError(f"cannot read script {args.script}: {exc}") from None
            if not isinstance(replies, list) or not all(isinstance(r, str) for r in replies):
                raise AdvisorConfigError(f"{args.script}: script must be a JSON list of strings")
        else:
            replies = args.reply or []
        if not replies:
            raise AdvisorConfigError("the scripted advisor needs --reply or --script")
        return ScriptedAdvisor(replies)
    if kind == "http":
        return HttpChatAdvisor(args.llm_endpoint, model=args.llm_model, timeout=args.llm_timeout)
    if kind == "replay":
        if not args.cassette:
            raise AdvisorConfigError("the replay advisor needs --cassette")
        inner = None
        if args.llm_endpoint:
            inner = HttpChatAdvisor(args.llm_endpoint, model=args.llm_model, timeout=args.llm_timeout)
        elif not Path(args.cassette).exists():
            raise AdvisorConfigError(f"cassette {args.cassette} does not exist and no --llm-endpoint to record with")
        return ReplayAdvisor(args.cassette, inner)
    raise UsageError(f"unknown advisor {kind!r}")  # pragma: no cover - argparse restricts choices


def campaign_config(args, seed: int, mode: str) -> CampaignConfig:
    return CampaignConfig(
        seed=seed,
        event_budget=args.budget,
        detector=DetectorConfig(k=args.k, theta=args.theta),
        memory=MemoryConfig(theta_mem=args.theta_mem, p_reuse=args.p_reuse, theta=args.theta),
        escape=EscapeConfig(max_retry=args.max_retry),
        mode=Mode(mode),
        time_budget=getattr(args, "time_budget", None),
        stop_on_first_crash=args.stop_on_first_crash,
        advisor_cost=args.advisor_cost,
    )


# --- output -----------------------------------------------------------------

SUMMARY_FIELDS = ["app", "mode", "seed"] + list(MetricSummary.__dataclass_fields__) + ["error"]


def summary_row(app: str, mode: str, seed: int, metrics: Optional[MetricSummary], error: str = "") -> dict:
    row = {"app": app, "mode": mode, "seed": seed, "error": error}
    if metrics is not None:
        row.update(metrics.to_row())
    return row


def write_csv(path: Path, rows: list[dict], fields: Sequence[str]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in fields})


def format_metrics(m: MetricSummary) -> str:
    def pct(v):
        return "n/a" if v is None else f"{v:.3f}"

    first = "none" if m.first_crash_index is None else str(m.first_crash_index)
    return (
        f"events={m.events} episodes={m.episodes} ESR={pct(m.esr)} FAER={pct(m.faer)} TDP={pct(m.tdp)} "
        f"time_in_tarpit={m.time_in_tarpit:.3f} screens={m.unique_screens} ({m.screen_coverage:.3f}) "
        f"transitions={m.unique_transitions} crashes={m.unique_crashes} first_crash={first} "
        f"advisor_queries={m.advisor_queries}"
    )


# --- commands ---------------------------------------------------------------


def cmd_run(args) -> int:
    app = resolve_scenario(args.scenario)
    advisor = make_advisor(args, app, args.seed) if args.mode in ("hybrid", "no_reuse") else None
    cfg = campaign_config(args, args.seed, args.mode)
    report = run_campaign(app, cfg, advisor)
    metrics = compute_metrics(report, app)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.dumps())
    (out / "trace.csv").write_text(report.trace_csv())
    write_csv(out / "summary.csv", [summary_row(app.name, args.mode, args.seed, metrics)], SUMMARY_FIELDS)
    if args.memory_export:
        report.memory.save(out / "memory.json")
    print(f"{app.name} mode={args.mode} seed={args.seed}: {format_metrics(metrics)}")
    print(f"wrote {out / 'report.json'}")
    return EXIT_OK


def cmd_trap_model(args) -> int:
    model = analytic_trap_model(window=args.window)
    print(f"page b action space: {model.events_b} events, {model.exits_b} leave the page")
    print(f"page c action space: {model.events_c} events")
    stays = model.events_b - model.exits_b
    print(f"stay probability p = {stays}/{model.events_b} = {float(model.stay):.4f}")
    print(f"trapped for {args.window} events p^{args.window} = {float(model.trapped):.4f}")
    print(f"subscribe-then-back p_b = 1/({model.events_b}*{model.events_c}) = {float(model.bug):.3e}")

    ok = True
    trap = simulate_trap(args.trials, seed=args.seed, events=args.window)
    lo, hi = trap.ci()
    within = abs(trap.value - float(model.trapped)) <= args.trap_tolerance
    ok &= within
    print(f"Monte Carlo trapped fraction over {trap.trials} walks: {trap.value:.4f} "
          f"(95% CI {lo:.4f}..{hi:.4f}) -> {'PASS' if within else 'FAIL'} "
          f"(|diff| <= {args.trap_tolerance})")

    if args.bug_trials > 0:
        bug = simulate_bug(args.bug_trials, seed=args.seed)
        lo, hi = bug.ci()
        inside = lo <= float(model.bug) <= hi
        ok &= inside
        print(f"Monte Carlo bug rate over {bug.trials} two-event walks: {bug.value:.3e} "
              f"(95% CI {lo:.3e}..{hi:.3e}) -> {'PASS' if inside else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAILED


@dataclass(frozen=True)
class Cell:
    app_index: int
    mode: str
    seed: int


def _run_cell(job) -> tuple:
    scenario, cell, args_dict = job
    args = argparse.Namespace(**args_dict)
    try:
        app = parse_scenario(scenario, check_render=False)
        advisor = make_advisor(args, app, cell.seed) if cell.mode in ("hybrid", "no_reuse") else None
        report = run_campaign(app, campaign_config(args, cell.seed, cell.mode), advisor)
        metrics = compute_metrics(report, app)
        report_text = report.dumps() if args.write_reports else None
        return cell, app.name, metrics, list(report.coverage_screens), report_text, ""
    except Exception as exc:  # a failed cell is recorded, the grid carries on
        return cell, "", None, [], None, f"{type(exc).__name__}: {exc}"


def _comparison_apps(args) -> list[AppModel]:
    apps: list[AppModel] = []
    for spec in args.scenario or []:
        apps.append(resolve_scenario(spec))
    if args.suite:
        for i in range(args.suite):
            apps.append(generate_app(GeneratorParams(
                n_screens=args.screens, tarpit_factor=args.tarpit_factor, seed=args.suite_seed + i,
                fanout_window=args.fanout_window,
            )))
    if not apps:
        raise UsageError("compare needs --scenario or --suite")
    return apps


def cmd_compare(args) -> int:
    apps = _comparison_apps(args)
    modes = args.modes
    seeds = list(range(args.first_seed, args.first_seed + args.seeds))
    cells = [Cell(a, m, s) for a in range(len(apps)) for m in modes for s in seeds]
    args_dict = {k: v for k, v in vars(args).items() if k != "func"}
    jobs = [(dump_scenario(apps[c.app_index]), c, args_dict) for c in cells]

    out = Path(args.out_dir)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    workers = args.workers or os.cpu_count() or 1
    if workers == 1:
        results = [_run_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, jobs, chunksize=1))

    rows, curves, failed = [], {m: [] for m in modes}, 0
    for cell, name, metrics, coverage, report_text, error in results:
        name = name or apps[cell.app_index].name
        rows.append(summary_row(name, cell.mode, cell.seed, metrics, error))
        if error:
            failed += 1
            log.error("cell %s/%s/%d failed: %s", name, cell.mode, cell.seed, error)
            continue
        curves[cell.mode].append(coverage)
        if report_text is not None:
            (out / "reports" / f"{name}_{cell.mode}_{cell.seed}.json").write_text(report_text)
    write_csv(out / "summary.csv", rows, SUMMARY_FIELDS)

    agg = aggregate(rows, modes)
    write_csv(out / "aggregates.csv", agg, AGG_FIELDS)
    plot_curves(curves, out / "curves.svg", args.budget)
    for a in agg:
        if not a["runs"]:
            print(f"{a['mode']:<12} runs=0 (every cell failed)")
            continue
        print(
            f"{a['mode']:<12} runs={a['runs']:<4} screens median={a['screens_median']} "
            f"IQR={a['screens_q1']}..{a['screens_q3']} crashes median={a['crashes_median']} "
            f"first_crash median={a['first_crash_median']} ESR median={a['esr_median']} "
            f"FAER median={a['faer_median']} time_in_tarpit median={a['time_in_tarpit_median']}"
        )
    print(f"wrote {out / 'summary.csv'} and {out / 'curves.svg'}")
    return EXIT_FAILED if failed else EXIT_OK


AGG_FIELDS = [
    "mode", "runs", "screens_median", "screens_q1", "screens_q3", "crashes_median",
    "first_crash_median", "esr_median", "faer_median", "time_in_tarpit_median",
]


def aggregate(rows: list[dict], modes: Sequence[str]) -> list[dict]:
    """Per-mode medians and IQRs, recomputable from the per-seed rows."""
    out = []
    for mode in modes:
        ok = [r for r in rows if r["mode"] == mode and not r["error"]]
        if not ok:
            out.append({"mode": mode, "runs": 0})
            continue

        def col(name, rows=ok):
            return [r[name] for r in rows if r[name] != "n/a"]

        def med(values):
            return round(median(values), 4) if values else "n/a"

        q1, q3 = iqr(col("unique_screens"))
        budget_cap = [r["first_crash_index"] + 1 if r["first_crash_index"] != "n/a" else r["events"] for r in ok]
        out.append({
            "mode": mode,
            "runs": len(ok),
            "screens_median": med(col("unique_screens")),
            "screens_q1": q1,
            "screens_q3": q3,
            "crashes_median": med(col("unique_crashes")),
            "first_crash_median": med(budget_cap),
            "esr_median": med(col("esr")),
            "faer_median": med(col("faer")),
            "time_in_tarpit_median": med(col("time_in_tarpit")),
        })
    return out


def plot_curves(curves: dict[str, list[list[int]]], path: Path, budget: int) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    fig, ax = plt.subplots(figsize=(6, 4))
    for mode, runs in curves.items():
        runs = [r for r in runs if r]
        if not runs:
            continue
        length = max(len(r) for r in runs)
        # runs that stopped early keep their final coverage
        grid = np.array([r + [r[-1]] * (length - len(r)) for r in runs])
        x = np.arange(1, length + 1)
        ax.plot(x, np.median(grid, axis=0), label=mode)
        ax.fill_between(x, np.percentile(grid, 25, axis=0), np.percentile(grid, 75, axis=0), alpha=0.2)
    ax.set_xlabel("events")
    ax.set_ylabel("unique screens")
    ax.set_xlim(0, max(budget, 1))
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_generate(args) -> int:
    try:
        params = GeneratorParams(
            n_screens=args.screens, tarpit_factor=args.tarpit_factor, seed=args.seed, n_crashes=args.crashes,
            fanout_window=args.fanout_window,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    app = generate_app(params)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    save_scenario(app, out)
    flagged = sum(s.tarpit for s in app.screens.values())
    print(f"wrote {out}: {len(app.screens)} screens, {flagged} flagged as tarpits")
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _add_campaign_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--budget", type=int, default=5000, help="event budget per campaign (default 5000)")
    p.add_argument("--advisor", choices=ADVISORS, default="oracle")
    p.add_argument("--epsilon", type=float, default=0.0, help="oracle noise rate")
    p.add_argument("--reply", action="append", help="scripted advisor reply (repeatable)")
    p.add_argument("--script", help="JSON list of scripted advisor replies")
    p.add_argument("--llm-endpoint", help="chat-completions URL for the http advisor")
    p.add_argument("--llm-model", default="gpt-4o")
    p.add_argument("--llm-timeout", type=float, default=30.0)
    p.add_argument("--cassette", help="JSON cassette for the replay advisor")
    p.add_argument("--k", type=int, default=8, help="tarpit window length")
    p.add_argument("--theta", type=float, default=0.95)
    p.add_argument("--theta-mem", type=float, default=0.99)
    p.add_argument("--p-reuse", type=float, default=0.8)
    p.add_argument("--max-retry", type=int, default=10)
    p.add_argument("--stop-on-first-crash", action="store_true")
    p.add_argument("--advisor-cost", type=int, default=0,
                   help="budget units charged per advisor query (models advisor latency; default 0)")
    p.add_argument("--out-dir", default="out")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tarpit-escape", description="Random GUI testing with tarpit escaping on simulated apps.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one campaign")
    p.add_argument("--scenario", default="motivating", help="scenario JSON file or built-in name")
    p.add_argument("--mode", choices=MODES, default="hybrid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--time-budget", type=float, help="optional wall-clock cap in seconds")
    p.add_argument("--memory-export", action="store_true", help="also write memory.json")
    _add_campaign_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trap-model", help="analytic and Monte Carlo trap/bug probabilities of the podcast app")
    p.add_argument("--trials", type=int, default=10_000, help="random walks for the trap estimate")
    p.add_argument("--bug-trials", type=int, default=1_000_000, help="two-event walks for the bug estimate")
    p.add_argument("--window", type=int, default=8, help="consecutive events that must stay on the page")
    p.add_argument("--trap-tolerance", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_trap_model)

    p = sub.add_parser("compare", help="run a mode x seed grid and summarise it")
    p.add_argument("--scenario", action="append", help="scenario file or built-in name (repeatable)")
    p.add_argument("--suite", type=int, default=0, help="number of generated apps to add")
    p.add_argument("--screens", type=int, default=40)
    p.add_argument("--tarpit-factor", type=float, default=0.85)
    p.add_argument("--fanout-window", type=int, default=3,
                   help="new screens hang below one of this many most recent screens")
    p.add_argument("--suite-seed", type=int, default=0)
    p.add_argument("--modes", nargs="+", choices=MODES, default=["hybrid", "no_reuse", "no_llm"])
    p.add_argument("--seeds", type=int, default=10, help="number of seeds per app and mode")
    p.add_argument("--first-seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=0, help="worker processes (default: logical CPUs)")
    p.add_argument("--no-reports", dest="write_reports", action="store_false")
    _add_campaign_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("generate", help="write a generated benchmark scenario")
    p.add_argument("--screens", type=int, default=40)
    p.add_argument("--tarpit-factor", type=float, default=0.85)
    p.add_argument("--fanout-window", type=int, default=3,
                   help="new screens hang below one of this many most recent screens")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--crashes", type=int, default=2)
    p.add_argument("--out", default="generated.json")
    p.set_defaults(func=cmd_generate)
    return parser


def _check_args(args) -> None:
    if getattr(args, "budget", 1) < 1:
        raise UsageError("--budget must be >= 1")
    if getattr(args, "seeds", 1) < 1:
        raise UsageError("--seeds must be >= 1")
    if getattr(args, "trials", 1) < 1:
        raise UsageError("--trials must be >= 1")
    if getattr(args, "advisor_cost", 0) < 0:
        raise UsageError("--advisor-cost must be >= 0")
    eps = getattr(args, "epsilon", 0.0)
    if not 0.0 <= eps <= 1.0:
        raise UsageError("--epsilon must lie in [0, 1]")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _check_args(args)
        return args.func(args)
    except (UsageError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            print(f"scenario error: {exc}", file=sys.stderr)
            return EXIT_SCENARIO
        if isinstance(exc, AdvisorConfigError):
            print(f"advisor error: {exc}", file=sys.stderr)
            return EXIT_ADVISOR
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
