"""Campaign main loop: random exploration interleaved with escape sessions."""

from __future__ import annotations

import csv
import enum
import io
import json
import random
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Callable, Optional, Union

from .advisors import Advisor
from .detector import DetectorConfig, has_tarpit
from .escape import EscapeConfig, EscapeOutcome, run_escape
from .memory import MemoryConfig, TarpitMemory
from .simulator.model import RESTART_SCREEN_ID, AppModel, CrashRecord
from .simulator.runtime import AppRuntime, StepResult
from .ui import TEXT_PAYLOADS, InteractionType, UiEvent, UiState


class Mode(str, enum.Enum):
    HYBRID = "hybrid"
    RANDOM_ONLY = "random_only"
    NO_REUSE = "no_reuse"
    NO_LLM = "no_llm"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class CampaignConfig:
    seed: int = 0
    event_budget: int = 5000
    detector: DetectorConfig = DetectorConfig()
    memory: MemoryConfig = MemoryConfig()
    escape: EscapeConfig = EscapeConfig()
    mode: Mode = Mode.HYBRID
    # optional wall-clock cap (seconds) for live-advisor runs
    time_budget: Optional[float] = None
    # budget units charged per advisor query, modelling advisor latency in
    # event-equivalents; 0 makes queries free
    advisor_cost: int = 0
    stop_on_first_crash: bool = False
    start_screen: Optional[str] = None
    start_flags: tuple[str, ...] = ()
    start_stack: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.event_budget < 0:
            raise ValueError("event_budget must be >= 0")
        if self.advisor_cost < 0:
            raise ValueError("advisor_cost must be >= 0")

    def to_json(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        return d


@dataclass
class TraceEntry:
    index: int
    event: UiEvent
    pre: str
    post: str
    phase: str  # random | escape | reuse
    crashed: bool = False

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "phase": self.phase,
            "event": self.event.to_dict(),
            "pre": self.pre,
            "post": self.post,
            "crashed": self.crashed,
        }


@dataclass
class Episode:
    window_start: int  # trace length when the first state of the window was captured
    start: int  # trace length at detection
    end: int
    outcome: str  # escaped | exhausted | crashed | passive | open
    attempts: int
    screen: str
    advisor_queries: int = 0
    first_attempt_escape: bool = False
    prompts: list[tuple[str, str]] = field(default_factory=list)

    @property
    def escaped(self) -> bool:
        return self.outcome == "escaped"

    @property
    def active(self) -> bool:
        return self.outcome in ("escaped", "exhausted", "crashed")

    def to_json(self, with_prompts: bool = False) -> dict:
        d = {
            "window_start": self.window_start,
            "start": self.start,
            "end": self.end,
            "outcome": self.outcome,
            "escaped": self.escaped,
            "attempts": self.attempts,
            "screen": self.screen,
            "advisor_queries": self.advisor_queries,
            "first_attempt_escape": self.first_attempt_escape,
        }
        if with_prompts:
            d["prompts"] = [{"prompt": p, "reply": r} for p, r in self.prompts]
        return d


@dataclass
class CampaignReport:
    app_name: str
    app_fingerprint: str
    config: CampaignConfig
    advisor: str
    initial_screen: str
    trace: list[TraceEntry] = field(default_factory=list)
    episodes: list[Episode] = field(default_factory=list)
    crashes: list[CrashRecord] = field(default_factory=list)  # first occurrence per signature
    crash_count: int = 0
    coverage_screens: list[int] = field(default_factory=list)
    coverage_transitions: list[int] = field(default_factory=list)
    memory: TarpitMemory = field(default_factory=TarpitMemory, repr=False)
    generated_at: str = ""

    @property
    def advisor_queries(self) -> int:
        return sum(e.advisor_queries for e in self.episodes)

    @property
    def first_crash_index(self) -> Optional[int]:
        for t in self.trace:
            if t.crashed:
                return t.index
        return None

    @property
    def screens_seen(self) -> set[str]:
        seen = {self.initial_screen}
        for t in self.trace:
            seen.update((t.pre, t.post))
        seen.discard(RESTART_SCREEN_ID)
        return seen

    def to_json(self, with_prompts: bool = True) -> dict:
        return {
            "app": {"name": self.app_name, "fingerprint": self.app_fingerprint},
            "config": self.config.to_json(),
            "advisor": {"name": self.advisor, "queries": self.advisor_queries},
            "initial_screen": self.initial_screen,
            "events": len(self.trace),
            "first_crash_index": self.first_crash_index,
            "crash_count": self.crash_count,
            "crashes": [c.to_json() for c in self.crashes],
            "episodes": [e.to_json(with_prompts) for e in self.episodes],
            "coverage": {"screens": self.coverage_screens, "transitions": self.coverage_transitions},
            "trace": [t.to_json() for t in self.trace],
            "memory": self.memory.to_json(),
            "generated_at": self.generated_at,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "phase", "type", "bounds", "payload", "pre", "post", "crashed"])
        for t in self.trace:
            e = t.event
            w.writerow([t.index, t.phase, e.type.value, " ".join(map(str, e.bounds.as_list())),
                        e.payload if e.payload is not None else "", t.pre, t.post, int(t.crashed)])
        return buf.getvalue()


def gen_random_event(state: UiState, rng: random.Random) -> UiEvent:
    space = state.action_space
    event = space.events[rng.randrange(len(space))]
    if event.type is InteractionType.TEXT_INPUT:
        event = event.with_payload(rng.choice(TEXT_PAYLOADS))
    return event


AdvisorArg = Union[Advisor, Callable[[AppRuntime], Advisor], None]


class _Campaign:
    """Mutable bookkeeping for one run of ``run_campaign``."""

    def __init__(self, app: AppModel, cfg: CampaignConfig, runtime: AppRuntime, advisor_name: str) -> None:
        self.app = app
        self.cfg = cfg
        self.runtime = runtime
        self.state = runtime.get_state()
        self.states: list[UiState] = [self.state]
        self.clock: list[int] = [0]  # trace length when each state was captured
        self.report = CampaignReport(
            app.name, app.fingerprint(), cfg, advisor_name, self.state.true_screen_id
        )
        self._screens = {self.state.true_screen_id}
        self._transitions: set[tuple] = set()
        self._crash_signatures: set[str] = set()
        self.stop = False

    @property
    def executed(self) -> int:
        return len(self.report.trace)

    def record(self, pre: UiState, event: UiEvent, result: StepResult, phase: str, append_state: bool) -> None:
        trace = self.report.trace
        trace.append(TraceEntry(len(trace), event, pre.true_screen_id, result.state.true_screen_id,
                                phase, result.crashed is not None))
        if append_state:
            self.states.append(result.state)
        self.clock.append(len(trace))
        post = result.state.true_screen_id
        if post != RESTART_SCREEN_ID:
            self._screens.add(post)
        self._transitions.add((pre.true_screen_id, event.type.value, event.bounds, post))
        self.report.coverage_screens.append(len(self._screens))
        self.report.coverage_transitions.append(len(self._transitions))
        self.state = result.state
        if result.crashed is not None:
            self.on_crash(result.crashed)

    def on_crash(self, crash: CrashRecord) -> None:
        self.report.crash_count += 1
        if crash.signature not in self._crash_signatures:
            self._crash_signatures.add(crash.signature)
            self.report.crashes.append(crash)
        # restart sentinel is already in `states`; capture the relaunched app too
        self.state = self.runtime.get_state()
        self.states.append(self.state)
        self.clock.append(self.executed)
        self._screens.add(self.state.true_screen_id)
        if self.cfg.stop_on_first_crash:
            self.stop = True


def run_campaign(
    app: AppModel,
    cfg: CampaignConfig,
    advisor: AdvisorArg = None,
    runtime: Optional[AppRuntime] = None,
) -> CampaignReport:
    """Run one seeded campaign and return its trace.

    ``advisor`` may be a factory taking the runtime, which is how the harness
    wires ground-truth advisors without exposing the simulator to the engine.
    """
    if runtime is None:
        runtime = AppRuntime(app)
        if cfg.start_screen is not None:
            runtime.reset(cfg.start_screen, cfg.start_flags, cfg.start_stack)
    if advisor is not None and not hasattr(advisor, "suggest"):
        advisor = advisor(runtime)
    mode = cfg.mode
    if mode in (Mode.HYBRID, Mode.NO_REUSE) and advisor is None:
        raise ValueError(f"mode {mode.value} needs an advisor")

    rng = random.Random(cfg.seed)
    c = _Campaign(app, cfg, runtime, getattr(advisor, "name", "none") if mode in (Mode.HYBRID, Mode.NO_REUSE) else "none")
    report = c.report
    detect = mode is not Mode.RANDOM_ONLY
    passive: Optional[Episode] = None
    deadline = time.monotonic() + cfg.time_budget if cfg.time_budget else None

    def window_start() -> int:
        return c.clock[max(0, len(c.states) - cfg.detector.k)]

    queries = 0
    while c.executed + cfg.advisor_cost * queries < cfg.event_budget and not c.stop:
        if deadline is not None and time.monotonic() >= deadline:
            break
        trapped = detect and has_tarpit(c.states, cfg.detector)

        if trapped and mode in (Mode.HYBRID, Mode.NO_REUSE):
            ep = Episode(window_start(), c.executed, c.executed, "open", 0, c.state.true_screen_id)
            outcome = _escape(c, advisor, rng, use_reuse=mode is Mode.HYBRID)
            session = outcome.session
            ep.end = c.executed
            ep.outcome = outcome.kind
            ep.attempts = len(session.attempts)
            ep.advisor_queries = session.advisor_queries
            queries += session.advisor_queries
            ep.first_attempt_escape = outcome.escaped and ep.attempts == 1
            ep.prompts = list(session.prompt_log)
            report.episodes.append(ep)
            continue

        if mode is Mode.NO_LLM:
            if trapped and passive is None:
                passive = Episode(window_start(), c.executed, c.executed, "open", 0, c.state.true_screen_id)
                report.episodes.append(passive)
            elif not trapped and passive is not None:
                passive.end = c.clock[len(c.states) - 1]
                passive.outcome = "passive"
                passive = None

        pre = c.state
        event = gen_random_event(pre, rng)
        c.record(pre, event, runtime.execute(event), "random", append_state=True)

    if passive is not None:
        passive.end = c.executed
    report.generated_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return report


def _escape(c: _Campaign, advisor: Advisor, rng: random.Random, use_reuse: bool) -> EscapeOutcome:
    cfg = c.cfg
    memory = c.report.memory
    pre_states: list[UiState] = []

    def execute(event: UiEvent) -> StepResult:
        pre_states.append(c.states[-1])
        return c.runtime.execute(event)

    outcome = run_escape(
        c.state, c.states, memory, advisor, cfg.detector, cfg.memory, cfg.escape, rng, execute, use_reuse
    )
    # run_escape already appended the post states; mirror them into the trace
    session = outcome.session
    executed = [a for a in session.attempts if a.result is not None]
    if session.forced_back is not None:
        executed.append(session.forced_back)
    for pre, attempt in zip(pre_states, executed):
        c.record(pre, attempt.event, attempt.result, attempt.phase, append_state=False)
    return outcome


def replay_states(app: AppModel, cfg: CampaignConfig, report: CampaignReport) -> list[tuple[UiState, UiState]]:
    """Re-execute the trace on a fresh device; returns (pre, post) states per entry."""
    runtime = AppRuntime(app)
    if cfg.start_screen is not None:
        runtime.reset(cfg.start_screen, cfg.start_flags, cfg.start_stack)
    pairs = []
    state = runtime.get_state()
    for t in report.trace:
        result = runtime.execute(t.event)
        pairs.append((state, result.state))
        state = runtime.get_state() if result.crashed else result.state
    return pairs


class MetricsError(ValueError):
    """Report and ground-truth app do not belong together."""


NA = "n/a"


@dataclass(frozen=True)
class MetricSummary:
    events: int
    episodes: int
    esr: Optional[float]  # None when there were no escape episodes
    faer: Optional[float]
    tdp: Optional[float]
    time_in_tarpit: float
    screen_coverage: float
    unique_screens: int
    unique_transitions: int
    unique_crashes: int
    first_crash_index: Optional[int]
    advisor_queries: int

    def to_row(self) -> dict:
        def fmt(v):
            return NA if v is None else v

        return {k: fmt(v) for k, v in asdict(self).items()}


def _union_length(intervals: list[tuple[int, int]]) -> int:
    total, cur_start, cur_end = 0, None, None
    for a, b in sorted(intervals):
        if cur_end is None or a > cur_end:
            if cur_end is not None:
                total += cur_end - cur_start
            cur_start, cur_end = a, b
        else:
            cur_end = max(cur_end, b)
    if cur_end is not None:
        total += cur_end - cur_start
    return total


def compute_metrics(report: CampaignReport, app: AppModel) -> MetricSummary:
    if report.app_fingerprint != app.fingerprint():
        raise MetricsError(
            f"report was produced on app {report.app_name!r} ({report.app_fingerprint[:12]}), "
            f"not on {app.name!r} ({app.fingerprint()[:12]})"
        )
    active = [e for e in report.episodes if e.active]
    n = len(active)
    esr = sum(e.escaped for e in active) / n if n else None
    faer = sum(e.first_attempt_escape for e in active) / n if n else None
    eps = report.episodes
    tdp = sum(app.screens[e.screen].tarpit for e in eps) / len(eps) if eps else None
    events = len(report.trace)
    in_tarpit = _union_length([(e.window_start, e.end) for e in eps])
    seen = report.screens_seen
    return MetricSummary(
        events=events,
        episodes=len(eps),
        esr=esr,
        faer=faer,
        tdp=tdp,
        time_in_tarpit=in_tarpit / events if events else 0.0,
        screen_coverage=len(seen) / len(app.screens),
        unique_screens=len(seen),
        unique_transitions=report.coverage_transitions[-1] if report.coverage_transitions else 0,
        unique_crashes=len(report.crashes),
        first_crash_index=report.first_crash_index,
        advisor_queries=report.advisor_queries,
    )
