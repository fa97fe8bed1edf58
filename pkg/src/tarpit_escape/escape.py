"""Advisor-guided tarpit escaping.

One escape session runs at most ``max_retry`` attempts. Each attempt either
replays a remembered escape (reuse) or asks the advisor, executes exactly one
event and re-checks the detector. A session that runs out of retries forces a
single Back.
"""

from __future__ import annotations

import functools
import json
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional

from .advisors import Advisor, AdvisorError
from .detector import DetectorConfig, has_tarpit
from .memory import MemoryConfig, Reuse, TarpitMemory
from .simulator.model import CrashRecord
from .simulator.runtime import StepResult
from .ui import ActionSpace, InteractionType, UiEvent, UiState

STILL_TRAPPED = "still_trapped"
ESCAPED = "escaped"
CRASH = "crash"
INVALID = "invalid"

DEFAULT_TEXT = "test"


class ResponseError(ValueError):
    """Advisor reply does not name a usable action."""


class NoActionIdError(ResponseError):
    pass


class ActionIdOutOfRange(ResponseError):
    pass


@dataclass(frozen=True)
class EscapeConfig:
    max_retry: int = 10

    def __post_init__(self) -> None:
        if self.max_retry < 1:
            raise ValueError(f"max_retry must be >= 1, got {self.max_retry}")


@dataclass
class Attempt:
    phase: str  # "reuse" or "escape"
    event: Optional[UiEvent]
    outcome: str
    action_id: Optional[int] = None
    description: str = ""
    result: Optional[StepResult] = field(default=None, repr=False)
    reply: Optional[str] = None


@dataclass
class EscapeSession:
    tarpit_state: UiState
    attempts: list[Attempt] = field(default_factory=list)
    prompt_log: list[tuple[str, str]] = field(default_factory=list)
    forced_back: Optional[Attempt] = None

    @property
    def failed(self) -> list[Attempt]:
        return [a for a in self.attempts if a.outcome in (STILL_TRAPPED, INVALID)]

    @property
    def advisor_queries(self) -> int:
        return len(self.prompt_log)


@dataclass(frozen=True)
class Prompt:
    role_section: str
    task_section: str
    ui_section: str
    history_section: str
    question_section: str
    space: ActionSpace = field(repr=False, compare=False)
    failed_ids: frozenset = field(default=frozenset(), compare=False)

    @property
    def text(self) -> str:
        return (
            f"## Role\n{self.role_section}\n\n"
            f"## Task\n{self.task_section}\n\n"
            f"## UI\n{self.ui_section}\n\n"
            f"## Attempt history\n{self.history_section}\n\n"
            f"## Question\n{self.question_section}\n"
        )


@dataclass
class EscapeOutcome:
    kind: str  # "escaped" | "exhausted" | "crashed"
    final_state: UiState
    session: EscapeSession
    event: Optional[UiEvent] = None
    crash: Optional[CrashRecord] = None

    @property
    def escaped(self) -> bool:
        return self.kind == ESCAPED


@functools.lru_cache(maxsize=1)
def prompt_template() -> dict:
    text = resources.files("tarpit_escape").joinpath("data/prompt_template.json").read_text()
    return json.loads(text)


def _attempt_label(attempt: Attempt, space: ActionSpace) -> str:
    if attempt.event is None:
        return f"no usable action ({attempt.description})"
    match = space.find(attempt.event)
    if match is not None:
        return f"ID {match.action_id} ({space.describe(match.action_id)})"
    return f"{attempt.event.type.value} at {attempt.event.bounds.as_list()}"


def build_prompt(state: UiState, space: ActionSpace, session: EscapeSession) -> Prompt:
    tpl = prompt_template()
    ui_lines = [tpl["ui_header"]]
    ui_lines += [tpl["ui_line"].format(id=e.action_id, action=space.describe(e.action_id)) for e in space.events]
    failed = session.failed
    if failed:
        history = "\n".join(
            tpl["history_line"].format(n=n, action=_attempt_label(a, space), outcome=a.outcome)
            for n, a in enumerate(failed, start=1)
        )
    else:
        history = tpl["history_empty"]
    failed_ids = set()
    for a in failed:
        if a.event is not None:
            match = space.find(a.event)
            if match is not None:
                failed_ids.add(match.action_id)
    return Prompt(
        tpl["role"], tpl["task"], "\n".join(ui_lines), history, tpl["question"],
        space=space, failed_ids=frozenset(failed_ids),
    )


_ACTION_ID = re.compile(r"action[\s_-]*id\b\D{0,8}?(\d+)", re.IGNORECASE)
_STANDALONE_INT = re.compile(r"(?<![\w.])(\d+)(?![\w.])")
_QUOTED = re.compile(r'"([^"\n]*)"')


def parse_response(text: str, space: ActionSpace) -> UiEvent:
    m = _ACTION_ID.search(text) or _STANDALONE_INT.search(text)
    if m is None:
        raise NoActionIdError(f"no action id in reply {text[:80]!r}")
    action_id = int(m.group(1))
    if action_id not in space:
        raise ActionIdOutOfRange(f"action id {action_id} is outside 0..{len(space) - 1}")
    event = space[action_id]
    if event.type is InteractionType.TEXT_INPUT:
        q = _QUOTED.search(text)
        event = event.with_payload(q.group(1) if q else DEFAULT_TEXT)
    return event


def run_escape(
    state: UiState,
    states: list[UiState],
    memory: TarpitMemory,
    advisor: Advisor,
    detector_cfg: DetectorConfig,
    mem_cfg: MemoryConfig,
    esc_cfg: EscapeConfig,
    rng: random.Random,
    execute: Callable[[UiEvent], StepResult],
    use_reuse: bool = True,
) -> EscapeOutcome:
    """Try to leave the tarpit ending at ``state``; appends every new state to ``states``."""
    session = EscapeSession(state)
    current = state
    for _ in range(esc_cfg.max_retry):
        space = current.action_space
        decision = None
        if use_reuse:
            decision = memory.dispatch(current, rng.random(), rng, mem_cfg)
        if isinstance(decision, Reuse):
            event, phase, reply = decision.event, "reuse", None
        else:
            phase = "escape"
            prompt = build_prompt(current, space, session)
            reply = None
            try:
                reply = advisor.suggest(prompt)
                event = parse_response(reply, space)
            except (AdvisorError, ResponseError) as exc:
                session.prompt_log.append((prompt.text, reply if reply is not None else f"<error: {exc}>"))
                session.attempts.append(Attempt(phase, None, INVALID, description=str(exc), reply=reply))
                continue
            session.prompt_log.append((prompt.text, reply))

        match = space.find(event)
        result = execute(event)
        states.append(result.state)
        attempt = Attempt(
            phase, event, STILL_TRAPPED,
            action_id=match.action_id if match else None,
            description=space.describe(match.action_id) if match else "",
            result=result, reply=reply,
        )
        session.attempts.append(attempt)
        if result.crashed is not None:
            attempt.outcome = CRASH
            return EscapeOutcome("crashed", result.state, session, event, result.crashed)
        if not has_tarpit(states, detector_cfg):
            attempt.outcome = ESCAPED
            memory.record_escape(states[-2], event, mem_cfg)
            return EscapeOutcome(ESCAPED, result.state, session, event)
        current = result.state

    # retries exhausted: one forced Back, never remembered as an escape
    back = current.action_space[current.action_space.back_id]
    result = execute(back)
    states.append(result.state)
    session.forced_back = Attempt("escape", back, CRASH if result.crashed else "forced_back",
                                  action_id=back.action_id, result=result)
    return EscapeOutcome("exhausted", result.state, session, back, result.crashed)
