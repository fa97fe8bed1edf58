"""Executable device state for one campaign."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from ..ui import InteractionType, UiEvent, UiState
from .model import RESTART_SCREEN_ID, AppModel, CrashRecord, Effect
from .render import CLOCK_PERIOD, render, render_restart


@dataclass(frozen=True)
class StepResult:
    state: UiState
    crashed: Optional[CrashRecord] = None


class AppRuntime:
    """Mutable device for one campaign: current screen, back stack, flags, clock.

    Rendered states are cached per (screen, clock digit) so repeated visits
    return the same ``UiState`` object.
    """

    def __init__(self, model: AppModel, start: Optional[str] = None) -> None:
        self.model = model
        self.crash_log: list[CrashRecord] = []
        self.events_executed = 0
        self._cache: dict[tuple[str, int], UiState] = {}
        self._hit: dict[str, dict[tuple, int]] = {}
        self.reset(start)

    def reset(
        self,
        screen: Optional[str] = None,
        flags: Iterable[str] = (),
        stack: Iterable[str] = (),
    ) -> None:
        self.screen = screen or self.model.initial
        if self.screen not in self.model.screens:
            raise KeyError(f"unknown screen {self.screen!r}")
        self.flags: set[str] = set(flags)
        self.stack: list[str] = list(stack)

    @property
    def frame(self) -> int:
        return self.events_executed

    def get_state(self) -> UiState:
        return self._state_for(self.screen, self.frame)

    def _state_for(self, screen_id: str, frame: int) -> UiState:
        key = (screen_id, frame % CLOCK_PERIOD)
        state = self._cache.get(key)
        if state is None:
            if screen_id == RESTART_SCREEN_ID:
                state = UiState(render_restart(frame), (), RESTART_SCREEN_ID)
            else:
                screen = self.model.screens[screen_id]
                state = UiState(render(screen, frame), screen.widgets, screen_id)
            self._cache[key] = state
        return state

    def _widget_at(self, screen_id: str, event: UiEvent) -> Optional[int]:
        table = self._hit.get(screen_id)
        if table is None:
            table = {}
            for w in self.model.screens[screen_id].widgets:
                if not w.enabled:
                    continue
                for kind in w.interactions:
                    table.setdefault((w.bounds, kind), w.widget_id)
            self._hit[screen_id] = table
        return table.get((event.bounds, event.type))

    def resolve(self, event: UiEvent) -> Effect:
        model = self.model
        if event.type is InteractionType.BACK:
            for w in model.screens[self.screen].widgets:
                if w.enabled and InteractionType.BACK in w.interactions:
                    key = (self.screen, w.widget_id, InteractionType.BACK)
                    if key in model.transitions:
                        return model.transitions[key]
            return model.effect_for(self.screen, None, InteractionType.BACK)
        wid = self._widget_at(self.screen, event)
        if wid is None:
            return model.effect_for(self.screen, -1, event.type)  # nothing there: self-loop
        return model.effect_for(self.screen, wid, event.type)

    def execute(self, event: UiEvent) -> StepResult:
        effect = self.resolve(event)
        index = self.events_executed
        self.events_executed += 1
        crash = self._apply(effect, index)
        if crash is not None:
            self.crash_log.append(crash)
            self.reset()
            return StepResult(self._state_for(RESTART_SCREEN_ID, self.frame), crash)
        return StepResult(self.get_state())

    def _apply(self, effect: Effect, index: int) -> Optional[CrashRecord]:
        kind = effect.kind
        if kind == "crash":
            return CrashRecord(effect.signature, index, self.screen)
        if kind == "guarded_goto":
            branch = effect.then if effect.flag in self.flags else effect.otherwise
            crash = self._apply(branch, index)
            if crash is not None:
                return crash
        elif kind == "goto":
            if effect.target != self.screen:
                self.stack.append(self.screen)
                self.screen = effect.target
        elif kind == "back_pop":
            self.screen = self.stack.pop() if self.stack else self.model.initial
        elif kind == "set_flag":
            self.flags.add(effect.flag)
        self.flags.update(effect.sets)
        self.flags.difference_update(effect.clears)
        return None
