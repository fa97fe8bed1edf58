"""Shared fixtures for building simulator states in tests."""

from __future__ import annotations

from tarpit_escape.simulator import AppRuntime, motivating_example
from tarpit_escape.simulator.model import ScreenDef
from tarpit_escape.simulator.render import render
from tarpit_escape.ui import UiState


def screen_state(screen: ScreenDef, frame: int = 0) -> UiState:
    return UiState(render(screen, frame), screen.widgets, screen.screen_id)


def page_state(page: str, frame: int = 0, app=None) -> UiState:
    app = app or motivating_example()
    return screen_state(app.screens[page], frame)


def runtime_at(page: str, flags=(), stack=("a",)) -> AppRuntime:
    rt = AppRuntime(motivating_example())
    rt.reset(page, flags, stack)
    return rt
