"""Deterministic simulated device."""

from .model import (
    RESTART_GROUP,
    RESTART_SCREEN_ID,
    SCREEN_HEIGHT,
    SCREEN_WIDTH,
    AppModel,
    CrashRecord,
    Effect,
    ScenarioError,
    ScreenDef,
)
from .motivating import motivating_example
from .render import render, render_restart
from .runtime import AppRuntime, StepResult
from .scenario import builtin_scenario, check_calibration, dump_scenario, load_scenario, parse_scenario, save_scenario

__all__ = [
    "RESTART_GROUP",
    "RESTART_SCREEN_ID",
    "SCREEN_HEIGHT",
    "SCREEN_WIDTH",
    "AppModel",
    "AppRuntime",
    "CrashRecord",
    "Effect",
    "ScenarioError",
    "ScreenDef",
    "StepResult",
    "builtin_scenario",
    "check_calibration",
    "dump_scenario",
    "load_scenario",
    "motivating_example",
    "parse_scenario",
    "render",
    "render_restart",
    "save_scenario",
]
