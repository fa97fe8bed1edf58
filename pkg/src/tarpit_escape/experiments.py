"""Reusable experiments: trap-probability model, escape efficacy, ablations."""

from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from .advisors import OracleAdvisor
from .detector import DetectorConfig, has_tarpit
from .driver import CampaignConfig, CampaignReport, Mode, gen_random_event, run_campaign
from .simulator.model import AppModel
from .simulator.motivating import MULTI_SELECT, motivating_example
from .simulator.runtime import AppRuntime


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class TrapModel:
    """Closed-form values for the preview page of the podcast app."""

    events_b: int
    exits_b: int
    events_c: int
    window: int

    @property
    def stay(self) -> Fraction:
        return Fraction(self.events_b - self.exits_b, self.events_b)

    @property
    def trapped(self) -> Fraction:
        return self.stay**self.window

    @property
    def bug(self) -> Fraction:
        return Fraction(1, self.events_b * self.events_c)


def analytic_trap_model(app: Optional[AppModel] = None, window: int = 8) -> TrapModel:
    app = app or motivating_example()
    rt = AppRuntime(app, "b")
    n_b = len(rt.get_state().action_space)
    exits = len(app.screens["b"].escapes)
    rt.reset("c")
    n_c = len(rt.get_state().action_space)
    return TrapModel(n_b, exits, n_c, window)


@dataclass(frozen=True)
class Estimate:
    hits: int
    trials: int

    @property
    def value(self) -> float:
        return self.hits / self.trials

    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.hits, self.trials)


def simulate_trap(trials: int, seed: int = 0, events: int = 8, app: Optional[AppModel] = None) -> Estimate:
    """Fraction of random walks that stay visually on page b for ``events`` steps.

    Each trial starts on b (entered from a) and draws ``events`` uniform
    random events; the walk counts as trapped when every one of the
    ``events + 1`` observed states is similar to its neighbours.
    """
    app = app or motivating_example()
    rng = random.Random(seed)
    rt = AppRuntime(app)
    window = DetectorConfig(k=events + 1)
    hits = 0
    for _ in range(trials):
        rt.reset("b", stack=("a",))
        states = [rt.get_state()]
        for _ in range(events):
            states.append(rt.execute(gen_random_event(states[-1], rng)).state)
        hits += has_tarpit(states, window)
    return Estimate(hits, trials)


def simulate_bug(trials: int, seed: int = 0, app: Optional[AppModel] = None) -> Estimate:
    """Fraction of two-event random walks from b (multi-select active) that crash."""
    app = app or motivating_example()
    rng = random.Random(seed)
    rt = AppRuntime(app)
    hits = 0
    for _ in range(trials):
        rt.reset("b", flags=(MULTI_SELECT,), stack=("a",))
        state = rt.get_state()
        for _ in range(2):
            result = rt.execute(gen_random_event(state, rng))
            if result.crashed is not None:
                hits += 1
                break
            state = result.state
        rt.crash_log.clear()
    return Estimate(hits, trials)


def oracle_factory(app: AppModel, epsilon: float = 0.0, seed: int = 0) -> Callable[[AppRuntime], OracleAdvisor]:
    """Advisor factory reading ground truth from the campaign's own runtime."""

    def make(rt: AppRuntime) -> OracleAdvisor:
        return OracleAdvisor(lambda: app.screens[rt.screen], epsilon, seed)

    return make


def first_crash_events(
    app: AppModel,
    mode: Mode | str,
    seeds: Iterable[int],
    budget: int = 5000,
    epsilon: float = 0.0,
) -> list[int]:
    """Events until the first crash per seed; a crash-free run counts as ``budget``."""
    out = []
    for seed in seeds:
        cfg = CampaignConfig(seed=seed, event_budget=budget, mode=Mode(mode), stop_on_first_crash=True)
        report = run_campaign(app, cfg, oracle_factory(app, epsilon, seed))
        idx = report.first_crash_index
        out.append(budget if idx is None else idx + 1)
    return out


def run_cell(
    app: AppModel, mode: Mode | str, seed: int, budget: int, epsilon: float, advisor_cost: int = 0
) -> CampaignReport:
    cfg = CampaignConfig(seed=seed, event_budget=budget, mode=Mode(mode), advisor_cost=advisor_cost)
    return run_campaign(app, cfg, oracle_factory(app, epsilon, seed))


def median(values: Sequence[float]) -> float:
    return float(statistics.median(values))


def iqr(values: Sequence[float]) -> tuple[float, float]:
    if len(values) < 2:
        v = float(values[0]) if values else float("nan")
        return v, v
    q = statistics.quantiles(values, n=4, method="inclusive")
    return q[0], q[2]


__all__ = [
    "Estimate",
    "TrapModel",
    "analytic_trap_model",
    "first_crash_events",
    "iqr",
    "median",
    "oracle_factory",
    "run_cell",
    "simulate_bug",
    "simulate_trap",
    "wilson_interval",
]
