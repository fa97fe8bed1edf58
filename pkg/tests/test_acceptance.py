"""End-to-end acceptance checks.

Each test prints one PASS/FAIL line (visible with ``pytest -v``, even under
output capture) and then asserts the same condition.
"""

import json
import random
import time

import numpy as np
import pytest

from helpers import page_state
from oracles import ref_dhash, ref_valid_widgets
from tarpit_escape.advisors import AdvisorTimeout, declared_escape_ids
from tarpit_escape.cli import main
from tarpit_escape.detector import has_tarpit
from tarpit_escape.driver import CampaignConfig, Mode, compute_metrics, replay_states, run_campaign
from tarpit_escape.experiments import (
    analytic_trap_model,
    first_crash_events,
    median,
    oracle_factory,
    run_cell,
    simulate_bug,
    simulate_trap,
)
from tarpit_escape.memory import MemoryConfig, Reuse, TarpitMemory
from tarpit_escape.phash import Bitmap, dhash, similarity
from tarpit_escape.simulator import AppRuntime, motivating_example
from tarpit_escape.simulator.generator import generate_suite
from tarpit_escape.ui import Rect, UiEvent, UiState, Widget, get_valid_widgets
from tarpit_escape.ui import InteractionType as T

# generated-suite ablation settings
ABLATION_APPS = 10
ABLATION_SEEDS = 10
ABLATION_BUDGET = 5000
ABLATION_SCREENS = 80
ABLATION_FANOUT = 2
ABLATION_EPSILON = 0.1
ABLATION_ADVISOR_COST = 5


@pytest.fixture
def verdict(capsys):
    def emit(number: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[acceptance {number:>2}] {'PASS' if ok else 'FAIL'} {title}: {detail}")

    return emit


def test_01_trap_probability(verdict):
    start = time.monotonic()
    model = analytic_trap_model()
    est = simulate_trap(10_000, seed=0)
    elapsed = time.monotonic() - start
    target = float(model.trapped)
    ok = abs(est.value - target) <= 0.02 and elapsed < 30
    verdict(1, "trap probability", ok,
            f"Monte Carlo {est.value:.4f} vs analytic {target:.4f} (tolerance 0.02), {elapsed:.1f}s")
    assert round(target, 4) == 0.7930
    assert ok


def test_02_action_spaces(verdict):
    app = motivating_example()
    rt = AppRuntime(app)
    sizes = {}
    for page in ("b", "c"):
        rt.reset(page)
        sizes[page] = len(rt.get_state().action_space)
    ok = sizes == {"b": 70, "c": 80}
    verdict(2, "action spaces", ok, f"page b {sizes['b']} events, page c {sizes['c']} events")
    assert ok


def test_03_bug_probability(verdict):
    start = time.monotonic()
    model = analytic_trap_model()
    est = simulate_bug(1_000_000, seed=0)
    lo, hi = est.ci()
    elapsed = time.monotonic() - start
    p_b = float(model.bug)
    ok = f"{p_b:.4g}" == "0.0001786" and lo <= p_b <= hi and elapsed < 120
    verdict(3, "bug probability", ok,
            f"analytic {p_b:.3e}, Monte Carlo {est.value:.3e} (95% CI {lo:.3e}..{hi:.3e}), {elapsed:.1f}s")
    assert ok


def test_04_escape_efficacy(verdict):
    start = time.monotonic()
    app = motivating_example()
    seeds = range(500)
    hybrid = first_crash_events(app, Mode.HYBRID, seeds, budget=5000, epsilon=0.0)
    random_only = first_crash_events(app, Mode.RANDOM_ONLY, seeds, budget=5000)
    elapsed = time.monotonic() - start
    mh, mr = median(hybrid), median(random_only)
    ok = mh <= 0.10 * mr and elapsed < 300
    verdict(4, "escape efficacy", ok,
            f"median events to first crash: hybrid {mh:g}, random_only {mr:g} "
            f"(ratio {mh / mr:.3f}, limit 0.10), {elapsed:.1f}s")
    assert ok


def test_05_detector_suite(verdict):
    b = [page_state("b", f) for f in range(8)]
    c = page_state("c")
    cases = 0
    failures = 0
    for n in range(8):
        cases += 1
        failures += has_tarpit(b[:n])
    for n in range(1, 9):
        cases += 1
        failures += has_tarpit(b[:n]) != (n == 8)
    for pos in range(8):
        window = list(b)
        window[pos] = c
        cases += 1
        failures += has_tarpit(window)
    ok = failures == 0
    verdict(5, "detector suite", ok, f"{cases - failures}/{cases} cases pass")
    assert ok


def test_06_hash_oracle(verdict):
    rng = random.Random(6)
    images = []
    mismatches = 0
    for _ in range(1000):
        w, h = rng.randint(9, 24), rng.randint(8, 20)
        rows = [[rng.randrange(256) for _ in range(w)] for _ in range(h)]
        bmp = Bitmap.from_array(np.array(rows, dtype=np.uint8))
        mismatches += dhash(bmp).bits != ref_dhash(rows)
        images.append(bmp)
    law_breaks = 0
    for i in range(0, 1000, 10):
        a, b = images[i], images[(i * 7 + 3) % 1000]
        law_breaks += similarity(a, a) != 1.0
        law_breaks += similarity(a, b) != similarity(b, a)
    ok = mismatches == 0 and law_breaks == 0
    verdict(6, "hash oracle", ok, f"{mismatches} mismatches on 1000 bitmaps, {law_breaks} reflexivity/symmetry breaks")
    assert ok


def test_07_occlusion_oracle(verdict):
    rng = random.Random(7)
    blank = Bitmap.from_array(np.zeros((320, 180), dtype=np.uint8))
    mismatches = 0
    for _ in range(1000):
        widgets = []
        for i in range(rng.randint(0, 20)):
            left, top = rng.randrange(179), rng.randrange(319)
            right = rng.randrange(left + 1, min(180, left + 90) + 1)
            bottom = rng.randrange(top + 1, min(320, top + 90) + 1)
            kinds = tuple(rng.sample(list(T), rng.randint(1, 3)))
            widgets.append(Widget(i, Rect(left, top, right, bottom), kinds, enabled=rng.random() > 0.15))
        got = [w.widget_id for w in get_valid_widgets(UiState(blank, tuple(widgets)))]
        boxes = [(w.widget_id, tuple(w.bounds.as_list()), w.enabled, len(w.interactions)) for w in widgets]
        mismatches += got != ref_valid_widgets(boxes)
    ok = mismatches == 0
    verdict(7, "occlusion oracle", ok, f"{mismatches} mismatches on 1000 layouts")
    assert ok


def test_08_reuse_statistics(verdict):
    state = page_state("b")
    e1 = UiEvent(0, Rect(0, 40, 90, 56), T.CLICK)
    e2 = UiEvent(69, Rect(0, 0, 180, 320), T.BACK)
    mem = TarpitMemory()
    mem.record_escape(state, e1)
    mem.record_escape(state, e2)
    rng = random.Random(8)
    cfg = MemoryConfig()
    draws = [mem.dispatch(state, rng.random(), rng, cfg) for _ in range(10_000)]
    reuses = [d for d in draws if isinstance(d, Reuse)]
    frac = len(reuses) / len(draws)
    share = sum(d.event == e1 for d in reuses) / len(reuses)
    ok = abs(frac - 0.8) <= 0.03 and abs(share - 0.5) <= 0.03
    verdict(8, "reuse statistics", ok, f"reuse fraction {frac:.4f} (0.80 +- 0.03), first-action share {share:.4f} (0.50 +- 0.03)")
    assert ok


class Adversary:
    """Never names a declared escape: invalid text, out-of-range ids, timeouts or other actions."""

    name = "adversary"

    def __init__(self, runtime, seed):
        self.runtime = runtime
        self.rng = random.Random(seed)

    def suggest(self, prompt):
        roll = self.rng.random()
        if roll < 0.2:
            return "I am not sure."
        if roll < 0.4:
            return f"Action ID: {len(prompt.space) + self.rng.randrange(50)}"
        if roll < 0.5:
            raise AdvisorTimeout("simulated timeout")
        screen = self.runtime.model.screens[self.runtime.screen]
        bad = set(declared_escape_ids(prompt.space, screen)) | {prompt.space.back_id}
        return f"Action ID: {self.rng.choice([i for i in range(len(prompt.space)) if i not in bad])}"


def test_09_retry_contract(verdict):
    app = motivating_example()
    episodes = violations = exhausted = 0
    seed = 0
    while episodes < 1000:
        report = run_campaign(app, CampaignConfig(seed=seed, event_budget=3000), lambda rt, s=seed: Adversary(rt, s))
        for ep in report.episodes:
            episodes += 1
            entries = report.trace[ep.start:ep.end]
            if ep.attempts > 10:
                violations += 1
            if ep.outcome == "exhausted":
                exhausted += 1
                # every attempt used, then exactly one trailing back
                backs = [t for t in entries if t.event.type is T.BACK]
                if ep.attempts != 10 or len(backs) != 1 or entries[-1].event.type is not T.BACK:
                    violations += 1
                if len(entries) > 11:
                    violations += 1
        seed += 1
    ok = violations == 0 and exhausted > 0
    verdict(9, "retry contract", ok,
            f"{violations} violations over {episodes} episodes ({exhausted} exhausted, {seed} campaigns)")
    assert ok


def test_10_ablation_ordering(verdict):
    start = time.monotonic()
    apps = generate_suite(ABLATION_APPS, 0.85, seed=0, n_screens=ABLATION_SCREENS, fanout_window=ABLATION_FANOUT)
    coverage = {}
    for mode in (Mode.HYBRID, Mode.NO_REUSE, Mode.NO_LLM):
        coverage[mode] = [
            compute_metrics(
                run_cell(app, mode, seed, ABLATION_BUDGET, ABLATION_EPSILON, ABLATION_ADVISOR_COST), app
            ).unique_screens
            for app in apps
            for seed in range(ABLATION_SEEDS)
        ]
    elapsed = time.monotonic() - start
    h, r, n = (median(coverage[m]) for m in (Mode.HYBRID, Mode.NO_REUSE, Mode.NO_LLM))
    ok = h > r > n and h >= 1.2 * n and elapsed < 600
    verdict(10, "ablation ordering", ok,
            f"median unique screens hybrid {h:g} > no_reuse {r:g} > no_llm {n:g}; "
            f"hybrid/no_llm {h / n:.3f} (>= 1.2), {elapsed:.1f}s")
    assert ok


def test_11_reproducibility(verdict, tmp_path):
    argv = ["run", "--scenario", "motivating", "--mode", "hybrid", "--advisor", "oracle",
            "--seed", "7", "--budget", "5000"]
    texts = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main(argv + ["--out-dir", str(out)]) == 0
        texts.append((out / "report.json").read_text())

    def strip(text):
        d = json.loads(text)
        d.pop("generated_at")
        return json.dumps(d, sort_keys=True, indent=1)

    raw_diff = [a != b for a, b in zip(texts[0].splitlines(), texts[1].splitlines())]
    ok = strip(texts[0]) == strip(texts[1])
    verdict(11, "reproducibility", ok,
            f"report.json identical apart from the timestamp ({sum(raw_diff)} differing raw lines)")
    assert ok


def test_12_memory_fidelity(verdict):
    app = motivating_example()
    cfg = CampaignConfig(seed=12, event_budget=5000)
    report = run_campaign(app, cfg, oracle_factory(app, 0.0, 12))
    pairs = replay_states(app, cfg, report)
    checked = violations = 0
    for ep in report.episodes:
        if not ep.escaped:
            continue
        checked += 1
        last = report.trace[ep.end - 1]
        pre, _ = pairs[last.index]
        # records are only ever added to, so the final memory covers every earlier escape
        rec = report.memory.lookup(pre, MemoryConfig(theta_mem=0.99))
        if rec is None or last.event.key not in {a.key for a in rec.actions}:
            violations += 1
    ok = checked > 0 and violations == 0
    verdict(12, "memory fidelity", ok, f"{violations} violations over {checked} escaped episodes")
    assert ok
