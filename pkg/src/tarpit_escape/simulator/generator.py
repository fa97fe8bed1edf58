"""Seeded benchmark apps with tunable tarpit density.

Screens form a navigation tree rooted at the initial screen. On every screen a
``tarpit_factor`` share of the action space is self-loops (list scrolling,
toggles, refreshes); the rest navigate: the first child link is the declared
escape, the remaining links go to other children, jump home or pop back.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..ui import INTERACTION_ORDER, InteractionType, Rect, Widget
from .model import SCREEN_WIDTH, AppModel, Effect, ScreenDef
from .render import CELL_H

MAX_SCREENS = 126  # visual groups 1..126; group 0 is the restart screen
TARPIT_SELF_LOOP_SHARE = 0.5
ROW_H = 20
COLS = 2
_LABELS = ("Item", "Row", "Entry", "Option", "Card", "Tile")


@dataclass(frozen=True)
class GeneratorParams:
    n_screens: int = 40
    tarpit_factor: float = 0.85
    seed: int = 0
    n_crashes: int = 2
    min_widgets: int = 10
    max_widgets: int = 22
    # a new screen hangs below one of the `fanout_window` most recent screens
    fanout_window: int = 3
    # extra navigating links jump home or pop back with these probabilities,
    # otherwise they open another child
    home_share: float = 0.3
    up_share: float = 0.2

    def __post_init__(self) -> None:
        if not 2 <= self.n_screens <= MAX_SCREENS:
            raise ValueError(f"n_screens must lie in 2..{MAX_SCREENS}, got {self.n_screens}")
        if not 0.0 <= self.tarpit_factor < 1.0:
            raise ValueError(f"tarpit_factor must lie in [0, 1), got {self.tarpit_factor}")
        if self.n_crashes < 0:
            raise ValueError("n_crashes must be >= 0")
        if not 1 <= self.min_widgets <= self.max_widgets <= 2 * ((320 - CELL_H) // ROW_H):
            raise ValueError("widget count range does not fit on the screen")
        if not (0.0 <= self.home_share and 0.0 <= self.up_share and self.home_share + self.up_share <= 1.0):
            raise ValueError("home_share and up_share must be non-negative and sum to at most 1")
        if not 1 <= self.fanout_window <= self.min_widgets:
            raise ValueError("fanout_window must lie in 1..min_widgets")


def _widgets(rng: random.Random, n: int) -> tuple[Widget, ...]:
    col_w = SCREEN_WIDTH // COLS
    label = rng.choice(_LABELS)
    out = []
    for i in range(n):
        row, col = divmod(i, COLS)
        top = CELL_H + row * ROW_H
        bounds = Rect(col * col_w, top, (col + 1) * col_w, top + ROW_H)
        kinds = [InteractionType.CLICK]
        roll = rng.random()
        if roll < 0.25:
            kinds.append(InteractionType.LONG_CLICK)
        elif roll < 0.35:
            kinds = [InteractionType.TEXT_INPUT]
        elif roll < 0.40:
            kinds.append(InteractionType.SWIPE)
        out.append(Widget(i, bounds, tuple(kinds), text=f"{label} {i}", resource_id=f"w{i}"))
    return tuple(out)


def generate_app(params: GeneratorParams | None = None, **kw) -> AppModel:
    """Build a random but fully deterministic app for ``params``."""
    p = params or GeneratorParams(**kw)
    rng = random.Random(f"generator:{p.seed}")
    ids = [f"s{i:03d}" for i in range(p.n_screens)]
    parent = [-1] + [rng.randrange(max(0, i - p.fanout_window), i) for i in range(1, p.n_screens)]
    children: list[list[int]] = [[] for _ in ids]
    for i in range(1, p.n_screens):
        children[parent[i]].append(i)

    screens: dict[str, ScreenDef] = {}
    transitions: dict = {}
    self_loops: dict[str, list] = {}
    for i, sid in enumerate(ids):
        widgets = _widgets(rng, rng.randint(p.min_widgets, p.max_widgets))
        refs = [(w.widget_id, k) for w in widgets for k in INTERACTION_ORDER if k in w.interactions]
        n_events = len(refs) + 1  # plus the system back
        n_nav = max(1, round((1.0 - p.tarpit_factor) * n_events))
        kids = children[i]
        # system back always pops; the other navigating events are widget links,
        # at least one per child so the whole tree stays reachable
        links = rng.sample(refs, min(max(n_nav - 1, len(kids)), len(refs)))
        links.sort(key=lambda r: (r[0], INTERACTION_ORDER[r[1]]))
        escapes: set = set()
        for j, ref in enumerate(links):
            if j < len(kids):
                target = ids[kids[j]]
                if j == 0:
                    escapes.add(ref)
            else:
                roll = rng.random()
                if roll < p.home_share:
                    target = ids[0]
                elif roll < p.home_share + p.up_share or not kids:
                    target = None
                else:
                    target = ids[rng.choice(kids)]
            transitions[(sid, ref[0], ref[1])] = Effect.goto(target) if target else Effect("back_pop")
        if not escapes:
            escapes.add((None, InteractionType.BACK))
        loops = [r for r in refs if (sid, r[0], r[1]) not in transitions]
        self_loops[sid] = loops
        share = len(loops) / n_events
        screens[sid] = ScreenDef(
            sid, widgets, visual_group=i + 1, escapes=frozenset(escapes), render_salt=rng.randrange(1 << 16),
            tarpit=share >= TARPIT_SELF_LOOP_SHARE, title=f"Screen {i}",
        )

    # crashes sit on deep screens, preferably on a self-loop so the rest of the graph is unchanged
    by_depth = sorted(range(1, p.n_screens), key=lambda i: (-_depth(parent, i), i))
    deep = by_depth[: max(p.n_crashes, len(by_depth) // 3)]
    for n, i in enumerate(sorted(rng.sample(deep, min(p.n_crashes, len(deep))))):
        sid = ids[i]
        pool = self_loops[sid] or [(wid, k) for (s, wid, k) in transitions if s == sid]
        wid, kind = rng.choice(pool)
        transitions[(sid, wid, kind)] = Effect.crash(f"GEN-{p.seed}-{n}")

    return AppModel(screens, ids[0], transitions, name=f"generated-{p.seed}")


def _depth(parent: list[int], i: int) -> int:
    d = 0
    while parent[i] >= 0:
        i = parent[i]
        d += 1
    return d


def generate_suite(n_apps: int, tarpit_factor: float, seed: int = 0, **kw) -> list[AppModel]:
    return [generate_app(GeneratorParams(tarpit_factor=tarpit_factor, seed=seed + i, **kw)) for i in range(n_apps)]
