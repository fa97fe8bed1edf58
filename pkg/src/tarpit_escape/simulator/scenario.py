"""Scenario files: JSON load/dump and render calibration."""

from __future__ import annotations

import functools
import itertools
import json
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema

from ..ui import InteractionType, Rect, Widget
from .model import RESTART_GROUP, AppModel, Effect, ScenarioError, ScreenDef
from .render import render, render_restart

SAME_GROUP_MIN = 0.97
CROSS_GROUP_MAX = 0.80


@functools.lru_cache(maxsize=1)
def scenario_schema() -> dict:
    text = resources.files("tarpit_escape").joinpath("data/scenario.schema.json").read_text()
    return json.loads(text)


def _widget_from_json(d: dict) -> Widget:
    try:
        bounds = Rect.from_list(d["bounds"])
    except ValueError as exc:
        raise ScenarioError(f"widget {d['id']}: {exc}") from None
    return Widget(
        widget_id=d["id"],
        bounds=bounds,
        interactions=tuple(InteractionType(i) for i in d["interactions"]),
        text=d.get("text"),
        resource_id=d.get("resource_id"),
        content_description=d.get("content_description"),
        enabled=d.get("enabled", True),
    )


def parse_scenario(data: dict, check_render: bool = True) -> AppModel:
    try:
        jsonschema.validate(data, scenario_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"schema violation at {where}: {exc.message}") from None

    screens: dict[str, ScreenDef] = {}
    for s in data["screens"]:
        if s["id"] in screens:
            raise ScenarioError(f"duplicate screen id {s['id']!r}")
        screens[s["id"]] = ScreenDef(
            screen_id=s["id"],
            widgets=tuple(_widget_from_json(w) for w in s["widgets"]),
            visual_group=s["visual_group"],
            escapes=frozenset((ref[0], InteractionType(ref[1])) for ref in s.get("escapes", ())),
            render_salt=s.get("render_salt", 0),
            tarpit=s.get("tarpit", False),
            title=s.get("title", ""),
        )
    transitions = {}
    for t in data.get("transitions", ()):
        key = (t["screen"], t.get("widget"), InteractionType(t["interaction"]))
        if key in transitions:
            raise ScenarioError(f"duplicate transition for {key[0]!r}/{key[1]}/{key[2].value}")
        transitions[key] = Effect.from_json(t["effect"])
    model = AppModel(
        screens=screens,
        initial=data["initial"],
        transitions=transitions,
        flags=tuple(data.get("flags", ())),
        name=data.get("name", "app"),
    )
    if check_render:
        check_calibration(model)
    return model


def load_scenario(path: str | Path, check_render: bool = True) -> AppModel:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return parse_scenario(data, check_render)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def _widget_to_json(w: Widget) -> dict:
    d: dict = {"id": w.widget_id, "bounds": w.bounds.as_list()}
    for name in ("text", "resource_id", "content_description"):
        value = getattr(w, name)
        if value is not None:
            d[name] = value
    if not w.enabled:
        d["enabled"] = False
    d["interactions"] = [i.value for i in w.interactions]
    return d


def _ref_sort_key(ref) -> tuple:
    wid, kind = ref
    return (-1 if wid is None else wid, kind.value)


def dump_scenario(model: AppModel) -> dict:
    screens = []
    for s in model.screens.values():
        d: dict = {"id": s.screen_id}
        if s.title:
            d["title"] = s.title
        d["visual_group"] = s.visual_group
        if s.render_salt:
            d["render_salt"] = s.render_salt
        d["tarpit"] = s.tarpit
        d["widgets"] = [_widget_to_json(w) for w in s.widgets]
        d["escapes"] = [[wid, kind.value] for wid, kind in sorted(s.escapes, key=_ref_sort_key)]
        screens.append(d)
    transitions = [
        {"screen": sid, "widget": wid, "interaction": kind.value, "effect": eff.to_json()}
        for (sid, wid, kind), eff in model.transitions.items()
    ]
    return {
        "name": model.name,
        "initial": model.initial,
        "flags": list(model.flags),
        "screens": screens,
        "transitions": transitions,
    }


def save_scenario(model: AppModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dump_scenario(model), indent=1) + "\n")


def check_calibration(
    model: AppModel,
    same_min: float = SAME_GROUP_MIN,
    cross_max: float = CROSS_GROUP_MAX,
    frames: tuple[int, ...] = (0, 1),
) -> None:
    """Raise ScenarioError unless every screen pair renders as its groups demand.

    Frames 0 and 1 cover both states of the clock bit.
    """
    entries: list[tuple[str, int, int]] = []
    for f in frames:
        entries.append(("<restart>", RESTART_GROUP, render_restart(f).phash.bits))
        for s in model.screens.values():
            entries.append((s.screen_id, s.visual_group, render(s, f).phash.bits))
    # identical (group, hash) entries need only be checked once
    unique: dict[tuple[int, int], str] = {}
    for sid, grp, h in entries:
        unique.setdefault((grp, h), sid)
    for ((g1, h1), s1), ((g2, h2), s2) in itertools.combinations(unique.items(), 2):
        sim = hash_similarity_bits(h1, h2)
        if g1 == g2 and sim < same_min:
            raise ScenarioError(
                f"render calibration: screens {s1!r} and {s2!r} share visual group {g1} "
                f"but similarity is {sim:.4f} < {same_min}"
            )
        if g1 != g2 and sim > cross_max:
            raise ScenarioError(
                f"render calibration: screens {s1!r} (group {g1}) and {s2!r} (group {g2}) "
                f"are too similar: {sim:.4f} > {cross_max}"
            )


def hash_similarity_bits(a: int, b: int) -> float:
    return 1.0 - (a ^ b).bit_count() / 64


def builtin_scenario(name: str) -> Optional[AppModel]:
    if name in ("motivating", "motivating.json"):
        from .motivating import motivating_example

        return motivating_example()
    return None
