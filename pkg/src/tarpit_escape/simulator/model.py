"""App model: screens, widgets, transitions and their effects."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Union

from ..ui import InteractionType, Rect, Widget

SCREEN_WIDTH = 180
SCREEN_HEIGHT = 320
RESTART_GROUP = 0
RESTART_SCREEN_ID = "__restart__"

EFFECT_KINDS = ("goto", "self_loop", "crash", "back_pop", "set_flag", "guarded_goto")

# (widget_id or None for the system back, interaction)
ActionRef = tuple[Optional[int], InteractionType]
TransitionKey = tuple[str, Optional[int], InteractionType]


class ScenarioError(ValueError):
    """Invalid scenario: parse failure, dangling reference or failed calibration."""


@dataclass(frozen=True)
class Effect:
    """What happens when an action fires.

    ``sets`` / ``clears`` are flag side effects applied after the main effect
    (a crash wipes all flags regardless).
    """

    kind: str
    target: Optional[str] = None
    signature: Optional[str] = None
    flag: Optional[str] = None
    then: Optional["Effect"] = None
    otherwise: Optional["Effect"] = None
    sets: tuple[str, ...] = ()
    clears: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in EFFECT_KINDS:
            raise ScenarioError(f"unknown effect kind {self.kind!r}")
        if self.kind == "goto" and not self.target:
            raise ScenarioError("goto effect needs a target screen")
        if self.kind == "crash" and not self.signature:
            raise ScenarioError("crash effect needs a non-empty signature")
        if self.kind in ("set_flag", "guarded_goto") and not self.flag:
            raise ScenarioError(f"{self.kind} effect needs a flag")
        if self.kind == "guarded_goto" and (self.then is None or self.otherwise is None):
            raise ScenarioError("guarded_goto needs both branches")

    @classmethod
    def goto(cls, target: str, **kw) -> "Effect":
        return cls("goto", target=target, **kw)

    @classmethod
    def crash(cls, signature: str) -> "Effect":
        return cls("crash", signature=signature)

    @classmethod
    def guarded(cls, flag: str, then: Union["Effect", str], otherwise: Union["Effect", str], **kw) -> "Effect":
        then = cls.goto(then) if isinstance(then, str) else then
        otherwise = cls.goto(otherwise) if isinstance(otherwise, str) else otherwise
        return cls("guarded_goto", flag=flag, then=then, otherwise=otherwise, **kw)

    def walk(self):
        yield self
        for branch in (self.then, self.otherwise):
            if branch is not None:
                yield from branch.walk()

    def to_json(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.target is not None:
            d["target"] = self.target
        if self.signature is not None:
            d["signature"] = self.signature
        if self.flag is not None:
            d["flag"] = self.flag
        if self.then is not None:
            d["then"] = self.then.to_json()
            d["else"] = self.otherwise.to_json()
        if self.sets:
            d["set"] = list(self.sets)
        if self.clears:
            d["clear"] = list(self.clears)
        return d

    @classmethod
    def from_json(cls, d: Union[dict, str]) -> "Effect":
        if isinstance(d, str):
            return cls.goto(d)
        return cls(
            d["kind"],
            target=d.get("target"),
            signature=d.get("signature"),
            flag=d.get("flag"),
            then=cls.from_json(d["then"]) if "then" in d else None,
            otherwise=cls.from_json(d["else"]) if "else" in d else None,
            sets=tuple(d.get("set", ())),
            clears=tuple(d.get("clear", ())),
        )


SELF_LOOP = Effect("self_loop")
BACK_POP = Effect("back_pop")


@dataclass(frozen=True)
class ScreenDef:
    screen_id: str
    widgets: tuple[Widget, ...]
    visual_group: int
    escapes: frozenset = frozenset()  # of ActionRef
    render_salt: int = 0
    tarpit: bool = False
    title: str = ""

    def widget(self, widget_id: int) -> Optional[Widget]:
        for w in self.widgets:
            if w.widget_id == widget_id:
                return w
        return None


@dataclass(frozen=True)
class CrashRecord:
    signature: str
    event_index: int
    screen_id: str

    def to_json(self) -> dict:
        return {"signature": self.signature, "event_index": self.event_index, "screen_id": self.screen_id}


@dataclass
class AppModel:
    screens: dict[str, ScreenDef]
    initial: str
    transitions: dict[TransitionKey, Effect] = field(default_factory=dict)
    flags: tuple[str, ...] = ()
    name: str = "app"

    def __post_init__(self) -> None:
        self.validate()

    def effect_for(self, screen_id: str, widget_id: Optional[int], kind: InteractionType) -> Effect:
        default = BACK_POP if kind is InteractionType.BACK else SELF_LOOP
        return self.transitions.get((screen_id, widget_id, kind), default)

    def validate(self) -> None:
        if not self.screens:
            raise ScenarioError("scenario declares no screens (no initial screen)")
        if self.initial not in self.screens:
            raise ScenarioError(f"initial screen {self.initial!r} is not declared")
        flags = set(self.flags)
        for sid, screen in self.screens.items():
            if sid != screen.screen_id:
                raise ScenarioError(f"screen key {sid!r} does not match id {screen.screen_id!r}")
            if sid == RESTART_SCREEN_ID:
                raise ScenarioError(f"screen id {sid!r} is reserved")
            if screen.visual_group <= RESTART_GROUP:
                raise ScenarioError(f"screen {sid!r}: visual group must be >= 1 (0 is reserved)")
            ids = [w.widget_id for w in screen.widgets]
            if len(ids) != len(set(ids)):
                raise ScenarioError(f"screen {sid!r}: duplicate widget ids")
            for w in screen.widgets:
                b = w.bounds
                if b.left < 0 or b.top < 0 or b.right > SCREEN_WIDTH or b.bottom > SCREEN_HEIGHT:
                    raise ScenarioError(f"screen {sid!r}: widget {w.widget_id} lies outside the screen")
            for ref in screen.escapes:
                self._check_ref(sid, ref[0], ref[1], "escape")
        for (sid, wid, kind), effect in self.transitions.items():
            if sid not in self.screens:
                raise ScenarioError(f"transition references unknown screen {sid!r}")
            self._check_ref(sid, wid, kind, "transition")
            for e in effect.walk():
                if e.kind == "goto" and e.target not in self.screens:
                    raise ScenarioError(
                        f"transition ({sid!r}, {wid}, {kind.value}) targets unknown screen {e.target!r}"
                    )
                for f in (e.flag, *e.sets, *e.clears):
                    if f is not None and f not in flags:
                        raise ScenarioError(
                            f"transition ({sid!r}, {wid}, {kind.value}) uses undeclared flag {f!r}"
                        )

    def _check_ref(self, sid: str, wid: Optional[int], kind: InteractionType, what: str) -> None:
        if wid is None:
            if kind is not InteractionType.BACK:
                raise ScenarioError(f"{what} on screen {sid!r}: only back may omit the widget")
            return
        w = self.screens[sid].widget(wid)
        if w is None:
            raise ScenarioError(f"{what} on screen {sid!r} references unknown widget {wid}")
        if kind not in w.interactions:
            raise ScenarioError(
                f"{what} on screen {sid!r}: widget {wid} does not support {kind.value}"
            )

    def escape_events(self, screen_id: str) -> frozenset:
        return self.screens[screen_id].escapes

    def fingerprint(self) -> str:
        from .scenario import dump_scenario

        return hashlib.sha256(json.dumps(dump_scenario(self), sort_keys=True).encode()).hexdigest()[:16]
