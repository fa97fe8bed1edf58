"""Screens, widgets and executable events.

Widget filtering follows the occlusion rule used before prompting: a widget is
dropped when its centre falls inside the bounds of any other candidate.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .phash import Bitmap


class InteractionType(str, enum.Enum):
    CLICK = "click"
    LONG_CLICK = "long_click"
    SCROLL = "scroll"
    SWIPE = "swipe"
    TEXT_INPUT = "text_input"
    BACK = "back"

    def __str__(self) -> str:
        return self.value


# enumeration order inside one widget; BACK sorts last
INTERACTION_ORDER = {t: i for i, t in enumerate(InteractionType)}

# dictionary used by the random driver for text_input payloads
TEXT_PAYLOADS = ("test", "123", "a@b.c", "")


@dataclass(frozen=True)
class Rect:
    left: int
    top: int
    right: int
    bottom: int

    def __post_init__(self) -> None:
        if not (self.left < self.right and self.top < self.bottom):
            raise ValueError(f"degenerate rect {self.as_list()}")

    @property
    def center(self) -> tuple[int, int]:
        return ((self.left + self.right) // 2, (self.top + self.bottom) // 2)

    def contains(self, x: int, y: int) -> bool:
        # edges count as inside
        return self.left <= x <= self.right and self.top <= y <= self.bottom

    def as_list(self) -> list[int]:
        return [self.left, self.top, self.right, self.bottom]

    @classmethod
    def from_list(cls, values: Sequence[int]) -> "Rect":
        left, top, right, bottom = (int(v) for v in values)
        return cls(left, top, right, bottom)


@dataclass(frozen=True)
class Widget:
    widget_id: int
    bounds: Rect
    interactions: tuple[InteractionType, ...]
    text: Optional[str] = None
    resource_id: Optional[str] = None
    content_description: Optional[str] = None
    enabled: bool = True

    def __post_init__(self) -> None:
        kinds = tuple(sorted({InteractionType(t) for t in self.interactions}, key=INTERACTION_ORDER.get))
        if not kinds:
            raise ValueError(f"widget {self.widget_id} has no interactions")
        object.__setattr__(self, "interactions", kinds)

    def describe(self) -> str:
        parts = []
        if self.text:
            parts.append(f'text="{self.text}"')
        if self.resource_id:
            parts.append(f'resource-id="{self.resource_id}"')
        if self.content_description:
            parts.append(f'content-desc="{self.content_description}"')
        if not parts:
            parts.append(f"widget #{self.widget_id}")
        return ", ".join(parts)


@dataclass(frozen=True, eq=False)
class UiState:
    """One observed screen.

    ``true_screen_id`` is simulator ground truth for the harness; engine code
    never branches on it.
    """

    screenshot: Bitmap
    widgets: tuple[Widget, ...]
    true_screen_id: str = ""

    def __post_init__(self) -> None:
        ids = [w.widget_id for w in self.widgets]
        if len(ids) != len(set(ids)):
            raise ValueError(f"duplicate widget ids on screen {self.true_screen_id!r}")
        w, h = self.screenshot.width, self.screenshot.height
        for wid in self.widgets:
            b = wid.bounds
            if b.left < 0 or b.top < 0 or b.right > w or b.bottom > h:
                raise ValueError(
                    f"widget {wid.widget_id} bounds {b.as_list()} exceed the {w}x{h} screen"
                )

    @property
    def screen_rect(self) -> Rect:
        return Rect(0, 0, self.screenshot.width, self.screenshot.height)

    @functools.cached_property
    def action_space(self) -> "ActionSpace":
        return build_action_space(self)


@dataclass(frozen=True)
class UiEvent:
    action_id: int
    bounds: Rect
    type: InteractionType
    payload: Optional[str] = None

    def __post_init__(self) -> None:
        if self.action_id < 0:
            raise ValueError("action_id must be non-negative")
        object.__setattr__(self, "type", InteractionType(self.type))

    @property
    def key(self) -> tuple:
        """Identity used for de-duplication, independent of ``action_id``."""
        return (self.type, self.bounds, self.payload)

    def with_payload(self, payload: Optional[str]) -> "UiEvent":
        return UiEvent(self.action_id, self.bounds, self.type, payload)

    def to_dict(self) -> dict:
        return {
            "action_id": self.action_id,
            "type": self.type.value,
            "bounds": self.bounds.as_list(),
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UiEvent":
        return cls(
            int(d.get("action_id", 0)),
            Rect.from_list(d["bounds"]),
            InteractionType(d["type"]),
            d.get("payload"),
        )


@dataclass(frozen=True)
class ActionSpace:
    events: tuple[UiEvent, ...]
    # widget each event belongs to; None for the synthetic global back
    sources: tuple[Optional[Widget], ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.events)

    def __getitem__(self, action_id: int) -> UiEvent:
        return self.events[action_id]

    def __contains__(self, action_id: object) -> bool:
        return isinstance(action_id, int) and 0 <= action_id < len(self.events)

    @property
    def index(self) -> dict[int, UiEvent]:
        return {e.action_id: e for e in self.events}

    @property
    def widget_event_count(self) -> int:
        """Events contributed by widgets (the synthetic back excluded)."""
        return sum(1 for s in self.sources if s is not None)

    @property
    def back_id(self) -> int:
        for e in reversed(self.events):
            if e.type is InteractionType.BACK:
                return e.action_id
        raise LookupError("action space has no back event")  # unreachable by construction

    def find(self, event: UiEvent) -> Optional[UiEvent]:
        """Event in this space with the same type and bounds, if any."""
        for e in self.events:
            if e.type is event.type and e.bounds == event.bounds:
                return e
        return None

    def describe(self, action_id: int) -> str:
        event = self.events[action_id]
        src = self.sources[action_id]
        target = src.describe() if src is not None else "system navigation"
        return f"{event.type.value} on {target}"


def get_valid_widgets(state: UiState) -> list[Widget]:
    candidates = [w for w in state.widgets if w.enabled and w.interactions]
    kept = []
    for i, w in enumerate(candidates):
        cx, cy = w.bounds.center
        covered = False
        for j, other in enumerate(candidates):
            if i != j and other.bounds.contains(cx, cy):
                covered = True
                break
        if not covered:
            kept.append(w)
    return kept


def linearize(widgets: Iterable[Widget]) -> list[Widget]:
    return sorted(widgets, key=lambda w: (w.bounds.top, w.bounds.left, w.widget_id))


def build_action_space(state: UiState) -> ActionSpace:
    screen = state.screen_rect
    events: list[UiEvent] = []
    sources: list[Optional[Widget]] = []
    has_back = False
    for w in linearize(get_valid_widgets(state)):
        for kind in w.interactions:
            bounds = w.bounds
            if kind is InteractionType.BACK:
                bounds = screen
                has_back = True
            events.append(UiEvent(len(events), bounds, kind))
            sources.append(w)
    if not has_back:
        events.append(UiEvent(len(events), screen, InteractionType.BACK))
        sources.append(None)
    return ActionSpace(tuple(events), tuple(sources))
