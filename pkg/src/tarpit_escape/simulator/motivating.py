"""Podcast-manager app reproducing the subscribe-then-back crash.

Pages:
  a  podcast list; long-clicking an entry enters multi-select mode
  b  podcast preview: 32 two-action widgets + 1 six-action bar = 70 events;
     only Subscribe and the bar's Back leave the page
  c  podcast detail: 37 two-action widgets + 1 six-action bar = 80 events;
     Back crashes if the podcast was subscribed from multi-select mode
  d  episode page

Back on b cancels multi-select. Opening an episode from c drops the armed
crash precondition.
"""

from __future__ import annotations

from ..ui import InteractionType as T
from ..ui import Rect, Widget
from .model import BACK_POP, AppModel, Effect, ScreenDef

CRASH_SIGNATURE = "NPE-like-7609"
MULTI_SELECT = "multi_select"
ARMED = "subscribed_in_multi_select"

TWO = (T.CLICK, T.LONG_CLICK)
ALL_SIX = tuple(T)

SUBSCRIBE_WIDGET = 0
B_BAR_WIDGET = 32
C_BAR_WIDGET = 37
A_PREVIEW_WIDGET = 11
# c widgets whose click / long-click open the episode page
C_EPISODE_LINKS = (1, 2, 3)


def _grid(n: int, cols: int, top: int, row_h: int, width: int = 180) -> list[Rect]:
    col_w = width // cols
    return [
        Rect((i % cols) * col_w, top + (i // cols) * row_h, (i % cols + 1) * col_w, top + (i // cols + 1) * row_h)
        for i in range(n)
    ]


def _page_a() -> ScreenDef:
    widgets = [Widget(0, Rect(0, 40, 180, 60), (T.CLICK,), text="Podcasts", resource_id="toolbar_title")]
    for i, r in enumerate(_grid(10, 1, 60, 20), start=1):
        widgets.append(Widget(i, r, TWO, text=f"Podcast {i}", resource_id="feed_item"))
    widgets.append(
        Widget(A_PREVIEW_WIDGET, Rect(0, 270, 90, 300), (T.CLICK,), text="Preview", resource_id="btn_preview")
    )
    widgets.append(
        Widget(12, Rect(90, 270, 180, 300), (T.TEXT_INPUT,), resource_id="search_src_text",
               content_description="Search podcasts")
    )
    return ScreenDef("a", tuple(widgets), visual_group=1, escapes=frozenset({(A_PREVIEW_WIDGET, T.CLICK)}),
                     tarpit=True, title="Podcast list")


def _page_b() -> ScreenDef:
    rects = _grid(32, 2, 40, 16)
    widgets = [Widget(SUBSCRIBE_WIDGET, rects[0], TWO, text="Subscribe", resource_id="butSubscribe")]
    widgets.append(Widget(1, rects[1], TWO, text="Podcast title", resource_id="txtvTitle"))
    for i in range(2, 32):
        widgets.append(Widget(i, rects[i], TWO, text=f"Episode {i - 1}", resource_id="feed_item"))
    widgets.append(
        Widget(B_BAR_WIDGET, Rect(0, 296, 180, 320), ALL_SIX, resource_id="toolbar",
               content_description="Navigate up")
    )
    return ScreenDef("b", tuple(widgets), visual_group=2,
                     escapes=frozenset({(SUBSCRIBE_WIDGET, T.CLICK), (B_BAR_WIDGET, T.BACK)}),
                     tarpit=True, title="Podcast preview")


def _page_c() -> ScreenDef:
    rects = _grid(37, 2, 40, 13)
    widgets = [Widget(0, rects[0], TWO, text="Podcast settings", resource_id="butSettings")]
    for i in range(1, 37):
        widgets.append(Widget(i, rects[i], TWO, text=f"Episode {i}", resource_id="feed_item"))
    widgets.append(
        Widget(C_BAR_WIDGET, Rect(0, 296, 180, 320), ALL_SIX, resource_id="toolbar",
               content_description="Navigate up")
    )
    return ScreenDef("c", tuple(widgets), visual_group=3, escapes=frozenset({(C_BAR_WIDGET, T.BACK)}),
                     tarpit=True, title="Podcast detail")


def _page_d() -> ScreenDef:
    rects = _grid(12, 2, 60, 30)
    widgets = [Widget(0, Rect(0, 40, 180, 60), (T.CLICK,), text="Episode", resource_id="txtvEpisodeTitle")]
    for i, r in enumerate(rects, start=1):
        widgets.append(Widget(i, r, TWO, text=f"Chapter {i}", resource_id="chapter_item"))
    return ScreenDef("d", tuple(widgets), visual_group=4, escapes=frozenset({(None, T.BACK)}),
                     tarpit=True, title="Episode")


def motivating_example() -> AppModel:
    screens = {s.screen_id: s for s in (_page_a(), _page_b(), _page_c(), _page_d())}
    transitions = {
        ("a", A_PREVIEW_WIDGET, T.CLICK): Effect.goto("b"),
        ("a", None, T.BACK): Effect("back_pop", clears=(MULTI_SELECT,)),
        ("b", SUBSCRIBE_WIDGET, T.CLICK): Effect.guarded(
            MULTI_SELECT, Effect.goto("c", sets=(ARMED,)), Effect.goto("c")
        ),
        ("b", B_BAR_WIDGET, T.BACK): Effect("back_pop", clears=(MULTI_SELECT,)),
        ("c", C_BAR_WIDGET, T.BACK): Effect.guarded(ARMED, Effect.crash(CRASH_SIGNATURE), BACK_POP),
        ("d", None, T.BACK): BACK_POP,
    }
    for i in range(1, 11):
        transitions[("a", i, T.LONG_CLICK)] = Effect("set_flag", flag=MULTI_SELECT)
    for i in C_EPISODE_LINKS:
        for kind in TWO:
            transitions[("c", i, kind)] = Effect.goto("d", clears=(ARMED,))
    return AppModel(screens, "a", transitions, flags=(MULTI_SELECT, ARMED), name="motivating")
