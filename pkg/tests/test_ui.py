import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ref_valid_widgets
from tarpit_escape.phash import Bitmap
from tarpit_escape.simulator import AppRuntime, motivating_example
from tarpit_escape.ui import (
    TEXT_PAYLOADS,
    InteractionType as T,
    Rect,
    UiEvent,
    UiState,
    Widget,
    build_action_space,
    get_valid_widgets,
    linearize,
)

W, H = 180, 320
BLANK = Bitmap.from_array(np.zeros((H, W), dtype=np.uint8))


def state(*widgets: Widget) -> UiState:
    return UiState(BLANK, tuple(widgets))


def w(wid, left, top, right, bottom, kinds=(T.CLICK,), enabled=True, **kw) -> Widget:
    return Widget(wid, Rect(left, top, right, bottom), kinds, enabled=enabled, **kw)


def random_layout(rng: random.Random, n: int) -> list[Widget]:
    out = []
    for i in range(n):
        left = rng.randrange(0, W - 1)
        top = rng.randrange(0, H - 1)
        right = rng.randrange(left + 1, min(W, left + 90) + 1)
        bottom = rng.randrange(top + 1, min(H, top + 90) + 1)
        kinds = rng.sample(list(T), rng.randint(1, 3))
        out.append(w(i, left, top, right, bottom, kinds, enabled=rng.random() > 0.15))
    return out


def as_boxes(widgets):
    return [(x.widget_id, tuple(x.bounds.as_list()), x.enabled, len(x.interactions)) for x in widgets]


def test_disjoint_widgets_both_kept():
    a, b = w(0, 0, 0, 50, 50), w(1, 100, 100, 150, 150)
    assert get_valid_widgets(state(a, b)) == [a, b]


def test_nested_widget_removed():
    outer, inner = w(0, 0, 0, 100, 100), w(1, 10, 10, 30, 30)
    assert get_valid_widgets(state(outer, inner)) == [outer]


def test_identical_bounds_both_removed():
    assert get_valid_widgets(state(w(0, 10, 10, 40, 40), w(1, 10, 10, 40, 40))) == []


def test_center_on_shared_edge_counts_as_covered():
    # a's centre (20, 20) lies on b's left edge
    a, b = w(0, 0, 0, 40, 40), w(1, 20, 0, 60, 40)
    kept = get_valid_widgets(state(a, b))
    assert a not in kept


def test_disabled_widgets_ignored_entirely():
    outer = w(0, 0, 0, 100, 100, enabled=False)
    inner = w(1, 10, 10, 30, 30)
    assert get_valid_widgets(state(outer, inner)) == [inner]


def test_empty_input():
    assert get_valid_widgets(state()) == []


def test_occlusion_oracle_on_1000_layouts():
    rng = random.Random(99)
    mismatches = 0
    for _ in range(1000):
        layout = random_layout(rng, rng.randint(0, 20))
        got = [x.widget_id for x in get_valid_widgets(state(*layout))]
        mismatches += got != ref_valid_widgets(as_boxes(layout))
    assert mismatches == 0


@st.composite
def layouts(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(0, 20))
    return random_layout(random.Random(seed), n)


@settings(max_examples=200, deadline=None)
@given(layouts())
def test_filter_properties(layout):
    kept = get_valid_widgets(state(*layout))
    assert all(k in layout for k in kept)
    for a in kept:
        for b in kept:
            if a is not b:
                assert not b.bounds.contains(*a.bounds.center)
    # input order preserved
    positions = [layout.index(k) for k in kept]
    assert positions == sorted(positions)


def test_linearize_orders():
    a, b = w(0, 0, 10, 10, 20), w(1, 0, 5, 10, 8)
    assert linearize([a, b]) == [b, a]
    c, d = w(2, 30, 5, 40, 9), w(3, 20, 5, 25, 9)
    assert linearize([c, d]) == [d, c]
    e, f = w(5, 0, 0, 5, 5), w(4, 0, 0, 9, 9)
    assert linearize([e, f]) == [f, e]


@settings(max_examples=100, deadline=None)
@given(layouts())
def test_linearize_is_deterministic_total_order(layout):
    once = linearize(layout)
    assert once == linearize(list(reversed(layout)))
    keys = [(x.bounds.top, x.bounds.left, x.widget_id) for x in once]
    assert keys == sorted(keys)


def test_action_space_counts_for_motivating_pages():
    app = motivating_example()
    rt = AppRuntime(app)
    sizes = {}
    for sid in ("b", "c"):
        rt.reset(sid)
        space = rt.get_state().action_space
        sizes[sid] = (len(space), space.widget_event_count)
    # the bar widget exposes back, so no synthetic back is appended
    assert sizes == {"b": (70, 70), "c": (80, 80)}
    assert len(app.screens["b"].widgets) == 33
    assert len(app.screens["c"].widgets) == 38


def test_empty_space_has_only_back():
    space = build_action_space(state())
    assert len(space) == 1
    assert space[0].type is T.BACK
    assert space[0].bounds == Rect(0, 0, W, H)
    assert space.back_id == 0


def test_action_space_layout_and_back():
    a = w(0, 0, 100, 90, 120, (T.TEXT_INPUT, T.CLICK), text="Name")
    b = w(1, 0, 40, 90, 60, (T.LONG_CLICK,))
    space = build_action_space(state(a, b))
    assert [(e.action_id, e.type) for e in space.events] == [
        (0, T.LONG_CLICK), (1, T.CLICK), (2, T.TEXT_INPUT), (3, T.BACK)
    ]
    assert space.describe(2) == 'text_input on text="Name"'
    assert space.describe(3) == "back on system navigation"


@settings(max_examples=100, deadline=None)
@given(layouts())
def test_action_space_size_formula(layout):
    st_ = state(*layout)
    valid = get_valid_widgets(st_)
    space = build_action_space(st_)
    widget_events = sum(len(x.interactions) for x in valid)
    has_back = any(T.BACK in x.interactions for x in valid)
    assert len(space) == widget_events + (0 if has_back else 1)
    assert [e.action_id for e in space.events] == list(range(len(space)))
    for e in space.events:
        if e.type is T.BACK:
            assert e.bounds == st_.screen_rect


def test_event_dict_round_trip():
    e = UiEvent(3, Rect(1, 2, 3, 4), T.TEXT_INPUT, "a@b.c")
    assert UiEvent.from_dict(e.to_dict()) == e
    assert e.key == (T.TEXT_INPUT, Rect(1, 2, 3, 4), "a@b.c")


def test_text_payload_dictionary():
    assert TEXT_PAYLOADS == ("test", "123", "a@b.c", "")


@pytest.mark.parametrize("bounds", [(0, 0, 0, 5), (5, 5, 4, 9)])
def test_degenerate_rect(bounds):
    with pytest.raises(ValueError):
        Rect(*bounds)


def test_widget_outside_screen_rejected():
    with pytest.raises(ValueError):
        state(w(0, 0, 0, W + 1, 10))


def test_widget_needs_interactions():
    with pytest.raises(ValueError):
        Widget(0, Rect(0, 0, 5, 5), ())
