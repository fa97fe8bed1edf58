"""Deterministic screenshot synthesis.

Every visual group owns a 64-bit target pattern. The background is a 9x8 grid
of flat tones aligned with the hash grid and arranged so each horizontal
neighbour pair differs by ``STEP`` in the direction the pattern asks for.
Widgets and the status strip perturb cell averages by far less than that, so
all screens in a group hash to the same value except for one bit that the
clock in the status strip toggles.

Patterns for groups < 128 are first-order Reed-Muller codewords (pairwise
distance >= 32), scrambled by a fixed mask.
"""

from __future__ import annotations

import hashlib
import random

import numpy as np

from ..phash import GRID_COLS, GRID_ROWS, Bitmap
from .model import RESTART_GROUP, SCREEN_HEIGHT, SCREEN_WIDTH, ScreenDef

CELL_W = SCREEN_WIDTH // GRID_COLS  # 20
CELL_H = SCREEN_HEIGHT // GRID_ROWS  # 40
STEP = 28
LOW_TONE = 16
STRIP_HEIGHT = 16
STRIP_TONE = 40
GLYPH_DELTA = 50
WIDGET_MAX_OFFSET = 5

# hash bit driven by the clock: cell (0, 7) vs (0, 8)
CLOCK_ROW, CLOCK_COL = 0, 7
CLOCK_BIT = CLOCK_ROW * 8 + CLOCK_COL
SCRAMBLE = 0x9E3779B97F4A7C15

# seven-segment layout inside a 16x14 box; each segment is exactly 16 pixels,
# so one lit segment raises the clock cell average by exactly one grey level
_SEGMENTS = {
    "a": (4, 0, 12, 2),
    "b": (12, 2, 16, 6),
    "c": (12, 8, 16, 12),
    "d": (4, 12, 12, 14),
    "e": (0, 8, 4, 12),
    "f": (0, 2, 4, 6),
    "g": (4, 6, 12, 8),
}
_DIGITS = {
    0: "abcdef", 1: "bc", 2: "abdeg", 3: "abcdg", 4: "bcfg",
    5: "acdfg", 6: "acdefg", 7: "abc", 8: "abcdefg", 9: "abcdfg",
}
_CLOCK_ORIGIN = (CLOCK_COL * CELL_W + 2, 1)
# battery: 32 pixels -> two grey levels in cell (0, 8); the clock bit is set
# exactly when the shown digit lights more than two segments
_BATTERY = ((CLOCK_COL + 1) * CELL_W + 6, 6, (CLOCK_COL + 1) * CELL_W + 14, 10)

CLOCK_PERIOD = 10


def group_pattern(group: int) -> int:
    if group < 0:
        raise ValueError("visual group must be non-negative")
    if group < 128:
        a, b = group & 63, group >> 6
        bits = 0
        for x in range(64):
            if ((a & x).bit_count() + b) & 1:
                bits |= 1 << x
        bits ^= SCRAMBLE
    else:
        bits = random.Random(f"visual-group-{group}").getrandbits(64)
    return bits & ~(1 << CLOCK_BIT)


def _tone_grid(group: int) -> np.ndarray:
    bits = group_pattern(group)
    grid = np.zeros((GRID_ROWS, GRID_COLS), dtype=np.int64)
    for i in range(GRID_ROWS):
        row = [0]
        for j in range(GRID_COLS - 1):
            if (i, j) == (CLOCK_ROW, CLOCK_COL):
                row.append(row[-1])
            elif (bits >> (i * 8 + j)) & 1:
                row.append(row[-1] - STEP)
            else:
                row.append(row[-1] + STEP)
        lo = min(row)
        grid[i] = [LOW_TONE + t - lo for t in row]
    return grid


def _background(group: int) -> np.ndarray:
    return np.repeat(np.repeat(_tone_grid(group), CELL_H, axis=0), CELL_W, axis=1)


def _widget_offset(screen: ScreenDef, widget) -> int:
    key = f"{widget.widget_id}|{widget.text}|{widget.resource_id}|{widget.content_description}|{screen.render_salt}"
    h = hashlib.sha256(key.encode()).digest()[0]
    mag = 1 + h % WIDGET_MAX_OFFSET
    return mag if h & 0x80 else -mag


def _draw_status_strip(arr: np.ndarray, frame: int) -> None:
    arr[:STRIP_HEIGHT, :] = STRIP_TONE
    ox, oy = _CLOCK_ORIGIN
    for seg in _DIGITS[frame % CLOCK_PERIOD]:
        x0, y0, x1, y1 = _SEGMENTS[seg]
        arr[oy + y0 : oy + y1, ox + x0 : ox + x1] = STRIP_TONE + GLYPH_DELTA
    x0, y0, x1, y1 = _BATTERY
    arr[y0:y1, x0:x1] = STRIP_TONE + GLYPH_DELTA


def render_array(screen: ScreenDef | None, frame: int, group: int | None = None) -> np.ndarray:
    """Pixels for ``screen`` at clock ``frame``; ``screen=None`` draws a bare group background."""
    grp = screen.visual_group if screen is not None else (RESTART_GROUP if group is None else group)
    bg = _background(grp)
    arr = bg.copy()
    if screen is not None:
        for w in screen.widgets:
            b = w.bounds
            # the top grid row (status strip and app bar) is never painted by widgets
            top = max(b.top, CELL_H)
            if top >= b.bottom:
                continue
            off = _widget_offset(screen, w)
            region = (slice(top, b.bottom), slice(b.left, b.right))
            arr[region] = bg[region] + off
            if b.right - b.left > 2 and b.bottom - top > 2:
                inner = (slice(top + 1, b.bottom - 1), slice(b.left + 1, b.right - 1))
                arr[region] = bg[region] - off
                arr[inner] = bg[inner] + off
    _draw_status_strip(arr, frame)
    return arr


def render(screen: ScreenDef | None, frame: int, group: int | None = None) -> Bitmap:
    return Bitmap.from_array(render_array(screen, frame, group))


def render_restart(frame: int) -> Bitmap:
    return render(None, frame, RESTART_GROUP)
