import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import checkerboard, ref_dhash, ref_similarity
from tarpit_escape.phash import (
    Bitmap,
    BitmapError,
    PHash,
    ThresholdError,
    dhash,
    downsample,
    hamming,
    is_ui_similar,
    read_pgm,
    similarity,
    write_pgm,
)

# computed once with the Fraction-based reference hasher in tests/oracles.py
CHECKERBOARD_18x16_SQ2 = 0x55AA55AA55AA55AA
CHECKERBOARD_18x16_SQ3 = 0x0024DB0024DB0024


def bitmap(rows) -> Bitmap:
    return Bitmap.from_array(np.array(rows, dtype=np.uint8))


@st.composite
def pixel_rows(draw, max_w=40, max_h=40):
    w = draw(st.integers(9, max_w))
    h = draw(st.integers(8, max_h))
    flat = draw(st.lists(st.integers(0, 255), min_size=w * h, max_size=w * h))
    return [flat[r * w : (r + 1) * w] for r in range(h)]


def test_uniform_image_hashes_to_zero():
    assert dhash(bitmap([[128] * 18] * 16)).bits == 0


def test_monotone_rows():
    inc = [[10 * x for x in range(9)] for _ in range(8)]
    assert dhash(bitmap(inc)).bits == 0
    dec = [[200 - 10 * x for x in range(9)] for _ in range(8)]
    assert dhash(bitmap(dec)).bits == (1 << 64) - 1


def test_checkerboard_golden():
    assert ref_dhash(checkerboard()) == CHECKERBOARD_18x16_SQ2
    assert dhash(bitmap(checkerboard())).bits == CHECKERBOARD_18x16_SQ2
    assert dhash(bitmap(checkerboard(18, 16, 3))).bits == CHECKERBOARD_18x16_SQ3


def test_downsample_rounds_half_up():
    # 2x2 cells holding {0, 1, 0, 1} average to 0.5 and must round to 1
    rows = [[x % 2 for x in range(18)] for _ in range(16)]
    assert (downsample(bitmap(rows)) == 1).all()


@pytest.mark.parametrize(
    "a, b, expected",
    [(0b0101, 0b0110, 2), (0, (1 << 64) - 1, 64), (0xDEADBEEF, 0xDEADBEEF, 0)],
)
def test_hamming(a, b, expected):
    assert hamming(PHash(a), PHash(b)) == expected


def test_inverted_tie_free_image_scores_zero():
    rng = random.Random(5)
    while True:
        rows = [[rng.randrange(256) for _ in range(18)] for _ in range(16)]
        grids = [downsample(bitmap(rows)), downsample(bitmap(rows).inverted())]
        # rounding can create a tie on one side only, so both grids must be tie-free
        if all((g[:, :-1] != g[:, 1:]).all() for g in grids):
            break
    img = bitmap(rows)
    assert similarity(img, img.inverted()) == 0.0
    assert ref_similarity(rows, [[255 - v for v in r] for r in rows]) == 0.0
    assert not is_ui_similar(img, img.inverted(), 0.95)


def test_status_strip_change_keeps_similarity():
    # a 16-pixel strip on a 180x320 screen is 5% of the area
    base = np.repeat(np.tile(np.array([40, 90, 140, 60, 200, 30, 170, 110, 80], dtype=np.uint8), 20)[None, :], 320, 0)
    changed = base.copy()
    changed[:16, :] = 255
    assert ref_similarity(base.tolist(), changed.tolist()) >= 0.95
    assert similarity(Bitmap.from_array(base), Bitmap.from_array(changed)) >= 0.95


def test_reference_equivalence_on_1000_random_bitmaps():
    rng = random.Random(1234)
    mismatches = 0
    for _ in range(1000):
        w, h = rng.randint(9, 24), rng.randint(8, 20)
        rows = [[rng.randrange(256) for _ in range(w)] for _ in range(h)]
        mismatches += dhash(bitmap(rows)).bits != ref_dhash(rows)
    assert mismatches == 0


@settings(max_examples=60, deadline=None)
@given(pixel_rows())
def test_matches_reference(rows):
    assert dhash(bitmap(rows)).bits == ref_dhash(rows)


@settings(max_examples=60, deadline=None)
@given(pixel_rows(24, 24), pixel_rows(24, 24))
def test_reflexive_and_symmetric(a, b):
    ia, ib = bitmap(a), bitmap(b)
    assert similarity(ia, ia) == 1.0
    assert similarity(ia, ib) == similarity(ib, ia)
    assert 0.0 <= similarity(ia, ib) <= 1.0


def test_deterministic_hash():
    rows = checkerboard(20, 20, 3)
    assert dhash(bitmap(rows)) == dhash(bitmap([list(r) for r in rows]))


def test_noise_monotonicity():
    """More perturbed downsample cells never raise the expected similarity."""
    rng = np.random.default_rng(7)
    means = []
    for level in (0.0, 0.25, 0.5):
        scores = []
        for _ in range(500):
            grid = rng.integers(0, 256, size=(8, 9))
            noisy = grid.copy()
            mask = rng.random((8, 9)) < level
            noisy[mask] = rng.integers(0, 256, size=int(mask.sum()))
            up = lambda g: Bitmap.from_array(np.kron(g, np.ones((2, 2), dtype=np.int64)).astype(np.uint8))
            scores.append(similarity(up(grid), up(noisy)))
        means.append(np.mean(scores))
    assert means[0] >= means[1] >= means[2]
    assert means[0] == 1.0


@pytest.mark.parametrize("theta", [0.0, -0.1, 1.01])
def test_invalid_threshold(theta):
    img = bitmap(checkerboard())
    with pytest.raises(ThresholdError):
        is_ui_similar(img, img, theta)


def test_identical_passes_strict_threshold():
    img = bitmap(checkerboard())
    assert is_ui_similar(img, img, 0.99)
    assert is_ui_similar(img, img, 1.0)


@pytest.mark.parametrize("shape", [(7, 18), (16, 8), (0, 0)])
def test_too_small_bitmap_rejected(shape):
    with pytest.raises(BitmapError):
        Bitmap.from_array(np.zeros(shape, dtype=np.uint8))


def test_pixel_count_checked():
    with pytest.raises(BitmapError):
        Bitmap(9, 8, bytes(71))


def test_rgb_conversion_uses_integer_luma():
    rgb = np.zeros((8, 9, 3), dtype=np.uint8)
    rgb[..., 0] = 255
    assert Bitmap.from_rgb(rgb).to_array()[0, 0] == 76  # 0.299 * 255 = 76.245
    rgb[..., :] = 255
    assert Bitmap.from_rgb(rgb).to_array()[0, 0] == 255


def test_pgm_round_trip(tmp_path):
    img = bitmap(checkerboard(18, 16, 3, 7, 201))
    path = tmp_path / "board.pgm"
    write_pgm(img, path)
    assert path.read_bytes().startswith(b"P5")
    assert read_pgm(path) == img


def test_phash_hex_round_trip():
    h = PHash(CHECKERBOARD_18x16_SQ3)
    assert h.hex() == "0024db0024db0024"
    assert PHash.from_hex(h.hex()) == h
    assert len(h) == 64
