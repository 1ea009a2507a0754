import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sketchvec import raster
from sketchvec.raster import HIT, IGNORE, MISS, HitMissMask


# -- independent oracles ----------------------------------------------------

def flood_components(img, connectivity):
    """Plain BFS labelling."""
    h, w = img.shape
    if connectivity == 4:
        steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        steps = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if dy or dx]
    seen = np.zeros_like(img, dtype=bool)
    comps = []
    for y in range(h):
        for x in range(w):
            if not img[y, x] or seen[y, x]:
                continue
            comp, queue = [], [(y, x)]
            seen[y, x] = True
            while queue:
                cy, cx = queue.pop()
                comp.append((cy, cx))
                for dy, dx in steps:
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and img[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((ny, nx))
            comps.append(frozenset(comp))
    return comps


def text_match(rows, patch):
    """Evaluate a mask written as text rows on a 3x3 bool patch."""
    for r in range(3):
        for c in range(3):
            ch = rows[r][c]
            if ch == "1" and not patch[r][c]:
                return False
            if ch == "0" and patch[r][c]:
                return False
    return True


def text_rotations(rows):
    """Clockwise rotations of a text mask, computed on strings."""
    out = [rows]
    for _ in range(3):
        prev = out[-1]
        out.append(["".join(prev[2 - r][c] for r in range(3)) for c in range(3)])
    return out


def all_patches():
    for bits in itertools.product((0, 1), repeat=8):
        ring = iter(bits)
        patch = [[0] * 3 for _ in range(3)]
        for r in range(3):
            for c in range(3):
                patch[r][c] = 1 if (r, c) == (1, 1) else next(ring)
        yield np.array(patch, dtype=bool)


# -- masks ------------------------------------------------------------------

def test_mask_parse_and_validation():
    m = HitMissMask.parse(".1.\n010\n000")
    assert m.cells[0, 0] == IGNORE and m.cells[0, 1] == HIT and m.cells[2, 2] == MISS
    with pytest.raises(ValueError):
        HitMissMask(np.full((3, 3), IGNORE))
    with pytest.raises(ValueError):
        HitMissMask(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        HitMissMask(np.full((3, 3), 5))


def test_rotations_are_clockwise_and_distinct():
    m = HitMissMask.parse(".1.\n010\n000")
    rots = m.rotations()
    assert len(rots) == 4
    # first clockwise turn sends the north hit to the east
    assert rots[1].cells[1, 2] == HIT
    sym = HitMissMask.parse(".1.\n111\n.1.")
    assert len(sym.rotations()) == 1


@pytest.mark.parametrize("text", [".1.\n010\n000", "100\n010\n000", ".1.\n.11\n0..",
                                  ".1.\n010\n101", "10.\n010\n101", ".01\n110\n.1."])
def test_scan_matches_truth_table(text):
    rows = text.split("\n")
    mask = HitMissMask.parse(text)
    for rot_cells, rot_rows in zip([r.cells for r in [mask] + [HitMissMask(np.rot90(mask.cells, -k)) for k in (1, 2, 3)]],
                                   text_rotations(rows)):
        m = HitMissMask(rot_cells)
        for patch in all_patches():
            img = np.zeros((5, 5), dtype=bool)
            img[1:4, 1:4] = patch
            got = bool(raster.hit_miss_scan(img, [m])[2, 2])
            assert got == text_match(rot_rows, patch)
            assert m.matches(patch) == got


def test_mask_table_matches_scan():
    masks = raster.rotated(HitMissMask.parse(".1.\n010\n000"), HitMissMask.parse("100\n010\n000"))
    table = raster.mask_table(masks)
    rng = np.random.default_rng(0)
    img = rng.random((30, 30)) < 0.4
    codes = raster.neighbourhood_codes(img)
    scan = raster.hit_miss_scan(img, masks)
    assert np.array_equal(scan[1:-1, 1:-1], table[codes][1:-1, 1:-1])


ENDPOINT = raster.rotated(HitMissMask.parse(".1.\n010\n000"), HitMissMask.parse("100\n010\n000"))


def test_scan_isolated_pixel_and_segment():
    img = np.zeros((7, 7), dtype=bool)
    img[3, 3] = True
    assert not raster.hit_miss_scan(img, ENDPOINT).any()
    img[3, 2:5] = True
    hits = {tuple(p) for p in np.argwhere(raster.hit_miss_scan(img, ENDPOINT))}
    assert hits == {(3, 2), (3, 4)}


def test_scan_border_never_matches_and_requires_masks():
    img = np.zeros((4, 4), dtype=bool)
    img[0, 0:2] = True
    assert not raster.hit_miss_scan(img, ENDPOINT).any()
    with pytest.raises(ValueError):
        raster.hit_miss_scan(img, [])


def test_scan_is_pure():
    rng = np.random.default_rng(1)
    img = rng.random((20, 20)) < 0.5
    before = img.copy()
    a = raster.hit_miss_scan(img, ENDPOINT)
    b = raster.hit_miss_scan(img, ENDPOINT)
    assert np.array_equal(a, b) and np.array_equal(img, before)


# -- in-place erosion -------------------------------------------------------

STRICT8 = raster.rotated(HitMissMask.parse(".1.\n.11\n0.."))


def sequential_erode(img, masks):
    img = img.copy()
    h, w = img.shape
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            if img[y, x] and any(m.matches(img[y - 1:y + 2, x - 1:x + 2]) for m in masks):
                img[y, x] = False
    return img


def test_erode_empty_and_type():
    img = np.zeros((5, 5), dtype=bool)
    assert not raster.hit_miss_erode_inplace(img, STRICT8).any()
    with pytest.raises(TypeError):
        raster.hit_miss_erode_inplace(np.zeros((5, 5), dtype=np.uint8), STRICT8)


def test_erode_block_fixed_point():
    img = np.zeros((6, 6), dtype=bool)
    img[2:4, 2:4] = True
    out = img.copy()
    while True:
        before = out.copy()
        raster.hit_miss_erode_inplace(out, STRICT8)
        if np.array_equal(before, out):
            break
    assert out.sum() < 4
    assert not raster.hit_miss_scan(out, STRICT8).any()


def test_erode_staircase_unchanged():
    img = np.zeros((8, 8), dtype=bool)
    for i in range(1, 7):
        img[i, i] = True
    out = raster.hit_miss_erode_inplace(img.copy(), STRICT8)
    assert np.array_equal(out, img)


def test_erode_matches_sequential_oracle():
    rng = np.random.default_rng(2)
    for _ in range(20):
        img = rng.random((16, 16)) < 0.45
        got = raster.hit_miss_erode_inplace(img.copy(), STRICT8)
        assert np.array_equal(got, sequential_erode(img, STRICT8))


# -- components -------------------------------------------------------------

def test_components_basic():
    assert raster.connected_components(np.zeros((4, 4), dtype=bool)) == []
    img = np.zeros((4, 4), dtype=bool)
    img[1, 1] = img[2, 2] = True
    assert len(raster.connected_components(img, 4)) == 2
    comps = raster.connected_components(img, 8)
    assert len(comps) == 1 and comps[0].size == 2 and comps[0].bbox == (1, 1, 3, 3)
    with pytest.raises(ValueError):
        raster.connected_components(img, 6)


@pytest.mark.parametrize("conn", [4, 8])
def test_components_match_flood_fill(conn):
    rng = np.random.default_rng(conn)
    for _ in range(100):
        img = rng.random((12, 14)) < rng.uniform(0.2, 0.7)
        got = {frozenset(map(tuple, c.coords.tolist())) for c in raster.connected_components(img, conn)}
        assert got == set(flood_components(img, conn))


@settings(max_examples=40, deadline=None)
@given(arrays(bool, (10, 10)), st.permutations(range(10)))
def test_components_invariant_under_enumeration_order(img, perm):
    # relabelling rows/cols and mapping back must give the same partition
    p = np.array(perm)
    inv = np.argsort(p)
    comps = raster.connected_components(img[p][:, p][inv][:, inv], 8)
    ref = {frozenset(map(tuple, c.coords.tolist())) for c in raster.connected_components(img, 8)}
    assert {frozenset(map(tuple, c.coords.tolist())) for c in comps} == ref


def test_euler_number():
    img = np.zeros((9, 9), dtype=bool)
    img[2:7, 2:7] = True
    assert raster.euler_number(img) == 1
    img[4, 4] = False
    assert raster.euler_number(img) == 0
    img[0, 0] = True
    assert raster.euler_number(img) == 1


# -- median -----------------------------------------------------------------

def naive_median(img, window):
    h, w = img.shape
    r = window // 2
    out = np.empty_like(img)
    for y in range(h):
        for x in range(w):
            vals = sorted(img[min(max(y + dy, 0), h - 1), min(max(x + dx, 0), w - 1)]
                          for dy in range(-r, r + 1) for dx in range(-r, r + 1))
            out[y, x] = vals[len(vals) // 2]
    return out


def test_median_examples():
    c = np.full((10, 10), 0.3)
    assert np.array_equal(raster.median_filter(c, 3), c)
    spot = np.zeros((9, 9))
    spot[4, 4] = 1.0
    assert not raster.median_filter(spot, 3).any()
    rng = np.random.default_rng(3)
    img = rng.random((16, 16))
    assert np.array_equal(raster.median_filter(img, 5), naive_median(img, 5))
    for bad in (2, 4, 1):
        with pytest.raises(ValueError):
            raster.median_filter(img, bad)


def test_median_8bit_levels_match_naive():
    rng = np.random.default_rng(5)
    img = rng.integers(0, 256, (40, 37)) / 255.0
    for window in (3, 7, 21):
        assert np.array_equal(raster.median_filter(img, window), naive_median(img, window))


def test_median_idempotent_on_binary_constant_regions():
    img = np.zeros((20, 20))
    img[:, 10:] = 1.0
    once = raster.median_filter(img, 3)
    assert np.array_equal(raster.median_filter(once, 3), once)


# -- otsu -------------------------------------------------------------------

def exhaustive_otsu(v, bins=256):
    lo, hi = v.min(), v.max()
    step = (hi - lo) / bins
    best, best_k = np.inf, None
    for k in range(1, bins):
        t = lo + k * step
        a, b = v[v < t], v[v >= t]
        if len(a) == 0 or len(b) == 0:
            continue
        within = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
        if within < best - 1e-9 * max(1.0, within):
            best, best_k = within, t
    return best_k


def test_otsu_examples():
    assert raster.otsu_threshold([0.4, 0.4, 0.4]) == 0.4
    t = raster.otsu_threshold([0.1] * 50 + [0.9] * 50)
    assert 0.1 < t < 0.9
    with pytest.raises(ValueError):
        raster.otsu_threshold([])


def test_otsu_matches_exhaustive_search():
    rng = np.random.default_rng(4)
    for _ in range(5):
        v = np.concatenate([rng.normal(0.3, 0.05, 500), rng.normal(0.7, 0.1, 500)])
        assert raster.otsu_threshold(v) == pytest.approx(exhaustive_otsu(v), abs=1e-12)


def test_as_gray_normalisation():
    assert raster.as_gray(np.array([[0, 255]], dtype=np.uint8)).tolist() == [[0.0, 1.0]]
    assert raster.as_gray(np.array([[True, False]])).tolist() == [[1.0, 0.0]]
    with pytest.raises(ValueError):
        raster.as_gray(np.array([[1.5]]))
    with pytest.raises(ValueError):
        raster.as_gray(np.zeros(3))
