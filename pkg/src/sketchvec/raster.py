"""Image containers and generic binary morphology.

Grayscale images are 2-D ``float64`` arrays with samples in ``[0, 1]``;
binary images are 2-D ``bool`` arrays. Coordinates are ``(row, col)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np
from scipy import ndimage as ndi

HIT = 1
MISS = 0
IGNORE = -1

# Neighbour offsets in the bit order used by neighbourhood codes: bit i of a
# code is set when the neighbour at NEIGHBOURS[i] is foreground.
NEIGHBOURS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def as_gray(arr) -> np.ndarray:
    """Return ``arr`` as a float64 grayscale image normalised to [0, 1].

    Integer inputs are scaled by the maximum of their dtype, booleans map to
    {0, 1} and float inputs must already lie in [0, 1].
    """
    a = np.asarray(arr)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {a.shape}")
    if a.dtype == np.bool_:
        return a.astype(np.float64)
    if np.issubdtype(a.dtype, np.integer):
        return a.astype(np.float64) / float(np.iinfo(a.dtype).max)
    a = a.astype(np.float64)
    if a.size and (np.nanmin(a) < 0.0 or np.nanmax(a) > 1.0 or np.isnan(a).any()):
        raise ValueError("float image samples must lie in [0, 1]")
    return a


def as_binary(arr) -> np.ndarray:
    a = np.asarray(arr)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {a.shape}")
    return a.astype(bool)


class HitMissMask:
    """A 3x3 hit-miss structuring element.

    ``cells`` holds HIT (1), MISS (0) or IGNORE (-1) per position; the centre
    cell is usually HIT.
    """

    def __init__(self, cells):
        cells = np.asarray(cells, dtype=np.int8)
        if cells.shape != (3, 3):
            raise ValueError("a hit-miss mask has exactly 3x3 cells")
        if not np.isin(cells, (HIT, MISS, IGNORE)).all():
            raise ValueError("cells must be HIT, MISS or IGNORE")
        if (cells == IGNORE).all():
            raise ValueError("at least one cell must be constrained")
        self.cells = cells
        self.cells.setflags(write=False)

    @classmethod
    def parse(cls, text: str) -> "HitMissMask":
        """Build a mask from three rows of ``1`` (hit), ``0`` (miss), ``.`` (ignore)."""
        rows = [r.strip() for r in text.strip().splitlines() if r.strip()]
        lut = {"1": HIT, "0": MISS, ".": IGNORE}
        return cls([[lut[ch] for ch in row] for row in rows])

    def rotations(self) -> list["HitMissMask"]:
        """The four 90-degree rotations, duplicates removed."""
        out: list[HitMissMask] = []
        for k in range(4):
            m = HitMissMask(np.rot90(self.cells, -k))
            if m not in out:
                out.append(m)
        return out

    def matches(self, patch) -> bool:
        patch = np.asarray(patch, dtype=bool)
        hits = self.cells == HIT
        misses = self.cells == MISS
        return bool(patch[hits].all() and not patch[misses].any())

    def __eq__(self, other):
        return isinstance(other, HitMissMask) and np.array_equal(self.cells, other.cells)

    def __hash__(self):
        return hash(self.cells.tobytes())

    def __repr__(self):
        sym = {HIT: "1", MISS: "0", IGNORE: "."}
        return "HitMissMask(%r)" % "/".join("".join(sym[int(c)] for c in row) for row in self.cells)


def rotated(*masks: HitMissMask) -> tuple[HitMissMask, ...]:
    """All distinct rotations of the given masks."""
    out: list[HitMissMask] = []
    for m in masks:
        for r in m.rotations():
            if r not in out:
                out.append(r)
    return tuple(out)


def mask_table(masks) -> np.ndarray:
    """Lookup table over 9-bit codes (8 neighbour bits plus centre bit 8).

    ``table[code]`` is True when any mask matches that neighbourhood.
    """
    codes = np.arange(512)
    table = np.zeros(512, dtype=bool)
    bits = [(codes >> i) & 1 for i in range(8)]
    centre = (codes >> 8) & 1
    for m in masks:
        ok = np.ones(512, dtype=bool)
        for i, (dy, dx) in enumerate(NEIGHBOURS):
            cell = m.cells[1 + dy, 1 + dx]
            if cell == HIT:
                ok &= bits[i] == 1
            elif cell == MISS:
                ok &= bits[i] == 0
        c = m.cells[1, 1]
        if c == HIT:
            ok &= centre == 1
        elif c == MISS:
            ok &= centre == 0
        table |= ok
    return table


def neighbourhood_codes(img: np.ndarray) -> np.ndarray:
    """Per-pixel 9-bit neighbourhood code; out-of-image neighbours read as 0."""
    img = as_binary(img)
    p = np.pad(img, 1)
    h, w = img.shape
    code = img.astype(np.int32) << 8
    for i, (dy, dx) in enumerate(NEIGHBOURS):
        code |= p[1 + dy:1 + dy + h, 1 + dx:1 + dx + w].astype(np.int32) << i
    return code


def hit_miss_scan(img: np.ndarray, masks) -> np.ndarray:
    """Read-only hit-miss transform with a set of masks.

    Returns a boolean image marking every interior pixel where at least one
    mask matches. Border pixels never match.
    """
    img = as_binary(img)
    masks = list(masks)
    if not masks:
        raise ValueError("at least one mask is required")
    out = np.zeros(img.shape, dtype=bool)
    h, w = img.shape
    if h < 3 or w < 3:
        return out
    inner = out[1:-1, 1:-1]
    for m in masks:
        ok = np.ones((h - 2, w - 2), dtype=bool)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                cell = m.cells[1 + dy, 1 + dx]
                if cell == IGNORE:
                    continue
                view = img[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
                ok &= view if cell == HIT else ~view
        inner |= ok
    return out


def hit_miss_erode_inplace(img: np.ndarray, masks) -> np.ndarray:
    """Clear matching pixels in place, scanning rows top to bottom.

    Each cleared pixel is visible to the matches tested after it. ``img`` must
    be a writable boolean array; it is returned for convenience.
    """
    if img.dtype != np.bool_:
        raise TypeError("in-place erosion needs a boolean image")
    table = mask_table(masks)
    h, w = img.shape
    if h < 3 or w < 3:
        return img
    for y, x in np.argwhere(img[1:-1, 1:-1]) + 1:
        if img[y, x] and table[_code_at(img, y, x)]:
            img[y, x] = False
    return img


def _code_at(img: np.ndarray, y: int, x: int) -> int:
    # interior pixels only; no bounds checks
    code = 256 if img[y, x] else 0
    for i, (dy, dx) in enumerate(NEIGHBOURS):
        if img[y + dy, x + dx]:
            code |= 1 << i
    return code


@dataclass(frozen=True)
class Component:
    coords: np.ndarray  # (n, 2) row/col, row-major order
    bbox: tuple[int, int, int, int]  # row0, col0, row1, col1 (exclusive)

    @property
    def size(self) -> int:
        return len(self.coords)


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 4:
        return ndi.generate_binary_structure(2, 1)
    if connectivity == 8:
        return ndi.generate_binary_structure(2, 2)
    raise ValueError("connectivity must be 4 or 8")


def label(img: np.ndarray, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label foreground components; returns ``(labels, count)``."""
    labels, n = ndi.label(as_binary(img), structure=_structure(connectivity))
    return labels, int(n)


def connected_components(img: np.ndarray, connectivity: int = 8) -> list[Component]:
    labels, n = label(img, connectivity)
    if n == 0:
        return []
    order = np.argsort(labels.ravel(), kind="stable")
    flat = labels.ravel()[order]
    starts = np.searchsorted(flat, np.arange(1, n + 2))
    w = labels.shape[1]
    comps = []
    for k in range(n):
        idx = order[starts[k]:starts[k + 1]]
        coords = np.stack(np.divmod(idx, w), axis=1)
        r0, c0 = coords.min(axis=0)
        r1, c1 = coords.max(axis=0) + 1
        comps.append(Component(coords, (int(r0), int(c0), int(r1), int(c1))))
    return comps


def euler_number(img: np.ndarray) -> int:
    """Foreground 8-components minus background 4-holes."""
    img = as_binary(img)
    _, fg = label(img, 8)
    bg_labels, nbg = label(~np.pad(img, 1), 4)
    # the padded frame makes the outside a single background component
    return fg - (nbg - 1)


def median_filter(img: np.ndarray, window: int) -> np.ndarray:
    """Median over a ``window`` x ``window`` box with edge-replicated borders.

    Images holding only 8-bit levels (k / 255) take OpenCV's histogram-based
    median filter, which gives the same result much faster.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError(f"median window must be odd and >= 3, got {window}")
    img = as_gray(img)
    levels = np.rint(img * 255.0)
    if np.array_equal(levels / 255.0, img):
        return cv2.medianBlur(levels.astype(np.uint8), window).astype(np.float64) / 255.0
    return ndi.median_filter(img, size=window, mode="nearest")


def otsu_threshold(values, bins: int = 256) -> float:
    """Otsu threshold over a ``bins``-bin histogram of ``values``.

    Values strictly below the returned threshold form the dark class. The
    split minimising the summed within-class variance wins; ties go to the
    lower split.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("otsu_threshold needs at least one value")
    lo, hi = float(v.min()), float(v.max())
    if hi <= lo:
        return lo
    step = (hi - lo) / bins
    idx = np.minimum(((v - lo) / step).astype(np.int64), bins - 1)
    n = np.bincount(idx, minlength=bins).astype(np.float64)
    s = np.bincount(idx, weights=v, minlength=bins)
    q = np.bincount(idx, weights=v * v, minlength=bins)
    n0, s0, q0 = np.cumsum(n)[:-1], np.cumsum(s)[:-1], np.cumsum(q)[:-1]
    n1, s1, q1 = n.sum() - n0, s.sum() - s0, q.sum() - q0
    with np.errstate(divide="ignore", invalid="ignore"):
        within = np.where(n0 > 0, q0 - s0 * s0 / n0, 0.0) + np.where(n1 > 0, q1 - s1 * s1 / n1, 0.0)
    valid = (n0 > 0) & (n1 > 0)
    within = np.where(valid, within, np.inf)
    k = int(np.argmin(within))
    return lo + (k + 1) * step


__all__ = [
    "HIT", "MISS", "IGNORE", "NEIGHBOURS", "HitMissMask", "Component",
    "as_gray", "as_binary", "rotated", "mask_table", "neighbourhood_codes",
    "hit_miss_scan", "hit_miss_erode_inplace", "label", "connected_components",
    "euler_number", "median_filter", "otsu_threshold",
]
