"""Skeletonisation: Zhang-Suen thinning plus directional fast erosion of steep
concave corners, which removes the shortening bias of plain thinning.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import cv2
import numpy as np

from . import raster
from .raster import NEIGHBOURS, HitMissMask


class ThinningCapWarning(RuntimeWarning):
    """Thinning hit its iteration cap before converging."""


# Pixels matching these are needed to keep paths connected.
CONNECTIVITY_MASKS = raster.rotated(
    HitMissMask.parse("1..\n.10\n.01"),
    HitMissMask.parse(".1.\n.10\n.01"),
    HitMissMask.parse(".1.\n01.\n10."),
    HitMissMask.parse(".1.\n010\n.1."),
    HitMissMask.parse("...\n010\n101"),
    HitMissMask.parse(".1.\n111\n.1."),
)

STRAIGHT_EPS = 0.08  # |alpha| below this counts as straight
STRAIGHT_RUN = 3  # consecutive straight points ending an angle
MIN_ANGLE = math.radians(6.0)
MAX_SPEED = 10.0


def _bits(code: int) -> list[int]:
    return [(code >> i) & 1 for i in range(8)]


def _zs_tables() -> tuple[np.ndarray, np.ndarray]:
    t1 = np.zeros(256, dtype=bool)
    t2 = np.zeros(256, dtype=bool)
    for code in range(256):
        p = _bits(code)  # P2..P9
        b = sum(p)
        a = sum(1 for i in range(8) if p[i] == 0 and p[(i + 1) % 8] == 1)
        if not (2 <= b <= 6 and a == 1):
            continue
        p2, p3, p4, p5, p6, p7, p8, p9 = p
        t1[code] = p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
        t2[code] = p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0
    return t1, t2


def _simple_table() -> np.ndarray:
    """Simple-point test for 8-connected foreground / 4-connected background."""
    table = np.zeros(256, dtype=bool)
    ring = NEIGHBOURS
    for code in range(256):
        p = _bits(code)
        # foreground 8-components of the neighbourhood
        fg = [i for i in range(8) if p[i]]
        if not fg:
            continue
        seen: set[int] = set()
        n_fg = 0
        for s in fg:
            if s in seen:
                continue
            n_fg += 1
            stack = [s]
            seen.add(s)
            while stack:
                i = stack.pop()
                for j in fg:
                    if j not in seen and max(abs(ring[i][0] - ring[j][0]), abs(ring[i][1] - ring[j][1])) == 1:
                        seen.add(j)
                        stack.append(j)
        # background 4-components touching a 4-neighbour of the centre
        bg = [i for i in range(8) if not p[i]]
        seen = set()
        n_bg = 0
        for s in bg:
            if s in seen or s % 2:
                continue
            n_bg += 1
            stack = [s]
            seen.add(s)
            while stack:
                i = stack.pop()
                for j in bg:
                    if j not in seen and abs(ring[i][0] - ring[j][0]) + abs(ring[i][1] - ring[j][1]) == 1:
                        seen.add(j)
                        stack.append(j)
        table[code] = n_fg == 1 and n_bg == 1
    return table


_ZS1, _ZS2 = _zs_tables()
_SIMPLE = _simple_table()
_PROTECT = raster.mask_table(CONNECTIVITY_MASKS)
_DEGREE = np.array([bin(c).count("1") for c in range(256)])


def _ring_code(img: np.ndarray, y: int, x: int) -> int:
    code = 0
    for i, (dy, dx) in enumerate(NEIGHBOURS):
        if img[y + dy, x + dx]:
            code |= 1 << i
    return code


def _ring_codes(img: np.ndarray) -> np.ndarray:
    # img is padded: border pixels are background
    code = np.zeros(img.shape, dtype=np.int32)
    h, w = img.shape
    for i, (dy, dx) in enumerate(NEIGHBOURS):
        code[1:-1, 1:-1] |= img[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx].astype(np.int32) << i
    return code


def _zs_subiteration(img: np.ndarray, table: np.ndarray) -> bool:
    """One parallel Zhang-Suen pass that cannot change the topology.

    Candidates are deleted together unless they take part in a conflict: a
    4-adjacent candidate pair whose joint removal is not simple, or a 2x2
    block made only of candidates. Conflicting candidates are then deleted
    one at a time in row-major order, each re-checked on the live image.
    """
    codes = _ring_codes(img)
    cand = img & table[codes]
    if not cand.any():
        return False
    conflict = np.zeros_like(cand)
    # horizontal pairs: bit 2 is the east neighbour, bit 6 the west one
    pair = cand[:, :-1] & cand[:, 1:]
    bad = pair & ~(_SIMPLE[codes[:, 1:] & ~(1 << 6)] & _SIMPLE[codes[:, :-1] & ~(1 << 2)])
    conflict[:, :-1] |= bad
    conflict[:, 1:] |= bad
    # vertical pairs: bit 4 is the south neighbour, bit 0 the north one
    pair = cand[:-1] & cand[1:]
    bad = pair & ~(_SIMPLE[codes[1:] & ~(1 << 0)] & _SIMPLE[codes[:-1] & ~(1 << 4)])
    conflict[:-1] |= bad
    conflict[1:] |= bad
    sq = cand[:-1, :-1] & cand[1:, :-1] & cand[:-1, 1:] & cand[1:, 1:]
    conflict[:-1, :-1] |= sq
    conflict[1:, :-1] |= sq
    conflict[:-1, 1:] |= sq
    conflict[1:, 1:] |= sq
    img[cand & ~conflict] = False
    for y, x in np.argwhere(conflict):
        if table[_ring_code(img, y, x)]:
            img[y, x] = False
    return True


def _zs_iteration(img: np.ndarray) -> bool:
    a = _zs_subiteration(img, _ZS1)
    b = _zs_subiteration(img, _ZS2)
    return a or b


def _break_squares(img: np.ndarray) -> bool:
    """Delete simple non-endpoint pixels of 2x2 foreground blocks.

    Zhang-Suen's crossing-number test is stricter than simplicity, so a few
    such blocks survive its fixed point (typically beside one-pixel holes).
    """
    changed = False
    while True:
        sq = img[:-1, :-1] & img[1:, :-1] & img[:-1, 1:] & img[1:, 1:]
        if not sq.any():
            return changed
        cand = np.zeros_like(img)
        cand[:-1, :-1] |= sq
        cand[1:, :-1] |= sq
        cand[:-1, 1:] |= sq
        cand[1:, 1:] |= sq
        progress = False
        for y, x in np.argwhere(cand):
            if not (img[y, x] and img[y - 1:y + 2, x - 1:x + 2].sum() >= 4):
                continue
            code = _ring_code(img, y, x)
            if _SIMPLE[code] and _DEGREE[code] >= 2 and _in_square(img, y, x):
                img[y, x] = False
                progress = True
        if not progress:
            return changed
        changed = True


def _in_square(img, y, x) -> bool:
    for dy in (-1, 0):
        for dx in (-1, 0):
            if img[y + dy:y + dy + 2, x + dx:x + dx + 2].all():
                return True
    return False


def _cap(shape) -> int:
    return 10 * max(shape)


def zhang_suen_thin(img: np.ndarray) -> np.ndarray:
    """Two-subiteration Zhang-Suen thinning.

    Each subiteration deletes its candidates in parallel, as in the classical
    algorithm, except that conflicting candidates (see ``_zs_subiteration``)
    are settled sequentially so the topology of the input (components and
    holes) is kept. At the fixed point, leftover 2x2 blocks
    are broken wherever a simple pixel allows it.
    """
    work = np.pad(raster.as_binary(img), 1)
    for _ in range(_cap(img.shape)):
        if not _zs_iteration(work) and not _break_squares(work):
            break
    else:
        warnings.warn("Zhang-Suen thinning reached its iteration cap", ThinningCapWarning)
    return work[1:-1, 1:-1].copy()


@dataclass
class Contour:
    points: np.ndarray  # (n, 2) integer x, y
    hole: bool = False

    def __len__(self):
        return len(self.points)


def _signed_area(pts: np.ndarray) -> float:
    x = pts[:, 0].astype(np.float64)
    y = pts[:, 1].astype(np.float64)
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def trace_contours(img: np.ndarray) -> list[Contour]:
    """Border-following contours (Suzuki-Abe, via OpenCV).

    Points are ``(x, y)`` pixel coordinates. Contours are oriented so the
    foreground lies on the right-hand side on screen: outer borders run
    clockwise, hole borders counter-clockwise.
    """
    img = raster.as_binary(img)
    if not img.any():
        return []
    found, hierarchy = cv2.findContours(img.astype(np.uint8), cv2.RETR_CCOMP, cv2.CHAIN_APPROX_NONE)
    out = []
    for c, h in zip(found, hierarchy[0]):
        pts = c.reshape(-1, 2).astype(np.int64)
        hole = h[3] != -1
        area = _signed_area(pts)
        if (not hole and area < 0) or (hole and area > 0):
            pts = np.concatenate([pts[:1], pts[:0:-1]])
        out.append(Contour(pts, hole))
    return out


@dataclass
class CurvatureProfile:
    alpha: np.ndarray  # radians, > 0 concave
    cord: int


def estimate_curvature(c: Contour, cord: int = 15) -> CurvatureProfile:
    """Angle per contour point from chord-to-point distance accumulation.

    Distances from each point to every chord of ``cord`` steps spanning it are
    summed (signed: positive when the point lies on the foreground side of
    the chord, i.e. at concave corners) and mapped to ``6 * I / cord**2``.
    """
    pts = np.asarray(c.points, dtype=np.float64)
    n = len(pts)
    alpha = np.zeros(n)
    if n <= cord + 1:
        return CurvatureProfile(alpha, cord)
    k = np.arange(n)
    acc = np.zeros(n)
    for off in range(1, cord):
        a = pts[(k - off) % n]
        b = pts[(k - off + cord) % n]
        ab = b - a
        ap = pts - a
        length = np.hypot(ab[:, 0], ab[:, 1])
        cross = ab[:, 0] * ap[:, 1] - ab[:, 1] * ap[:, 0]
        acc += np.where(length > 0, cross / np.where(length > 0, length, 1.0), 0.0)
    alpha = 6.0 * acc / (cord * cord)
    return CurvatureProfile(alpha, cord)


@dataclass
class ErodingPoint:
    """A contour point eroded along ``direction`` at ``speed`` px/iteration."""

    anchor: tuple[int, int]  # x, y
    left: tuple[int, int]
    right: tuple[int, int]
    angle: float
    direction: np.ndarray
    speed: float
    neighbourhood: list["ErodingPoint"] = field(default_factory=list)
    active: bool = True
    index: int = -1


def _unit(v):
    n = math.hypot(v[0], v[1])
    return (v[0] / n, v[1] / n) if n > 0 else (0.0, 0.0)


def _angle_frame(p, pl, pr):
    """Angle at ``p`` between rays to ``pl`` and ``pr``, erosion direction, speed."""
    ul = _unit((pl[0] - p[0], pl[1] - p[1]))
    ur = _unit((pr[0] - p[0], pr[1] - p[1]))
    cosv = max(-1.0, min(1.0, ul[0] * ur[0] + ul[1] * ur[1]))
    ang = math.acos(cosv)
    bis = (ul[0] + ur[0], ul[1] + ur[1])
    d = _unit((-bis[0], -bis[1]))
    speed = MAX_SPEED if ang <= 0 else min(MAX_SPEED, 1.0 / math.sin(ang))
    return ang, np.array(d), speed


def _walk_to_straight(alpha: np.ndarray, start: int, step: int, limit: int) -> int:
    """Walk from ``start`` to the far end of the first straight portion."""
    n = len(alpha)
    run = 0
    i = start
    for _ in range(limit):
        j = (i + step) % n
        straight = abs(alpha[j]) < STRAIGHT_EPS
        if run >= STRAIGHT_RUN and not straight:
            return i
        run = run + 1 if straight else 0
        i = j
    return i


def _cyclic_mean(a: np.ndarray, width: int) -> np.ndarray:
    n = len(a)
    if n <= width:
        return np.full(n, a.mean())
    h = width // 2
    idx = (np.arange(n)[:, None] + np.arange(-h, width - h)[None, :]) % n
    return a[idx].mean(axis=1)


def _concave_runs(alpha: np.ndarray, thr: float) -> list[list[int]]:
    n = len(alpha)
    steep = alpha > thr
    if not steep.any():
        return []
    if steep.all():
        return [list(range(n))]
    first_flat = int(np.argmin(steep))
    runs, cur = [], []
    for off in range(1, n + 1):
        i = (first_flat + off) % n
        if steep[i]:
            cur.append(i)
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    return runs


def right_angle_response(cord: int = 15) -> float:
    """Estimator output at the apex of an exact right angle with unit steps.

    The chord estimator saturates well below pi/2 for steep corners, so
    this calibrated value is the default cut for "steeper than 90 degrees".
    """
    arm = np.arange(cord, 0, -1)
    pts = np.concatenate([
        np.stack([arm, np.zeros_like(arm)], 1),
        [[0, 0]],
        np.stack([np.zeros_like(arm), arm[::-1]], 1),
    ]).astype(np.float64)
    k = cord
    acc = 0.0
    for off in range(1, cord):
        a, b = pts[k - off], pts[k - off + cord]
        ab, ap = b - a, pts[k] - a
        acc += abs(ab[0] * ap[1] - ab[1] * ap[0]) / math.hypot(ab[0], ab[1])
    return 6.0 * acc / (cord * cord)


def find_eroding_points(c: Contour, prof: CurvatureProfile, steep: float | None = None) -> list[ErodingPoint]:
    """Anchors at the maxima of concave angles steeper than 90 degrees.

    Candidate runs are contour stretches whose estimate exceeds ``steep``
    (default: the estimator's response to a right angle). A run yields an
    eroding point only if the angle measured between its limits is acute.
    """
    alpha = prof.alpha
    n = len(alpha)
    out: list[ErodingPoint] = []
    if n == 0:
        return out
    if steep is None:
        steep = right_angle_response(prof.cord)
    pts = c.points
    limit = max(1, n // 2)
    # digital staircases make the raw estimate ripple on straight runs; the
    # straightness test looks at its moving average over one cord
    flat = _cyclic_mean(alpha, prof.cord)
    for run in _concave_runs(alpha, steep):
        vals = alpha[run]
        top = np.flatnonzero(vals >= vals.max() - 1e-9)
        ie = run[int(top[len(top) // 2])]
        # walk outward from the run ends so plateaus do not stop the walk early
        il = _walk_to_straight(flat, run[0], -1, limit)
        ir = _walk_to_straight(flat, run[-1], 1, limit)
        pl = tuple(int(v) for v in pts[il])
        pr = tuple(int(v) for v in pts[ir])
        pe = tuple(int(v) for v in pts[ie])
        ang, d, s = _angle_frame(pe, pl, pr)
        if ang >= math.pi / 2:
            continue
        ep = ErodingPoint(pe, pl, pr, ang, d, s, active=ang >= MIN_ANGLE and pe not in (pl, pr), index=ie)
        for i in run:
            pi = tuple(int(v) for v in pts[i])
            a_i, d_i, s_i = _angle_frame(pi, pl, pr)
            ok = a_i >= MIN_ANGLE and pi not in (pl, pr)
            ep.neighbourhood.append(ErodingPoint(pi, pl, pr, a_i, d_i, s_i, active=ok, index=i))
        out.append(ep)
    return out


def supercover(p0, p1) -> list[tuple[int, int]]:
    """Pixel cells (x, y) crossed by the segment p0-p1, 4-connected, in order.

    Cell (i, j) covers [i - 0.5, i + 0.5) x [j - 0.5, j + 0.5).
    """
    x0, y0 = float(p0[0]), float(p0[1])
    x1, y1 = float(p1[0]), float(p1[1])
    cx, cy = int(math.floor(x0 + 0.5)), int(math.floor(y0 + 0.5))
    ex, ey = int(math.floor(x1 + 0.5)), int(math.floor(y1 + 0.5))
    cells = [(cx, cy)]
    dx, dy = x1 - x0, y1 - y0
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    tdx = abs(1.0 / dx) if dx else math.inf
    tdy = abs(1.0 / dy) if dy else math.inf
    tx = ((cx + 0.5 * sx) - x0) / dx if dx else math.inf
    ty = ((cy + 0.5 * sy) - y0) / dy if dy else math.inf
    while (cx, cy) != (ex, ey):
        if tx <= ty:
            if tx > 1.0:
                break
            cx += sx
            tx += tdx
        else:
            if ty > 1.0:
                break
            cy += sy
            ty += tdy
        cells.append((cx, cy))
    return cells


class _Mover:
    __slots__ = ("x", "y", "d", "s", "active")

    def __init__(self, ep: ErodingPoint):
        self.x, self.y = float(ep.anchor[0]), float(ep.anchor[1])
        self.d = (float(ep.direction[0]), float(ep.direction[1]))
        self.s = ep.speed
        self.active = ep.active


def _try_erase(img: np.ndarray, x: int, y: int) -> bool:
    """Erase (x, y) if allowed; False means a protected pixel was hit."""
    h, w = img.shape
    if not (1 <= x < w - 1 and 1 <= y < h - 1):
        return False
    if not img[y, x]:
        return True
    code = _ring_code(img, y, x)
    # endpoints are kept as well: eroding them would shorten branches
    if _PROTECT[code | 256] or not _SIMPLE[code] or _DEGREE[code] < 2:
        return False
    img[y, x] = False
    return True


def _advance(img: np.ndarray, groups: list[list[_Mover]]) -> bool:
    before = int(img.sum())
    for members in groups:
        for m in members:
            if not m.active:
                continue
            nx, ny = m.x + m.s * m.d[0], m.y + m.s * m.d[1]
            for cx, cy in supercover((m.x, m.y), (nx, ny)):
                if not _try_erase(img, cx, cy):
                    m.active = False
                    break
            if m.active:
                m.x, m.y = nx, ny
        for a, b in zip(members, members[1:]):
            if not (a.active or b.active):
                continue
            for cx, cy in supercover((a.x, a.y), (b.x, b.y)):
                if not _try_erase(img, cx, cy):
                    a.active = False
                    break
    return int(img.sum()) != before


def eroding_groups(img: np.ndarray, cord: int = 15) -> list[list[ErodingPoint]]:
    """Eroding points of every contour, grouped per steep angle."""
    groups = []
    for c in trace_contours(img):
        for ep in find_eroding_points(c, estimate_curvature(c, cord)):
            groups.append(ep.neighbourhood)
    return groups


def unbiased_thin(img: np.ndarray, cord: int = 15) -> np.ndarray:
    """Zhang-Suen thinning run alongside fast erosion of steep concave angles.

    After every thinning iteration that changed the image, each active eroding point moves ``speed``
    pixels along its direction, erasing what it crosses and the straight
    connectors to the next point of its group. A point stops for good as soon
    as an erasure would break connectivity or topology.
    """
    work = np.pad(raster.as_binary(img), 1)
    groups = []
    for members in eroding_groups(work, cord):
        movers = []
        for ep in members:
            m = _Mover(ep)
            # padded coordinates already: contours were traced on ``work``
            movers.append(m)
        groups.append(movers)
    for _ in range(_cap(img.shape)):
        # an unchanged thinning pass means the skeleton has converged; the
        # result is then a Zhang-Suen fixed point, which makes this idempotent
        if _zs_iteration(work):
            if groups:
                _advance(work, groups)
        elif not _break_squares(work):
            break
    else:
        warnings.warn("unbiased thinning reached its iteration cap", ThinningCapWarning)
    return work[1:-1, 1:-1].copy()
