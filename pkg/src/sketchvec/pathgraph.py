"""Skeleton to path graph: junctions, endpoints and the paths between them,
plus the pruning, merging and endpoint-linking clean-up passes.

Points are ``(x, y)`` integer pixel coordinates. A path's ``ends`` records,
for its first and last point, the id of the junction it is attached to or
``None`` for a free end.
"""
from __future__ import annotations

import json
import math
import heapq
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import raster
from .raster import HitMissMask

STRICT8_MASKS = raster.rotated(HitMissMask.parse(".1.\n.11\n0.."))
JUNCTION_MASKS = raster.rotated(
    HitMissMask.parse(".1.\n010\n101"),
    HitMissMask.parse("10.\n010\n101"),
    HitMissMask.parse(".01\n110\n.1."),
)
ENDPOINT_MASKS = raster.rotated(
    HitMissMask.parse(".1.\n010\n000"),
    HitMissMask.parse("100\n010\n000"),
)

# 4-neighbours before diagonals; (dx, dy)
_STEPS = ((1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (-1, -1), (1, -1))


class Category(str, Enum):
    EE = "EE"
    JE = "JE"
    JJ = "JJ"
    CLOSED = "CLOSED"


@dataclass(frozen=True)
class Path:
    points: tuple[tuple[int, int], ...]
    category: Category
    ends: tuple[int | None, int | None] = (None, None)

    def __len__(self):
        return len(self.points)

    def reversed(self) -> "Path":
        return Path(self.points[::-1], self.category, self.ends[::-1])

    def as_array(self) -> np.ndarray:
        return np.array(self.points, dtype=np.int64).reshape(-1, 2)


@dataclass(frozen=True)
class Junction:
    representative: tuple[int, int]
    members: frozenset


@dataclass(frozen=True)
class PathGraph:
    paths: tuple[Path, ...]
    junctions: tuple[Junction, ...]
    shape: tuple[int, int]  # rows, cols of the source image
    endpoints: tuple[tuple[int, int], ...] = field(default=())

    def degree(self, j: int) -> int:
        return sum((p.ends[0] == j) + (p.ends[1] == j) for p in self.paths)

    def incident(self, j: int) -> list[int]:
        return [i for i, p in enumerate(self.paths) if j in p.ends]

    def skeleton(self) -> np.ndarray:
        """Rasterise paths and junction members back to a binary image."""
        out = np.zeros(self.shape, dtype=bool)
        for p in self.paths:
            a = p.as_array()
            out[a[:, 1], a[:, 0]] = True
        for j in self.junctions:
            for x, y in j.members:
                out[y, x] = True
        return out

    def to_dict(self) -> dict:
        return {
            "height": int(self.shape[0]),
            "width": int(self.shape[1]),
            "paths": [
                {"category": p.category.value,
                 "start_junction": p.ends[0],
                 "end_junction": p.ends[1],
                 "points": [[int(x), int(y)] for x, y in p.points]}
                for p in self.paths
            ],
            "junctions": [
                {"id": k,
                 "representative": [int(v) for v in j.representative],
                 "members": sorted([int(x), int(y)] for x, y in j.members)}
                for k, j in enumerate(self.junctions)
            ],
            "endpoints": [[int(x), int(y)] for x, y in self.endpoints],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def _category(ends, closed=False) -> Category:
    if closed:
        return Category.CLOSED
    n = sum(e is not None for e in ends)
    return (Category.EE, Category.JE, Category.JJ)[n]


def _adjacent(a, b) -> bool:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1


def _representative(members) -> tuple[int, int]:
    return min(members, key=lambda p: (p[1], p[0]))


def to_strict8(skel: np.ndarray) -> np.ndarray:
    """Remove corner pixels of 4-connected elbows until none is left."""
    img = np.pad(raster.as_binary(skel), 1)
    while True:
        before = int(img.sum())
        raster.hit_miss_erode_inplace(img, STRICT8_MASKS)
        if int(img.sum()) == before:
            break
    return img[1:-1, 1:-1].copy()


def build_graph(skel: np.ndarray) -> PathGraph:
    """Split a strictly 8-connected skeleton into paths.

    Walks start from every endpoint, then from every pixel next to a
    junction cluster; pixels left over afterwards belong to closed loops.
    """
    skel = raster.as_binary(skel)
    h, w = skel.shape
    pad = np.pad(skel, 1)
    jmask = raster.hit_miss_scan(pad, JUNCTION_MASKS)[1:-1, 1:-1]
    emask = raster.hit_miss_scan(pad, ENDPOINT_MASKS)[1:-1, 1:-1]

    junctions = []
    owner = {}  # junction pixel -> junction id
    for comp in raster.connected_components(jmask, 8):
        members = frozenset((int(c), int(r)) for r, c in comp.coords)
        k = len(junctions)
        junctions.append(Junction(_representative(members), members))
        for m in members:
            owner[m] = k

    visited = np.zeros_like(skel)
    for m in owner:
        visited[m[1], m[0]] = True

    def fg(p):
        return 0 <= p[0] < w and 0 <= p[1] < h and skel[p[1], p[0]]

    def near_junctions(p):
        out = []
        for dx, dy in _STEPS:
            q = (p[0] + dx, p[1] + dy)
            k = owner.get(q)
            if k is not None and k not in out:
                out.append(k)
        return out

    def walk(start, start_j):
        pts = [start]
        visited[start[1], start[0]] = True
        cur = start
        while True:
            near = near_junctions(cur)
            i = len(pts) - 1
            if start_j is None:
                if near:
                    return pts, near[0]
            else:
                other = [k for k in near if k != start_j]
                if other:
                    return pts, other[0]
                if i >= 2 and start_j in near:
                    return pts, start_j
            nxt = None
            fallback = None
            for dx, dy in _STEPS:
                q = (cur[0] + dx, cur[1] + dy)
                if not fg(q) or visited[q[1], q[0]]:
                    continue
                if start_j is not None and i == 0 and start_j in near_junctions(q):
                    fallback = fallback or q
                    continue
                nxt = q
                break
            nxt = nxt or fallback
            if nxt is None:
                # a dead end that still touches its own junction closes a loop
                return pts, (start_j if start_j in near else None)
            pts.append(nxt)
            visited[nxt[1], nxt[0]] = True
            cur = nxt

    paths: list[Path] = []
    endpoints = [(int(c), int(r)) for r, c in np.argwhere(emask)]
    for e in endpoints:
        if visited[e[1], e[0]]:
            continue
        pts, end_j = walk(e, None)
        ends = (None, end_j)
        paths.append(Path(tuple(pts), _category(ends), ends))

    for k, j in enumerate(junctions):
        for m in sorted(j.members, key=lambda p: (p[1], p[0])):
            for dx, dy in _STEPS:
                q = (m[0] + dx, m[1] + dy)
                if not fg(q) or visited[q[1], q[0]]:
                    continue
                pts, end_j = walk(q, k)
                ends = (k, end_j)
                paths.append(Path(tuple(pts), _category(ends), ends))

    for r, c in np.argwhere(skel & ~visited):
        if visited[r, c]:
            continue
        start = (int(c), int(r))
        fwd, _ = walk(start, None)
        # try extending backwards from the start for open leftovers
        back, _ = _walk_back(start, fg, visited)
        pts = back[::-1] + fwd
        closed = len(pts) >= 4 and _adjacent(pts[0], pts[-1])
        paths.append(Path(tuple(pts), _category((None, None), closed), (None, None)))

    return PathGraph(tuple(paths), tuple(junctions), (h, w), tuple(endpoints))


def _walk_back(start, fg, visited):
    pts = []
    cur = start
    while True:
        nxt = None
        for dx, dy in _STEPS:
            q = (cur[0] + dx, cur[1] + dy)
            if fg(q) and not visited[q[1], q[0]]:
                nxt = q
                break
        if nxt is None:
            return pts, None
        pts.append(nxt)
        visited[nxt[1], nxt[0]] = True
        cur = nxt


def skeleton_to_graph(skel: np.ndarray) -> PathGraph:
    return build_graph(to_strict8(skel))


# -- helpers for rewriting graphs ----------------------------------------------

def _seg_dist(p, a, b) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    ll = dx * dx + dy * dy
    t = 0.0 if ll == 0 else max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / ll))
    return math.hypot(p[0] - ax - t * dx, p[1] - ay - t * dy)


def _chain(members, starts, goals, a=None, b=None):
    """Shortest 8-connected chain inside ``members`` from a start to a goal.

    Ties between chains of equal length go to the one hugging segment a-b.
    """
    members = set(members)
    starts = [s for s in starts if s in members]
    goals = set(goals) & members
    if not starts or not goals:
        return []

    def bias(p):
        return 0.0 if a is None else 1e-3 * _seg_dist(p, a, b)

    best = {}
    prev = {}
    heap = []
    for s in starts:
        c = 1.0 + bias(s)
        best[s] = c
        prev[s] = None
        heapq.heappush(heap, (c, s[1], s[0]))
    while heap:
        c, y, x = heapq.heappop(heap)
        cur = (x, y)
        if c > best[cur]:
            continue
        if cur in goals:
            out = []
            while cur is not None:
                out.append(cur)
                cur = prev[cur]
            return out[::-1]
        for dx, dy in _STEPS:
            q = (cur[0] + dx, cur[1] + dy)
            if q not in members:
                continue
            nc = c + 1.0 + bias(q)
            if nc < best.get(q, math.inf):
                best[q] = nc
                prev[q] = cur
                heapq.heappush(heap, (nc, q[1], q[0]))
    return []


def _touching(members, p):
    return [m for m in members if _adjacent(m, p)]


def line_pixels(a, b) -> list[tuple[int, int]]:
    """8-connected raster line from a to b, both included (Bresenham)."""
    x0, y0 = int(a[0]), int(a[1])
    x1, y1 = int(b[0]), int(b[1])
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    out = [(x0, y0)]
    while (x0, y0) != (x1, y1):
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy
        out.append((x0, y0))
    return out


def _orient_to(path: Path, j: int, at_end: bool) -> Path:
    """Orient ``path`` so its end (``at_end``) or start touches junction j."""
    if at_end:
        return path if path.ends[1] == j else path.reversed()
    return path if path.ends[0] == j else path.reversed()


def _rebuild(paths, junctions, shape, endpoints=None) -> PathGraph:
    """Drop unused junctions and renumber attachments."""
    used = sorted({e for p in paths for e in p.ends if e is not None})
    remap = {old: new for new, old in enumerate(used)}
    new_paths = []
    for p in paths:
        ends = tuple(remap.get(e) if e is not None else None for e in p.ends)
        cat = p.category if p.category == Category.CLOSED else _category(ends)
        new_paths.append(Path(p.points, cat, ends))
    new_j = tuple(junctions[k] for k in used)
    if endpoints is None:
        endpoints = []
        for p in new_paths:
            if p.category == Category.CLOSED:
                continue
            if p.ends[0] is None:
                endpoints.append(p.points[0])
            if p.ends[1] is None and len(p) > 1:
                endpoints.append(p.points[-1])
    return PathGraph(tuple(new_paths), new_j, shape, tuple(endpoints))


def _dissolve(paths: list[Path], junctions):
    """Remove junctions of degree 1 or 2, joining their remaining paths.

    Returns ``(paths, changed)``.
    """
    changed = False
    for j in range(len(junctions)):
        inc = [i for i, p in enumerate(paths) if p is not None and j in p.ends]
        deg = sum((paths[i].ends[0] == j) + (paths[i].ends[1] == j) for i in inc)
        if deg not in (1, 2):
            continue
        members = junctions[j].members
        if deg == 1:
            i = inc[0]
            p = _orient_to(paths[i], j, at_end=True)
            rep = junctions[j].representative
            chain = _chain(members, _touching(members, p.points[-1]), [rep], p.points[-1], rep)
            ends = (p.ends[0], None)
            paths[i] = Path(p.points + tuple(chain), _category(ends), ends)
            changed = True
        elif deg == 2 and len(inc) == 1:
            # a loop through the junction closes on itself
            i = inc[0]
            p = _orient_to(paths[i], j, at_end=True)
            chain = _chain(members, _touching(members, p.points[-1]), _touching(members, p.points[0]),
                           p.points[-1], p.points[0])
            paths[i] = Path(p.points + tuple(chain), Category.CLOSED, (None, None))
            changed = True
        elif deg == 2:
            a = _orient_to(paths[inc[0]], j, at_end=True)
            b = _orient_to(paths[inc[1]], j, at_end=False)
            chain = _chain(members, _touching(members, a.points[-1]), _touching(members, b.points[0]),
                           a.points[-1], b.points[0])
            ends = (a.ends[0], b.ends[1])
            paths[inc[0]] = Path(a.points + tuple(chain) + b.points, _category(ends), ends)
            paths[inc[1]] = None
            changed = True
    return [p for p in paths if p is not None], changed


def _prune_once(g: PathGraph, t: int) -> PathGraph:
    paths = list(g.paths)
    while True:
        keep = [p for p in paths
                if not (p.category in (Category.EE, Category.JE) and len(p) < t)]
        removed = len(keep) != len(paths)
        paths, changed = _dissolve(keep, g.junctions)
        if not (removed or changed):
            break
    return _rebuild(paths, g.junctions, g.shape)


def prune(g: PathGraph, max_len: int = 10, iterative: bool = True) -> PathGraph:
    """Remove EE and JE branches shorter than ``max_len`` points.

    JJ and closed paths are never removed. Junctions left with fewer than
    three path ends are dissolved into the remaining paths. With
    ``iterative``, thresholds 1..max_len are applied in turn.
    """
    if max_len < 0:
        raise ValueError("max_len must be >= 0")
    thresholds = range(1, max_len + 1) if iterative else [max_len]
    for t in thresholds:
        g = _prune_once(g, t)
    return g


# -- merging -------------------------------------------------------------------

def _resample(pts: np.ndarray, m: int) -> np.ndarray:
    pts = pts.astype(np.float64)
    if len(pts) == 1 or m == 1:
        return np.repeat(pts[:1], m, axis=0)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return np.repeat(pts[:1], m, axis=0)
    u = np.linspace(0.0, s[-1], m)
    return np.stack([np.interp(u, s, pts[:, 0]), np.interp(u, s, pts[:, 1])], axis=1)


def mean_parallel_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Mean pointwise distance after arc-length resampling to the shorter length."""
    m = min(len(a), len(b))
    ra, rb = _resample(a, m), _resample(b, m)
    return float(np.hypot(*(ra - rb).T).mean())


def _polyline_pixels(pts) -> list[tuple[int, int]]:
    out: list[tuple[int, int]] = []
    for a, b in zip(pts, pts[1:]):
        seg = line_pixels(a, b)
        out.extend(seg if not out else seg[1:])
    if not out and len(pts):
        out = [tuple(int(v) for v in pts[0])]
    return out


def _clip_to_junctions(pts, ja: Junction, jb: Junction):
    """Drop junction pixels and reconnect both ends to their clusters."""
    banned = ja.members | jb.members
    pts = [p for p in pts if p not in banned]
    # collapse duplicates
    dedup = []
    for p in pts:
        if not dedup or dedup[-1] != p:
            dedup.append(p)
    pts = dedup
    if not pts:
        return pts
    for jn, front in ((ja, True), (jb, False)):
        end = pts[0] if front else pts[-1]
        if any(_adjacent(m, end) for m in jn.members):
            continue
        near = min(jn.members, key=lambda m: (math.hypot(m[0] - end[0], m[1] - end[1]), m[1], m[0]))
        link = [q for q in line_pixels(near, end)[1:-1] if q not in banned]
        pts = (link + pts) if front else (pts + link[::-1])
    return pts


def _merge_junctions(paths, junctions, radius):
    n = len(junctions)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for p in paths:
        a, b = p.ends
        if p.category == Category.JJ and a != b:
            ra, rb = junctions[a].representative, junctions[b].representative
            if math.hypot(ra[0] - rb[0], ra[1] - rb[1]) <= radius:
                parent[find(a)] = find(b)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    if all(len(v) == 1 for v in groups.values()):
        return paths, junctions, False
    new_id = {}
    members_of = {}
    for root, ids in groups.items():
        members = set()
        for i in ids:
            members |= junctions[i].members
        members_of[root] = members
    kept = []
    for p in paths:
        a, b = p.ends
        if (p.category == Category.JJ and find(a) == find(b) and a != b
                and len(p) <= 2 * radius):
            members_of[find(a)] |= set(p.points)
            continue
        kept.append(p)
    order = sorted(groups)
    new_junctions = []
    for root in order:
        members = frozenset(members_of[root])
        cx = sum(m[0] for m in members) / len(members)
        cy = sum(m[1] for m in members) / len(members)
        rep = min(members, key=lambda m: ((m[0] - cx) ** 2 + (m[1] - cy) ** 2, m[1], m[0]))
        new_id[root] = len(new_junctions)
        new_junctions.append(Junction(rep, members))
    out = []
    for p in kept:
        ends = tuple(new_id[find(e)] if e is not None else None for e in p.ends)
        cat = p.category if p.category == Category.CLOSED else _category(ends)
        out.append(Path(p.points, cat, ends))
    return out, new_junctions, True


def _merge_parallel(paths, junctions, gap):
    changed = False
    while True:
        done = True
        for i in range(len(paths)):
            p = paths[i]
            if p.category != Category.JJ or p.ends[0] == p.ends[1]:
                continue
            for k in range(i + 1, len(paths)):
                q = paths[k]
                if q.category != Category.JJ or set(q.ends) != set(p.ends):
                    continue
                q2 = q if q.ends == p.ends else q.reversed()
                a, b = p.as_array(), q2.as_array()
                if mean_parallel_distance(a, b) > gap:
                    continue
                m = min(len(a), len(b))
                avg = np.rint((_resample(a, m) + _resample(b, m)) / 2.0).astype(int)
                pts = _polyline_pixels([tuple(v) for v in avg])
                pts = _clip_to_junctions(pts, junctions[p.ends[0]], junctions[p.ends[1]])
                if not pts:
                    continue
                paths[i] = Path(tuple(pts), Category.JJ, p.ends)
                del paths[k]
                changed = True
                done = False
                break
            if not done:
                break
        if done:
            return paths, changed


def merge(g: PathGraph, junction_radius: float = 4, parallel_gap: float = 3) -> PathGraph:
    """Fuse nearby junctions and near-duplicate parallel paths.

    Junctions joined by a JJ path whose representatives lie within
    ``junction_radius`` collapse into one (short connecting paths are
    absorbed into its members). Path pairs joining the same two junctions
    are replaced by their pointwise average when their mean distance is at
    most ``parallel_gap``. Junctions left with degree two are dissolved.
    """
    if junction_radius < 0 or parallel_gap < 0:
        raise ValueError("radii must be >= 0")
    paths = list(g.paths)
    junctions = list(g.junctions)
    any_change = False
    while True:
        paths, junctions, c1 = _merge_junctions(paths, junctions, junction_radius)
        paths, c2 = _merge_parallel(paths, junctions, parallel_gap)
        paths, c3 = _dissolve(paths, junctions)
        if not (c1 or c2 or c3):
            break
        any_change = True
    if not any_change:
        return g
    return _rebuild(paths, junctions, g.shape)


# -- endpoint linking ----------------------------------------------------------

TANGENT_WINDOW = 5


def end_tangent(points, at_end: bool, window: int = TANGENT_WINDOW) -> np.ndarray | None:
    """Outward unit direction at one end of a path from a least-squares line."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        return None
    seg = pts[-window:] if at_end else pts[:window][::-1]
    c = seg - seg.mean(axis=0)
    _, _, vt = np.linalg.svd(c, full_matrices=False)
    d = vt[0]
    out = seg[-1] - seg[0]
    if np.dot(d, out) < 0:
        d = -d
    return d / np.linalg.norm(d)


def _angle(u, v) -> float:
    c = float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
    return math.acos(max(-1.0, min(1.0, c)))


def link_endpoints(g: PathGraph, max_dist: float = 10, max_angle: float = math.radians(30)) -> PathGraph:
    """Join free path ends that are close and point at each other.

    Candidate pairs come from distinct paths, lie within ``max_dist``, and have
    both outward tangents within ``max_angle`` of the connecting segment.
    Pairs are taken greedily nearest-first; each end links at most once.
    """
    if max_dist < 0 or max_angle < 0:
        raise ValueError("thresholds must be >= 0")
    paths = list(g.paths)
    ends = []  # (path index, at_end, point, tangent)
    for i, p in enumerate(paths):
        if p.category == Category.CLOSED or len(p) < 2:
            continue
        for at_end in (False, True):
            if p.ends[int(at_end)] is None:
                ends.append((i, at_end, np.array(p.points[-1 if at_end else 0], float),
                             end_tangent(p.points, at_end)))
    cands = []
    for a in range(len(ends)):
        for b in range(a + 1, len(ends)):
            ia, ea, pa, ta = ends[a]
            ib, eb, pb, tb = ends[b]
            if ia == ib:
                continue
            v = pb - pa
            d = float(np.hypot(*v))
            if d == 0 or d > max_dist:
                continue
            if _angle(ta, v) <= max_angle and _angle(tb, -v) <= max_angle:
                cands.append((d, a, b))
    if not cands:
        return g
    cands.sort()
    parent = list(range(len(paths)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    used = set()
    links = {}  # (path, at_end) -> (path, at_end)
    for d, a, b in cands:
        if a in used or b in used:
            continue
        ia, ea = ends[a][0], ends[a][1]
        ib, eb = ends[b][0], ends[b][1]
        if find(ia) == find(ib):
            continue
        parent[find(ia)] = find(ib)
        used |= {a, b}
        links[(ia, ea)] = (ib, eb)
        links[(ib, eb)] = (ia, ea)

    consumed = set()
    out = []
    for i, p in enumerate(paths):
        if i in consumed:
            continue
        if (i, False) in links and (i, True) in links:
            continue  # interior of a chain; assembled from a chain end
        if (i, False) not in links and (i, True) not in links:
            out.append(p)
            consumed.add(i)
            continue
        # start a chain at the unlinked side of p
        cur = p if (i, True) in links else p.reversed()
        ci, at_end = i, (i, True) in links
        pts = list(cur.points)
        first_end = cur.ends[0]
        consumed.add(i)
        while (ci, at_end) in links:
            ni, n_end = links[(ci, at_end)]
            nxt = paths[ni] if not n_end else paths[ni].reversed()
            conn = line_pixels(pts[-1], nxt.points[0])[1:-1]
            pts += conn + list(nxt.points)
            consumed.add(ni)
            ci, at_end = ni, not n_end
            last_end = nxt.ends[1]
        new_ends = (first_end, last_end)
        out.append(Path(tuple(pts), _category(new_ends), new_ends))
    return _rebuild(out, list(g.junctions), g.shape)


# -- fitting support -------------------------------------------------------------

def points_for_fitting(g: PathGraph, i: int) -> np.ndarray:
    """Path points extended to the representatives of attached junctions."""
    p = g.paths[i]
    pts = list(p.points)
    if p.ends[0] is not None:
        rep = g.junctions[p.ends[0]].representative
        pts = line_pixels(rep, pts[0])[:-1] + pts
    if p.ends[1] is not None:
        rep = g.junctions[p.ends[1]].representative
        pts = pts + line_pixels(pts[-1], rep)[1:]
    return np.array(pts, dtype=np.int64).reshape(-1, 2)


def vectorize_skeleton(skel, prune_len=10, iterative=True, junction_radius=4,
                       parallel_gap=3, link_dist=10, link_angle=math.radians(30)) -> PathGraph:
    """Strict-8 conversion, graph construction and the three clean-up passes."""
    g = skeleton_to_graph(skel)
    g = prune(g, prune_len, iterative)
    g = merge(g, junction_radius, parallel_gap)
    g = link_endpoints(g, link_dist, link_angle)
    return g
