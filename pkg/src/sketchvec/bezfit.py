"""Piecewise cubic Bezier fitting of pixel paths (Schneider's algorithm).

Each path is fitted by least-squares cubics along fixed end tangents, with
Newton-Raphson reparametrisation between fits. A path that cannot be fitted
within its iteration budget is split at its worst point, with a shared
tangent there so the two halves join with C1 continuity.

The default fitter always tries reparametrisation and stops early once the
error is a small fraction of the target. ``psi_skip=True`` gives the
classical variant, which splits at once when the first fit is far off and
otherwise reparametrises at most a few times.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Schneider's classical iteration cap, used by the psi-skip variant
CLASSIC_ITERATIONS = 4
# seams of closed paths turning more than this stay C0 after relocation
CORNER_ANGLE = math.pi / 4
TANGENT_POINTS = 4
NEWTON_REFINE = 3
HALVINGS = 4
_EPS = 1e-12


@dataclass(frozen=True)
class CubicBezier:
    ctrl: np.ndarray  # (4, 2)

    def __post_init__(self):
        c = np.asarray(self.ctrl, dtype=np.float64).reshape(4, 2)
        c.setflags(write=False)
        object.__setattr__(self, "ctrl", c)
        object.__setattr__(self, "_poly", _power_coefficients(c))

    def __call__(self, t) -> np.ndarray:
        a, b, c, d = self._poly
        t = np.asarray(t, dtype=np.float64)[..., None]
        return ((a * t + b) * t + c) * t + d

    def d1(self, t) -> np.ndarray:
        a, b, c, _ = self._poly
        t = np.asarray(t, dtype=np.float64)[..., None]
        return (3.0 * a * t + 2.0 * b) * t + c

    def d2(self, t) -> np.ndarray:
        a, b, _, _ = self._poly
        t = np.asarray(t, dtype=np.float64)[..., None]
        return 6.0 * a * t + 2.0 * b

    def __eq__(self, other):
        return isinstance(other, CubicBezier) and np.array_equal(self.ctrl, other.ctrl)

    def __hash__(self):
        return hash(self.ctrl.tobytes())


def _power_coefficients(c: np.ndarray) -> np.ndarray:
    """Coefficients (a, b, c, d) of a t^3 + b t^2 + c t + d for control points c."""
    return np.array([
        c[3] - 3.0 * c[2] + 3.0 * c[1] - c[0],
        3.0 * (c[2] - 2.0 * c[1] + c[0]),
        3.0 * (c[1] - c[0]),
        c[0],
    ])


@dataclass(frozen=True)
class BezierSpline:
    segments: tuple[CubicBezier, ...]
    closed: bool = False
    # one flag per joint; for closed splines the last flag is the seam
    c1: tuple[bool, ...] = ()

    def joints(self):
        """Yield (left, right, c1) for every joint."""
        n = len(self.segments)
        pairs = [(i, i + 1) for i in range(n - 1)]
        if self.closed and n:
            pairs.append((n - 1, 0))
        for (a, b), flag in zip(pairs, self.c1):
            yield self.segments[a], self.segments[b], flag

    def sample(self, per_segment: int = 50) -> np.ndarray:
        t = np.linspace(0.0, 1.0, per_segment)
        return np.concatenate([s(t) for s in self.segments]) if self.segments else np.zeros((0, 2))


@dataclass
class FitConfig:
    desired_err: float = 3.0
    iterations_per_pixel: float = 1.0
    early_stop_fraction: float = 0.1
    psi_skip: bool = False
    # points used for the least-squares end tangents of a fresh path
    tangent_window: int = TANGENT_POINTS

    def validate(self) -> None:
        if not self.desired_err > 0:
            raise ValueError("desired_err must be > 0")
        if not 0 < self.early_stop_fraction < 1:
            raise ValueError("early_stop_fraction must lie in (0, 1)")
        if not self.iterations_per_pixel > 0:
            raise ValueError("iterations_per_pixel must be > 0")
        if self.tangent_window < 2:
            raise ValueError("tangent_window must be >= 2")

    @property
    def psi(self) -> float:
        """Iteration error: the classical variant only reparametrises below it."""
        return self.desired_err ** 2


# -- single fits ----------------------------------------------------------------

def chord_params(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    d = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    if d[-1] <= 0:
        return np.linspace(0.0, 1.0, len(pts))
    return d / d[-1]


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = float(np.hypot(*v))
    return v / n if n > _EPS else np.zeros(2)


def heuristic_bezier(p0, p3, t1, t2) -> CubicBezier:
    """Inner controls a third of the chord along each end tangent."""
    p0 = np.asarray(p0, np.float64)
    p3 = np.asarray(p3, np.float64)
    d = float(np.hypot(*(p3 - p0))) / 3.0
    return CubicBezier(np.array([p0, p0 + d * np.asarray(t1), p3 + d * np.asarray(t2), p3]))


def fit_single(points, t_params, tangents) -> CubicBezier:
    """Least-squares cubic with pinned ends and inner controls on the tangents.

    ``tangents`` are unit vectors pointing from each end into the curve.
    Degenerate or non-positive solutions fall back to controls a third of
    the chord along the tangents.
    """
    pts = np.asarray(points, dtype=np.float64)
    u = np.asarray(t_params, dtype=np.float64)
    if len(pts) < 4:
        raise ValueError("fit_single needs at least 4 points")
    if len(u) != len(pts):
        raise ValueError("points and parameters differ in length")
    t1 = np.asarray(tangents[0], np.float64)
    t2 = np.asarray(tangents[1], np.float64)
    p0, p3 = pts[0], pts[-1]
    mt = 1.0 - u
    b0, b1, b2, b3 = mt ** 3, 3 * u * mt ** 2, 3 * u * u * mt, u ** 3
    a1 = b1[:, None] * t1
    a2 = b2[:, None] * t2
    c00 = float((a1 * a1).sum())
    c01 = float((a1 * a2).sum())
    c11 = float((a2 * a2).sum())
    tmp = pts - (np.outer(b0 + b1, p0) + np.outer(b2 + b3, p3))
    x0 = float((a1 * tmp).sum())
    x1 = float((a2 * tmp).sum())
    det = c00 * c11 - c01 * c01
    seg = float(np.hypot(*(p3 - p0)))
    scale = max(c00 * c11, _EPS)
    if abs(det) <= 1e-12 * scale:
        return heuristic_bezier(p0, p3, t1, t2)
    al = (x0 * c11 - x1 * c01) / det
    ar = (c00 * x1 - c01 * x0) / det
    if al < 1e-6 * seg or ar < 1e-6 * seg:
        return heuristic_bezier(p0, p3, t1, t2)
    return CubicBezier(np.array([p0, p0 + al * t1, p3 + ar * t2, p3]))


def _newton(curve: CubicBezier, pts: np.ndarray, u: np.ndarray, gauss: bool = False) -> np.ndarray:
    """One Newton step of ((Q(u) - P) . Q'(u)) = 0 per point.

    With ``gauss`` the second-derivative term is dropped (Gauss-Newton),
    which always gives a descent direction.
    """
    a, b, c, d = curve._poly
    t = u[:, None]
    diff = ((a * t + b) * t + c) * t + d - pts
    q1 = (3.0 * a * t + 2.0 * b) * t + c
    num = (diff * q1).sum(axis=1)
    den = (q1 * q1).sum(axis=1)
    if not gauss:
        den = den + (diff * (6.0 * a * t + 2.0 * b)).sum(axis=1)
    step = np.zeros_like(u)
    ok = np.abs(den) > _EPS
    step[ok] = num[ok] / den[ok]
    return u - step


def max_error(points, t_params, curve: CubicBezier) -> tuple[float, int]:
    """Largest point-to-curve distance and the index where it occurs.

    Distances are taken at each point's parameter and then refined by a few
    safeguarded Newton projections, which never increase them.
    """
    err, k, _ = _measure(np.asarray(points, dtype=np.float64), t_params, curve)
    return err, k


def _measure(pts: np.ndarray, t_params, curve: CubicBezier):
    """``max_error`` plus the first projection, which is the raw reparametrization."""
    u = np.clip(np.asarray(t_params, dtype=np.float64), 0.0, 1.0)
    d, first = None, None
    for i in range(NEWTON_REFINE):
        u, d = _safe_newton(curve, pts, u, d)
        if i == 0:
            first = u
    k = int(np.argmax(d))
    return float(d[k]), k, first


def _safe_newton(curve: CubicBezier, pts: np.ndarray, u: np.ndarray, dist=None):
    """Newton step, halved until it does not move the point away from the curve.

    Points where no halving helps retry with a Gauss-Newton step; points
    where that fails too keep their parameter. Returns the new parameters
    and their distances; ``dist`` may pass in the distances at ``u``.
    """
    if dist is None:
        dist = np.hypot(*(curve(u) - pts).T)
    new = u.copy()
    out = dist.copy()
    todo = np.arange(len(u))
    scales = 0.5 ** np.arange(HALVINGS)[:, None]
    for gauss in (False, True):
        uu, pp, d0 = u[todo], pts[todo], dist[todo]
        step = np.clip(_newton(curve, pp, uu, gauss), 0.0, 1.0) - uu
        # converged points keep their parameter
        moving = np.abs(step) > 1e-12
        todo, uu, pp, d0, step = todo[moving], uu[moving], pp[moving], d0[moving], step[moving]
        m = len(todo)
        if m == 0:
            break
        # all halvings at once; each point takes the first that does not move it away
        cand = uu + scales * step
        dc = np.hypot(*(curve(cand.ravel()) - np.tile(pp, (HALVINGS, 1))).T).reshape(HALVINGS, m)
        ok = dc <= d0
        hit = ok.any(axis=0)
        first = ok.argmax(axis=0)[hit]
        cols = np.flatnonzero(hit)
        new[todo[hit]] = cand[first, cols]
        out[todo[hit]] = dc[first, cols]
        todo = todo[~hit]
        if len(todo) == 0:
            break
    return new, out


def reparametrize(points, t_params, curve: CubicBezier) -> np.ndarray:
    """Newton-refined parameters, clamped to [0, 1] and kept nondecreasing.

    A step that would increase a point's distance to the curve is halved
    until it does not; a point whose steps all fail keeps its parameter.
    """
    pts = np.asarray(points, dtype=np.float64)
    u = np.asarray(t_params, dtype=np.float64)
    new, _ = _safe_newton(curve, pts, u)
    return _monotone(new)


def _monotone(new: np.ndarray) -> np.ndarray:
    """Repair ordering: a point that falls behind its predecessor takes the
    predecessor's parameter."""
    return np.maximum.accumulate(new)


# -- recursive fitting ----------------------------------------------------------

@dataclass
class _Piece:
    curve: CubicBezier
    start: int
    end: int
    err: float
    worst: int  # absolute index of the worst point


def end_tangents(pts: np.ndarray, k: int = TANGENT_POINTS) -> tuple[np.ndarray, np.ndarray]:
    """Inward unit tangents at both ends from a least-squares line fit."""
    return _lsq_dir(pts[:k]), _lsq_dir(pts[::-1][:k])


def _lsq_dir(seg: np.ndarray) -> np.ndarray:
    seg = np.asarray(seg, dtype=np.float64)
    chord = seg[-1] - seg[0]
    if len(seg) < 3:
        return _unit(chord)
    c = seg - seg.mean(axis=0)
    _, _, vt = np.linalg.svd(c, full_matrices=False)
    d = vt[0]
    if np.dot(d, chord) < 0:
        d = -d
    if np.hypot(*chord) <= _EPS:
        return _unit(seg[1] - seg[0])
    return d / np.linalg.norm(d)


def _centre_tangent(pts: np.ndarray, c: int) -> np.ndarray:
    v = _unit(pts[c - 1] - pts[c + 1])
    if not v.any():
        v = _unit(pts[c - 1] - pts[c])
    return v


def _short(pts, t1, t2, offset) -> list[_Piece]:
    curve = heuristic_bezier(pts[0], pts[-1], t1, t2)
    err, k = max_error(pts, chord_params(pts), curve)
    return [_Piece(curve, offset, offset + len(pts) - 1, err, offset + k)]


def _fit(pts, t1, t2, cfg: FitConfig, offset: int = 0) -> list[_Piece]:
    n = len(pts)
    if n <= 3:
        return _short(pts, t1, t2, offset)
    u = chord_params(pts)
    if cfg.psi_skip:
        curve = fit_single(pts, u, (t1, t2))
        err, k = max_error(pts, u, curve)
        if err < cfg.desired_err:
            return [_Piece(curve, offset, offset + n - 1, err, offset + k)]
        if err < cfg.psi:
            for _ in range(CLASSIC_ITERATIONS):
                u = reparametrize(pts, u, curve)
                curve = fit_single(pts, u, (t1, t2))
                err, k = max_error(pts, u, curve)
                if err < cfg.desired_err:
                    return [_Piece(curve, offset, offset + n - 1, err, offset + k)]
        split = k
    else:
        tot_iter = max(1, int(round(cfg.iterations_per_pixel * n)))
        f = cfg.early_stop_fraction
        best = None
        for it in range(1, tot_iter + 1):
            curve = fit_single(pts, u, (t1, t2))
            err, k, proj = _measure(pts, u, curve)
            if best is None or err < best[0]:
                best = (err, k, curve)
            if err < cfg.desired_err * f and it > tot_iter * f:
                return [_Piece(curve, offset, offset + n - 1, err, offset + k)]
            if it < tot_iter:
                # the first error projection is exactly reparametrize(pts, u, curve)
                u = _monotone(proj)
        err, k, curve = best
        if err < cfg.desired_err:
            return [_Piece(curve, offset, offset + n - 1, err, offset + k)]
        split = k
    c = min(max(split, 2), n - 3)
    v = _centre_tangent(pts, c)
    left = _fit(pts[:c + 1], t1, v, cfg, offset)
    right = _fit(pts[c:], -v, t2, cfg, offset + c)
    return left + right


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must have shape (n, 2)")
    return pts


def fit_path(points, cfg: FitConfig | None = None) -> BezierSpline:
    """Fit an open path with C1-joined cubic Bezier segments."""
    cfg = cfg or FitConfig()
    cfg.validate()
    pts = _as_points(points)
    if len(pts) < 2:
        raise ValueError("fit_path needs at least 2 points")
    if len(pts) <= 3:
        t = _unit(pts[-1] - pts[0])
        pieces = _short(pts, t, -t, 0)
    else:
        t1, t2 = end_tangents(pts, cfg.tangent_window)
        pieces = _fit(pts, t1, t2, cfg)
    segs = tuple(p.curve for p in pieces)
    return BezierSpline(segs, False, (True,) * (len(segs) - 1))


def _is_closed(pts: np.ndarray) -> bool:
    return len(pts) >= 4 and float(np.abs(pts[0] - pts[-1]).max()) <= 1.0 + 1e-9


def _fit_loop(pts, cfg, corner_seam: bool):
    """Fit a loop starting and ending at pts[0]; returns pieces and seam flag."""
    ring = np.vstack([pts, pts[:1]])
    if corner_seam:
        t1 = _lsq_dir(ring[:cfg.tangent_window])
        t2 = _lsq_dir(ring[::-1][:cfg.tangent_window])
        turn = math.pi - math.acos(float(np.clip(np.dot(t1, t2), -1.0, 1.0)))
        if turn > CORNER_ANGLE:
            return _fit(ring, t1, t2, cfg), False
    v = _unit(pts[-1] - pts[1])
    if not v.any():
        v = _unit(pts[-1] - pts[0])
    return _fit(ring, -v, v, cfg), True


class ClosedFit(NamedTuple):
    spline: BezierSpline
    first: BezierSpline
    seam: int
    start: int


def fit_closed_path(points, cfg: FitConfig | None = None, return_passes: bool = False):
    """Fit a closed path in two passes.

    The first pass uses point 0 as the seam with C1 imposed there. The point
    of largest error in that fit becomes the seam of the second pass, which
    is kept C0 when the path turns sharply there. The second pass is
    returned unless the first has fewer segments, or as many and a lower
    error.

    With ``return_passes`` a ``ClosedFit`` is returned instead, holding the
    first pass, the relocated seam and the start index of the chosen spline.
    """
    cfg = cfg or FitConfig()
    cfg.validate()
    pts = _as_points(points)
    if not _is_closed(pts):
        raise ValueError("fit_closed_path needs >= 4 points with adjacent first and last")
    first, _ = _fit_loop(pts, cfg, corner_seam=False)
    worst = max(first, key=lambda p: (p.err, -p.worst))
    seam = worst.worst % len(pts)
    second, seam_c1 = _fit_loop(np.roll(pts, -seam, axis=0), cfg, corner_seam=True)
    pass1 = BezierSpline(tuple(p.curve for p in first), True, (True,) * len(first))
    spline = BezierSpline(tuple(p.curve for p in second), True,
                          (True,) * (len(second) - 1) + (seam_c1,))
    e1 = max(p.err for p in first)
    e2 = max(p.err for p in second)
    start = seam
    if (len(first), e1) < (len(second), e2):
        spline, start = pass1, 0
    if return_passes:
        return ClosedFit(spline, pass1, seam, start)
    return spline


def fit_any(points, cfg: FitConfig | None = None, closed: bool = False) -> BezierSpline:
    pts = _as_points(points)
    if closed and _is_closed(pts):
        return fit_closed_path(pts, cfg)
    return fit_path(pts, cfg)


def count_control_points(s: BezierSpline) -> int:
    k = len(s.segments)
    if k == 0:
        return 0
    return 3 * k if s.closed else 4 + 3 * (k - 1)


def joint_angle(left: CubicBezier, right: CubicBezier) -> float:
    """Angle between the incoming leg b3-b2 and the outgoing leg b1-b0."""
    a = left.ctrl[3] - left.ctrl[2]
    b = right.ctrl[1] - right.ctrl[0]
    na, nb = np.hypot(*a), np.hypot(*b)
    if na <= _EPS or nb <= _EPS:
        return 0.0
    return math.acos(float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0)))


def spline_distance(points, s: BezierSpline, per_segment: int | None = None) -> np.ndarray:
    """Distance of each point to a dense polyline sampling of the spline."""
    pts = _as_points(points)
    n = per_segment or max(20, 10 * len(pts) // max(len(s.segments), 1))
    dense = s.sample(n)
    a, b = dense[:-1], dense[1:]
    ab = b - a
    ll = np.maximum((ab * ab).sum(axis=1), _EPS)
    out = np.empty(len(pts))
    for i, p in enumerate(pts):
        t = np.clip(((p - a) * ab).sum(axis=1) / ll, 0.0, 1.0)
        out[i] = np.sqrt((((a + t[:, None] * ab) - p) ** 2).sum(axis=1).min())
    return out
