"""Synthetic corrupted sketches and extraction-quality metrics.

``corrupt`` re-draws a clean line drawing as a pencil-like sketch: the
drawing is cut into stroke portions, each rendered with a Gaussian cross
profile of random width and darkness, possibly several times with small
offsets, with random gaps, on a textured and noisy paper.

Metrics compare binary masks with a pixel tolerance and skeletons by their
mean nearest-pixel distance.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import cv2
import numpy as np
from scipy import ndimage as ndi
from scipy.spatial import cKDTree

from . import pathgraph as pg
from . import raster, thin

# profile radius, in Gaussian sigmas, beyond which ink is not rendered
_PROFILE_CUTOFF = 3.0
# sampling step along rendered polylines (pixels)
_SAMPLE_STEP = 0.25
_FWHM = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass
class CorruptionConfig:
    seed: int = 0
    width_range: tuple[float, float] = (2.0, 6.0)
    intensity_range: tuple[float, float] = (0.35, 0.9)
    overdraw_range: tuple[int, int] = (1, 2)
    break_prob: float = 0.15
    break_len_range: tuple[float, float] = (2.0, 5.0)
    jitter: float = 0.7
    noise_sigma: float = 0.03
    texture_amp: float = 0.06
    texture_scale: float = 40.0
    # stroke portions are cut to lengths in this range (pixels)
    portion_range: tuple[float, float] = (30.0, 120.0)
    # rescale so the output has about this many megapixels; None keeps the size
    target_megapixels: float | None = None

    def validate(self) -> None:
        for name in ("width_range", "intensity_range", "overdraw_range",
                     "break_len_range", "portion_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name} is empty")
        if self.width_range[0] <= 0:
            raise ValueError("stroke widths must be positive")
        if not (0 <= self.intensity_range[0] and self.intensity_range[1] <= 1):
            raise ValueError("intensities must lie in [0, 1]")
        if self.overdraw_range[0] < 1:
            raise ValueError("at least one pass per stroke")
        if not 0 <= self.break_prob <= 1:
            raise ValueError("break_prob must lie in [0, 1]")
        if self.portion_range[0] <= 0:
            raise ValueError("portion lengths must be positive")
        for name in ("jitter", "noise_sigma", "texture_amp", "break_len_range"):
            v = getattr(self, name)
            if min(np.atleast_1d(v)) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.texture_scale <= 0:
            raise ValueError("texture_scale must be positive")
        if self.target_megapixels is not None and self.target_megapixels <= 0:
            raise ValueError("target_megapixels must be positive")

    @classmethod
    def clean(cls, width: float = 3.0, seed: int = 0) -> "CorruptionConfig":
        """Single black pass of fixed width, no breaks, jitter, noise or texture."""
        return cls(seed=seed, width_range=(width, width), intensity_range=(1.0, 1.0),
                   overdraw_range=(1, 1), break_prob=0.0, jitter=0.0,
                   noise_sigma=0.0, texture_amp=0.0)


# -- stroke geometry ----------------------------------------------------------

def stroke_polylines(gt: np.ndarray) -> list[np.ndarray]:
    """Centreline polylines ``(n, 2)`` in (x, y) of a clean line drawing."""
    skel = pg.to_strict8(thin.zhang_suen_thin(raster.as_binary(gt)))
    g = pg.build_graph(skel)
    out = []
    for i, p in enumerate(g.paths):
        pts = p.as_array() if p.category == pg.Category.CLOSED else pg.points_for_fitting(g, i)
        if p.category == pg.Category.CLOSED:
            pts = np.vstack([pts, pts[:1]])
        out.append(pts.astype(np.float64))
    # isolated junction clusters with no paths still carry ink
    for k, j in enumerate(g.junctions):
        if g.degree(k) == 0:
            out.append(np.array([j.representative], dtype=np.float64))
    return out


def _arclength(pts: np.ndarray) -> np.ndarray:
    if len(pts) < 2:
        return np.zeros(len(pts))
    return np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])


def _resample(pts: np.ndarray, step: float) -> np.ndarray:
    s = _arclength(pts)
    if len(pts) < 2 or s[-1] == 0:
        return pts[:1].copy()
    u = np.linspace(0.0, s[-1], max(2, int(math.ceil(s[-1] / step)) + 1))
    return np.stack([np.interp(u, s, pts[:, 0]), np.interp(u, s, pts[:, 1])], axis=1)


def _portions(pts: np.ndarray, rng, lo: float, hi: float) -> list[np.ndarray]:
    """Cut a polyline into consecutive pieces of random arc length."""
    s = _arclength(pts)
    total = s[-1] if len(s) else 0.0
    if total <= hi:
        return [pts]
    cuts = [0.0]
    while cuts[-1] + hi < total:
        cuts.append(cuts[-1] + rng.uniform(lo, hi))
    cuts.append(total)
    out = []
    for a, b in zip(cuts, cuts[1:]):
        keep = (s >= a) & (s <= b)
        idx = np.flatnonzero(keep)
        if len(idx) == 0:
            continue
        lo_i, hi_i = max(idx[0] - 1, 0), min(idx[-1] + 1, len(pts) - 1)
        out.append(pts[lo_i:hi_i + 1])
    return out


def _break(pts: np.ndarray, rng, length: float) -> list[np.ndarray]:
    """Remove a gap of the given arc length at a random place."""
    dense = _resample(pts, _SAMPLE_STEP)
    s = _arclength(dense)
    total = s[-1] if len(s) else 0.0
    if total <= length + 2.0:
        return [pts]
    a = rng.uniform(1.0, total - length - 1.0)
    return [dense[s < a], dense[s > a + length]]


def _smooth_jitter(n: int, rng, amp: float, corr: float = 20.0) -> np.ndarray:
    """Smooth offsets along a polyline: a random shift plus a slow wobble."""
    if amp <= 0 or n == 0:
        return np.zeros((n, 2))
    shift = rng.normal(0.0, amp, 2)
    white = rng.normal(0.0, 1.0, (n, 2))
    sig = corr / _SAMPLE_STEP
    wobble = ndi.gaussian_filter1d(white, sig, axis=0, mode="nearest")
    std = wobble.std(axis=0)
    std[std == 0] = 1.0
    return shift + 0.5 * amp * wobble / std


def _render(canvas: np.ndarray, pts: np.ndarray, width: float, intensity: float) -> None:
    """Multiply ``canvas`` (ink transmission) by one Gaussian-profile stroke."""
    h, w = canvas.shape
    sigma = width / _FWHM
    reach = _PROFILE_CUTOFF * sigma + 1.0
    x0 = max(int(math.floor(pts[:, 0].min() - reach)), 0)
    x1 = min(int(math.ceil(pts[:, 0].max() + reach)) + 1, w)
    y0 = max(int(math.floor(pts[:, 1].min() - reach)), 0)
    y1 = min(int(math.ceil(pts[:, 1].max() + reach)) + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    grid = np.stack([xx.ravel(), yy.ravel()], axis=1).astype(np.float64)
    d, _ = cKDTree(pts).query(grid, distance_upper_bound=reach)
    ink = np.zeros(len(grid))
    ok = np.isfinite(d)
    ink[ok] = intensity * np.exp(-0.5 * (d[ok] / sigma) ** 2)
    canvas[y0:y1, x0:x1] *= 1.0 - ink.reshape(y1 - y0, x1 - x0)


def _rescale(gt: np.ndarray, target_mp: float | None) -> np.ndarray:
    if target_mp is None:
        return gt
    h, w = gt.shape
    f = math.sqrt(target_mp * 1e6 / (h * w))
    if abs(f - 1.0) < 1e-3:
        return gt
    size = (max(1, int(round(w * f))), max(1, int(round(h * f))))
    out = cv2.resize(gt.astype(np.uint8), size, interpolation=cv2.INTER_NEAREST)
    return out.astype(bool)


def corrupt(gt: np.ndarray, cfg: CorruptionConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Render a clean mask as a noisy sketch.

    Returns ``(gray, gt)`` with ``gray`` quantised to 8-bit levels in [0, 1]
    (dark strokes on light paper) and ``gt`` the possibly rescaled mask.
    """
    cfg = cfg or CorruptionConfig()
    cfg.validate()
    gt = _rescale(raster.as_binary(gt), cfg.target_megapixels)
    rng = np.random.default_rng(cfg.seed)
    h, w = gt.shape
    trans = np.ones((h, w), dtype=np.float64)
    t_lo, t_hi = cfg.intensity_range
    for line in stroke_polylines(gt):
        for piece in _portions(line, rng, *cfg.portion_range):
            width = rng.uniform(*cfg.width_range)
            intensity = rng.uniform(t_lo, t_hi)
            passes = int(rng.integers(cfg.overdraw_range[0], cfg.overdraw_range[1] + 1))
            parts = [piece]
            if rng.random() < cfg.break_prob:
                parts = _break(piece, rng, rng.uniform(*cfg.break_len_range))
            for part in parts:
                if len(part) == 0:
                    continue
                dense = _resample(part, _SAMPLE_STEP)
                for _ in range(passes):
                    off = _smooth_jitter(len(dense), rng, cfg.jitter)
                    _render(trans, dense + off, width, intensity)
    paper = np.ones((h, w))
    if cfg.texture_amp > 0:
        tex = ndi.gaussian_filter(rng.normal(0.0, 1.0, (h, w)), cfg.texture_scale, mode="wrap")
        tex /= max(float(np.abs(tex).max()), 1e-12)
        paper -= cfg.texture_amp * 0.5 * (tex + 1.0)
    img = paper * trans
    if cfg.noise_sigma > 0:
        img = img + rng.normal(0.0, cfg.noise_sigma, (h, w))
    img = np.rint(np.clip(img, 0.0, 1.0) * 255.0) / 255.0
    return img, gt


# -- synthetic ground truth ----------------------------------------------------

def synthetic_drawing(seed: int, shape=(1000, 1000), n_strokes: int = 10, thickness: int = 2) -> np.ndarray:
    """A clean random line drawing: curves, ellipses and polygons."""
    rng = np.random.default_rng(seed)
    h, w = shape
    img = np.zeros((h, w), dtype=np.uint8)
    margin = 0.08 * min(h, w)
    for _ in range(n_strokes):
        kind = rng.choice(["curve", "curve", "ellipse", "polygon", "line"])
        if kind == "curve":
            c = rng.uniform([margin, margin], [w - margin, h - margin], (4, 2))
            t = np.linspace(0, 1, 200)[:, None]
            pts = ((1 - t) ** 3 * c[0] + 3 * t * (1 - t) ** 2 * c[1]
                   + 3 * t * t * (1 - t) * c[2] + t ** 3 * c[3])
            cv2.polylines(img, [np.rint(pts).astype(np.int32)], False, 1, thickness)
        elif kind == "ellipse":
            centre = rng.uniform([2 * margin, 2 * margin], [w - 2 * margin, h - 2 * margin])
            axes = rng.uniform(0.05, 0.2, 2) * min(h, w)
            cv2.ellipse(img, (int(centre[0]), int(centre[1])), (int(axes[0]), int(axes[1])),
                        float(rng.uniform(0, 180)), 0.0, 360.0, 1, thickness)
        elif kind == "polygon":
            centre = rng.uniform([2 * margin, 2 * margin], [w - 2 * margin, h - 2 * margin])
            k = int(rng.integers(3, 6))
            ang = np.sort(rng.uniform(0, 2 * np.pi, k))
            r = rng.uniform(0.05, 0.18) * min(h, w)
            pts = centre + r * np.stack([np.cos(ang), np.sin(ang)], axis=1)
            cv2.polylines(img, [np.rint(pts).astype(np.int32)], True, 1, thickness)
        else:
            a = rng.uniform([margin, margin], [w - margin, h - margin])
            b = rng.uniform([margin, margin], [w - margin, h - margin])
            cv2.line(img, (int(a[0]), int(a[1])), (int(b[0]), int(b[1])), 1, thickness)
    return img.astype(bool)


# -- metrics ------------------------------------------------------------------------

def _check_pair(a: np.ndarray, b: np.ndarray):
    a = raster.as_binary(a)
    b = raster.as_binary(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def distance_to(mask: np.ndarray) -> np.ndarray:
    """Euclidean distance of every pixel to the nearest foreground pixel of ``mask``."""
    if not mask.any():
        return np.full(mask.shape, np.inf)
    return ndi.distance_transform_edt(~mask)


def precision_recall(pred: np.ndarray, gt: np.ndarray, tolerance: float = 3.0) -> tuple[float, float]:
    """Tolerant pixel precision and recall.

    An empty prediction has precision 1 (it claims nothing); an empty ground
    truth likewise has recall 1.
    """
    pred, gt = _check_pair(pred, gt)
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    precision = float((distance_to(gt)[pred] <= tolerance).mean()) if pred.any() else 1.0
    recall = float((distance_to(pred)[gt] <= tolerance).mean()) if gt.any() else 1.0
    return precision, recall


def f_measure(precision: float, recall: float) -> float:
    s = precision + recall
    return 0.0 if s <= 0 else 2.0 * precision * recall / s


def centerline_distance(pred_skel: np.ndarray, gt_skel: np.ndarray) -> float:
    """Symmetrised mean nearest-pixel distance between two skeletons."""
    pred_skel, gt_skel = _check_pair(pred_skel, gt_skel)
    if not pred_skel.any() or not gt_skel.any():
        raise ValueError("centerline_distance needs two non-empty skeletons")
    a = float(distance_to(gt_skel)[pred_skel].mean())
    b = float(distance_to(pred_skel)[gt_skel].mean())
    return 0.5 * (a + b)


# -- reports ------------------------------------------------------------------

CSV_FIELDS = ("image", "precision", "recall", "f_measure", "centerline_distance")


@dataclass
class EvalRow:
    image: str
    precision: float
    recall: float
    f_measure: float
    centerline_distance: float


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)

    def _mean(self, name: str) -> float:
        # an empty prediction has infinite centreline distance, and so does the mean
        vals = [getattr(r, name) for r in self.rows]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def precision(self) -> float:
        return self._mean("precision")

    @property
    def recall(self) -> float:
        return self._mean("recall")

    @property
    def f_measure(self) -> float:
        return self._mean("f_measure")

    @property
    def centerline_distance(self) -> float:
        return self._mean("centerline_distance")

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_FIELDS)
        for r in self.rows:
            wr.writerow([r.image] + [f"{getattr(r, k):.6f}" for k in CSV_FIELDS[1:]])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "images": len(self.rows),
            "precision": round(self.precision, 6),
            "recall": round(self.recall, 6),
            "f_measure": round(self.f_measure, 6),
            "centerline_distance": round(self.centerline_distance, 6),
        }

    def to_json(self) -> str:
        return json.dumps({"summary": self.summary(), "rows": [asdict(r) for r in self.rows]},
                          indent=1, sort_keys=True)


def evaluate(name: str, pred_mask: np.ndarray, pred_skel: np.ndarray, gt: np.ndarray,
             tolerance: float = 3.0, gt_skel: np.ndarray | None = None) -> EvalRow:
    """One report row: tolerant precision/recall of the mask, centreline distance of skeletons."""
    p, r = precision_recall(pred_mask, gt, tolerance)
    if gt_skel is None:
        gt_skel = thin.zhang_suen_thin(gt)
    try:
        cd = centerline_distance(pred_skel, gt_skel)
    except ValueError:
        cd = float("inf")
    return EvalRow(name, p, r, f_measure(p, r), cd)
