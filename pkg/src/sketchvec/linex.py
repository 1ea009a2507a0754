"""Line extraction by multi-scale Pearson correlation with Gaussian dot kernels.

The input sketch is inverted (dark strokes become high values) and correlated
with a pyramid of isotropic Gaussian "dot" templates. Per pixel, the layer
response of largest magnitude is kept, thresholded, and the resulting mask is
cleaned with component-level filters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage as ndi

from . import raster

# Windows whose centred sum of squares is below this (relative to the window
# size) are treated as flat.
_FLAT_EPS = 1e-12


def next_odd(x: float) -> int:
    """Smallest odd integer >= x."""
    n = math.ceil(x - 1e-9)
    return n if n % 2 else n + 1


@dataclass(frozen=True)
class DotKernel:
    sigma: float
    size: int
    weights: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def make(cls, sigma: float) -> "DotKernel":
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        size = next_odd(7.0 * sigma)
        g = _gauss1d(sigma, size)
        w = np.outer(g, g)
        w.setflags(write=False)
        return cls(sigma, size, w)

    @property
    def profile(self) -> np.ndarray:
        return _gauss1d(self.sigma, self.size)


def _gauss1d(sigma: float, size: int) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    return np.exp(-x * x / (2.0 * sigma * sigma)) / (sigma * math.sqrt(2.0 * math.pi))


@dataclass(frozen=True)
class KernelPyramid:
    w_min: float
    w_max: float
    base: float
    kernels: tuple[DotKernel, ...]

    @classmethod
    def make(cls, w_min: float, w_max: float, base: float = 2.0) -> "KernelPyramid":
        if not 0 < w_min <= w_max:
            raise ValueError("need 0 < w_min <= w_max")
        if base <= 1:
            raise ValueError("pyramid base must be > 1")
        count = int(math.floor(math.log(w_max / w_min, base) + 1e-9)) + 1
        sigma0 = w_min / 3.0
        kernels = tuple(DotKernel.make(sigma0 * base ** i) for i in range(count))
        return cls(w_min, w_max, base, kernels)

    @property
    def sigmas(self) -> list[float]:
        return [k.sigma for k in self.kernels]

    @property
    def max_size(self) -> int:
        return max(k.size for k in self.kernels)

    def __len__(self):
        return len(self.kernels)


@dataclass
class LinexConfig:
    w_min: float = 2.0
    w_max: float = 8.0
    base: float = 2.0
    mpcc_threshold: float = 0.1
    min_component_size: int = 20
    median_window: int = 21
    # components must also be darker than this many robust noise sigmas
    noise_floor: float = 3.0
    fill_holes: bool = True

    def validate(self) -> None:
        if not 0 < self.w_min <= self.w_max:
            raise ValueError("need 0 < w_min <= w_max")
        if self.base <= 1:
            raise ValueError("base must be > 1")
        if not 0 < self.mpcc_threshold < 1:
            raise ValueError("mpcc_threshold must lie in (0, 1)")
        if self.median_window % 2 == 0 or self.median_window <= 2 * self.w_max:
            raise ValueError("median_window must be odd and > 2 * w_max")
        if self.min_component_size < 0:
            raise ValueError("min_component_size must be >= 0")
        if self.noise_floor < 0:
            raise ValueError("noise_floor must be >= 0")

    def pyramid(self) -> KernelPyramid:
        return KernelPyramid.make(self.w_min, self.w_max, self.base)


def punctual_pcc(img: np.ndarray, kernel: DotKernel, x: int, y: int) -> float:
    """Pearson correlation between ``kernel`` and the window centred on (x, y).

    ``img`` is used as given (no inversion). Flat windows give 0.
    """
    h = kernel.size // 2
    rows, cols = img.shape
    assert h <= y < rows - h and h <= x < cols - h, "window leaves the image"
    win = np.asarray(img[y - h:y + h + 1, x - h:x + h + 1], dtype=np.float64)
    a = win - win.mean()
    b = kernel.weights - kernel.weights.mean()
    saa = float((a * a).sum())
    sbb = float((b * b).sum())
    if saa <= _FLAT_EPS * win.size or sbb <= 0.0:
        return 0.0
    return float(np.clip((a * b).sum() / math.sqrt(saa * sbb), -1.0, 1.0))


def pcc_map(img: np.ndarray, kernel: DotKernel, invert: bool = True) -> np.ndarray:
    """Correlation of every valid window with ``kernel``.

    The image is inverted first so dark strokes correlate positively. Pixels
    closer than ``size // 2`` to the border are left at 0.
    """
    img = raster.as_gray(img)
    if img.shape[0] <= kernel.size or img.shape[1] <= kernel.size:
        raise ValueError(f"image {img.shape} is not larger than kernel size {kernel.size}")
    a = 1.0 - img if invert else img
    n = kernel.size * kernel.size
    g = kernel.profile
    ones = np.ones(kernel.size)
    # dot kernels are separable: sum(I*T) = rows(cols(I*g)*g)
    s_it = _sep_correlate(a, g, g)
    s_i = _sep_correlate(a, ones, ones)
    s_ii = _sep_correlate(a * a, ones, ones)
    b = kernel.weights - kernel.weights.mean()
    sbb = float((b * b).sum())
    mean_t = float(kernel.weights.mean())
    cov = s_it - mean_t * s_i
    saa = s_ii - s_i * s_i / n
    flat = saa <= _FLAT_EPS * n
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(flat, 0.0, cov / np.sqrt(np.where(flat, 1.0, saa) * sbb))
    np.clip(out, -1.0, 1.0, out=out)
    m = kernel.size // 2
    out[:m] = 0.0
    out[-m:] = 0.0
    out[:, :m] = 0.0
    out[:, -m:] = 0.0
    return out


def _sep_correlate(a: np.ndarray, gy: np.ndarray, gx: np.ndarray) -> np.ndarray:
    t = ndi.correlate1d(a, gx, axis=1, mode="constant")
    return ndi.correlate1d(t, gy, axis=0, mode="constant")


def pcc_stack(img: np.ndarray, pyramid: KernelPyramid) -> list[np.ndarray]:
    return [pcc_map(img, k) for k in pyramid.kernels]


def merge_mpcc(stack) -> np.ndarray:
    """Keep, per pixel, the layer extreme of largest magnitude.

    The maximum wins only when its magnitude strictly exceeds the minimum's.
    """
    layers = [np.asarray(s, dtype=np.float64) for s in stack]
    if not layers:
        raise ValueError("empty PCC stack")
    shape = layers[0].shape
    if any(s.shape != shape for s in layers):
        raise ValueError("PCC layers differ in shape")
    st = np.stack(layers)
    hi = st.max(axis=0)
    lo = st.min(axis=0)
    return np.where(np.abs(hi) > np.abs(lo), hi, lo)


def high_pass(img: np.ndarray, window: int) -> np.ndarray:
    """Image minus its median-filtered background; strokes become negative."""
    img = raster.as_gray(img)
    return img - raster.median_filter(img, window)


def _robust_sigma(values: np.ndarray) -> float:
    """Noise deviation from the spread of the darker half of the values.

    On white paper the light half of the noise is clipped at 1, where the
    plain median absolute deviation collapses to 0. The gap between the median
    and the lower quartile is 0.6745 sigma for Gaussian noise, clipped or not,
    and stays 0 on a clean page as long as strokes cover under a quarter of it.
    """
    q25, q50 = np.percentile(values, [25, 50])
    return float(1.4826 * (q50 - q25))


def filter_components(mask: np.ndarray, img: np.ndarray, cfg: LinexConfig) -> np.ndarray:
    """Drop tiny components and components too light to be strokes.

    A component survives when it has at least ``min_component_size`` pixels,
    its mean high-passed value is darker than ``noise_floor`` robust noise
    deviations, and its darkest high-passed value lies below the Otsu
    threshold of the whole high-passed image. The Otsu cut is relaxed to the
    noise floor when it is darker, since on clean drawings with strokes of
    mixed intensity Otsu separates the dark strokes from the faint ones.
    """
    labels, n = raster.label(mask, 8)
    if n == 0:
        return np.zeros_like(mask)
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    keep = sizes >= cfg.min_component_size
    keep[0] = False
    if keep.any():
        hp = high_pass(img, cfg.median_window)
        thr = raster.otsu_threshold(hp)
        floor = -cfg.noise_floor * _robust_sigma(hp)
        idx = np.arange(n + 1)
        means = ndi.mean(hp, labels, idx)
        darkest = ndi.minimum(hp, labels, idx)
        keep &= (darkest < max(thr, floor)) & (means < floor)
        keep[0] = False
    return keep[labels]


def fill_small_holes(mask: np.ndarray, max_size: int) -> np.ndarray:
    """Fill background components that miss the border and are < ``max_size`` px."""
    labels, n = raster.label(~mask, 4)
    if n == 0:
        return mask.copy()
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    border = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    fill = sizes < max_size
    fill[0] = False
    fill[border] = False
    return mask | fill[labels]


def extract_lines_region(img: np.ndarray, cfg: LinexConfig | None = None) -> np.ndarray:
    """Binary mask of stroke pixels for a grayscale sketch (dark on light)."""
    cfg = cfg or LinexConfig()
    cfg.validate()
    img = raster.as_gray(img)
    pyramid = cfg.pyramid()
    if min(img.shape) <= pyramid.max_size:
        raise ValueError(f"image {img.shape} too small for kernel size {pyramid.max_size}")
    mpcc = merge_mpcc(pcc_stack(img, pyramid))
    mask = mpcc > cfg.mpcc_threshold
    mask = filter_components(mask, img, cfg)
    if cfg.fill_holes:
        mask = fill_small_holes(mask, cfg.min_component_size)
    return mask
