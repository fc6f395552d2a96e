"""Box-filter Hessian detector (SURF-style) on integral images."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..imgcore import GrayImage, IntegralImage, integral
from .regions import InterestRegion, canonical_order, circle

__all__ = [
    "FastHessianSettings",
    "filter_sizes",
    "box_hessian",
    "hessian_det",
    "response_layer",
    "fast_hessian",
]

# relative weight of the Dxy box filter, compensating the box approximation
DXY_WEIGHT = 0.9


@dataclass(frozen=True)
class FastHessianSettings:
    octaves: int = 3
    intervals: int = 4
    # sampling step of the first octave; doubles per octave
    init_step: int = 1
    threshold: float = 4e-4
    kappa: float = 3.0
    subpixel: bool = True


def filter_sizes(octave: int, intervals: int = 4) -> list[int]:
    """Box filter side lengths for one octave: 9, 15, 21, 27 | 15, 27, 39, 51 | ..."""
    return [3 * ((2 ** (octave + 1)) * (i + 1) + 1) for i in range(intervals)]


def box_hessian(ii: IntegralImage, size: int, xs, ys):
    """Integer box-filter second derivatives (dxx, dyy, dxy) at pixel centres.

    ``size`` is the filter side (9, 15, ...), lobe l = size / 3. Boxes are
    clipped to the image.
    """
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    lobe = size // 3
    half = (size - 1) // 2
    mid = (lobe - 1) // 2
    bs = ii.box_sums

    # three lobes along x, each 2l-1 tall, weights +1 -2 +1
    dxx = bs(xs - half, ys - lobe + 1, xs + half + 1, ys + lobe) \
        - 3 * bs(xs - mid, ys - lobe + 1, xs + mid + 1, ys + lobe)
    dyy = bs(xs - lobe + 1, ys - half, xs + lobe, ys + half + 1) \
        - 3 * bs(xs - lobe + 1, ys - mid, xs + lobe, ys + mid + 1)
    dxy = bs(xs - lobe, ys - lobe, xs, ys) + bs(xs + 1, ys + 1, xs + lobe + 1, ys + lobe + 1) \
        - bs(xs + 1, ys - lobe, xs + lobe + 1, ys) - bs(xs - lobe, ys + 1, xs, ys + lobe + 1)
    return dxx, dyy, dxy


def hessian_det(dxx, dyy, dxy, size: int):
    """Area-normalised approximate Hessian determinant for [0, 1] intensities."""
    dxx = np.asarray(dxx, dtype=np.float64)
    dyy = np.asarray(dyy, dtype=np.float64)
    dxy = np.asarray(dxy, dtype=np.float64)
    norm = float(size) ** 4 * 255.0 * 255.0
    return (dxx * dyy - (DXY_WEIGHT * dxy) ** 2) / norm


def response_layer(ii: IntegralImage, size: int, step: int) -> np.ndarray:
    """Determinant response sampled every ``step`` pixels, shape (ceil(h/step), ceil(w/step))."""
    ys = np.arange(0, ii.height, step)
    xs = np.arange(0, ii.width, step)
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    return hessian_det(*box_hessian(ii, size, gx, gy), size)


def _nms_3d(below, here, above, threshold):
    """Mask of samples in ``here`` that dominate their 26 neighbours.

    Ties are resolved in favour of the earliest sample in (layer, row, column) order.
    """
    h, w = here.shape
    mask = np.zeros((h, w), dtype=bool)
    if h < 3 or w < 3:
        return mask
    c = here[1:-1, 1:-1]
    ok = c > threshold
    for layer, earlier_layer in ((below, True), (here, None), (above, False)):
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if layer is here and dy == 0 and dx == 0:
                    continue
                nb = layer[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
                if earlier_layer is None:
                    earlier = dy < 0 or (dy == 0 and dx < 0)
                else:
                    earlier = earlier_layer
                ok &= (c > nb) if earlier else (c >= nb)
    mask[1:-1, 1:-1] = ok
    return mask


def _offset(lo, mid, hi):
    denom = lo - 2.0 * mid + hi
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(denom < 0, 0.5 * (lo - hi) / denom, 0.0)
    return np.clip(off, -0.5, 0.5)


def fast_hessian(img: GrayImage, settings: FastHessianSettings | None = None) -> list[InterestRegion]:
    settings = settings or FastHessianSettings()
    ii = integral(img)
    regions = []
    for octave in range(settings.octaves):
        step = settings.init_step * 2 ** octave
        sizes = filter_sizes(octave, settings.intervals)
        # the largest filter of the octave must fit entirely inside the image
        border = (sizes[-1] - 1) // 2 + 1
        if img.width <= 2 * border or img.height <= 2 * border:
            break
        layers = [response_layer(ii, s, step) for s in sizes]
        gh, gw = layers[0].shape
        gys = np.arange(gh) * step
        gxs = np.arange(gw) * step
        inside = (
            (gys[:, None] >= border) & (gys[:, None] < img.height - border)
            & (gxs[None, :] >= border) & (gxs[None, :] < img.width - border)
        )
        for i in range(1, settings.intervals - 1):
            below, here, above = layers[i - 1], layers[i], layers[i + 1]
            peaks = _nms_3d(below, here, above, settings.threshold) & inside
            ry, rx = np.nonzero(peaks)
            if ry.size == 0:
                continue
            strength = here[ry, rx]
            if settings.subpixel:
                dx = _offset(here[ry, rx - 1], strength, here[ry, rx + 1])
                dy = _offset(here[ry - 1, rx], strength, here[ry + 1, rx])
                ds = _offset(below[ry, rx], strength, above[ry, rx])
            else:
                dx = dy = ds = np.zeros(ry.size)
            size = sizes[i] + ds * (sizes[i + 1] - sizes[i - 1]) / 2.0
            sigma = 1.2 * size / 9.0
            for x, y, s, st in zip(rx * step + dx * step, ry * step + dy * step, sigma, strength):
                x = min(max(float(x), 0.0), img.width - 1.0)
                y = min(max(float(y), 0.0), img.height - 1.0)
                regions.append(circle(x, y, settings.kappa * float(s), float(st)))
    return canonical_order(regions)
