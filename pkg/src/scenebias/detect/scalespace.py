"""Harris-Laplace and Hessian-Laplace interest points.

Both detectors locate spatial maxima of a scale-normalised response at each
level of a geometric scale sequence and keep only the points where the
scale-normalised Laplacian-of-Gaussian peaks across neighbouring levels.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage

from ..imgcore import GrayImage
from .regions import InterestRegion, canonical_order, circle

__all__ = [
    "HarrisLaplaceSettings",
    "HessianLaplaceSettings",
    "harris_laplace",
    "hessian_laplace",
    "scale_levels",
    "harris_response",
    "hessian_response",
    "laplacian_response",
    "derivative_kernel",
    "spatial_peaks",
]


@dataclass(frozen=True)
class HarrisLaplaceSettings:
    sigma0: float = 1.6
    scale_factor: float = 2.0 ** (1.0 / 3.0)
    levels: int = 13
    kappa: float = 3.0
    harris_k: float = 0.04
    # differentiation scale = diff_ratio * integration scale
    diff_ratio: float = 0.7
    threshold: float = 1e-6
    laplacian_threshold: float = 0.02
    subpixel: bool = True


@dataclass(frozen=True)
class HessianLaplaceSettings:
    sigma0: float = 1.6
    scale_factor: float = 2.0 ** (1.0 / 3.0)
    levels: int = 13
    kappa: float = 3.0
    threshold: float = 1e-4
    laplacian_threshold: float = 0.02
    subpixel: bool = True


def scale_levels(sigma0: float, factor: float, levels: int, pad: int = 0) -> np.ndarray:
    """sigma0 * factor**n for n in [-pad, levels + pad)."""
    return sigma0 * factor ** np.arange(-pad, levels + pad, dtype=np.float64)


@lru_cache(maxsize=256)
def derivative_kernel(sigma: float, order: int) -> np.ndarray:
    """Correlation weights for a Gaussian derivative of the given order.

    Truncated at radius ceil(4 sigma) and moment-corrected so that constants
    map to 0 and x (order 1) or x^2 (order 2) map to exactly 1 or 2.
    """
    radius = max(1, int(np.ceil(4.0 * sigma)))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (t / sigma) ** 2)
    g /= g.sum()
    if order == 0:
        w = g
    elif order == 1:
        w = t * g
        w /= np.dot(w, t)
    elif order == 2:
        w = (t * t - np.dot(t * t, g)) * g
        w *= 2.0 / np.dot(w, t * t)
    else:
        raise ValueError("only derivative orders 0-2 are supported")
    w.flags.writeable = False
    return w


def _derivative(img: np.ndarray, sigma: float, oy: int, ox: int) -> np.ndarray:
    out = ndimage.correlate1d(img, derivative_kernel(sigma, oy), axis=0, mode="mirror")
    return ndimage.correlate1d(out, derivative_kernel(sigma, ox), axis=1, mode="mirror")


def harris_response(img: np.ndarray, sigma_i: float, diff_ratio: float, k: float) -> np.ndarray:
    """Scale-normalised Harris cornerness det(M) - k trace(M)^2."""
    sigma_d = diff_ratio * sigma_i
    lx = _derivative(img, sigma_d, 0, 1)
    ly = _derivative(img, sigma_d, 1, 0)
    norm = sigma_d * sigma_d
    mxx = norm * _derivative(lx * lx, sigma_i, 0, 0)
    myy = norm * _derivative(ly * ly, sigma_i, 0, 0)
    mxy = norm * _derivative(lx * ly, sigma_i, 0, 0)
    det = mxx * myy - mxy * mxy
    tr = mxx + myy
    return det - k * tr * tr


def hessian_response(img: np.ndarray, sigma: float) -> np.ndarray:
    """Scale-normalised Hessian determinant sigma^4 (Lxx Lyy - Lxy^2)."""
    lxx = _derivative(img, sigma, 0, 2)
    lyy = _derivative(img, sigma, 2, 0)
    lxy = _derivative(img, sigma, 1, 1)
    return sigma ** 4 * (lxx * lyy - lxy * lxy)


def laplacian_response(img: np.ndarray, sigma: float) -> np.ndarray:
    """Magnitude of the scale-normalised Laplacian sigma^2 |Lxx + Lyy|."""
    lxx = _derivative(img, sigma, 0, 2)
    lyy = _derivative(img, sigma, 2, 0)
    return sigma * sigma * np.abs(lxx + lyy)


def spatial_peaks(resp: np.ndarray, threshold: float) -> np.ndarray:
    """Boolean mask of 3x3 local maxima above threshold, one-pixel border excluded.

    Within a plateau of equal maxima only the first pixel in raster order is
    kept: a peak must strictly exceed its neighbours above and to the left.
    """
    h, w = resp.shape
    mask = np.zeros((h, w), dtype=bool)
    if h < 3 or w < 3:
        return mask
    c = resp[1:-1, 1:-1]
    inner = c > threshold
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            nb = resp[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
            if dy < 0 or (dy == 0 and dx < 0):
                inner &= c > nb
            else:
                inner &= c >= nb
    mask[1:-1, 1:-1] = inner
    return mask


def _parabola_offset(lo: np.ndarray, mid: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Vertex of the parabola through (-1, lo), (0, mid), (1, hi), clipped to [-0.5, 0.5]."""
    denom = lo - 2.0 * mid + hi
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(denom < 0, 0.5 * (lo - hi) / denom, 0.0)
    return np.clip(off, -0.5, 0.5)


def _laplace_select(img: GrayImage, settings, response) -> list[InterestRegion]:
    if img.width < 3 or img.height < 3:
        return []
    f = img.as_float()
    sigmas = scale_levels(settings.sigma0, settings.scale_factor, settings.levels, pad=1)
    lap = [laplacian_response(f, s) for s in sigmas]
    log_factor = np.log(settings.scale_factor)
    last = settings.levels
    regions = []
    for n in range(1, last + 1):
        sigma = sigmas[n]
        resp = response(f, sigma)
        peaks = spatial_peaks(resp, settings.threshold)
        # At either end of the level range only the inner neighbour is compared,
        # so structures finer than sigma0 (sharp corners) are still reported.
        if n > 1:
            peaks &= lap[n] > lap[n - 1]
        if n < last:
            peaks &= lap[n] > lap[n + 1]
        peaks &= lap[n] > settings.laplacian_threshold
        ys, xs = np.nonzero(peaks)
        if ys.size == 0:
            continue
        strength = resp[ys, xs]
        if settings.subpixel:
            dx = _parabola_offset(resp[ys, xs - 1], strength, resp[ys, xs + 1])
            dy = _parabola_offset(resp[ys - 1, xs], strength, resp[ys + 1, xs])
            ds = _parabola_offset(lap[n - 1][ys, xs], lap[n][ys, xs], lap[n + 1][ys, xs])
        else:
            dx = dy = ds = np.zeros(ys.size)
        scales = sigma * np.exp(ds * log_factor)
        for x, y, s, st in zip(xs + dx, ys + dy, scales, strength):
            regions.append(circle(float(x), float(y), settings.kappa * float(s), float(st)))
    return canonical_order(regions)


def harris_laplace(img: GrayImage, settings: HarrisLaplaceSettings | None = None) -> list[InterestRegion]:
    settings = settings or HarrisLaplaceSettings()

    def response(f, sigma):
        return harris_response(f, sigma, settings.diff_ratio, settings.harris_k)

    return _laplace_select(img, settings, response)


def hessian_laplace(img: GrayImage, settings: HessianLaplaceSettings | None = None) -> list[InterestRegion]:
    settings = settings or HessianLaplaceSettings()
    return _laplace_select(img, settings, hessian_response)
