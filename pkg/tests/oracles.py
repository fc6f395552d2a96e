"""Slow, obviously-correct reference implementations used as test oracles.

None of these share code with the package beyond the GrayImage container.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage


# -- blur ---------------------------------------------------------------------

def dense_gaussian_blur(pixels: np.ndarray, sigma: float) -> np.ndarray:
    """2-D convolution with the outer-product kernel, mirrored borders, half-up rounding."""
    if sigma == 0:
        return pixels.copy()
    r = math.ceil(3 * sigma)
    t = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(t * t) / (2 * sigma * sigma))
    g /= g.sum()
    kernel = np.outer(g, g)
    padded = np.pad(pixels.astype(np.float64), r, mode="reflect")
    windows = sliding_window_view(padded, kernel.shape)
    out = np.einsum("ijkl,kl->ij", windows, kernel)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


# -- MSER ---------------------------------------------------------------------

_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def mser_sweep(values: np.ndarray, delta: int, min_area: int, max_area: float, max_variation: float) -> set:
    """Stable dark extremal regions by labelling every threshold 0..255.

    Returns a set of frozensets of flat pixel indices.
    """
    labels = []  # per threshold: flat label image
    groups = []  # per threshold: label -> frozenset of member pixels
    for t in range(256):
        lab, count = ndimage.label(values <= t, structure=_FOUR)
        lab = lab.ravel()
        order = np.argsort(lab, kind="stable")
        bounds = np.searchsorted(lab[order], np.arange(1, count + 2))
        groups.append({k: frozenset(order[bounds[k - 1]:bounds[k]].tolist()) for k in range(1, count + 1)})
        labels.append(lab)

    def component(t, pixel):
        t = min(t, 255)
        return groups[t][labels[t][pixel]]

    # distinct components and the level at which each first appears
    nodes = {}
    for t in range(256):
        for members in groups[t].values():
            nodes.setdefault(members, t)

    def variation(members, level):
        grown = component(level + delta, next(iter(members)))
        return (len(grown) - len(members)) / len(members)

    def parent(members, level):
        seed = next(iter(members))
        for t in range(level + 1, 256):
            c = component(t, seed)
            if c != members:
                return c
        return None

    var = {m: variation(m, lvl) for m, lvl in nodes.items()}
    loser = set()
    for m, lvl in nodes.items():
        p = parent(m, lvl)
        if p is None:
            continue
        if var[m] <= var[p]:
            loser.add(p)
        else:
            loser.add(m)
    return {
        m for m in nodes
        if m not in loser and min_area <= len(m) <= max_area and var[m] <= max_variation
    }


# -- matching -----------------------------------------------------------------

def brute_force_max_matching(adj: dict) -> int:
    """Size of a maximum matching by exhaustive search over left vertices."""
    lefts = sorted(adj)
    best = 0

    def search(i, used, size):
        nonlocal best
        if size + (len(lefts) - i) <= best:
            return
        if i == len(lefts):
            best = max(best, size)
            return
        for v in sorted(adj[lefts[i]]):
            if v not in used:
                search(i + 1, used | {v}, size + 1)
        search(i + 1, used, size)

    search(0, frozenset(), 0)
    return best


def all_maximum_matchings(adj: dict) -> list:
    """Every maximum matching as a sorted tuple of (left, right) pairs."""
    lefts = sorted(adj)
    found = []

    def search(i, used, pairs):
        if i == len(lefts):
            found.append(tuple(pairs))
            return
        for v in sorted(adj[lefts[i]]):
            if v not in used:
                search(i + 1, used | {v}, pairs + [(lefts[i], v)])
        search(i + 1, used, pairs)

    search(0, frozenset(), [])
    size = max(len(m) for m in found)
    return [m for m in found if len(m) == size]


# -- overlap ------------------------------------------------------------------

def monte_carlo_overlap_error(e1, e2, samples: int, rng) -> float:
    """1 - IoU of two ellipses (x, y, a, b, c) by uniform sampling of a bounding box."""
    def inside(e, px, py):
        x, y, a, b, c = e
        dx, dy = px - x, py - y
        return a * dx * dx + 2 * b * dx * dy + c * dy * dy <= 1.0

    def half_extent(e):
        _, _, a, b, c = e
        det = a * c - b * b
        return math.sqrt(c / det), math.sqrt(a / det)

    (w1, h1), (w2, h2) = half_extent(e1), half_extent(e2)
    x0 = min(e1[0] - w1, e2[0] - w2)
    x1 = max(e1[0] + w1, e2[0] + w2)
    y0 = min(e1[1] - h1, e2[1] - h2)
    y1 = max(e1[1] + h1, e2[1] + h2)
    px = rng.uniform(x0, x1, samples)
    py = rng.uniform(y0, y1, samples)
    in1, in2 = inside(e1, px, py), inside(e2, px, py)
    union = np.count_nonzero(in1 | in2)
    return 1.0 - np.count_nonzero(in1 & in2) / union


# -- detectors ----------------------------------------------------------------

def direct_box_sum(pixels: np.ndarray, x0: int, y0: int, x1: int, y1: int) -> int:
    h, w = pixels.shape
    x0, x1 = max(0, x0), min(w, x1)
    y0, y1 = max(0, y0), min(h, y1)
    if x0 >= x1 or y0 >= y1:
        return 0
    return int(pixels[y0:y1, x0:x1].astype(np.int64).sum())
