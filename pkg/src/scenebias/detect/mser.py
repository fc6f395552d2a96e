"""Maximally stable extremal regions via a union-find component tree.

Dark regions are the 4-connected components of {I <= t}; bright regions are
the dark regions of 255 - I. Every distinct component is a tree node whose
level is the largest intensity it contains. For a node C at level l, with
A the component of {I <= l + delta} containing C, the variation is
(|A| - |C|) / |C|. Each node is compared with its parent; the one with the
larger variation is discarded, and on a tie the parent is discarded.
Surviving nodes within the area and variation limits are reported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..imgcore import GrayImage
from .regions import InterestRegion, canonical_order

__all__ = ["MserSettings", "ExtremalRegion", "extremal_regions", "region_pixels", "mser", "DARK", "BRIGHT"]

DARK = "dark"
BRIGHT = "bright"

_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class MserSettings:
    delta: int = 5
    min_area: int = 30
    max_area_fraction: float = 0.01
    max_variation: float = 0.25


@dataclass(frozen=True)
class ExtremalRegion:
    polarity: str
    level: int  # threshold in the polarity's own intensity frame
    area: int
    variation: float
    seed: int  # flat index of one member pixel
    moments: tuple  # (sum x, sum y, sum xx, sum xy, sum yy)


class _Tree:
    __slots__ = ("level", "area", "parent", "seed", "moments")

    def __init__(self):
        self.level = []
        self.area = []
        self.parent = []
        self.seed = []
        self.moments = []


def _build_tree(values: np.ndarray) -> _Tree:
    h, w = values.shape
    flat = values.ravel()
    order = np.argsort(flat, kind="stable").tolist()
    flat = flat.tolist()
    n = h * w

    uf = [-1] * n  # -1 = inactive
    size = [0] * n
    mom = [None] * n
    cur_node = [-1] * n
    kids = {}
    tree = _Tree()

    def find(p):
        root = p
        while uf[root] != root:
            root = uf[root]
        while uf[p] != root:
            uf[p], p = root, uf[p]
        return root

    def touch(r):
        if r not in kids:
            kids[r] = [cur_node[r]] if cur_node[r] >= 0 else []

    i = 0
    while i < n:
        level = flat[order[i]]
        j = i
        while j < n and flat[order[j]] == level:
            j += 1
        kids.clear()
        for p in order[i:j]:
            y, x = divmod(p, w)
            uf[p] = p
            size[p] = 1
            mom[p] = [x, y, x * x, x * y, y * y]
            kids[p] = []
            neighbours = []
            if x > 0:
                neighbours.append(p - 1)
            if x < w - 1:
                neighbours.append(p + 1)
            if y > 0:
                neighbours.append(p - w)
            if y < h - 1:
                neighbours.append(p + w)
            for q in neighbours:
                if uf[q] < 0:
                    continue
                rp, rq = find(p), find(q)
                if rp == rq:
                    continue
                touch(rp)
                touch(rq)
                if size[rp] < size[rq]:
                    rp, rq = rq, rp
                uf[rq] = rp
                size[rp] += size[rq]
                mp, mq = mom[rp], mom[rq]
                for m in range(5):
                    mp[m] += mq[m]
                kids[rp].extend(kids.pop(rq))
        for r, children in kids.items():
            node = len(tree.level)
            tree.level.append(level)
            tree.area.append(size[r])
            tree.parent.append(-1)
            tree.seed.append(r)
            tree.moments.append(tuple(mom[r]))
            for c in children:
                tree.parent[c] = node
            cur_node[r] = node
        i = j
    return tree


def _variations(tree: _Tree, delta: int) -> list[float]:
    level, area, parent = tree.level, tree.area, tree.parent
    out = []
    for i in range(len(level)):
        limit = level[i] + delta
        a = i
        while parent[a] >= 0 and level[parent[a]] <= limit:
            a = parent[a]
        out.append((area[a] - area[i]) / area[i])
    return out


def _stable_regions(values: np.ndarray, polarity: str, settings: MserSettings) -> list[ExtremalRegion]:
    tree = _build_tree(values)
    var = _variations(tree, settings.delta)
    keep = [True] * len(var)
    for i, p in enumerate(tree.parent):
        if p < 0:
            continue
        if var[i] <= var[p]:
            keep[p] = False
        else:
            keep[i] = False
    max_area = settings.max_area_fraction * values.size
    out = []
    for i, ok in enumerate(keep):
        if not ok:
            continue
        a = tree.area[i]
        if a < settings.min_area or a > max_area or var[i] > settings.max_variation:
            continue
        out.append(ExtremalRegion(polarity, tree.level[i], a, var[i], tree.seed[i], tree.moments[i]))
    return out


def extremal_regions(img: GrayImage, settings: MserSettings | None = None, polarity: str | None = None) -> list[ExtremalRegion]:
    """Maximally stable regions of one polarity, or of both when polarity is None."""
    settings = settings or MserSettings()
    out = []
    if polarity in (None, DARK):
        out += _stable_regions(img.pixels, DARK, settings)
    if polarity in (None, BRIGHT):
        out += _stable_regions(255 - img.pixels, BRIGHT, settings)
    return out


def region_pixels(img: GrayImage, region: ExtremalRegion) -> np.ndarray:
    """Sorted flat indices of the pixels belonging to region."""
    values = img.pixels if region.polarity == DARK else 255 - img.pixels
    labels, _ = ndimage.label(values <= region.level, structure=_FOUR)
    target = labels.ravel()[region.seed]
    return np.flatnonzero(labels.ravel() == target)


def ellipse_from_moments(area: int, moments) -> tuple[float, float, float, float, float]:
    """Centre and the ellipse (a, b, c) whose uniform fill has the region's second moments."""
    sx, sy, sxx, sxy, syy = moments
    cx, cy = sx / area, sy / area
    # +1/12: each pixel is a unit square, which keeps thin regions non-degenerate
    vxx = sxx / area - cx * cx + 1.0 / 12.0
    vyy = syy / area - cy * cy + 1.0 / 12.0
    vxy = sxy / area - cx * cy
    det = vxx * vyy - vxy * vxy
    # inverse of 4 * covariance
    scale = 1.0 / (4.0 * det)
    return cx, cy, vyy * scale, 0.0 - vxy * scale, vxx * scale


def mser(img: GrayImage, settings: MserSettings | None = None) -> list[InterestRegion]:
    regions = []
    for er in extremal_regions(img, settings):
        x, y, a, b, c = ellipse_from_moments(er.area, er.moments)
        regions.append(InterestRegion(x, y, a, b, c, strength=1.0 - er.variation))
    return canonical_order(regions)
