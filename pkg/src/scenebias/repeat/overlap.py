"""Overlap error between elliptical regions."""

from __future__ import annotations

import math

import numpy as np

from ..detect.regions import InterestRegion

__all__ = [
    "IDENTITY",
    "as_homography",
    "map_point",
    "map_region",
    "ellipse_intersection_area",
    "overlap_error",
    "ellipse_overlap_error",
]

IDENTITY = np.eye(3)

_N_ANGLES = 4096
_ANGLES = np.linspace(0.0, 2.0 * np.pi, _N_ANGLES, endpoint=False)
_DIRS = np.stack([np.cos(_ANGLES), np.sin(_ANGLES)])


def as_homography(h) -> np.ndarray:
    if h is None:
        return IDENTITY
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (3, 3):
        raise ValueError(f"homography must be 3x3, got shape {h.shape}")
    if abs(np.linalg.det(h)) < 1e-12:
        raise ValueError("homography is singular")
    return h


def _is_identity(h: np.ndarray) -> bool:
    return h is IDENTITY or np.array_equal(h, IDENTITY)


def map_point(h: np.ndarray, x: float, y: float) -> tuple[float, float]:
    if _is_identity(h):
        return x, y
    u = h @ np.array([x, y, 1.0])
    return float(u[0] / u[2]), float(u[1] / u[2])


def map_region(region: InterestRegion, h) -> tuple[float, float, float, float, float]:
    """Centre and ellipse (a, b, c) of region under the local affine approximation of h."""
    h = as_homography(h)
    if _is_identity(h):
        return region.x, region.y, region.a, region.b, region.c
    x, y = region.x, region.y
    w = h[2, 0] * x + h[2, 1] * y + h[2, 2]
    xp = (h[0, 0] * x + h[0, 1] * y + h[0, 2]) / w
    yp = (h[1, 0] * x + h[1, 1] * y + h[1, 2]) / w
    jac = np.array([
        [h[0, 0] - xp * h[2, 0], h[0, 1] - xp * h[2, 1]],
        [h[1, 0] - yp * h[2, 0], h[1, 1] - yp * h[2, 1]],
    ]) / w
    inv = np.linalg.inv(jac)
    m = inv.T @ region.matrix @ inv
    return float(xp), float(yp), float(m[0, 0]), float(0.5 * (m[0, 1] + m[1, 0])), float(m[1, 1])


def _ellipse_area(a, b, c) -> float:
    return math.pi / math.sqrt(a * c - b * b)


def _quad(a, b, c, dx, dy):
    return a * dx * dx + 2.0 * b * dx * dy + c * dy * dy


def _common_point(e1, e2):
    """Minimiser of max(q1, q2) where qi is ellipse i's quadratic form.

    Points p(s) minimising (1-s) q1 + s q2 trace a curve from centre 1 to
    centre 2 along which q1 rises and q2 falls; the optimum is where they meet.
    """
    x1, y1, a1, b1, c1 = e1
    x2, y2, a2, b2, c2 = e2

    def point(s):
        a = (1 - s) * a1 + s * a2
        b = (1 - s) * b1 + s * b2
        c = (1 - s) * c1 + s * c2
        rx = (1 - s) * (a1 * x1 + b1 * y1) + s * (a2 * x2 + b2 * y2)
        ry = (1 - s) * (b1 * x1 + c1 * y1) + s * (b2 * x2 + c2 * y2)
        det = a * c - b * b
        return (c * rx - b * ry) / det, (a * ry - b * rx) / det

    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        px, py = point(mid)
        if _quad(a1, b1, c1, px - x1, py - y1) < _quad(a2, b2, c2, px - x2, py - y2):
            lo = mid
        else:
            hi = mid
    px, py = point(0.5 * (lo + hi))
    level = max(_quad(a1, b1, c1, px - x1, py - y1), _quad(a2, b2, c2, px - x2, py - y2))
    return px, py, level


def _ray_lengths(e, px, py):
    """Distance from interior point (px, py) to the ellipse boundary along each direction."""
    x, y, a, b, c = e
    dx, dy = _DIRS
    ox, oy = px - x, py - y
    qa = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
    qb = 2.0 * (a * ox * dx + b * (ox * dy + oy * dx) + c * oy * dy)
    qc = _quad(a, b, c, ox, oy) - 1.0
    return (-qb + np.sqrt(np.maximum(qb * qb - 4.0 * qa * qc, 0.0))) / (2.0 * qa)


def _circle_intersection(r1, r2, d) -> float:
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    t1 = (d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)
    t2 = (d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)
    k = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)
    return r1 * r1 * math.acos(t1) + r2 * r2 * math.acos(t2) - 0.5 * math.sqrt(max(k, 0.0))


def ellipse_intersection_area(e1, e2) -> float:
    """Intersection area of two ellipses given as (x, y, a, b, c)."""
    x1, y1, a1, b1, c1 = e1
    x2, y2, a2, b2, c2 = e2
    if b1 == 0 and b2 == 0 and a1 == c1 and a2 == c2:
        return _circle_intersection(1.0 / math.sqrt(a1), 1.0 / math.sqrt(a2), math.hypot(x2 - x1, y2 - y1))
    px, py, level = _common_point(e1, e2)
    if level >= 1.0:
        return 0.0
    r = np.minimum(_ray_lengths(e1, px, py), _ray_lengths(e2, px, py))
    return float(0.5 * np.mean(r * r) * 2.0 * np.pi)


def ellipse_overlap_error(e1, e2, normalize_radius: float | None = None) -> float:
    """Overlap error of two ellipses (x, y, a, b, c) already in a common frame.

    With normalize_radius set, both ellipse shapes are rescaled (centres kept)
    so that e1 has that radius, as in the classic evaluation protocol.
    """
    if normalize_radius is not None:
        radius = (e1[2] * e1[4] - e1[3] ** 2) ** -0.25
        s2 = (normalize_radius / radius) ** 2
        e1 = tuple(e1[:2]) + tuple(v / s2 for v in e1[2:])
        e2 = tuple(e2[:2]) + tuple(v / s2 for v in e2[2:])
    if tuple(e1) == tuple(e2):
        return 0.0
    area1 = _ellipse_area(*e1[2:])
    area2 = _ellipse_area(*e2[2:])
    inter = ellipse_intersection_area(e1, e2)
    inter = min(inter, area1, area2)
    union = area1 + area2 - inter
    return float(min(max(1.0 - inter / union, 0.0), 1.0))


def overlap_error(r1: InterestRegion, r2: InterestRegion, h=None, normalize_radius: float | None = None) -> float:
    """1 - |R1' n R2| / |R1' u R2| with R1' = r1 mapped into r2's frame by h."""
    return ellipse_overlap_error(map_region(r1, h), (r2.x, r2.y, r2.a, r2.b, r2.c), normalize_radius)
