"""Repeatability of interest regions between a reference and a transformed image.

Repeatability = N_rep / N_ref, where N_ref counts the reference regions in the
part of the scene visible in both images and N_rep is the size of a maximum
one-to-one matching between reference and test regions whose overlap error
is below a threshold.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..detect.regions import InterestRegion
from .matching import canonical_matching, hopcroft_karp, max_matching_size
from .overlap import IDENTITY, as_homography, ellipse_overlap_error, map_point, map_region, overlap_error

__all__ = [
    "DEFAULT_EPS_OVERLAP",
    "CSV_HEADER",
    "Repeatability",
    "RepeatabilityRecord",
    "UndefinedRepeatabilityError",
    "candidate_graph",
    "common_part",
    "correspondences",
    "repeatability",
    "format_records",
    "parse_records",
    "read_records",
    "write_records",
    "overlap_error",
    "hopcroft_karp",
    "canonical_matching",
    "max_matching_size",
]

DEFAULT_EPS_OVERLAP = 0.4
CSV_HEADER = ("detector", "kind", "scene", "step", "param", "n_ref", "n_rep", "ratio")


class UndefinedRepeatabilityError(ValueError):
    """No reference region lies in the common part, so N_rep / N_ref is undefined."""


@dataclass(frozen=True)
class Repeatability:
    n_ref: int
    n_rep: int
    n_test: int

    @property
    def ratio(self) -> float:
        return self.n_rep / self.n_ref


def candidate_graph(ref, test, h=None, eps: float = DEFAULT_EPS_OVERLAP, normalize_radius=None) -> dict:
    """Adjacency {ref index: {test index, ...}} of pairs with overlap error < eps."""
    if not 0 < eps < 1:
        raise ValueError(f"overlap threshold must lie in (0, 1), got {eps}")
    h = as_homography(h)
    adj = {i: set() for i in range(len(ref))}
    if not ref or not test:
        return adj
    shapes = [(t.x, t.y, t.a, t.b, t.c) for t in test]
    centres = np.array([(t.x, t.y) for t in test])
    bounds = np.array([t.bounding_radius for t in test])
    areas = np.array([t.area for t in test])
    tree = cKDTree(centres)
    max_bound = float(bounds.max())
    for i, r in enumerate(ref):
        mapped = map_region(r, h)
        x, y, a, b, c = mapped
        det = a * c - b * b
        area = math.pi / math.sqrt(det)
        bound = InterestRegion(x, y, a, b, c).bounding_radius
        reach = bound + max_bound
        if normalize_radius is not None:
            # shapes are rescaled about fixed centres, so the reach scales too
            reach *= normalize_radius / det ** -0.25
        for j in tree.query_ball_point((x, y), reach):
            # IoU can never exceed the area ratio
            if 1.0 - min(area, areas[j]) / max(area, areas[j]) >= eps:
                continue
            if ellipse_overlap_error(mapped, shapes[j], normalize_radius) < eps:
                adj[i].add(j)
    return adj


def correspondences(ref, test, h=None, eps: float = DEFAULT_EPS_OVERLAP, normalize_radius=None) -> list[tuple[int, int]]:
    """Maximum one-to-one pairing of ref and test regions, lexicographically smallest."""
    return canonical_matching(candidate_graph(ref, test, h, eps, normalize_radius))


def _inside(x: float, y: float, frame) -> bool:
    # pixel-area convention: pixel (i, j) covers [i - 0.5, i + 0.5)
    width, height = frame
    return -0.5 <= x < width - 0.5 and -0.5 <= y < height - 0.5


def common_part(ref, test, h, frame, ref_frame=None):
    """Regions whose centres map into the other image.

    ``frame`` is (width, height) of the test image; ``ref_frame`` of the
    reference image, defaulting to ``frame``.
    """
    h = as_homography(h)
    ref_frame = ref_frame or frame
    hinv = np.linalg.inv(h)
    ref_in = [r for r in ref if _inside(*map_point(h, r.x, r.y), frame)]
    test_in = [t for t in test if _inside(*map_point(hinv, t.x, t.y), ref_frame)]
    return ref_in, test_in


def repeatability(ref, test, h=None, frame=None, eps: float = DEFAULT_EPS_OVERLAP,
                  ref_frame=None, normalize_radius=None) -> Repeatability:
    """Count reference regions and repeated regions in the common part.

    Raises UndefinedRepeatabilityError when no reference region survives
    the common-part filter.
    """
    h = IDENTITY if h is None else as_homography(h)
    if frame is not None:
        ref, test = common_part(ref, test, h, frame, ref_frame)
    if not ref:
        raise UndefinedRepeatabilityError("no reference regions in the common part")
    n_rep = max_matching_size(candidate_graph(ref, test, h, eps, normalize_radius))
    return Repeatability(n_ref=len(ref), n_rep=n_rep, n_test=len(test))


@dataclass(frozen=True)
class RepeatabilityRecord:
    detector: str
    kind: str
    scene: int
    step: int
    param: float
    n_ref: int
    n_rep: int

    def __post_init__(self):
        if not 0 <= self.n_rep <= self.n_ref:
            raise ValueError(f"N_rep = {self.n_rep} outside [0, N_ref = {self.n_ref}]")

    @property
    def valid(self) -> bool:
        return self.n_ref > 0

    @property
    def ratio(self) -> float | None:
        """N_rep / N_ref, or None when no reference region exists."""
        return self.n_rep / self.n_ref if self.n_ref else None

    @property
    def key(self):
        return (self.detector, self.kind, self.scene, self.step)


def format_records(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in sorted(records, key=lambda r: r.key):
        ratio = "" if r.ratio is None else repr(r.ratio)
        writer.writerow([r.detector, r.kind, r.scene, r.step, f"{r.param:.2f}", r.n_ref, r.n_rep, ratio])
    return buf.getvalue()


def parse_records(text: str, source: str = "<string>") -> list[RepeatabilityRecord]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
        raise ValueError(f"{source}: expected header {','.join(CSV_HEADER)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise ValueError(f"{source}: line {lineno}: expected {len(CSV_HEADER)} fields")
        try:
            rec = RepeatabilityRecord(
                detector=row[0], kind=row[1], scene=int(row[2]), step=int(row[3]),
                param=float(row[4]), n_ref=int(row[5]), n_rep=int(row[6]),
            )
        except ValueError as exc:
            raise ValueError(f"{source}: line {lineno}: {exc}") from None
        out.append(rec)
    return out


def write_records(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_records(records))


def read_records(path) -> list[RepeatabilityRecord]:
    with open(path, encoding="utf-8") as fh:
        return parse_records(fh.read(), source=str(path))
