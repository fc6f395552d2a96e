"""Scene rankings per detector and the outdoor / human-made / simple trait indices."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from fractions import Fraction

logger = logging.getLogger(__name__)

__all__ = [
    "TOP",
    "LOWEST",
    "LabelError",
    "SceneLabels",
    "RepeatabilitySeries",
    "Ranking",
    "TraitIndices",
    "parse_labels",
    "read_labels",
    "build_series",
    "scene_order",
    "top_ranking",
    "lowest_ranking",
    "trait_indices",
    "format_rankings",
    "RANKINGS_HEADER",
]

TOP = "top"
LOWEST = "lowest"
LABELS_HEADER = ("scene_id", "f", "g", "h")
RANKINGS_HEADER = ("detector", "kind", "step", "polarity", "rank_position", "scene_id", "ratio")


class LabelError(ValueError):
    """Invalid or incomplete scene labels."""


@dataclass(frozen=True)
class SceneLabels:
    """f = outdoor, g = human-made, h = simple; each 0 or 1."""

    f: int
    g: int
    h: int

    def __post_init__(self):
        for name in ("f", "g", "h"):
            if getattr(self, name) not in (0, 1):
                raise LabelError(f"label {name} must be 0 or 1, got {getattr(self, name)!r}")


def parse_labels(text: str, source: str = "<labels>", expected=None) -> dict[int, SceneLabels]:
    """Parse a ``scene_id,f,g,h`` CSV. A header row is optional.

    With ``expected`` given, every listed scene id must be labelled.
    """
    labels = {}
    rows = csv.reader(io.StringIO(text))
    for lineno, row in enumerate(rows, start=1):
        cells = [c.strip() for c in row]
        if not cells or all(not c for c in cells) or cells[0].startswith("#"):
            continue
        if lineno == 1 and tuple(c.lower() for c in cells) == LABELS_HEADER:
            continue
        if len(cells) != 4:
            raise LabelError(f"{source}: row {lineno}: expected scene_id,f,g,h")
        try:
            scene = int(cells[0])
        except ValueError:
            raise LabelError(f"{source}: row {lineno}: bad scene id {cells[0]!r}") from None
        flags = []
        for name, cell in zip("fgh", cells[1:]):
            if cell not in ("0", "1"):
                raise LabelError(f"{source}: row {lineno}: {name} must be 0 or 1, got {cell!r}")
            flags.append(int(cell))
        if scene in labels:
            raise LabelError(f"{source}: row {lineno}: duplicate scene id {scene}")
        labels[scene] = SceneLabels(*flags)
    if expected is not None:
        missing = sorted(set(expected) - set(labels))
        if missing:
            raise LabelError(f"{source}: no labels for scenes {missing}")
    return labels


def read_labels(path, expected=None) -> dict[int, SceneLabels]:
    with open(path, encoding="utf-8") as fh:
        return parse_labels(fh.read(), source=str(path), expected=expected)


@dataclass(frozen=True)
class RepeatabilitySeries:
    detector: str
    kind: str
    step: int
    ratios: dict  # scene -> ratio
    excluded: tuple = field(default=())

    @property
    def n(self) -> int:
        return len(self.ratios)


def build_series(records, detector: str, kind: str, step: int) -> RepeatabilitySeries:
    """Collect one ratio per scene for (detector, kind, step).

    Records with N_ref = 0 are left out and logged.
    """
    ratios = {}
    excluded = []
    seen = set()
    for r in records:
        if (r.detector, r.kind, r.step) != (detector, kind, step):
            continue
        if r.scene in seen:
            raise ValueError(f"duplicate record for {detector} {kind} step {step} scene {r.scene}")
        seen.add(r.scene)
        if r.n_ref == 0:
            excluded.append(r.scene)
            logger.warning("excluding scene %d from %s %s step %d: N_ref = 0", r.scene, detector, kind, step)
            continue
        ratios[r.scene] = r.ratio
    if not seen:
        raise ValueError(f"no repeatability records for {detector} {kind} step {step}")
    return RepeatabilitySeries(detector, kind, step, ratios, tuple(sorted(excluded)))


@dataclass(frozen=True)
class Ranking:
    scenes: tuple
    ratios: tuple
    polarity: str

    @property
    def j(self) -> int:
        return len(self.scenes)


def scene_order(series: RepeatabilitySeries) -> list[int]:
    """All scenes from highest to lowest ratio; equal ratios by ascending scene id."""
    return sorted(series.ratios, key=lambda s: (-series.ratios[s], s))


def _check_j(series: RepeatabilitySeries, j: int):
    if not 1 <= j <= series.n:
        raise ValueError(f"ranking size j = {j} outside [1, {series.n}] for {series.detector} {series.kind} step {series.step}")


def top_ranking(series: RepeatabilitySeries, j: int) -> Ranking:
    """The j best scenes, best first."""
    _check_j(series, j)
    scenes = tuple(scene_order(series)[:j])
    return Ranking(scenes, tuple(series.ratios[s] for s in scenes), TOP)


def lowest_ranking(series: RepeatabilitySeries, j: int) -> Ranking:
    """The j worst scenes, worst first: the tail of the same order, reversed."""
    _check_j(series, j)
    scenes = tuple(reversed(scene_order(series)[-j:]))
    return Ranking(scenes, tuple(series.ratios[s] for s in scenes), LOWEST)


@dataclass(frozen=True)
class TraitIndices:
    """Counts of outdoor / human-made / simple scenes in a ranking of size j."""

    outdoor: int
    human_made: int
    simple: int
    j: int

    @property
    def F(self) -> Fraction:
        return Fraction(self.outdoor, self.j)

    @property
    def G(self) -> Fraction:
        return Fraction(self.human_made, self.j)

    @property
    def H(self) -> Fraction:
        return Fraction(self.simple, self.j)

    def percentages(self) -> tuple[Fraction, Fraction, Fraction]:
        return (100 * self.F, 100 * self.G, 100 * self.H)


def trait_indices(ranking: Ranking, labels: dict) -> TraitIndices:
    missing = [s for s in ranking.scenes if s not in labels]
    if missing:
        raise LabelError(f"unlabelled scenes in ranking: {missing}")
    members = [labels[s] for s in ranking.scenes]
    return TraitIndices(
        outdoor=sum(m.f for m in members),
        human_made=sum(m.g for m in members),
        simple=sum(m.h for m in members),
        j=ranking.j,
    )


def format_rankings(entries) -> str:
    """CSV of rankings; entries are (series, ranking) pairs."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RANKINGS_HEADER)
    rows = []
    for series, ranking in entries:
        for pos, (scene, ratio) in enumerate(zip(ranking.scenes, ranking.ratios), start=1):
            rows.append((series.detector, series.kind, series.step, ranking.polarity, pos, scene, repr(ratio)))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3] != TOP, r[4]))
    writer.writerows(rows)
    return buf.getvalue()
