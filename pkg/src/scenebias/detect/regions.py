"""Interest regions and the "1.0 / N / x y a b c" region file format."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "InterestRegion",
    "RegionFileError",
    "RegionValidationError",
    "circle",
    "canonical_order",
    "format_regions",
    "parse_regions",
    "read_region_file",
    "write_region_file",
]


class RegionFileError(ValueError):
    """Malformed region file; ``line`` is the 1-based offending line."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class RegionValidationError(RegionFileError):
    """A region row whose ellipse is not positive definite."""

    def __init__(self, message: str, row: int, line: int | None = None):
        super().__init__(message, line)
        self.row = row


@dataclass(frozen=True)
class InterestRegion:
    """Elliptical region a(u-x)^2 + 2b(u-x)(v-y) + c(v-y)^2 = 1."""

    x: float
    y: float
    a: float
    b: float
    c: float
    strength: float = 0.0

    def __post_init__(self):
        if not is_positive_definite(self.a, self.b, self.c):
            raise ValueError(f"ellipse ({self.a}, {self.b}, {self.c}) is not positive definite")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b, self.c]], dtype=np.float64)

    @property
    def area(self) -> float:
        return math.pi / math.sqrt(self.a * self.c - self.b * self.b)

    @property
    def radius(self) -> float:
        """Radius of the circle with the same area."""
        return (self.a * self.c - self.b * self.b) ** -0.25

    @property
    def bounding_radius(self) -> float:
        """Length of the major semi-axis."""
        tr = self.a + self.c
        disc = math.sqrt(max((self.a - self.c) ** 2 + 4 * self.b * self.b, 0.0))
        lam_min = 0.5 * (tr - disc)
        return 1.0 / math.sqrt(lam_min)


def is_positive_definite(a: float, b: float, c: float) -> bool:
    return (
        math.isfinite(a) and math.isfinite(b) and math.isfinite(c)
        and a > 0 and c > 0 and a * c - b * b > 0
    )


def circle(x: float, y: float, r: float, strength: float = 0.0) -> InterestRegion:
    inv = 1.0 / (r * r)
    return InterestRegion(x, y, inv, 0.0, inv, strength)


def canonical_order(regions) -> list[InterestRegion]:
    """Descending strength, then ascending (y, x)."""
    return sorted(regions, key=lambda r: (-r.strength, r.y, r.x, r.a, r.b, r.c))


def format_regions(regions) -> str:
    # repr() gives the shortest string that round-trips, identical across platforms.
    lines = ["1.0", str(len(regions))]
    for r in regions:
        lines.append(" ".join(repr(float(v)) for v in (r.x, r.y, r.a, r.b, r.c)))
    return "\n".join(lines) + "\n"


def parse_regions(text: str, source: str = "<string>") -> list[InterestRegion]:
    """Parse region-file text.

    The first line is 1.0 for plain region files; an integer D > 1 announces
    D descriptor values after each ellipse, which are skipped.
    """
    lines = text.splitlines()
    # skip trailing blank lines only; interior blanks are errors
    while lines and not lines[-1].strip():
        lines.pop()
    if len(lines) < 2:
        raise RegionFileError(f"{source}: missing header", line=len(lines) + 1)
    try:
        marker = float(lines[0].strip())
    except ValueError:
        raise RegionFileError(f"{source}: line 1: bad header {lines[0]!r}", line=1) from None
    extra = 0
    if marker != 1.0:
        if marker != int(marker) or marker < 0:
            raise RegionFileError(f"{source}: line 1: bad header {lines[0]!r}", line=1)
        extra = int(marker) if marker > 1 else 0
    try:
        count = int(lines[1].strip())
    except ValueError:
        raise RegionFileError(f"{source}: line 2: bad region count {lines[1]!r}", line=2) from None
    if count < 0:
        raise RegionFileError(f"{source}: line 2: negative region count", line=2)
    body = lines[2:]
    if len(body) != count:
        raise RegionFileError(
            f"{source}: header announces {count} regions, found {len(body)} rows",
            line=2 + min(len(body), count) + 1,
        )
    regions = []
    for row, line in enumerate(body, start=1):
        lineno = row + 2
        fields = line.split()
        if len(fields) != 5 + extra:
            raise RegionFileError(
                f"{source}: line {lineno}: expected {5 + extra} values, got {len(fields)}", line=lineno
            )
        try:
            x, y, a, b, c = (float(v) for v in fields[:5])
        except ValueError:
            raise RegionFileError(f"{source}: line {lineno}: non-numeric value", line=lineno) from None
        if not is_positive_definite(a, b, c):
            raise RegionValidationError(
                f"{source}: row {row} (line {lineno}): ellipse ({a}, {b}, {c}) is not positive definite",
                row=row,
                line=lineno,
            )
        regions.append(InterestRegion(x, y, a, b, c))
    return regions


def read_region_file(path) -> list[InterestRegion]:
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="ascii") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read region file {path}: {exc.strerror or exc}") from exc
    except UnicodeDecodeError:
        raise RegionFileError(f"{path}: not a text region file") from None
    return parse_regions(text, source=path)


def write_region_file(regions, path) -> None:
    path = os.fspath(path)
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(format_regions(regions))
    except OSError as exc:
        raise OSError(f"cannot write region file {path}: {exc.strerror or exc}") from exc
