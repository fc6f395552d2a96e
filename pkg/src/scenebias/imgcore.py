"""Gray rasters, PGM/PNG codecs and integral images."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GrayImage",
    "IntegralImage",
    "ImageFormatError",
    "load_image",
    "save_image",
    "integral",
    "rgb_to_luminance",
]

# ITU-R BT.601 weights in thousandths, so the conversion stays in integers.
_LUMA_WEIGHTS = (299, 587, 114)


class ImageFormatError(ValueError):
    """Raised for files that are not a supported PGM/PNG raster."""


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit luminance raster, stored row-major as a read-only (height, width) array."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D raster, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError(f"samples must be integers, got {arr.dtype}")
            if arr.min() < 0 or arr.max() > 255:
                raise ValueError("samples must lie in [0, 255]")
        arr = np.array(arr, dtype=np.uint8, copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_data(cls, width: int, height: int, data) -> "GrayImage":
        data = np.asarray(list(data) if not isinstance(data, np.ndarray) else data)
        if data.size != width * height:
            raise ValueError(f"expected {width * height} samples, got {data.size}")
        return cls(data.reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def data(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self.pixels.ravel())

    def as_float(self) -> np.ndarray:
        """Samples scaled to [0, 1] as float64."""
        return self.pixels.astype(np.float64) / 255.0

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self):
        return f"GrayImage(width={self.width}, height={self.height})"


def rgb_to_luminance(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma of an (..., 3) uint8 array, rounded half-up."""
    rgb = np.asarray(rgb, dtype=np.int64)
    wr, wg, wb = _LUMA_WEIGHTS
    acc = wr * rgb[..., 0] + wg * rgb[..., 1] + wb * rgb[..., 2]
    return ((acc + 500) // 1000).astype(np.uint8)


def _read_pgm(raw: bytes, path) -> np.ndarray:
    # Header tokens: magic, width, height, maxval; '#' starts a comment.
    tokens = []
    pos = 0
    n = len(raw)
    while len(tokens) < 4:
        while pos < n and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < n and raw[pos:pos + 1] == b"#":
            while pos < n and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageFormatError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise ImageFormatError(f"{path}: only binary PGM (P5) is supported")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ImageFormatError(f"{path}: malformed PGM header") from None
    if maxval != 255:
        raise ImageFormatError(f"{path}: PGM maxval must be 255, got {maxval}")
    if width < 1 or height < 1:
        raise ImageFormatError(f"{path}: empty PGM raster")
    pos += 1  # single whitespace byte after maxval
    body = raw[pos:pos + width * height]
    if len(body) != width * height:
        raise ImageFormatError(f"{path}: PGM raster truncated")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width)


def _read_png(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.format != "PNG":
            raise ImageFormatError(f"{path}: not a PNG file")
        mode = im.mode
        if mode == "L":
            return np.asarray(im, dtype=np.uint8)
        if mode == "LA":
            return np.asarray(im, dtype=np.uint8)[..., 0]
        if mode in ("RGB", "RGBA", "P", "PA"):
            rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
            return rgb_to_luminance(rgb)
        if mode == "1":
            return np.asarray(im.convert("L"), dtype=np.uint8)
        raise ImageFormatError(f"{path}: unsupported PNG mode {mode!r}")


def load_image(path) -> GrayImage:
    """Decode a binary PGM or a PNG file into a GrayImage.

    Colour PNGs are reduced to luminance with BT.601 weights.
    """
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read image {path}: {exc.strerror or exc}") from exc
    if raw.startswith(b"P5") or raw.startswith(b"P2"):
        return GrayImage(_read_pgm(raw, path))
    if raw.startswith(b"\x89PNG\r\n\x1a\n"):
        try:
            return GrayImage(_read_png(path))
        except ImageFormatError:
            raise
        except Exception as exc:
            raise ImageFormatError(f"{path}: cannot decode PNG ({exc})") from exc
    raise ImageFormatError(f"{path}: unsupported image format")


def encode_pgm(img: GrayImage) -> bytes:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def save_image(img: GrayImage, path) -> None:
    """Write img losslessly; PNG for a .png suffix, binary PGM otherwise."""
    path = os.fspath(path)
    try:
        if path.lower().endswith(".png"):
            from PIL import Image

            Image.fromarray(np.ascontiguousarray(img.pixels), mode="L").save(path, format="PNG")
        else:
            with open(path, "wb") as fh:
                fh.write(encode_pgm(img))
    except OSError as exc:
        raise OSError(f"cannot write image {path}: {exc.strerror or exc}") from exc


@dataclass(frozen=True, eq=False)
class IntegralImage:
    """Summed-area table of shape (height + 1, width + 1).

    ``table[y, x]`` is the sum of all samples with row < y and column < x.
    """

    table: np.ndarray

    @property
    def width(self) -> int:
        return self.table.shape[1] - 1

    @property
    def height(self) -> int:
        return self.table.shape[0] - 1

    def box_sum(self, x0: int, y0: int, x1: int, y1: int) -> int:
        """Sum over columns [x0, x1) and rows [y0, y1), clipped to the image."""
        x0 = min(max(x0, 0), self.width)
        x1 = min(max(x1, 0), self.width)
        y0 = min(max(y0, 0), self.height)
        y1 = min(max(y1, 0), self.height)
        if x1 <= x0 or y1 <= y0:
            return 0
        t = self.table
        return int(t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0])

    def box_sums(self, x0, y0, x1, y1) -> np.ndarray:
        """Vectorised ``box_sum`` over broadcastable integer coordinate arrays."""
        x0 = np.clip(x0, 0, self.width)
        x1 = np.clip(x1, 0, self.width)
        y0 = np.clip(y0, 0, self.height)
        y1 = np.clip(y1, 0, self.height)
        x1 = np.maximum(x1, x0)
        y1 = np.maximum(y1, y0)
        t = self.table
        return t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0]


def integral(img: GrayImage) -> IntegralImage:
    table = np.zeros((img.height + 1, img.width + 1), dtype=np.int64)
    np.cumsum(np.cumsum(img.pixels, axis=0, dtype=np.int64), axis=1, out=table[1:, 1:])
    table.flags.writeable = False
    return IntegralImage(table)
