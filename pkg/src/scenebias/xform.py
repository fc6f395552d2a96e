"""Blur / light-reduction synthesis and the on-disk transformation database."""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imgcore import GrayImage, load_image, save_image

logger = logging.getLogger(__name__)

__all__ = [
    "BLUR",
    "LIGHT",
    "KINDS",
    "TransformStep",
    "SceneEntry",
    "DatasetManifest",
    "ConfigurationError",
    "blur_schedule",
    "light_schedule",
    "gaussian_kernel",
    "gaussian_blur",
    "reduce_light",
    "apply_step",
    "generate_database",
    "MANIFEST_NAME",
]

BLUR = "blur"
LIGHT = "light"
KINDS = (BLUR, LIGHT)
MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
IMAGE_SUFFIXES = (".pgm", ".png")

# Light factors are applied as integers in millionths so that e.g. 255 * 0.9
# rounds to 230 rather than to the float artefact 229.49999...
_LIGHT_QUANTUM = 1_000_000

GENERATOR_SETTINGS = {
    "blur_kernel": "gaussian, radius ceil(3 sigma), renormalised",
    "blur_border": "reflect-101",
    "blur_passes": "separable float64, single final rounding",
    "light_model": "linear scaling of stored 8-bit samples, no gamma",
    "rounding": "half-up, clamped to [0, 255]",
}


class ConfigurationError(ValueError):
    """Invalid run configuration (empty inputs, bad schedules, ...)."""


@dataclass(frozen=True)
class TransformStep:
    kind: str
    k: int
    param: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown transformation kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("step index starts at 1")
        identity = 0.0 if self.kind == BLUR else 1.0
        if (self.k == 1) != (self.param == identity):
            raise ValueError(f"step 1 must be the untransformed reference ({self.kind}={identity})")

    @property
    def label(self) -> str:
        return f"{self.k}_{self.param:.2f}"


def blur_schedule(step: float = 0.5, maximum: float = 4.5) -> tuple[float, ...]:
    """Gaussian sigmas 0, step, 2*step, ..., maximum."""
    count = int(round(maximum / step)) + 1
    return tuple(round(i * step, 10) for i in range(count))


def light_schedule(start: float = 0.90, stop: float = 0.30, spacing: float = 0.05) -> tuple[float, ...]:
    """Light factors: the 1.0 reference followed by start, start - spacing, ..., stop."""
    count = int(round((start - stop) / spacing)) + 1
    return (1.0,) + tuple(round(start - i * spacing, 10) for i in range(count))


def check_schedule(kind: str, params) -> tuple[float, ...]:
    params = tuple(float(p) for p in params)
    if not params:
        raise ConfigurationError(f"{kind} schedule is empty")
    if kind == BLUR:
        if params[0] != 0.0 or any(b <= a for a, b in zip(params, params[1:])):
            raise ConfigurationError("blur schedule must start at 0 and strictly increase")
    elif kind == LIGHT:
        if params[0] != 1.0 or any(b >= a for a, b in zip(params, params[1:])):
            raise ConfigurationError("light schedule must start at 1 and strictly decrease")
        if params[-1] <= 0:
            raise ConfigurationError("light factors must be positive")
    else:
        raise ConfigurationError(f"unknown transformation kind {kind!r}")
    return params


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalised 1-D Gaussian truncated at radius ceil(3 sigma)."""
    radius = max(1, math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


def _round_clamp(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def gaussian_blur(img: GrayImage, sigma: float) -> GrayImage:
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return img
    kernel = gaussian_kernel(sigma)
    radius = len(kernel) // 2
    src = img.pixels.astype(np.float64)
    h, w = src.shape

    padded = np.pad(src, ((0, 0), (radius, radius)), mode="reflect") if w > 1 else np.repeat(src, 2 * radius + 1, axis=1)
    rows = np.zeros_like(src)
    for i, wt in enumerate(kernel):
        rows += wt * padded[:, i:i + w]

    padded = np.pad(rows, ((radius, radius), (0, 0)), mode="reflect") if h > 1 else np.repeat(rows, 2 * radius + 1, axis=0)
    out = np.zeros_like(src)
    for i, wt in enumerate(kernel):
        out += wt * padded[i:i + h, :]
    return GrayImage(_round_clamp(out))


def reduce_light(img: GrayImage, factor: float) -> GrayImage:
    """Scale every sample by factor in (0, 1], rounding half-up."""
    if not 0 < factor <= 1:
        raise ValueError(f"light factor must lie in (0, 1], got {factor}")
    if factor == 1:
        return img
    q = int(round(factor * _LIGHT_QUANTUM))
    v = img.pixels.astype(np.int64)
    out = (v * q + _LIGHT_QUANTUM // 2) // _LIGHT_QUANTUM
    return GrayImage(np.clip(out, 0, 255).astype(np.uint8))


def apply_step(img: GrayImage, kind: str, param: float) -> GrayImage:
    if kind == BLUR:
        return gaussian_blur(img, param)
    if kind == LIGHT:
        return reduce_light(img, param)
    raise ValueError(f"unknown transformation kind {kind!r}")


@dataclass(frozen=True)
class SceneEntry:
    source: str
    width: int
    height: int
    paths: dict  # kind -> tuple of paths relative to the database root

    def to_dict(self) -> dict:
        d = {"source": self.source, "width": self.width, "height": self.height}
        for kind in KINDS:
            d[kind] = list(self.paths[kind])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneEntry":
        return cls(
            source=d["source"],
            width=int(d["width"]),
            height=int(d["height"]),
            paths={kind: tuple(d[kind]) for kind in KINDS},
        )


@dataclass
class DatasetManifest:
    """Index of a generated database. ``root`` is where it lives, never serialised."""

    schedules: dict  # kind -> tuple of params
    scenes: dict  # scene id (int) -> SceneEntry
    generator: dict = field(default_factory=lambda: dict(GENERATOR_SETTINGS))
    version: int = MANIFEST_VERSION
    root: Path | None = field(default=None, compare=False)
    id_width: int = 4

    @property
    def scene_ids(self) -> list[int]:
        return sorted(self.scenes)

    def scene_key(self, scene: int) -> str:
        return f"{scene:0{self.id_width}d}"

    def steps(self, kind: str) -> list[TransformStep]:
        return [TransformStep(kind, k, p) for k, p in enumerate(self.schedules[kind], start=1)]

    def image_path(self, scene: int, kind: str, k: int) -> Path:
        rel = self.scenes[scene].paths[kind][k - 1]
        return (self.root or Path(".")) / rel

    def image_count(self) -> int:
        return sum(len(e.paths[kind]) for e in self.scenes.values() for kind in KINDS)

    def to_json(self) -> str:
        doc = {
            "version": self.version,
            "schedules": {kind: list(self.schedules[kind]) for kind in KINDS},
            "generator": self.generator,
            "scene_id_width": self.id_width,
            "scenes": {self.scene_key(s): self.scenes[s].to_dict() for s in self.scene_ids},
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str, root=None) -> "DatasetManifest":
        doc = json.loads(text)
        if doc.get("version") != MANIFEST_VERSION:
            raise ConfigurationError(f"unsupported manifest version {doc.get('version')!r}")
        return cls(
            schedules={kind: tuple(float(p) for p in doc["schedules"][kind]) for kind in KINDS},
            scenes={int(k): SceneEntry.from_dict(v) for k, v in doc["scenes"].items()},
            generator=doc["generator"],
            version=doc["version"],
            root=Path(root) if root is not None else None,
            id_width=int(doc.get("scene_id_width", 4)),
        )

    def save(self, root=None) -> Path:
        root = Path(root or self.root)
        path = root / MANIFEST_NAME
        write_text_if_changed(path, self.to_json())
        return path

    @classmethod
    def load(cls, root) -> "DatasetManifest":
        root = Path(root)
        path = root / MANIFEST_NAME
        try:
            text = path.read_text()
        except OSError as exc:
            raise OSError(f"cannot read manifest {path}: {exc.strerror or exc}") from exc
        return cls.from_json(text, root)


def write_text_if_changed(path, text: str) -> bool:
    """Write text unless the file already holds exactly these bytes."""
    path = Path(path)
    data = text.encode("utf-8")
    try:
        if path.read_bytes() == data:
            return False
    except OSError:
        pass
    try:
        path.write_bytes(data)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return True


def find_reference_images(refs) -> list[Path]:
    refs = Path(refs)
    if not refs.is_dir():
        raise ConfigurationError(f"reference directory {refs} does not exist")
    found = sorted(p for p in refs.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
    if not found:
        raise ConfigurationError(f"no reference images (.pgm/.png) in {refs}")
    return found


def _synthesize_scene(job):
    source, out, key, schedules, force = job
    ref = load_image(source)
    paths = {}
    for kind in KINDS:
        rel_dir = Path(key) / kind
        (Path(out) / rel_dir).mkdir(parents=True, exist_ok=True)
        rels = []
        for k, param in enumerate(schedules[kind], start=1):
            rel = rel_dir / f"{k}_{param:.2f}.pgm"
            target = Path(out) / rel
            if force or not target.exists():
                save_image(apply_step(ref, kind, param), target)
            rels.append(rel.as_posix())
        paths[kind] = tuple(rels)
    return SceneEntry(source=Path(source).name, width=ref.width, height=ref.height, paths=paths)


def generate_database(refs, out, blur=None, light=None, jobs: int = 1, force: bool = False) -> DatasetManifest:
    """Write the blur and light datasets for every reference image in refs.

    Scenes are numbered 1..n in filename order. Existing images are kept
    unless force is set, so a rerun is cheap and leaves bytes unchanged.
    """
    sources = find_reference_images(refs)
    schedules = {
        BLUR: check_schedule(BLUR, blur if blur is not None else blur_schedule()),
        LIGHT: check_schedule(LIGHT, light if light is not None else light_schedule()),
    }
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create database directory {out}: {exc.strerror or exc}") from exc

    width = max(4, len(str(len(sources))))
    jobs_list = [
        (str(src), str(out), f"{i:0{width}d}", schedules, force)
        for i, src in enumerate(sources, start=1)
    ]
    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(_synthesize_scene, jobs_list))
    else:
        entries = [_synthesize_scene(j) for j in jobs_list]

    manifest = DatasetManifest(
        schedules=schedules,
        scenes={i: e for i, e in enumerate(entries, start=1)},
        root=out,
        id_width=width,
    )
    manifest.save()
    logger.info("database %s: %d scenes, %d images", out, len(entries), manifest.image_count())
    return manifest
