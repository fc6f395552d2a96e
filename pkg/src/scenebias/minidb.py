"""Procedural 10-scene reference set bundled for smoke tests and demos.

Scenes come from four generators whose output matches a label profile by
construction: flat geometric shapes (human-made, simple), window grids
(human-made, complex), smooth horizons (natural, simple) and fractal
texture (natural, complex). ``python -m scenebias.minidb DIR`` rewrites the
bundled files; the output is a pure function of the seed.
"""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import ndimage

from .imgcore import GrayImage, save_image

__all__ = ["SCENES", "SEED", "WIDTH", "HEIGHT", "render_scene", "write_minidb", "bundled_dir"]

SEED = 20240611
WIDTH, HEIGHT = 128, 96

# scene id -> (generator, outdoor f, human-made g, simple h)
SCENES = {
    1: ("shapes", 0, 1, 1),
    2: ("texture", 1, 0, 0),
    3: ("windows", 1, 1, 0),
    4: ("horizon", 1, 0, 1),
    5: ("shapes", 1, 1, 1),
    6: ("texture", 1, 0, 0),
    7: ("windows", 0, 1, 0),
    8: ("horizon", 1, 0, 1),
    9: ("shapes", 0, 1, 1),
    10: ("texture", 0, 0, 0),
}


def _shapes(rng, h, w):
    img = np.full((h, w), rng.uniform(30, 80))
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(rng.integers(3, 6)):
        level = rng.uniform(120, 230)
        if rng.random() < 0.5:
            x0, y0 = rng.integers(5, w - 40), rng.integers(5, h - 30)
            img[y0:y0 + rng.integers(15, 30), x0:x0 + rng.integers(15, 40)] = level
        else:
            cx, cy, r = rng.uniform(20, w - 20), rng.uniform(20, h - 20), rng.uniform(6, 16)
            img[(xx - cx) ** 2 + (yy - cy) ** 2 <= r * r] = level
    return ndimage.gaussian_filter(img, 0.8)


def _windows(rng, h, w):
    img = np.full((h, w), rng.uniform(140, 190))
    cell = int(rng.integers(9, 13))
    for y0 in range(4, h - cell, cell):
        for x0 in range(4, w - cell, cell):
            dark = rng.uniform(10, 70)
            img[y0:y0 + cell - 4, x0:x0 + cell - 4] = dark
    img += rng.normal(0, 6, size=img.shape)
    return ndimage.gaussian_filter(img, 0.6)


def _horizon(rng, h, w):
    x = np.arange(w)
    line = h * 0.55 + 10 * np.sin(x / rng.uniform(15, 30) + rng.uniform(0, 6))
    yy = np.arange(h)[:, None]
    sky = 200 - 40 * yy / h
    ground = np.full((h, w), rng.uniform(50, 90))
    img = np.where(yy < line[None, :], sky, ground)
    cx, cy = rng.uniform(20, w - 20), rng.uniform(8, h * 0.3)
    yy2, xx2 = np.mgrid[0:h, 0:w]
    img[(xx2 - cx) ** 2 + (yy2 - cy) ** 2 <= 49] = 250
    return ndimage.gaussian_filter(img, 1.0)


def _texture(rng, h, w):
    img = np.zeros((h, w))
    for octave in range(5):
        sigma = 16 / 2 ** octave
        layer = ndimage.gaussian_filter(rng.normal(size=(h, w)), sigma)
        img += layer / (layer.std() + 1e-12) * 0.6 ** octave
    img = (img - img.min()) / (img.max() - img.min())
    return 20 + 215 * img


_GENERATORS = {"shapes": _shapes, "windows": _windows, "horizon": _horizon, "texture": _texture}


def render_scene(scene: int, seed: int = SEED) -> GrayImage:
    kind = SCENES[scene][0]
    rng = np.random.default_rng([seed, scene])
    pixels = _GENERATORS[kind](rng, HEIGHT, WIDTH)
    return GrayImage(np.clip(np.floor(pixels + 0.5), 0, 255).astype(np.uint8))


def labels_csv() -> str:
    rows = ["scene_id,f,g,h"] + [f"{s},{f},{g},{h}" for s, (_, f, g, h) in sorted(SCENES.items())]
    return "\n".join(rows) + "\n"


def write_minidb(directory, seed: int = SEED) -> Path:
    """Write scene_NN.pgm files plus labels.csv into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for scene in SCENES:
        save_image(render_scene(scene, seed), directory / f"scene_{scene:02d}.pgm")
    (directory / "labels.csv").write_text(labels_csv(), encoding="utf-8")
    return directory


def bundled_dir() -> Path:
    """Directory of the installed copy of the mini reference set."""
    return Path(str(resources.files("scenebias") / "data" / "mini"))


if __name__ == "__main__":
    write_minidb(sys.argv[1] if len(sys.argv) > 1 else bundled_dir())
