import numpy as np
import pytest
from scipy import ndimage

from scenebias.imgcore import GrayImage
from scenebias.minidb import bundled_dir

# criterion id -> (description, passed); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        desc, ok = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  [{cid:2d}] {desc}")


@pytest.fixture(scope="session")
def mini_dir():
    return bundled_dir()


def smooth_noise(seed: int, shape=(64, 64), sigma=2.0) -> GrayImage:
    rng = np.random.default_rng(seed)
    f = ndimage.gaussian_filter(rng.normal(size=shape), sigma)
    f = (f - f.min()) / (f.max() - f.min())
    return GrayImage(np.floor(20 + 215 * f + 0.5).astype(np.uint8))


def square_image(size=64, lo=0, hi=255, start=20, stop=44) -> GrayImage:
    px = np.full((size, size), lo, dtype=np.uint8)
    px[start:stop, start:stop] = hi
    return GrayImage(px)


def blob_image(size=64, sigma=4.0, cx=None, cy=None) -> GrayImage:
    cx = (size - 1) / 2 if cx is None else cx
    cy = (size - 1) / 2 if cy is None else cy
    yy, xx = np.mgrid[0:size, 0:size]
    g = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma * sigma))
    return GrayImage(np.floor(30 + 200 * g + 0.5).astype(np.uint8))
