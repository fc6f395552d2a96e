import math

import numpy as np
import pytest
from scipy import ndimage
from scipy.spatial import cKDTree

from scenebias import detect
from scenebias.detect.fasthessian import FastHessianSettings, box_hessian, filter_sizes, hessian_det
from scenebias.detect.mser import BRIGHT, DARK, MserSettings, extremal_regions, region_pixels
from scenebias.detect.regions import (
    InterestRegion,
    RegionFileError,
    RegionValidationError,
    circle,
    format_regions,
    parse_regions,
    read_region_file,
    write_region_file,
)
from scenebias.imgcore import GrayImage, integral
from conftest import blob_image, smooth_noise, square_image
from oracles import mser_sweep

NATIVE = sorted(detect.NATIVE_DETECTORS)


# -- region files ---------------------------------------------------------------

def test_region_file_empty():
    assert parse_regions("1.0\n0\n") == []


def test_region_file_single_circle():
    (r,) = parse_regions("1.0\n1\n10 20 0.01 0 0.01\n")
    assert (r.x, r.y) == (10.0, 20.0)
    assert r.radius == pytest.approx(10.0)


def test_region_file_row_three_invalid():
    text = "1.0\n3\n1 1 1 0 1\n2 2 1 0 1\n3 3 -1 0 1\n"
    with pytest.raises(RegionValidationError, match="row 3") as exc:
        parse_regions(text)
    assert exc.value.row == 3 and exc.value.line == 5


@pytest.mark.parametrize("text,line", [
    ("abc\n0\n", 1),
    ("1.0\nx\n", 2),
    ("1.0\n2\n1 1 1 0 1\n", 4),  # first missing row
    ("1.0\n1\n1 1 1 0\n", 3),
    ("1.0\n1\n1 1 1 zero 1\n", 3),
])
def test_region_file_parse_errors(text, line):
    with pytest.raises(RegionFileError) as exc:
        parse_regions(text)
    assert exc.value.line == line


def test_region_file_descriptor_columns_skipped():
    (r,) = parse_regions("3\n1\n5 6 0.25 0 0.25 9 9 9\n")
    assert (r.x, r.y, r.radius) == (5.0, 6.0, pytest.approx(2.0))


def test_region_file_round_trip(tmp_path):
    regions = [InterestRegion(1.5, 2.25, 0.3, 0.1, 0.2), circle(0.1, 1e-7, 3.0)]
    write_region_file(regions, tmp_path / "r.txt")
    back = read_region_file(tmp_path / "r.txt")
    assert [(r.x, r.y, r.a, r.b, r.c) for r in back] == [(r.x, r.y, r.a, r.b, r.c) for r in regions]
    assert format_regions(back) == (tmp_path / "r.txt").read_text()


def test_region_positive_definite():
    with pytest.raises(ValueError):
        InterestRegion(0, 0, 1.0, 2.0, 1.0)


# -- registry -------------------------------------------------------------------

def test_detector_ids():
    assert detect.parse_detector_id("heslap") == "HESLAP"
    assert detect.parse_detector_id("EXT:sfop") == "EXT:sfop"
    for bad in ("SIFT", "EXT:", "EXT:a b"):
        with pytest.raises(detect.UnknownDetectorError):
            detect.parse_detector_id(bad)
    with pytest.raises(detect.UnknownDetectorError):
        detect.detect("EXT:ebr", smooth_noise(0))


def test_settings_override():
    fh = detect.detect("FASTHESS", smooth_noise(1), {"threshold": 1.0})
    assert fh == []
    with pytest.raises(ValueError):
        detect.detect("MSER", smooth_noise(1), {"nonsense": 1})


# -- properties shared by all native detectors ----------------------------------

@pytest.mark.parametrize("name", NATIVE)
def test_constant_image_empty(name):
    assert detect.detect(name, GrayImage(np.full((64, 64), 120, np.uint8))) == []


@pytest.mark.parametrize("name", NATIVE)
def test_deterministic_and_valid(name):
    img = smooth_noise(5, shape=(80, 96))
    a = detect.detect(name, img)
    b = detect.detect(name, GrayImage(img.pixels.copy()))
    assert a and format_regions(a) == format_regions(b)
    for r in a:
        assert -0.5 <= r.x < img.width - 0.5 and -0.5 <= r.y < img.height - 0.5
        assert r.a > 0 and r.a * r.c - r.b * r.b > 0
    keys = [(-r.strength, r.y, r.x) for r in a]
    assert keys == sorted(keys)


@pytest.mark.parametrize("name", NATIVE)
def test_rotation_covariance(name):
    # 81 = 1 + 16 * 5 keeps every octave's sampling grid invariant under rot90
    img = smooth_noise(11, shape=(81, 81), sigma=2.5)
    rot = GrayImage(np.rot90(img.pixels).copy())
    w = img.width
    expected = np.array([(r.y, w - 1 - r.x) for r in detect.detect(name, img)])
    got = np.array([(r.x, r.y) for r in detect.detect(name, rot)])
    assert len(expected) == len(got) > 0
    dist, _ = cKDTree(got).query(expected)
    assert dist.max() <= 1.0


# -- Harris-Laplace / Hessian-Laplace --------------------------------------------

def _harris_oracle(f, sigma_i, ratio=0.7, k=0.04):
    sd = ratio * sigma_i
    lx = ndimage.gaussian_filter(f, sd, order=(0, 1), mode="mirror", truncate=6)
    ly = ndimage.gaussian_filter(f, sd, order=(1, 0), mode="mirror", truncate=6)
    mom = [ndimage.gaussian_filter(v * sd * sd, sigma_i, mode="mirror", truncate=6) for v in (lx * lx, lx * ly, ly * ly)]
    return mom[0] * mom[2] - mom[1] ** 2 - k * (mom[0] + mom[2]) ** 2


def test_harris_laplace_square_corners():
    img = square_image()
    cornerness = _harris_oracle(img.as_float(), 1.6)
    oracle = []
    for ys in (slice(0, 32), slice(32, 64)):
        for xs in (slice(0, 32), slice(32, 64)):
            block = cornerness[ys, xs]
            y, x = np.unravel_index(np.argmax(block), block.shape)
            oracle.append((xs.start + x, ys.start + y))
    # the oracle maxima sit next to the geometric corners
    for (ox, oy), (cx, cy) in zip(oracle, [(19.5, 19.5), (43.5, 19.5), (19.5, 43.5), (43.5, 43.5)]):
        assert math.hypot(ox - cx, oy - cy) <= 2.5
    found = np.array([(r.x, r.y) for r in detect.detect("HARLAP", img)])
    dist, _ = cKDTree(found).query(oracle)
    assert dist.max() <= 1.5


def _characteristic_sigma(regions, kappa=3.0):
    best = max(regions, key=lambda r: r.strength)
    return best.radius / kappa, best


def test_hessian_laplace_blob_scale():
    sigma, best = _characteristic_sigma(detect.detect("HESLAP", blob_image(64, 4.0)))
    assert abs(math.log2(sigma / 4.0)) <= 1 / 3
    assert math.hypot(best.x - 31.5, best.y - 31.5) <= 1.0


def test_hessian_laplace_scale_doubles():
    small = blob_image(64, 3.0)
    big = GrayImage(np.kron(small.pixels, np.ones((2, 2), np.uint8)))
    s1, _ = _characteristic_sigma(detect.detect("HESLAP", small))
    s2, _ = _characteristic_sigma(detect.detect("HESLAP", big))
    assert abs(math.log2(s2 / s1) - 1.0) <= 1 / 3


# -- MSER -----------------------------------------------------------------------

def test_mser_single_dark_square():
    px = np.full((200, 200), 255, np.uint8)
    px[50:70, 80:100] = 0
    img = GrayImage(px)
    ers = extremal_regions(img)
    assert [e.polarity for e in ers] == [DARK]
    (r,) = detect.detect("MSER", img)
    assert math.hypot(r.x - 89.5, r.y - 59.5) <= 0.5


def test_mser_polarity_swap():
    img = smooth_noise(21, shape=(96, 96), sigma=3.0)
    inv = GrayImage(255 - img.pixels)

    def sets(image, polarity):
        return {frozenset(region_pixels(image, e).tolist()) for e in extremal_regions(image, polarity=polarity)}

    assert sets(img, DARK) == sets(inv, BRIGHT)
    assert sets(img, BRIGHT) == sets(inv, DARK)
    assert sets(img, DARK)


@pytest.mark.parametrize("seed", [0, 1])
def test_mser_matches_sweep_small(seed):
    img = smooth_noise(100 + seed, shape=(24, 28), sigma=2.0)
    s = MserSettings(min_area=5, max_area_fraction=1.0)
    got = {frozenset(region_pixels(img, e).tolist()) for e in extremal_regions(img, s, polarity=DARK)}
    want = mser_sweep(img.pixels, s.delta, s.min_area, s.max_area_fraction * img.pixels.size, s.max_variation)
    assert got == want and got


# -- Fast-Hessian ---------------------------------------------------------------

def _direct_box_filters(px, x, y, size):
    """Dxx, Dyy, Dxy of the box layout by explicit weight masks and direct summation."""
    lobe = size // 3
    half = size // 2
    h, w = px.shape
    mxx = np.zeros((size, size), np.int64)
    rows = slice(half - (lobe - 1), half + lobe)
    mxx[rows, :] = 1
    mxx[rows, lobe:2 * lobe] = -2
    myy = mxx.T
    mxy = np.zeros((size, size), np.int64)
    mxy[half - lobe:half, half - lobe:half] = 1
    mxy[half + 1:half + 1 + lobe, half + 1:half + 1 + lobe] = 1
    mxy[half - lobe:half, half + 1:half + 1 + lobe] = -1
    mxy[half + 1:half + 1 + lobe, half - lobe:half] = -1
    padded = np.zeros((h + 2 * size, w + 2 * size), np.int64)
    padded[size:size + h, size:size + w] = px
    win = padded[y + size - half:y + size + half + 1, x + size - half:x + size + half + 1]
    return int((win * mxx).sum()), int((win * myy).sum()), int((win * mxy).sum())


def test_box_hessian_equals_direct_sum():
    rng = np.random.default_rng(4)
    px = rng.integers(0, 256, (40, 50), dtype=np.uint8)
    ii = integral(GrayImage(px))
    for size in sorted({s for o in range(3) for s in filter_sizes(o)}):
        xs = rng.integers(-3, 53, 25)
        ys = rng.integers(-3, 43, 25)
        dxx, dyy, dxy = box_hessian(ii, size, xs, ys)
        for i, (x, y) in enumerate(zip(xs, ys)):
            assert (int(dxx[i]), int(dyy[i]), int(dxy[i])) == _direct_box_filters(px, int(x), int(y), size)


def test_fast_hessian_blob_centre():
    img = blob_image(64, 3.0)
    # dense response at the finest filter by direct summation
    dense = np.zeros((64, 64))
    for y in range(14, 50):
        for x in range(14, 50):
            dense[y, x] = hessian_det(*_direct_box_filters(img.pixels, x, y, 15), 15)
    oy, ox = np.unravel_index(np.argmax(dense), dense.shape)
    best = max(detect.detect("FASTHESS", img), key=lambda r: r.strength)
    assert math.hypot(best.x - ox, best.y - oy) <= 2.0
    assert math.hypot(best.x - 31.5, best.y - 31.5) <= 2.0


def test_fast_hessian_small_image():
    assert detect.detect("FASTHESS", GrayImage(np.zeros((20, 20), np.uint8))) == []
    assert isinstance(detect.default_settings("FASTHESS"), FastHessianSettings)
