import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from scenebias.imgcore import GrayImage, load_image, save_image
from scenebias.xform import (
    BLUR,
    LIGHT,
    MANIFEST_NAME,
    ConfigurationError,
    DatasetManifest,
    TransformStep,
    blur_schedule,
    gaussian_blur,
    generate_database,
    light_schedule,
    reduce_light,
)
from oracles import dense_gaussian_blur


def test_blur_schedule_defaults():
    s = blur_schedule()
    assert len(s) == 10 and s[0] == 0.0 and s[-1] == 4.5
    assert {0.5, 2.0, 3.0} <= set(s)
    assert all(b > a for a, b in zip(s, s[1:]))


def test_light_schedule_defaults():
    s = light_schedule()
    assert len(s) == 14 and s[0] == 1.0
    assert s[1] == pytest.approx(0.90) and s[-1] == pytest.approx(0.30)
    assert all(any(abs(v - want) < 1e-9 for v in s) for want in (0.90, 0.60, 0.40))
    assert all(b < a for a, b in zip(s, s[1:]))


def test_transform_step_reference_invariant():
    TransformStep(BLUR, 1, 0.0)
    TransformStep(LIGHT, 1, 1.0)
    with pytest.raises(ValueError):
        TransformStep(BLUR, 1, 0.5)
    with pytest.raises(ValueError):
        TransformStep(LIGHT, 2, 1.0)


def test_blur_zero_is_identity():
    img = GrayImage(np.arange(64, dtype=np.uint8).reshape(8, 8))
    assert gaussian_blur(img, 0.0) == img


@pytest.mark.parametrize("sigma", [0.5, 2.0, 4.5])
def test_blur_constant_fixed_point(sigma):
    img = GrayImage(np.full((20, 30), 77, np.uint8))
    assert gaussian_blur(img, sigma) == img


def test_blur_negative_sigma():
    with pytest.raises(ValueError):
        gaussian_blur(GrayImage.from_data(1, 1, [0]), -0.1)


def test_blur_matches_dense_sigma_2():
    rng = np.random.default_rng(2)
    px = rng.integers(0, 256, (64, 64), dtype=np.uint8)
    got = gaussian_blur(GrayImage(px), 2.0).pixels.astype(int)
    assert np.abs(got - dense_gaussian_blur(px, 2.0).astype(int)).max() <= 1


@settings(max_examples=25, deadline=None)
@given(
    arrays(np.uint8, st.tuples(st.integers(12, 24), st.integers(12, 24))),
    st.sampled_from([0.5, 1.0, 1.5, 2.5, 3.5]),
)
def test_blur_dimension_preserving_and_close_to_dense(px, sigma):
    got = gaussian_blur(GrayImage(px), sigma).pixels
    assert got.shape == px.shape
    assert np.abs(got.astype(int) - dense_gaussian_blur(px, sigma).astype(int)).max() <= 1


def test_light_examples():
    img = GrayImage.from_data(3, 1, [200, 255, 0])
    assert reduce_light(img, 1.0) == img
    assert reduce_light(img, 0.5).data == (100, 128, 0)  # 127.5 rounds up
    assert reduce_light(img, 0.9).data[1] == 230


@pytest.mark.parametrize("s", [0.0, -0.2, 1.01])
def test_light_bad_factor(s):
    with pytest.raises(ValueError):
        reduce_light(GrayImage.from_data(1, 1, [9]), s)


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint8, (6, 7)), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_light_monotone(px, s1, s2):
    s1, s2 = sorted((s1, s2))
    img = GrayImage(px)
    a, b = reduce_light(img, s1).pixels, reduce_light(img, s2).pixels
    assert (a <= b).all() and (b <= px).all()


def _write_refs(directory, n, shape=(24, 32)):
    directory.mkdir()
    rng = np.random.default_rng(n)
    for i in range(n):
        save_image(GrayImage(rng.integers(0, 256, shape, dtype=np.uint8)), directory / f"ref{i}.pgm")


def test_generate_three_scenes(tmp_path):
    _write_refs(tmp_path / "refs", 3)
    manifest = generate_database(tmp_path / "refs", tmp_path / "db")
    files = sorted((tmp_path / "db").rglob("*.pgm"))
    assert len(files) == 72
    assert manifest.scene_ids == [1, 2, 3]
    assert manifest.image_count() == 72
    for s in manifest.scene_ids:
        assert len(manifest.scenes[s].paths[BLUR]) == 10
        assert len(manifest.scenes[s].paths[LIGHT]) == 14
        for kind in (BLUR, LIGHT):
            for k in range(1, len(manifest.schedules[kind]) + 1):
                assert manifest.image_path(s, kind, k).is_file()
    # step 1 of each dataset is the reference itself
    ref = load_image(tmp_path / "refs" / "ref0.pgm")
    assert load_image(manifest.image_path(1, BLUR, 1)) == ref
    assert load_image(manifest.image_path(1, LIGHT, 1)) == ref


def test_generate_one_scene_and_idempotent(tmp_path):
    _write_refs(tmp_path / "refs", 1)
    generate_database(tmp_path / "refs", tmp_path / "db")
    first = (tmp_path / "db" / MANIFEST_NAME).read_bytes()
    stamps = {p: p.stat().st_mtime_ns for p in (tmp_path / "db").rglob("*")}
    generate_database(tmp_path / "refs", tmp_path / "db")
    assert (tmp_path / "db" / MANIFEST_NAME).read_bytes() == first
    assert {p: p.stat().st_mtime_ns for p in (tmp_path / "db").rglob("*")} == stamps
    assert len(list((tmp_path / "db").rglob("*.pgm"))) == 24


def test_generate_parallel_identical(tmp_path):
    _write_refs(tmp_path / "refs", 3)
    generate_database(tmp_path / "refs", tmp_path / "a", jobs=1)
    generate_database(tmp_path / "refs", tmp_path / "b", jobs=3)
    fa = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    fb = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert fa == fb
    assert all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in fa)


def test_generate_empty_refs(tmp_path):
    (tmp_path / "refs").mkdir()
    with pytest.raises(ConfigurationError):
        generate_database(tmp_path / "refs", tmp_path / "db")


def test_manifest_round_trip(tmp_path):
    _write_refs(tmp_path / "refs", 2)
    m = generate_database(tmp_path / "refs", tmp_path / "db")
    again = DatasetManifest.from_json(m.to_json(), root=tmp_path / "db")
    assert again == m
    doc = json.loads((tmp_path / "db" / MANIFEST_NAME).read_text())
    assert "root" not in doc


def test_custom_schedule_validation(tmp_path):
    _write_refs(tmp_path / "refs", 1)
    with pytest.raises(ConfigurationError):
        generate_database(tmp_path / "refs", tmp_path / "db", blur=(0.5, 1.0))
    with pytest.raises(ConfigurationError):
        generate_database(tmp_path / "refs", tmp_path / "db", light=(1.0, 0.5, 0.6))
    m = generate_database(tmp_path / "refs", tmp_path / "db2", blur=(0.0, 1.0), light=(1.0, 0.5))
    assert m.image_count() == 4
