"""Native interest-region detectors and the external region-file adapter."""

from __future__ import annotations

import dataclasses

from ..imgcore import GrayImage
from .fasthessian import FastHessianSettings, fast_hessian
from .mser import MserSettings, mser
from .regions import (
    InterestRegion,
    RegionFileError,
    RegionValidationError,
    canonical_order,
    circle,
    format_regions,
    parse_regions,
    read_region_file,
    write_region_file,
)
from .scalespace import HarrisLaplaceSettings, HessianLaplaceSettings, harris_laplace, hessian_laplace

__all__ = [
    "NATIVE_DETECTORS",
    "UnknownDetectorError",
    "InterestRegion",
    "RegionFileError",
    "RegionValidationError",
    "canonical_order",
    "circle",
    "default_settings",
    "detect",
    "format_regions",
    "is_external",
    "parse_detector_id",
    "parse_regions",
    "read_region_file",
    "settings_dict",
    "write_region_file",
    "harris_laplace",
    "hessian_laplace",
    "mser",
    "fast_hessian",
]

NATIVE_DETECTORS = {
    "HARLAP": (harris_laplace, HarrisLaplaceSettings),
    "HESLAP": (hessian_laplace, HessianLaplaceSettings),
    "MSER": (mser, MserSettings),
    "FASTHESS": (fast_hessian, FastHessianSettings),
}

EXTERNAL_PREFIX = "EXT:"


class UnknownDetectorError(ValueError):
    """Detector name outside the native set and not of the form EXT:<tag>."""


def is_external(name: str) -> bool:
    return name.startswith(EXTERNAL_PREFIX)


def parse_detector_id(name: str) -> str:
    name = name.strip()
    if name.upper() in NATIVE_DETECTORS:
        return name.upper()
    if is_external(name):
        tag = name[len(EXTERNAL_PREFIX):]
        if not tag or not all(ch.isalnum() or ch in "-_." for ch in tag):
            raise UnknownDetectorError(f"bad external detector tag in {name!r}")
        return name
    raise UnknownDetectorError(
        f"unknown detector {name!r}; expected one of {sorted(NATIVE_DETECTORS)} or EXT:<tag>"
    )


def default_settings(name: str):
    try:
        return NATIVE_DETECTORS[name][1]()
    except KeyError:
        raise UnknownDetectorError(f"{name!r} is not a native detector") from None


def settings_dict(settings) -> dict:
    return dataclasses.asdict(settings)


def _resolve_settings(name: str, params):
    cls = NATIVE_DETECTORS[name][1]
    if params is None:
        return cls()
    if isinstance(params, cls):
        return params
    if isinstance(params, dict):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(params) - known
        if unknown:
            raise ValueError(f"unknown {name} settings: {sorted(unknown)}")
        return cls(**params)
    raise TypeError(f"settings for {name} must be {cls.__name__} or dict")


def detect(name: str, img: GrayImage, params=None) -> list[InterestRegion]:
    """Run a native detector; regions come back in canonical order."""
    name = parse_detector_id(name)
    if is_external(name):
        raise UnknownDetectorError(f"{name} is external; load its regions with read_region_file")
    fn = NATIVE_DETECTORS[name][0]
    return fn(img, _resolve_settings(name, params))
