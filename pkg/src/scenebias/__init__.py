"""Benchmark harness measuring how interest-region detectors favour scene content."""

__version__ = "0.1.0"

from .imgcore import GrayImage, load_image, save_image  # noqa: E402
from .detect.regions import InterestRegion  # noqa: E402
from .repeat import overlap_error, repeatability  # noqa: E402

__all__ = ["GrayImage", "load_image", "save_image", "InterestRegion", "overlap_error", "repeatability", "__version__"]
