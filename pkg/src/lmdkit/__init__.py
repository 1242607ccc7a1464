"""Local map descriptors for 2D pointset maps.

Builds rotation- and translation-normalized descriptor sets from lidar
local maps, retrieves matching maps through an inverted index with a
spatial-pyramid kernel, and flags map changes with density-ratio and
nearest-neighbor outlier scores.
"""

from lmdkit.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
