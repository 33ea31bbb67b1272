"""Python bindings for the swnet sample-weighting library."""

from ._swnet import *  # noqa: F401,F403
from ._swnet import __version__  # noqa: F401
