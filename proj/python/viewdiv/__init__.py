"""Positive-pair view sampling and EMD view-diversity scoring."""

from ._viewdiv import *  # noqa: F401,F403
from ._viewdiv import ViewdivError  # noqa: F401

__version__ = "0.1.0"
