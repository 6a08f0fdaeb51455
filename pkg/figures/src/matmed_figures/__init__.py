"""Figure rendering for matmed CSV artifacts."""

__version__ = "0.1.0"

from .spec import FigureSpec, load_spec
from .render import render

__all__ = ["FigureSpec", "load_spec", "render"]
