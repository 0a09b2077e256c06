"""Figure rendering for the dense-WLAN association workbench CSVs."""

from .render import KINDS, FigureSpec, RenderError, render

__all__ = ["KINDS", "FigureSpec", "RenderError", "render"]
__version__ = "0.1.0"
