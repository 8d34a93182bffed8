"""Render ebmbd experiment artifacts into figures."""

from .render import PlotSpec, RenderError, render

__version__ = "0.1.0"
