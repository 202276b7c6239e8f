"""Rendering for lane-change scenario exports (ego.csv, obstacle.csv, meta.json)."""

from figures.render import FigureSpec, MissingColumnError, RenderError, render

__all__ = ["FigureSpec", "MissingColumnError", "RenderError", "render"]
