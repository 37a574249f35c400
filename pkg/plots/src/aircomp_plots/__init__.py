"""Figure rendering for aircomp experiment CSVs.

Read-only over the CSV schema written by the aircomp CLI: figures group rows
into series, draw error bars from the stderr column and never recompute any
metric. One bundled figure spec per reproduced figure (fig2..fig13).
"""

__version__ = "0.1.0"

from .render import FigureSpec, RenderResult, load_figure_spec, render

__all__ = ["FigureSpec", "RenderResult", "load_figure_spec", "render", "__version__"]
