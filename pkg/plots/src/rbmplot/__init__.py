"""Figure renderer for the rbmsim CSV outputs."""

__version__ = "0.1.0"

from .csvio import SchemaError, read_result_csv
from .figures import FIGURE_KINDS, FigureSpec, build_figure, render

__all__ = [
    "FIGURE_KINDS",
    "FigureSpec",
    "SchemaError",
    "build_figure",
    "read_result_csv",
    "render",
]
