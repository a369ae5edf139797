"""Benchmark figure rendering from ccvo output files."""

from .io import ParseError
from .render import FIGURE_KINDS, FigureJob, render

__version__ = "0.1.0"
