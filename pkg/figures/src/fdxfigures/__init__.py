"""Render sweep CSV files as deterministic SVG line figures.

Consumes the simulator CLI's sweep CSV schema
(``axis,series,mean_sumrate_bps_hz,stderr,trials,failed_trials``) and draws
one mean +/- standard-error curve per series label.  Rendering is read-only
on the input and byte-deterministic for a fixed input and library version.
"""

from .render import (
    CSV_COLUMNS,
    FigureSpec,
    RenderError,
    SchemaError,
    SeriesCurve,
    main,
    read_sweep_csv,
    render,
    render_file,
)

__version__ = "0.1.0"

__all__ = [
    "CSV_COLUMNS",
    "FigureSpec",
    "RenderError",
    "SchemaError",
    "SeriesCurve",
    "main",
    "read_sweep_csv",
    "render",
    "render_file",
    "__version__",
]
