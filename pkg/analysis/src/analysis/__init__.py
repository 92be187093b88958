"""Figure and statistics generation from simulator CSV/trace outputs."""

from .plot_results import (
    FigureSpec,
    SchemaError,
    find_plateaus,
    plot,
    read_metrics_csv,
    read_trace,
)

__all__ = [
    "FigureSpec",
    "SchemaError",
    "find_plateaus",
    "plot",
    "read_metrics_csv",
    "read_trace",
]
__version__ = "0.1.0"
