"""Desk-scale forecasting benchmark comparing spline-edge networks and LSTMs.

Everything is float64 numpy, deterministic under explicit seeds, and runnable
offline: synthetic market data, two from-scratch model families, two
from-scratch trainers, iterative multi-horizon forecasting, and a
config-driven experiment runner that emits comparison tables.
"""

__version__ = "0.1.0"

from . import bench, bspline, cli, data, forecast, kan, lstm, metrics, numcore, optim

__all__ = [
    "bench",
    "bspline",
    "cli",
    "data",
    "forecast",
    "kan",
    "lstm",
    "metrics",
    "numcore",
    "optim",
    "__version__",
]
