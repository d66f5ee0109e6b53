"""Means from LSTs by extrapolated finite differences.

Transforms are only evaluated on w >= 0, so the difference quotient is taken
on the right of 0 where the value is exactly 1:
    D(h) = (1 - F(h)) / h = E(X) - h E(X^2)/2 + ...
and the error series in h is removed by Richardson extrapolation.
"""

from __future__ import annotations

import numpy as np


def richardson_table(values: np.ndarray) -> np.ndarray:
    """Extrapolate estimates at steps h, h/2, h/4, ... whose error is a power series in h."""
    table = [np.asarray(values, dtype=float)]
    for order in range(1, len(values)):
        prev = table[-1]
        factor = 2.0**order
        table.append((factor * prev[1:] - prev[:-1]) / (factor - 1.0))
    return table[-1][0]


def lst_mean(lst, scale: float = 1.0, levels: int = 5, h0: float | None = None) -> float:
    """-F'(0) for an LST callable accepting an array of arguments.

    ``scale`` is a rough size of the mean; the base step shrinks with it so
    that h * E(X) stays small.
    """
    if h0 is None:
        h0 = 0.05 / max(scale, 1e-12)
    steps = h0 / 2.0 ** np.arange(levels)
    values = np.asarray(lst(steps), dtype=float)
    return float(richardson_table((1.0 - values) / steps))
