"""Richardson extrapolation for quantities with even-power error expansions."""
from __future__ import annotations

import numpy as np


def romberg(values, ratio: float = 2.0, first_power: int = 2, step: int = 2):
    """Extrapolate ``values`` computed at spacings ``h, h/ratio, h/ratio^2, ...`` to ``h -> 0``.

    Assumes ``A(h) = A + c1 h^p + c2 h^(p+step) + ...``.  Works elementwise on
    arrays.  Returns the last diagonal entry of the Romberg table.
    """
    table = [np.asarray(v, dtype=float) for v in values]
    if not table:
        raise ValueError("need at least one value")
    p = first_power
    while len(table) > 1:
        f = ratio**p
        table = [(f * table[i + 1] - table[i]) / (f - 1.0) for i in range(len(table) - 1)]
        p += step
    out = table[0]
    return float(out) if out.ndim == 0 else out


def romberg_error_estimate(values, ratio: float = 2.0, first_power: int = 2, step: int = 2) -> float:
    """Max abs difference between the extrapolants from the last two sub-ladders."""
    if len(values) < 3:
        return float(np.max(np.abs(np.asarray(values[-1]) - np.asarray(values[0]))))
    a = romberg(values, ratio, first_power, step)
    b = romberg(values[1:], ratio, first_power, step)
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def convergence_ratios(values, exact: float) -> np.ndarray:
    """Successive error ratios ``e_k / e_{k+1}``; about ``ratio**p`` for order ``p``."""
    e = np.abs(np.asarray(values, dtype=float) - exact)
    return e[:-1] / e[1:]
