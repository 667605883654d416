"""Finite-difference oracle for jet coefficients.

Independent of the jet arithmetic: derivatives are estimated by nested
central differences of plain float evaluation, one coordinate at a time.
Used to validate jets of the expression corpus, never the other way round.
"""

from __future__ import annotations

from math import factorial

import numpy as np

from .expr import Expr, parse

DEFAULT_STEPS = {0: 0.0, 1: 1e-4, 2: 1e-4, 3: 1e-3, 4: 1e-3}


def fd_derivative(e, point, alpha, h=None):
    """Estimate d^alpha of ``e`` at ``point`` by central differences.

    The step defaults to 1e-4 for total order <= 2 and 1e-3 for orders 3
    and 4 (error balance between truncation and cancellation at float64).
    """
    if isinstance(e, str):
        e = parse(e)
    point = np.asarray(point, dtype=np.float64)
    alpha = tuple(int(a) for a in alpha)
    total = sum(alpha)
    if h is None:
        if total > 4:
            raise ValueError("finite-difference oracle supports |alpha| <= 4")
        h = DEFAULT_STEPS[total]

    def rec(p, a):
        for k, ak in enumerate(a):
            if ak > 0:
                a2 = list(a)
                a2[k] -= 1
                up = p.copy()
                up[k] += h
                dn = p.copy()
                dn[k] -= h
                return (rec(up, tuple(a2)) - rec(dn, tuple(a2))) / (2.0 * h)
        return float(e.eval(p))

    return rec(point, alpha)


def fd_coefficient(e, point, alpha, h=None):
    """Taylor coefficient (derivative over alpha factorial)."""
    fac = 1
    for a in alpha:
        fac *= factorial(a)
    return fd_derivative(e, point, alpha, h=h) / fac
