"""Numpy fallback for the jet product kernel.

The product table is a list of index triples (k, i, j) sorted by output
slot k, so after forming all pairwise products the per-slot sums are
segment sums, which ``np.add.reduceat`` handles in one pass.
"""

from __future__ import annotations

import numpy as np


def jsum_mul(A, B, tI, tJ, tK, tstarts):
    P, C, _ = A.shape
    Q = B.shape[0]
    PA = A[:, :, tI]  # (P, C, T)
    PB = B[:, :, tJ]  # (Q, C, T)
    if C == 1:
        prod = PA[:, 0][:, None, :] * PB[:, 0][None, :, :]
    else:
        # batched over the triple axis: (T, P, C) @ (T, C, Q) -> (T, P, Q)
        prod = np.matmul(PA.transpose(2, 0, 1), PB.transpose(2, 1, 0))
        prod = prod.transpose(1, 2, 0)
    return np.add.reduceat(prod, tstarts, axis=-1)
