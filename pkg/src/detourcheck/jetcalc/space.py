"""Coefficient spaces for truncated multivariate Taylor expansions.

A jet of order ``r`` in ``n`` variables is stored as a flat coefficient
vector indexed by the multi-indices ``alpha`` with ``|alpha| <= r``.  The
coefficient at ``alpha`` is the Taylor coefficient
``(d^alpha f)(p) / alpha!``, so the entry for ``alpha = 0`` is the value of
the function at the base point.

Multi-indices are enumerated in graded lexicographic order: first by total
degree, then lexicographically by exponent tuple with the *first* variable
most significant.  For ``n = 2, r = 2`` the ordering is::

    (0,0) | (1,0) (0,1) | (2,0) (1,1) (0,2)

so the gradient occupies slots ``1 .. n`` in coordinate order, and the
enumeration for order ``r - 1`` is a prefix of the enumeration for order
``r`` (truncation of a jet is a slice of its coefficient vector).

A :class:`JetSpace` precomputes the index tables used by the arithmetic
kernels: the product table (all pairs of slots whose multi-indices sum to a
slot of the space) and per-coordinate differentiation tables.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np

from . import kernel


def monomial_count(n: int, order: int) -> int:
    """Number of multi-indices in n variables with total degree <= order."""
    return comb(n + order, order)


def _degree_block(n, degree):
    """All exponent tuples of the given total degree, lexicographically
    descending (x0-major)."""
    if n == 1:
        return [(degree,)]
    out = []
    for first in range(degree, -1, -1):
        for rest in _degree_block(n - 1, degree - first):
            out.append((first,) + rest)
    return out


class JetSpace:
    """Shared immutable tables for jets of fixed dimension and order.

    Instances are cached; use :func:`get_space`.
    """

    def __init__(self, n: int, order: int):
        if not (1 <= n <= 10):
            raise ValueError(f"dimension must be in 1..10, got {n}")
        if order < 0:
            raise ValueError(f"order must be >= 0, got {order}")
        self.n = n
        self.order = order

        mind = []
        self.degree_start = []  # slot where each total-degree block begins
        for d in range(order + 1):
            self.degree_start.append(len(mind))
            mind.extend(_degree_block(n, d))
        self.mind = np.array(mind, dtype=np.int64)
        self.size = len(mind)
        assert self.size == monomial_count(n, order)
        self.index = {tuple(a): i for i, a in enumerate(mind)}

        self._build_product_table()
        self._build_partial_tables()

    def _build_product_table(self):
        deg = self.mind.sum(axis=1)
        triples = []
        for i in range(self.size):
            di = deg[i]
            for j in range(self.size):
                if di + deg[j] > self.order:
                    continue
                k = self.index[tuple(self.mind[i] + self.mind[j])]
                triples.append((k, i, j))
        triples.sort()
        arr = np.array(triples, dtype=np.int32)
        self.tK = np.ascontiguousarray(arr[:, 0])
        self.tI = np.ascontiguousarray(arr[:, 1])
        self.tJ = np.ascontiguousarray(arr[:, 2])
        # first position of each output slot in the sorted triple list;
        # every slot occurs (pair with the constant), so this has length size
        self.tstarts = np.searchsorted(self.tK, np.arange(self.size)).astype(np.int64)

    def _build_partial_tables(self):
        # d/dx_k maps an order-r jet onto an order-(r-1) jet:
        # out[j] = in[index(alpha_j + e_k)] * (alpha_j[k] + 1)
        sub = monomial_count(self.n, self.order - 1) if self.order > 0 else 0
        self.dcol = []
        self.dfac = []
        for k in range(self.n):
            col = np.empty(sub, dtype=np.int64)
            fac = np.empty(sub, dtype=np.float64)
            for j in range(sub):
                a = self.mind[j].copy()
                a[k] += 1
                col[j] = self.index[tuple(a)]
                fac[j] = a[k]
            self.dcol.append(col)
            self.dfac.append(fac)

    # ------------------------------------------------------------------
    def jmul(self, A, B):
        """Bilinear contraction with jet-coefficient convolution.

        ``A`` has shape ``(P, C, size)``, ``B`` has shape ``(Q, C, size)``;
        the result ``out[p, q, k] = sum_c sum_{alpha+beta=gamma_k}
        A[p, c, alpha] * B[q, c, beta]`` has shape ``(P, Q, size)``.
        """
        return kernel.jsum_mul(A, B, self.tI, self.tJ, self.tK, self.tstarts, self.size)

    def jmul_flat(self, a, b):
        """Product of two single coefficient vectors."""
        out = self.jmul(a.reshape(1, 1, -1), b.reshape(1, 1, -1))
        return out.reshape(-1)

    def partial_coeffs(self, coeffs, k):
        """Coefficients of d/dx_k applied to ``coeffs`` (trailing axis)."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        return coeffs[..., self.dcol[k]] * self.dfac[k]

    def truncated(self, order: int) -> "JetSpace":
        return get_space(self.n, order)

    def __repr__(self):
        return f"JetSpace(n={self.n}, order={self.order})"


@lru_cache(maxsize=None)
def get_space(n: int, order: int) -> JetSpace:
    return JetSpace(n, order)
