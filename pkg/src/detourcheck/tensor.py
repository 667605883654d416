"""Dense component tensors at a point, with metric-aware index algebra.

A :class:`Tensor` is a block of truncated Taylor coefficients: the component
array carries one axis of extent ``n`` per manifold index, optional fiber
axes for bundle-valued objects, and a trailing axis of jet coefficients over
a shared :class:`~detourcheck.jetcalc.JetSpace`.  Each manifold index is
covariant (``'l'``) or contravariant (``'u'``), recorded positionally.

Conformal weight is carried as declared metadata and adjusted explicitly by
the operations that pair indices through the metric.  The convention follows
the weight-2 conformal metric: lowering an index adds weight +2, raising
adds -2, and contracting two covariant indices through the inverse metric
adds -2 (two contravariant ones, +2).  Mixed-variance traces leave the
weight alone.  Nothing else ever touches the weight tag.

The functional core is :func:`jtensordot`, a tensordot over component axes
whose scalar product is the truncated jet product; every metric pairing and
fiber action in the package reduces to it.
"""

from __future__ import annotations

from itertools import permutations
from math import factorial

import numpy as np

from .jetcalc import Jet, JetSpace

__all__ = [
    "MetricAtPoint",
    "Tensor",
    "asym",
    "contract",
    "jtensordot",
    "raise_lower",
    "sym",
    "tfs",
]


def _perm_sign(perm):
    sign = 1
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length, k = 0, start
        while not seen[k]:
            seen[k] = True
            k = perm[k]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def jtensordot(space: JetSpace, A, B, axesA=(), axesB=()):
    """Tensordot over component axes with jet convolution on the trailing axis.

    ``A`` and ``B`` are arrays whose last axis holds jet coefficients over
    ``space``; ``axesA`` and ``axesB`` name matching component axes to sum
    over.  The result keeps the free component axes of ``A`` (in order),
    then those of ``B``, then the jet axis.  With empty axes this is the
    outer product, so multiplying a whole component block by one scalar jet
    is ``jtensordot(space, A, jet_coeffs)``.
    """
    A = np.asarray(A)
    B = np.asarray(B)
    axesA = tuple(a % (A.ndim - 1) for a in axesA)
    axesB = tuple(b % (B.ndim - 1) for b in axesB)
    if len(axesA) != len(axesB):
        raise ValueError("axesA and axesB must have equal length")
    for a, b in zip(axesA, axesB):
        if A.shape[a] != B.shape[b]:
            raise ValueError(
                f"contracted axes disagree: {A.shape[a]} vs {B.shape[b]}"
            )
    if A.shape[-1] != space.size or B.shape[-1] != space.size:
        raise ValueError("trailing axis must match the jet space size")

    freeA = [a for a in range(A.ndim - 1) if a not in axesA]
    freeB = [b for b in range(B.ndim - 1) if b not in axesB]
    shapeA = [A.shape[a] for a in freeA]
    shapeB = [B.shape[b] for b in freeB]
    csize = 1
    for a in axesA:
        csize *= A.shape[a]

    At = np.transpose(A, freeA + list(axesA) + [A.ndim - 1])
    Bt = np.transpose(B, freeB + list(axesB) + [B.ndim - 1])
    At = At.reshape(-1, csize, space.size)
    Bt = Bt.reshape(-1, csize, space.size)
    out = space.jmul(At, Bt)
    return out.reshape(shapeA + shapeB + [space.size])


class MetricAtPoint:
    """A metric's jets at one point: components, inverse, determinant.

    The inverse is computed by splitting ``g = g0 (I + X)`` at the value
    level and summing the finite Neumann series in the nilpotent part
    ``X``; the determinant jet comes from ``det(g0) exp(tr log(I + X))``.
    Both series terminate at the jet order.  Construction checks
    ``g_ab g^bc = delta`` in every coefficient and that ``g`` is exactly
    symmetric.
    """

    __slots__ = ("space", "g", "ginv", "det", "signature")

    def __init__(self, space: JetSpace, g, signature=None):
        g = np.asarray(g, dtype=np.float64)
        n = space.n
        if g.shape != (n, n, space.size):
            raise ValueError(f"metric components must have shape {(n, n, space.size)}")
        if not np.array_equal(g, np.swapaxes(g, 0, 1)):
            raise ValueError("metric components must be exactly symmetric")
        self.space = space
        self.g = g

        g0 = g[:, :, 0]
        eig = np.linalg.eigvalsh(g0)
        if np.min(np.abs(eig)) < 1e-12 * max(1.0, np.max(np.abs(eig))):
            raise ValueError("metric is degenerate at this point")
        pos = int(np.sum(eig > 0))
        sig = (pos, n - pos)
        if signature is not None and tuple(signature) != sig:
            raise ValueError(f"declared signature {signature}, eigenvalues give {sig}")
        self.signature = sig

        g0inv = np.linalg.inv(g0)
        # X = g0^{-1} (g - g0) has zero value part, so its powers raise the
        # lowest surviving jet degree and the series below are finite.
        X = np.einsum("ac,cbk->abk", g0inv, g)
        X[:, :, 0] -= np.eye(n)

        inv = np.zeros_like(g)
        inv[:, :, 0] = np.eye(n)
        logtr = np.zeros(space.size)
        power = X
        for m in range(1, space.order + 1):
            inv = inv + (-1) ** m * power
            logtr += (-1) ** (m + 1) / m * np.trace(power, axis1=0, axis2=1)
            if m < space.order:
                power = jtensordot(space, power, X, (1,), (0,))
        self.ginv = np.ascontiguousarray(np.einsum("abk,bc->ack", inv, g0inv))

        expt = np.zeros(space.size)
        expt[0] = 1.0
        hpow = expt
        for m in range(1, space.order + 1):
            hpow = space.jmul_flat(hpow, logtr)
            expt = expt + hpow / factorial(m)
        self.det = float(np.linalg.det(g0)) * expt

        ident = jtensordot(space, self.g, self.ginv, (1,), (0,))
        ident[:, :, 0] -= np.eye(n)
        if np.max(np.abs(ident)) > 1e-12 * max(1.0, np.max(np.abs(self.ginv))):
            raise ValueError("metric inverse failed its self-check")

    @property
    def n(self):
        return self.space.n

    def value(self):
        return self.g[:, :, 0]


class Tensor:
    """Jet-valued components with per-index variance and a weight tag.

    ``comps`` has shape ``(n,) * rank + fdims + (space.size,)``; ``indices``
    is a string of ``'u'``/``'l'`` marks, one per manifold index, and
    ``fdims`` lists the extents of any fiber axes sitting between the
    manifold indices and the jet axis.
    """

    __slots__ = ("space", "comps", "indices", "weight", "fdims")

    def __init__(self, space: JetSpace, comps, indices, weight=0, fdims=()):
        comps = np.asarray(comps)
        indices = str(indices)
        fdims = tuple(int(d) for d in fdims)
        if any(c not in "ul" for c in indices):
            raise ValueError(f"indices must be marks in 'ul', got {indices!r}")
        want = (space.n,) * len(indices) + fdims + (space.size,)
        if comps.shape != want:
            raise ValueError(f"component shape {comps.shape}, expected {want}")
        self.space = space
        self.comps = comps
        self.indices = indices
        self.weight = weight
        self.fdims = fdims

    # ------------------------------------------------------------------
    @classmethod
    def zeros(cls, space, indices, weight=0, fdims=(), dtype=np.float64):
        shape = (space.n,) * len(indices) + tuple(fdims) + (space.size,)
        return cls(space, np.zeros(shape, dtype=dtype), indices, weight, fdims)

    @classmethod
    def from_values(cls, space, values, indices, weight=0, fdims=()):
        """Constant tensor: the given values with vanishing derivatives."""
        values = np.asarray(values)
        comps = np.zeros(values.shape + (space.size,), dtype=values.dtype)
        comps[..., 0] = values
        return cls(space, comps, indices, weight, fdims)

    @property
    def rank(self):
        return len(self.indices)

    def value(self):
        return self.comps[..., 0]

    def jet_at(self, *pos):
        return self.comps[pos]

    # ------------------------------------------------------------------
    def _like(self, comps, indices=None, weight=None, fdims=None):
        return Tensor(
            self.space,
            comps,
            self.indices if indices is None else indices,
            self.weight if weight is None else weight,
            self.fdims if fdims is None else fdims,
        )

    def __add__(self, other):
        self._check_compatible(other)
        return self._like(self.comps + other.comps)

    def __sub__(self, other):
        self._check_compatible(other)
        return self._like(self.comps - other.comps)

    def __neg__(self):
        return self._like(-self.comps)

    def __mul__(self, scalar):
        if isinstance(scalar, Jet):
            coeffs = scalar.coeffs
            if scalar.space is not self.space:
                if scalar.order < self.space.order:
                    raise ValueError("jet scalar has lower order than the tensor")
                coeffs = coeffs[: self.space.size]
            return self._like(jtensordot(self.space, self.comps, coeffs))
        return self._like(self.comps * scalar)

    __rmul__ = __mul__

    def _check_compatible(self, other):
        if not isinstance(other, Tensor):
            raise TypeError("expected a Tensor")
        if (
            other.space is not self.space
            or other.indices != self.indices
            or other.fdims != self.fdims
        ):
            raise ValueError("tensors are not index-compatible")
        if other.weight != self.weight:
            raise ValueError(
                f"weight mismatch: {self.weight} vs {other.weight}"
            )

    def truncate(self, order):
        """Drop coefficients above the given jet order (a prefix slice)."""
        if order > self.space.order:
            raise ValueError("cannot truncate to a higher order")
        sp = self.space.truncated(order)
        return Tensor(sp, self.comps[..., : sp.size], self.indices, self.weight, self.fdims)

    # ------------------------------------------------------------------
    def transpose(self, perm):
        """Permute manifold indices; ``perm[i]`` is the source position of
        the new index ``i``."""
        perm = list(perm)
        if sorted(perm) != list(range(self.rank)):
            raise ValueError("perm must rearrange all manifold indices")
        axes = perm + list(range(self.rank, self.comps.ndim))
        indices = "".join(self.indices[p] for p in perm)
        return self._like(np.transpose(self.comps, axes), indices=indices)

    def _sym_impl(self, positions, signed):
        positions = sorted(positions)
        if len(set(positions)) != len(positions):
            raise ValueError("duplicate index positions")
        if any(p < 0 or p >= self.rank for p in positions):
            raise ValueError("index position out of range")
        marks = {self.indices[p] for p in positions}
        if len(marks) > 1:
            raise ValueError("cannot (anti)symmetrize indices of mixed variance")
        acc = np.zeros_like(self.comps)
        for perm in permutations(range(len(positions))):
            axes = list(range(self.comps.ndim))
            for slot, which in zip(positions, perm):
                axes[slot] = positions[which]
            sign = _perm_sign(perm) if signed else 1
            acc = acc + sign * np.transpose(self.comps, axes)
        return self._like(acc / factorial(len(positions)))

    def sym(self, positions):
        return self._sym_impl(positions, signed=False)

    def asym(self, positions):
        return self._sym_impl(positions, signed=True)

    # ------------------------------------------------------------------
    def contract(self, i, j, metric: MetricAtPoint | None = None):
        """Pair manifold indices ``i`` and ``j``; the metric supplies the
        pairing when both have the same variance."""
        if i == j:
            raise ValueError("cannot contract an index with itself")
        i, j = sorted((i, j))
        if not (0 <= i < self.rank and 0 <= j < self.rank):
            raise ValueError("index position out of range")
        mi, mj = self.indices[i], self.indices[j]
        comps, weight = self.comps, self.weight
        if mi == mj:
            if metric is None:
                raise ValueError("metric needed to pair indices of equal variance")
            pair = metric.ginv if mi == "l" else metric.g
            weight = weight + (-2 if mi == "l" else 2)
            comps = jtensordot(self.space, comps, pair, (i,), (0,))
            # the metric partner index is now the second-to-last axis; trace
            # it against the original index j, which sits at j - 1 after the
            # removal of axis i
            comps = np.trace(comps, axis1=j - 1, axis2=comps.ndim - 2)
        else:
            comps = np.trace(comps, axis1=i, axis2=j)
        indices = "".join(c for k, c in enumerate(self.indices) if k not in (i, j))
        # np.trace moves the remaining axes up; component layout matches
        return Tensor(self.space, comps, indices, weight, self.fdims)

    def raise_index(self, i, metric: MetricAtPoint):
        if self.indices[i] != "l":
            raise ValueError(f"index {i} is already contravariant")
        comps = jtensordot(self.space, self.comps, metric.ginv, (i,), (0,))
        comps = np.moveaxis(comps, -2, i)
        indices = self.indices[:i] + "u" + self.indices[i + 1 :]
        return Tensor(self.space, comps, indices, self.weight - 2, self.fdims)

    def lower_index(self, i, metric: MetricAtPoint):
        if self.indices[i] != "u":
            raise ValueError(f"index {i} is already covariant")
        comps = jtensordot(self.space, self.comps, metric.g, (i,), (0,))
        comps = np.moveaxis(comps, -2, i)
        indices = self.indices[:i] + "l" + self.indices[i + 1 :]
        return Tensor(self.space, comps, indices, self.weight + 2, self.fdims)

    def __repr__(self):
        return (
            f"Tensor(indices={self.indices!r}, weight={self.weight},"
            f" fdims={self.fdims}, n={self.space.n}, order={self.space.order})"
        )


# ----------------------------------------------------------------------
# Operation-style entry points.


def sym(t: Tensor, positions) -> Tensor:
    return t.sym(positions)


def asym(t: Tensor, positions) -> Tensor:
    return t.asym(positions)


def contract(t: Tensor, i, j, metric=None) -> Tensor:
    return t.contract(i, j, metric)


def raise_lower(t: Tensor, i, metric: MetricAtPoint) -> Tensor:
    """Flip the variance of index ``i`` through the metric."""
    if t.indices[i] == "l":
        return t.raise_index(i, metric)
    return t.lower_index(i, metric)


def tfs(t: Tensor, metric: MetricAtPoint) -> Tensor:
    """Trace-free symmetric part of a rank-2 tensor of equal variance."""
    if t.rank != 2 or t.indices[0] != t.indices[1]:
        raise ValueError("tfs needs two manifold indices of equal variance")
    s = t.sym((0, 1))
    tr = s.contract(0, 1, metric)
    pure = metric.g if t.indices == "ll" else metric.ginv
    trace_part = jtensordot(t.space, pure, tr.comps) / t.space.n
    return s._like(s.comps - trace_part)
