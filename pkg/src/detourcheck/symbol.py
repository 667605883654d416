"""Leading symbols and pointwise exactness of the detour sequences.

Every operator in the package is a polynomial differential operator, so
freezing the coefficient of the highest covariant-derivative string and
replacing each derivative by a covector ``xi`` yields a finite matrix,
the leading symbol at a point.  This module builds those matrices and
row-reduces them to test that each three-step sequence is exact at the
symbol level: consecutive symbols compose to zero and the ranks of the
incoming and outgoing maps add up to the middle fibre dimension.

Symbols are transcribed from each operator's displayed formula, not
extracted automatically, so a transcription slip would go unnoticed
without a cross-check.  ``symbol_from_operator`` provides that check: it
applies the actual operator to ``exp(i lam <xi, x>)`` times a section and
reads the symbol off the top coefficient of the resulting polynomial in
``lam``.  The fit is exact linear algebra (an order-k operator produces
a degree-k polynomial), so the oracle works at curved points too, where
lower-order curvature terms fill in the lower ``lam`` coefficients.  The
third-order twistor detour operator has no closed displayed symbol here,
so for it ``symbol_of`` uses the extraction route directly.

Fibre conventions: 1-forms use the coordinate basis; trace-free
symmetric 2-tensors use an orthonormal basis of the kernel of the
``g``-trace inside symmetric matrices (dimension n(n+1)/2 - 1); twistor
(spinor-trace-free) spinor-valued 1-forms use an orthonormal basis of
the kernel of the beta-trace (dimension (n-1) * 2^floor(n/2)).  Ranks
never depend on these choices.

Signs follow the operators as implemented: the divergence-type maps
carry the minus of ``coupled_delta`` and ``adjoint_Tstar``, and the
detour operator on trace-free symmetric 2-tensors carries its leading
minus, so ``sigma(delta d) phi = -(|xi|^2 phi - xi <xi, phi>)``.
"""

from __future__ import annotations

import numpy as np

from . import jetcalc as jc
from . import spin as sn
from .report import CheckResult
from .tensor import Tensor, jtensordot

__all__ = [
    "SEQUENCES",
    "SymbolMap",
    "exactness_check",
    "numeric_rank",
    "plane_wave",
    "symbol_from_operator",
    "symbol_of",
]


SEQUENCES = {
    "maxwell": ("d0", "deltad", "delta1"),
    "einstein": ("P", "MT", "Pstar"),
    "twistor": ("T", "MSigma", "Tstar"),
}

_ORDERS = {
    "d0": 1,
    "delta1": 1,
    "deltad": 2,
    "P": 2,
    "Pstar": 2,
    "MT": 2,
    "T": 1,
    "Tstar": 1,
    "MSigma": 3,
}


class SymbolMap:
    """Leading symbol of one operator at one point and covector.

    ``matrix`` maps source fibre coordinates to target fibre
    coordinates; ``order`` is the homogeneity degree in ``xi``.
    """

    def __init__(self, op, order, matrix):
        self.op = op
        self.order = order
        self.matrix = np.asarray(matrix, dtype=complex)

    @property
    def source_dim(self):
        return self.matrix.shape[1]

    @property
    def target_dim(self):
        return self.matrix.shape[0]

    def rank(self, tol=1e-8):
        return numeric_rank(self.matrix, tol)

    def __repr__(self):
        return "SymbolMap(%r, order=%d, shape=%s)" % (
            self.op,
            self.order,
            self.matrix.shape,
        )


def numeric_rank(mat, tol=1e-8):
    """Rank by Gaussian elimination with a pivot threshold relative to
    the largest entry of the input matrix."""
    a = np.array(mat, dtype=complex)
    if a.ndim != 2:
        raise ValueError("expected a matrix")
    if a.size == 0:
        return 0
    scale = float(np.abs(a).max())
    if scale == 0.0:
        return 0
    rows, cols = a.shape
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        piv = r + int(np.argmax(np.abs(a[r:, c])))
        if abs(a[piv, c]) <= tol * scale:
            continue
        if piv != r:
            a[[r, piv]] = a[[piv, r]]
        a[r] = a[r] / a[r, c]
        for i in range(rows):
            if i != r and a[i, c] != 0.0:
                a[i] = a[i] - a[i, c] * a[r]
        r += 1
    return r


def _null_space(mat, tol=1e-10):
    """Orthonormal columns spanning the kernel of ``mat``."""
    a = np.asarray(mat, dtype=complex)
    u, s, vh = np.linalg.svd(a)
    if s.size:
        rank = int(np.sum(s > tol * s[0]))
    else:
        rank = 0
    return vh[rank:].conj().T


# -- fibre bases --------------------------------------------------------


def _tfs_basis(gval, ginvval):
    """Columns: orthonormal basis of trace-free symmetric matrices,
    embedded as flattened n x n arrays."""
    n = gval.shape[0]
    pairs = [(a, b) for a in range(n) for b in range(a, n)]
    sym = np.zeros((n * n, len(pairs)))
    for k, (a, b) in enumerate(pairs):
        m = np.zeros((n, n))
        m[a, b] = 1.0
        m[b, a] = 1.0
        if a != b:
            m /= np.sqrt(2.0)
        sym[:, k] = m.ravel()
    trace = ginvval.ravel() @ sym
    kern = _null_space(trace[None, :])
    return (sym @ kern).astype(complex)


def _twistor_basis(frame):
    """Columns: orthonormal basis of the beta-trace-free subspace of
    spinor-valued 1-forms, embedded as flattened (n, N) arrays."""
    n = frame.geo.n
    N = frame.rep.dim
    bu = frame.beta_upper(0)[..., 0]
    btr = np.zeros((N, n * N), dtype=complex)
    for a in range(n):
        btr[:, a * N : (a + 1) * N] = bu[a]
    return _null_space(btr)


# -- plane-wave oracle --------------------------------------------------


def plane_wave(geo, xi, lam):
    """Jet coefficients of exp(i lam <xi, x - p>) at ``geo``'s point."""
    sp = geo.space
    xi = np.asarray(xi, dtype=float)
    theta = np.zeros(sp.size)
    for m in range(geo.n):
        mono = [0] * geo.n
        mono[m] = 1
        theta[sp.index[tuple(mono)]] = lam * xi[m]
    j = jc.Jet(sp, tuple(geo.point), theta)
    return jc.jcos(j).coeffs + 1j * jc.jsin(j).coeffs


def symbol_from_operator(apply_fn, sections, geo, xi, order):
    """Extract an order-``order`` symbol matrix from the operator itself.

    ``apply_fn(w, s)`` must apply the operator to the field
    ``w * s`` (``w``: scalar jet coefficients, ``s``: constant fibre
    value from ``sections``) and return the output value at the point as
    a flat array.  Columns of the result are indexed like ``sections``.
    """
    lams = np.arange(order + 1, dtype=float)
    vand = np.vander(lams, increasing=True)
    cols = []
    for s in sections:
        vals = []
        for lam in lams:
            w = plane_wave(geo, xi, lam)
            vals.append(np.asarray(apply_fn(w, s), dtype=complex).ravel())
        coeffs = np.linalg.solve(vand, np.stack(vals))
        cols.append(coeffs[order] / (1j ** order))
    return np.stack(cols, axis=1)


# -- displayed symbols --------------------------------------------------


def _sym_d0(n, xi, gval, ginvval):
    return xi.astype(complex)[:, None]


def _sym_delta1(n, xi, gval, ginvval):
    return -(ginvval @ xi).astype(complex)[None, :]


def _sym_deltad(n, xi, gval, ginvval):
    xiup = ginvval @ xi
    xisq = xi @ xiup
    return -(xisq * np.eye(n) - np.outer(xi, xiup)).astype(complex)


def _sym_P(n, xi, gval, ginvval):
    basis = _tfs_basis(gval, ginvval)
    full = np.outer(xi, xi)
    full = full - gval * (ginvval.ravel() @ full.ravel()) / n
    return basis.conj().T @ full.ravel().astype(complex)[:, None]


def _sym_Pstar(n, xi, gval, ginvval):
    basis = _tfs_basis(gval, ginvval)
    xiup = ginvval @ xi
    return (np.outer(xiup, xiup).ravel().astype(complex) @ basis)[None, :]


def _sym_MT(n, xi, gval, ginvval):
    basis = _tfs_basis(gval, ginvval)
    xiup = ginvval @ xi
    xisq = xi @ xiup
    out = np.zeros((n * n, basis.shape[1]), dtype=complex)
    for k in range(basis.shape[1]):
        h = basis[:, k].reshape(n, n)
        m = xisq * h - (n / (n - 1.0)) * np.outer(xi, xiup @ h)
        m = 0.5 * (m + m.T)
        m = m - gval * (ginvval.ravel() @ m.ravel()) / n
        out[:, k] = -m.ravel()
    return basis.conj().T @ out


def _sym_T(frame, xi):
    n = frame.geo.n
    N = frame.rep.dim
    bl = frame.beta_lower(0)[..., 0]
    bu = frame.beta_upper(0)[..., 0]
    bxi = np.einsum("a,ast->st", xi, bu)
    out = np.zeros((n, N, N), dtype=complex)
    for a in range(n):
        out[a] = xi[a] * np.eye(N) + (2.0 / n) * bl[a] @ bxi
    return out.reshape(n * N, N)


def _sym_Tstar(frame, xi):
    n = frame.geo.n
    N = frame.rep.dim
    ginv = frame.geo.metric.ginv[..., 0]
    xiup = ginv @ xi
    out = np.zeros((N, n, N), dtype=complex)
    for a in range(n):
        out[:, a] = -xiup[a] * np.eye(N)
    return out.reshape(N, n * N)


def _msigma_matrix(frame, xi, basis):
    """Plane-wave extraction of the third-order twistor detour symbol,
    expressed on the beta-trace-free fibre basis."""
    geo = frame.geo
    n = geo.n
    N = frame.rep.dim
    if geo.order < 4:
        raise ValueError("twistor detour symbol needs metric jets of order >= 4")
    sections = [basis[:, k].reshape(n, N) for k in range(basis.shape[1])]

    def apply_fn(w, s):
        comps = s[..., None] * w[: geo.space.size]
        u = Tensor(geo.space, comps, "l", 0.5, (N,))
        proj = _project_twistor(frame, u)
        out = sn.M_Sigma(frame, proj)
        return out.comps[..., 0]

    full = symbol_from_operator(apply_fn, sections, geo, xi, 3)
    return basis.conj().T @ full


def _project_twistor(frame, u):
    """Algebraic projection onto the beta-trace-free part, as a field."""
    sp = u.space
    n = frame.geo.n
    tr = sn.beta_trace(frame, u)
    bl = frame.beta_lower(sp.order)
    corr = jtensordot(sp, bl, tr, (2,), (0,))
    return Tensor(sp, u.comps + (2.0 / n) * corr, "l", u.weight, u.fdims)


def symbol_of(op, geo, xi):
    """Leading symbol of the named operator at ``geo``'s point.

    ``xi`` is a covector (lower index); it must be nonzero.  Known
    names: d0, delta1, deltad (1-form detour), P, MT, Pstar
    (trace-free-symmetric detour), T, MSigma, Tstar (twistor detour).
    """
    if op not in _ORDERS:
        raise KeyError("unknown operator %r" % (op,))
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (geo.n,):
        raise ValueError("covector length does not match the dimension")
    if not np.any(xi):
        raise ValueError("symbol needs a nonzero covector")
    gval = geo.metric.g[..., 0]
    ginvval = geo.metric.ginv[..., 0]
    n = geo.n
    if op in ("d0", "delta1", "deltad", "P", "Pstar", "MT"):
        fn = {
            "d0": _sym_d0,
            "delta1": _sym_delta1,
            "deltad": _sym_deltad,
            "P": _sym_P,
            "Pstar": _sym_Pstar,
            "MT": _sym_MT,
        }[op]
        mat = fn(n, xi, gval, ginvval)
    else:
        frame = sn.SpinFrame(geo)
        if op == "T":
            basis = _twistor_basis(frame)
            mat = basis.conj().T @ _sym_T(frame, xi)
        elif op == "Tstar":
            basis = _twistor_basis(frame)
            mat = _sym_Tstar(frame, xi) @ basis
        else:
            basis = _twistor_basis(frame)
            mat = _msigma_matrix(frame, xi, basis)
    return SymbolMap(op, _ORDERS[op], mat)


# -- exactness ----------------------------------------------------------


def _require_riemannian(geo):
    ev = np.linalg.eigvalsh(geo.metric.g[..., 0])
    if np.any(ev <= 0.0):
        raise ValueError("symbol exactness requires Riemannian signature")


def _unit_covector(geo, xi):
    xi = np.asarray(xi, dtype=float)
    ginvval = geo.metric.ginv[..., 0]
    norm = float(np.sqrt(xi @ ginvval @ xi))
    if norm == 0.0:
        raise ValueError("symbol needs a nonzero covector")
    return xi / norm


def exactness_check(sequence, geo, xi, fixture=None, tol=1e-10):
    """Pointwise symbol exactness of one detour sequence.

    Normalises ``xi`` to unit length, builds the three symbols, and
    reports the two composition residuals plus the two rank sums
    against the middle fibre dimensions.  Riemannian metrics only.
    """
    if sequence not in SEQUENCES:
        raise KeyError("unknown sequence %r" % (sequence,))
    _require_riemannian(geo)
    xi = _unit_covector(geo, xi)
    names = SEQUENCES[sequence]
    syms = [symbol_of(op, geo, xi) for op in names]
    suite = "symbol-" + sequence
    fixture = fixture or getattr(geo.spec, "name", "custom")
    point = tuple(float(v) for v in geo.point)
    results = []
    for i in range(2):
        a, b = syms[i], syms[i + 1]
        prod = b.matrix @ a.matrix
        scale = max(
            float(np.abs(a.matrix).max()) * float(np.abs(b.matrix).max()), 1.0
        )
        res = float(np.abs(prod).max()) / scale
        results.append(
            CheckResult(
                suite,
                "%s-composition-%d" % (sequence, i + 1),
                fixture,
                point,
                res,
                tol,
                info={"ops": [a.op, b.op]},
            )
        )
        mid = a.target_dim
        ra, rb = a.rank(), b.rank()
        results.append(
            CheckResult(
                suite,
                "%s-rank-exactness-%d" % (sequence, i + 1),
                fixture,
                point,
                float(abs(ra + rb - mid)),
                0.5,
                info={"ranks": [ra, rb], "middle_dim": mid},
            )
        )
    return results
