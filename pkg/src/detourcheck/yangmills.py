"""Vector bundles with connection over a chart: curvature, the coupled
exterior derivative and codifferential, the second-order operator
``M(phi) = delta d phi - F . phi`` on twisted 1-forms, Yang-Mills
currents, Hodge star and half-flat projections in dimension 4.

A connection is specified as expression-weighted constant matrices, so
real polynomial data can carry complex fiber matrices (su(2) bases, the
instanton profile).  All operators work on :class:`~detourcheck.tensor.Tensor`
values whose fiber axes hold the bundle components; entries are jets, so
compositions are exact up to float roundoff.

Sign conventions, pinned here and exercised by the identity tests:

* ``(d phi)`` is ``(deg+1)`` times the antisymmetrized coupled derivative,
  so on functions ``(d Phi)_a = D_a Phi`` and ``F = dA + [A, A]`` in
  components reads ``F_ab = d_a A_b - d_b A_a + [A_a, A_b]``.
* ``(delta psi)_{a...} = -D^b psi_{b a...}`` (divergence on the first
  index, raised by the metric, with a minus sign).
* The curvature action on twisted 1-forms is ``(F . phi)_a = F_a{}^b
  phi_b``; with these choices ``M d Phi = e(delta F) Phi`` and
  ``delta M psi = -i(delta F) psi``.
"""

from __future__ import annotations

from math import factorial

import numpy as np

from . import jetcalc as jc
from . import riemann as rm
from .jetcalc import expr as ex
from .report import CheckResult, sup_residual
from .tensor import Tensor, jtensordot

__all__ = [
    "ConnectionSpec",
    "M_D",
    "M_D_direct",
    "PointConnection",
    "check_algact",
    "check_half_flat_complexes",
    "connection_fixture",
    "coupled_d",
    "coupled_delta",
    "curvature_F",
    "hodge_star",
    "pauli",
    "sd_project",
    "su2_basis",
    "variational_checks",
    "ym_current",
]


def pauli():
    s1 = np.array([[0, 1], [1, 0]], dtype=complex)
    s2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
    s3 = np.array([[1, 0], [0, -1]], dtype=complex)
    return s1, s2, s3


def su2_basis():
    """Anti-hermitian generators T^a = -(i/2) sigma^a."""
    return tuple(-0.5j * s for s in pauli())


class ConnectionSpec:
    """A matrix-valued connection 1-form as expression-weighted matrices.

    ``terms`` is a list of ``(direction, expression, matrix)`` entries;
    the component ``A_a`` is the sum of ``expr(x) * matrix`` over the
    terms with that direction.  ``compatible=True`` declares that the
    connection preserves the standard fiber Hermitian form, which for the
    identity form means every ``A_a`` is anti-hermitian (checked on
    evaluation).
    """

    def __init__(self, n, rank, terms, name="custom", compatible=False):
        self.n = n
        self.rank = rank
        self.name = name
        self.compatible = compatible
        self.terms = []
        for direction, expr, matrix in terms:
            if not 0 <= direction < n:
                raise ValueError(f"direction {direction} out of range for n={n}")
            e = expr if isinstance(expr, ex.Expr) else jc.parse(str(expr))
            m = np.asarray(matrix, dtype=complex)
            if m.shape != (rank, rank):
                raise ValueError(f"matrix shape {m.shape}, expected {(rank, rank)}")
            self.terms.append((direction, e, m))

    def jets_at(self, point, order):
        """W[a, i, j, :] = jet coefficients of the matrix entry (i, j) of A_a."""
        sp = jc.get_space(self.n, order)
        W = np.zeros((self.n, self.rank, self.rank, sp.size), dtype=complex)
        pt = np.asarray(point, dtype=np.float64)
        for direction, e, m in self.terms:
            coeffs = e.jet(pt, order).coeffs
            W[direction] += m[:, :, None] * coeffs[None, None, :]
        if self.compatible:
            herm = W + np.conj(np.swapaxes(W, 1, 2))
            if np.max(np.abs(herm)) > 1e-10 * max(1.0, np.max(np.abs(W))):
                raise ValueError(
                    "connection declared compatible but A_a is not anti-hermitian"
                )
        return W

    def __repr__(self):
        return f"ConnectionSpec({self.name!r}, n={self.n}, rank={self.rank})"


def _thooft_eta(a, mu, nu, anti=False):
    """'t Hooft symbol eta^a_{mu nu} with the x0 slot as the distinguished
    direction (a in 1..3, mu/nu in 0..3).  ``anti`` flips the sign of the
    entries carrying a 0 index, which swaps the duality of the instanton."""
    if mu == 0 and nu == 0:
        return 0.0
    flip = -1.0 if anti else 1.0
    if nu == 0:
        return -flip if mu == a else 0.0
    if mu == 0:
        return flip if nu == a else 0.0
    # both spatial: epsilon_{a mu nu}
    perm = (a, mu, nu)
    if len(set(perm)) < 3:
        return 0.0
    even = perm in ((1, 2, 3), (2, 3, 1), (3, 1, 2))
    return 1.0 if even else -1.0


def connection_fixture(name, n=4, **params) -> ConnectionSpec:
    """Built-in connections: ``zero``, ``abelian-linear`` (A = x0 dx1),
    ``abelian-quadratic`` (A = x0^2 dx1), ``bpst`` (su(2) instanton,
    scale parameter), ``random-su2`` (seeded polynomial su(2) potential),
    ``random-gl`` (seeded real matrix potential of given rank)."""
    if name == "zero":
        rank = params.get("rank", 1)
        return ConnectionSpec(n, rank, [], name="zero", compatible=True)
    if name == "abelian-linear":
        return ConnectionSpec(n, 1, [(1, "x0", [[1.0]])], name="abelian-linear")
    if name == "abelian-quadratic":
        return ConnectionSpec(n, 1, [(1, "x0^2", [[1.0]])], name="abelian-quadratic")
    if name == "bpst":
        if n != 4:
            raise ValueError("the bpst fixture is four-dimensional")
        scale = params.get("scale", 1.0)
        anti = params.get("anti", False)
        rho2 = format(scale * scale, ".17g")
        T = su2_basis()
        terms = []
        for mu in range(4):
            for nu in range(4):
                m = sum(_thooft_eta(a + 1, mu, nu, anti) * T[a] for a in range(3))
                if np.max(np.abs(m)) == 0:
                    continue
                terms.append((mu, f"2*x{nu}/({rho2} + x0^2 + x1^2 + x2^2 + x3^2)", m))
        return ConnectionSpec(4, 2, terms, name="bpst-anti" if anti else "bpst",
                              compatible=True)
    if name == "random-su2":
        seed = params.get("seed", 0)
        degree = params.get("degree", 2)
        amplitude = params.get("amplitude", 0.5)
        rng = np.random.default_rng(jc.subseed(seed, "random-su2", n))
        monos = [""] + rm._monomials_up_to(n, degree)
        T = su2_basis()
        terms = []
        for direction in range(n):
            for a in range(3):
                coeffs = amplitude * rng.uniform(-1.0, 1.0, size=len(monos))
                src = " + ".join(
                    f"({format(c, '.17g')})" + (f"*{m}" if m else "")
                    for c, m in zip(coeffs, monos)
                )
                terms.append((direction, src, T[a]))
        return ConnectionSpec(n, 2, terms, name="random-su2", compatible=True)
    if name == "random-gl":
        rank = params.get("rank", 2)
        seed = params.get("seed", 0)
        degree = params.get("degree", 2)
        amplitude = params.get("amplitude", 0.5)
        rng = np.random.default_rng(jc.subseed(seed, "random-gl", n, rank))
        monos = [""] + rm._monomials_up_to(n, degree)
        terms = []
        for direction in range(n):
            for i in range(rank):
                for j in range(rank):
                    basis = np.zeros((rank, rank))
                    basis[i, j] = 1.0
                    coeffs = amplitude * rng.uniform(-1.0, 1.0, size=len(monos))
                    src = " + ".join(
                        f"({format(c, '.17g')})" + (f"*{m}" if m else "")
                        for c, m in zip(coeffs, monos)
                    )
                    terms.append((direction, src, basis))
        return ConnectionSpec(n, rank, terms, name="random-gl")
    raise ValueError(f"unknown connection fixture {name!r}")


class PointConnection:
    """Connection matrices as jets at one geometry point.

    ``rep`` selects how the matrices act on fiber axes: ``"vector"``
    multiplies the single fiber axis, ``"end"`` acts by commutator on a
    pair of fiber axes (the induced connection on endomorphisms).
    """

    def __init__(self, geo: rm.GeometryPoint, W, rep="vector", order=None):
        if rep not in ("vector", "end"):
            raise ValueError("rep must be 'vector' or 'end'")
        self.geo = geo
        self.W = np.asarray(W, dtype=complex)
        self.rank = self.W.shape[1]
        self.rep = rep
        self.space = geo.space if order is None else jc.get_space(geo.n, order)
        if self.W.shape != (geo.n, self.rank, self.rank, self.space.size):
            raise ValueError("connection jet block has the wrong shape")

    @classmethod
    def from_spec(cls, spec: ConnectionSpec, geo: rm.GeometryPoint, rep="vector"):
        if spec.n != geo.n:
            raise ValueError("connection and geometry dimensions differ")
        return cls(geo, spec.jets_at(geo.point, geo.order), rep)

    def endo(self):
        """The same matrices acting by commutator (connection on End V)."""
        return PointConnection(self.geo, self.W, "end", order=self.space.order)

    def fiber_dims(self):
        return (self.rank,) if self.rep == "vector" else (self.rank, self.rank)

    # ------------------------------------------------------------------
    def covd(self, t: Tensor) -> Tensor:
        """Levi-Civita plus connection action; new covariant index first."""
        want = self.fiber_dims()
        if t.fdims != want:
            raise ValueError(f"fiber axes {t.fdims}, expected {want}")
        out_order = min(t.space.order - 1, self.geo.order - 1, self.space.order)
        if t.space.order - 1 > out_order:
            t = t.truncate(out_order + 1)
        base = rm.covd(self.geo, t)
        sp = base.space
        W = self.W[..., : sp.size]
        tt = t.comps[..., : sp.size]
        rank = t.rank
        if self.rep == "vector":
            act = jtensordot(sp, W, tt, (2,), (rank,))
            act = np.moveaxis(act, 1, 1 + rank)
        else:
            left = jtensordot(sp, W, tt, (2,), (rank,))
            left = np.moveaxis(left, 1, 1 + rank)
            right = jtensordot(sp, tt, W, (rank + 1,), (1,))
            right = np.moveaxis(right, rank + 1, 0)
            act = left - right
        return Tensor(sp, base.comps + act, base.indices, base.weight, base.fdims)

    def curvature_matrices(self):
        """F[a, b] as k x k jet matrices: F_ab = d_a W_b - d_b W_a + [W_a, W_b]."""
        sp = self.space
        sub = self.geo.space_at(sp.order - 1)
        dW = np.stack([sp.partial_coeffs(self.W, a) for a in range(self.geo.n)])
        # dW[a, b, i, j] = d_a W_b
        Wt = self.W[..., : sub.size]
        ww = jtensordot(sub, Wt, Wt, (2,), (1,))  # ww[a, i, b, j] = W_a W_b
        ww = np.transpose(ww, (0, 2, 1, 3, 4))  # [a, b, i, j]
        return dW - np.transpose(dW, (1, 0, 2, 3, 4)) + ww - np.transpose(ww, (1, 0, 2, 3, 4))

    def __repr__(self):
        return f"PointConnection(rank={self.rank}, rep={self.rep!r}, geo={self.geo!r})"


# ----------------------------------------------------------------------
# Coupled exterior calculus.


def curvature_F(conn: PointConnection) -> Tensor:
    """The curvature as a fiber-endomorphism-valued antisymmetric 2-tensor."""
    sub = conn.geo.space_at(conn.space.order - 1)
    return Tensor(sub, conn.curvature_matrices(), "ll", 0, (conn.rank, conn.rank))


def coupled_d(conn: PointConnection, phi: Tensor) -> Tensor:
    """Coupled exterior derivative on antisymmetric twisted forms."""
    deg = phi.rank
    d = conn.covd(phi)
    if deg == 0:
        return d
    return d.asym(tuple(range(deg + 1))) * (deg + 1)


def coupled_delta(conn: PointConnection, psi: Tensor) -> Tensor:
    """(delta psi)_{a...} = -D^b psi_{b a...}."""
    if psi.rank < 1:
        raise ValueError("the codifferential needs at least one form index")
    d = conn.covd(psi)  # [e, b, rest..., fibers, :]
    sp = d.space
    ginv = conn.geo.metric_at(sp.order).ginv
    out = jtensordot(sp, ginv, d.comps, (0, 1), (0, 1))
    return Tensor(sp, -out, psi.indices[1:], psi.weight - 2, psi.fdims)


def M_D(conn: PointConnection, phi: Tensor) -> Tensor:
    """Second-order detour operator on twisted 1-forms:
    M(phi) = delta(d(phi)) - F . phi with (F . phi)_a = F_a{}^b phi_b."""
    if phi.rank != 1 or phi.indices != "l":
        raise ValueError("M acts on twisted 1-forms")
    dd = coupled_delta(conn, coupled_d(conn, phi))
    sp = dd.space
    F = curvature_F(conn)
    ginv = conn.geo.metric_at(sp.order).ginv
    Fmix = jtensordot(sp, ginv, F.comps[..., : sp.size], (1,), (1,))
    # Fmix[b_up, a, i, j]; want F_a{}^b phi_b acting on the fiber
    tt = phi.comps[..., : sp.size]
    if len(phi.fdims) == 1:
        act = jtensordot(sp, Fmix, tt, (0, 3), (0, 1))  # [a, i, :]
    else:
        left = jtensordot(sp, Fmix, tt, (0, 3), (0, 1))  # (F phi)[a, i, j']
        right = jtensordot(sp, tt, Fmix, (0, 2), (0, 2))  # (phi F)[i', a, j]
        act = left - np.transpose(right, (1, 0, 2, 3))
    return Tensor(sp, dd.comps - act, "l", phi.weight - 2, phi.fdims)


def M_D_direct(conn: PointConnection, phi: Tensor) -> Tensor:
    """The same operator through the three-term display
    -D^a D_a phi_b + D^a D_b phi_a - F_b{}^a phi_a, as an independent path."""
    if phi.rank != 1 or phi.indices != "l":
        raise ValueError("M acts on twisted 1-forms")
    dd = conn.covd(conn.covd(phi))  # [e, a, b, fibers, :]
    sp = dd.space
    ginv = conn.geo.metric_at(sp.order).ginv
    lap = jtensordot(sp, ginv, dd.comps, (0, 1), (0, 1))  # D^a D_a phi_b
    grad_div = jtensordot(sp, ginv, dd.comps, (0, 1), (0, 2))  # [b, a-slot... ]
    # dd[e, a, b]: contracting e with the third slot gives D^a D_b phi_a
    F = curvature_F(conn)
    Fup = jtensordot(sp, F.comps[..., : sp.size], ginv, (1,), (0,))
    # Fup[b, i, j, a_up] -> F_b{}^a
    tt = phi.comps[..., : sp.size]
    if len(phi.fdims) == 1:
        act = jtensordot(sp, Fup, tt, (3, 2), (0, 1))
    else:
        left = jtensordot(sp, Fup, tt, (3, 2), (0, 1))  # (F phi)[b, i, j']
        right = jtensordot(sp, tt, Fup, (0, 2), (3, 1))  # (phi F)[i', b, j]
        act = left - np.transpose(right, (1, 0, 2, 3))
    return Tensor(sp, -lap + grad_div - act, "l", phi.weight - 2, phi.fdims)


def ym_current(conn: PointConnection) -> Tensor:
    """Yang-Mills current delta F, computed with the End-bundle connection."""
    return coupled_delta(conn.endo(), curvature_F(conn))


# ----------------------------------------------------------------------
# Identity suites.


def check_algact(spec: ConnectionSpec, metric: rm.MetricSpec, point, order=4,
                 seed=0, fixture=None):
    """The two compatibility identities between M, the coupled complex and
    the current: M(d Phi) = e(delta F) Phi on twisted functions and
    delta(M psi) = -i(delta F) psi on twisted 1-forms."""
    fixture = fixture or spec.name
    geo = metric.geometry(point, order)
    conn = PointConnection.from_spec(spec, geo)
    k = spec.rank
    rng = np.random.default_rng(jc.subseed(seed, "algact", fixture))
    J = ym_current(conn)  # [a, i, j], End-valued 1-form

    results = []

    # -- M d Phi = e(delta F) Phi on a random polynomial section Phi.
    Phi = _random_section(geo, rng, (k,), rank=0)
    lhs = M_D(conn, coupled_d(conn, Phi))
    sp = lhs.space
    act = jtensordot(sp, J.comps[..., : sp.size], Phi.comps[..., : sp.size], (2,), (0,))
    res = sup_residual(lhs.comps, act)
    scale = 1.0 + max(sup_residual(act), sup_residual(Phi.comps))
    results.append(CheckResult(
        suite="algact", name="current-on-functions", fixture=fixture,
        point=tuple(point), residual=res / scale, tolerance=1e-8,
        info={"order": order}))

    # -- delta M psi = -i(delta F) psi on a random twisted 1-form psi.
    psi = _random_section(geo, rng, (k,), rank=1)
    lhs2 = coupled_delta(conn, M_D(conn, psi))
    sp2 = lhs2.space
    ginv = geo.metric_at(sp2.order).ginv
    Jup = jtensordot(sp2, ginv, J.comps[..., : sp2.size], (1,), (0,))
    inner = jtensordot(sp2, Jup, psi.comps[..., : sp2.size], (0, 2), (0, 1))
    res2 = sup_residual(lhs2.comps, -inner)
    scale2 = 1.0 + max(sup_residual(inner), sup_residual(psi.comps))
    results.append(CheckResult(
        suite="algact", name="current-on-one-forms", fixture=fixture,
        point=tuple(point), residual=res2 / scale2, tolerance=1e-8,
        info={"order": order}))

    # -- the two displays of M agree.
    agree = sup_residual(M_D(conn, psi).comps, M_D_direct(conn, psi).comps)
    results.append(CheckResult(
        suite="prop-agree", name="second-order-displays", fixture=fixture,
        point=tuple(point), residual=agree / scale2, tolerance=1e-9,
        info={"order": order}))
    return results


def _random_section(geo, rng, fdims, rank=0, degree=2, amplitude=1.0):
    """A random polynomial section as jets at the geometry point."""
    n = geo.n
    sp = geo.space
    monos = [""] + rm._monomials_up_to(n, degree)
    shape = (n,) * rank + tuple(fdims)
    comps = np.zeros(shape + (sp.size,))
    pt = np.asarray(geo.point, dtype=np.float64)
    for idx in np.ndindex(*shape) if shape else [()]:
        coeffs = amplitude * rng.uniform(-1.0, 1.0, size=len(monos))
        src = " + ".join(
            f"({format(c, '.17g')})" + (f"*{m}" if m else "")
            for c, m in zip(coeffs, monos)
        )
        comps[idx] = jc.jet_eval(src, pt, sp.order).coeffs
    return Tensor(sp, comps, "l" * rank, 0, tuple(fdims))


def variational_checks(spec: ConnectionSpec, metric: rm.MetricSpec, point,
                       order=4, seed=0, step=1e-4, fixture=None):
    """Finite-difference checks of the first variation of the current.

    Varying the connection along an End-valued 1-form dA gives
    d/dt delta(F_t) = M(dA) computed in the End representation; varying
    along a gauge orbit exp(t u) gives d/dt A_t = d(u) and the current
    variation M(d(u)) = e(delta F) u, so the current derivative along
    gauge directions is the algebraic action of the current itself.
    """
    fixture = fixture or spec.name
    geo = metric.geometry(point, order)
    conn = PointConnection.from_spec(spec, geo)
    conn_end = conn.endo()
    k = spec.rank
    sp = geo.space
    rng = np.random.default_rng(jc.subseed(seed, "variational", fixture))
    results = []

    def result(name, lhs, rhs, tol=1e-6):
        res = sup_residual(lhs, rhs)
        scale = 1.0 + max(sup_residual(lhs), sup_residual(rhs))
        results.append(CheckResult(
            suite="currentder", name=name, fixture=fixture,
            point=tuple(point), residual=res / scale, tolerance=tol,
            info={"order": order, "step": step}))

    # -- connection direction: d/dt delta(F_t) = M(dA) in the End picture.
    dA = _random_section(geo, rng, (k, k), rank=1)
    dAW = np.ascontiguousarray(dA.comps.astype(complex))
    plus = ym_current(PointConnection(geo, conn.W + step * dAW))
    minus = ym_current(PointConnection(geo, conn.W - step * dAW))
    fd = (plus.comps - minus.comps) / (2.0 * step)
    result("connection-direction", fd, M_D(conn_end, dA).comps)

    # -- gauge direction: d/ds of exp(s u)^-1 (A + d) exp(s u) is d(u).
    sp1 = jc.get_space(geo.n, order + 1)
    udot = np.zeros((k, k, sp1.size), dtype=complex)
    monos = [""] + rm._monomials_up_to(geo.n, 2)
    pt = np.asarray(geo.point, dtype=np.float64)
    for i in range(k):
        for j in range(k):
            coeffs = rng.uniform(-0.5, 0.5, size=len(monos))
            src = " + ".join(
                f"({format(c, '.17g')})" + (f"*{m}" if m else "")
                for c, m in zip(coeffs, monos)
            )
            udot[i, j] = jc.jet_eval(src, pt, order + 1).coeffs
    gauged = {s: _gauge_transform(geo, conn.W, udot, s) for s in (step, -step)}
    fdA = (gauged[step] - gauged[-step]) / (2.0 * step)
    udot_t = Tensor(sp, udot[..., : sp.size], "", 0, (k, k))
    dudot = conn_end.covd(udot_t)
    result("gauge-direction-potential", fdA, dudot.comps)

    # -- gauge direction of the current: d/ds delta(F_s) = [delta F, u].
    Jp = ym_current(PointConnection(geo, gauged[step]))
    Jm = ym_current(PointConnection(geo, gauged[-step]))
    fdJ = (Jp.comps - Jm.comps) / (2.0 * step)
    J = ym_current(conn)
    spj = J.space
    ut = udot[..., : spj.size]
    bra = jtensordot(spj, J.comps, ut, (2,), (0,))  # [a, i, j']
    ket = jtensordot(spj, ut, J.comps, (1,), (1,))  # [i', a, j]
    comm = bra - np.transpose(ket, (1, 0, 2, 3))
    result("gauge-direction-current", fdJ, comm)
    return results


def _jet_matrix_exp(sp, X):
    """exp of a k x k matrix of jets by the convergent series."""
    k = X.shape[0]
    out = np.zeros_like(X)
    out[np.arange(k), np.arange(k), 0] = 1.0
    term = out.copy()
    for m in range(1, 80):
        term = jtensordot(sp, term, X, (1,), (0,)) / m
        out = out + term
        if np.max(np.abs(term)) < 1e-24:
            break
    else:
        raise ValueError("matrix exponential series did not converge")
    return out


def _gauge_transform(geo, W, udot, s):
    """W conjugated by exp(s udot): u^-1 W_a u + u^-1 d_a u.

    ``udot`` is carried one jet order above ``W`` so the derivative term
    lands on the same space as ``W``.
    """
    n = geo.n
    sp = geo.space
    sp1 = jc.get_space(n, sp.order + 1)
    u1 = _jet_matrix_exp(sp1, s * udot)
    uinv = _jet_matrix_exp(sp, (-s) * udot[..., : sp.size])
    u = u1[..., : sp.size]
    out = np.empty_like(W)
    for a in range(n):
        du = sp1.partial_coeffs(u1, a)
        inner = jtensordot(sp, W[a], u, (1,), (0,)) + du
        out[a] = jtensordot(sp, uinv, inner, (1,), (0,))
    return out


# ----------------------------------------------------------------------
# Hodge star and half-flat projections.


def _levi_civita_symbol(n):
    from itertools import permutations

    from .tensor import _perm_sign

    eps = np.zeros((n,) * n)
    for perm in permutations(range(n)):
        eps[perm] = _perm_sign(perm)
    return eps


def hodge_star(geo: rm.GeometryPoint, psi: Tensor) -> Tensor:
    """Hodge star on antisymmetric k-tensors with all indices down.

    (star psi)_{b...} = (1/k!) sqrt|det g| eps_{a1..ak b...} psi^{a1..ak};
    fiber axes ride along untouched.
    """
    deg = psi.rank
    n = geo.n
    if psi.indices != "l" * deg:
        raise ValueError("hodge star expects all indices down")
    sp = psi.space
    m = geo.metric_at(sp.order)
    raised = psi
    for i in range(deg):
        raised = raised.raise_index(i, m)
    sgn = -1.0 if m.det[0] < 0 else 1.0
    vol = jc.jsqrt(jc.Jet(sp, geo.point, sgn * m.det))
    eps = _levi_civita_symbol(n)
    contracted = np.tensordot(eps, raised.comps, axes=(tuple(range(deg)), tuple(range(deg))))
    contracted = contracted / factorial(deg)
    out = jtensordot(sp, contracted, vol.coeffs.reshape(1, -1))[..., 0, :]
    return Tensor(sp, out, "l" * (n - deg), psi.weight + n - 2 * deg, psi.fdims)


def sd_project(geo: rm.GeometryPoint, psi: Tensor, sign: int) -> Tensor:
    """Projection of a 2-form onto its (anti-)self-dual half in dimension 4.

    Riemannian signature: (psi + sign * star psi) / 2.  Lorentzian
    signature squares the star to -1, so the projectors complexify:
    (psi - sign * i star psi) / 2, with star eigenvalue sign * i.
    """
    if geo.n != 4 or psi.rank != 2:
        raise ValueError("duality projections live on 2-forms in dimension 4")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    star = hodge_star(geo, psi)
    q = geo.metric_at(psi.space.order).signature[1]
    factor = sign if q % 2 == 0 else -1j * sign
    comps = 0.5 * (psi.comps[..., : star.space.size] + factor * star.comps)
    return Tensor(star.space, comps, "ll", psi.weight, psi.fdims)


def check_half_flat_complexes(spec: ConnectionSpec, metric: rm.MetricSpec, point,
                              order=4, seed=0, fixture=None):
    """For a connection whose curvature lies in one duality half: the
    twisted derivative followed by projection onto the other half squares
    to zero, and the detour operator factors as twice the codifferential
    of the projected derivative."""
    fixture = fixture or spec.name
    geo = metric.geometry(point, order)
    conn = PointConnection.from_spec(spec, geo)
    k = spec.rank
    F = curvature_F(conn)
    s_plus = sup_residual(sd_project(geo, F, +1).comps)
    s_minus = sup_residual(sd_project(geo, F, -1).comps)
    fscale = 1.0 + sup_residual(F.comps)
    half = 1 if s_minus <= s_plus else -1  # the half that carries F
    results = [CheckResult(
        suite="prop-agree", name="curvature-in-one-half", fixture=fixture,
        point=tuple(point), residual=min(s_plus, s_minus) / fscale,
        tolerance=1e-9,
        info={"order": order, "half": "self-dual" if half == 1 else "anti-self-dual"})]

    rng = np.random.default_rng(jc.subseed(seed, "halfflat", fixture))
    Phi = _random_section(geo, rng, (k,), rank=0)
    ddPhi = coupled_d(conn, coupled_d(conn, Phi))
    proj = sd_project(geo, ddPhi, -half)
    scale = 1.0 + sup_residual(ddPhi.comps)
    results.append(CheckResult(
        suite="prop-agree", name="projected-composition-vanishes", fixture=fixture,
        point=tuple(point), residual=sup_residual(proj.comps) / scale,
        tolerance=1e-8, info={"order": order}))

    phi = _random_section(geo, rng, (k,), rank=1)
    dphi = coupled_d(conn, phi)
    half_piece = coupled_delta(conn, sd_project(geo, dphi, -half))
    M = M_D(conn, phi)
    res = sup_residual(2.0 * half_piece.comps, M.comps)
    mscale = 1.0 + sup_residual(M.comps)
    results.append(CheckResult(
        suite="prop-agree", name="projected-factorization", fixture=fixture,
        point=tuple(point), residual=res / mscale, tolerance=1e-8,
        info={"order": order}))
    return results

