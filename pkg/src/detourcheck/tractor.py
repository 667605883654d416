"""Conformal tractor calculus on an n-dimensional chart (n >= 3).

The standard tractor bundle is modelled as an abstract rank n+2 fiber
with slots ``[sigma; mu_0 .. mu_{n-1}; rho]``.  Its connection is built
as matrices over the scalar slots,

    D_a (sigma, mu_b, rho) = (d_a sigma - mu_a,
                              grad_a mu_b + g_ab rho + P_ab sigma,
                              d_a rho - P_a{}^b mu_b),

so the whole coupled calculus (exterior derivative, codifferential,
curvature, second-order detour operator) is reused verbatim from the
bundle machinery in :mod:`detourcheck.yangmills`.

Alongside the connection this module provides the splitting operators
into and out of the tractor bundle, the conformal-to-Einstein operator
and its adjoint, the detour operator on trace-free symmetric 2-tensors
with its curvature-correction display, and the identity suites tying
them together (the commuting square with the tractor derivative, the
curvature block structure, the divergence identity that isolates the
dimension-4 factor, and the factorization through the instanton-style
complex).

All operators are written in the fixed-scale trivialization;
equivariance under changing the scale is itself one of the checks.
"""

from __future__ import annotations

import numpy as np

from . import jetcalc as jc
from . import riemann as rm
from . import tensor as tn
from .report import CheckResult, sup_residual
from .tensor import Tensor, jtensordot
from .yangmills import PointConnection, coupled_delta, curvature_F, M_D, _random_section

__all__ = [
    "M_T",
    "P_op",
    "Q_op",
    "Q_star",
    "adjoint_Dstar",
    "adjoint_Estar",
    "adjoint_Pstar",
    "check_MP",
    "check_MT_composition",
    "check_curvature_blocks",
    "check_divtr",
    "check_eincomm",
    "check_trmetric_parallel",
    "div_tractor_curvature",
    "einstein_verdict",
    "project_X",
    "rescale_matrix",
    "splitting_D",
    "splitting_E",
    "tractor_connection",
    "tractor_curvature",
    "tractor_curvature_blocks",
    "tractor_metric",
    "transf_equivariance",
]


def _require_conformal(geo):
    if geo.schouten is None:
        raise ValueError("tractor calculus needs dimension at least 3")


def tractor_connection(geo: rm.GeometryPoint) -> PointConnection:
    """The tractor connection as a bundle connection on the abstract
    (n+2)-dimensional fiber; its jets live two orders below the metric
    because they carry the Schouten tensor."""
    _require_conformal(geo)
    n = geo.n
    wsp = geo.space_at(geo.order - 2)
    k = n + 2
    m = geo.metric_at(wsp.order)
    g = m.g
    gam = geo.gamma[..., : wsp.size]
    P = geo.schouten
    Pup = jtensordot(wsp, P, m.ginv, (1,), (0,))  # P_a{}^c
    W = np.zeros((n, k, k, wsp.size))
    for a in range(n):
        W[a, 0, 1 + a, 0] = -1.0
        for b in range(n):
            W[a, 1 + b, 0] = P[a, b]
            W[a, 1 + b, n + 1] = g[a, b]
            for c in range(n):
                W[a, 1 + b, 1 + c] = -gam[c, a, b]
            W[a, n + 1, 1 + b] = -Pup[a, b]
    return PointConnection(geo, W, "vector", order=wsp.order)


def tractor_metric(geo: rm.GeometryPoint, order=None):
    """The tractor metric as an (n+2, n+2) jet matrix: it pairs the sigma
    and rho slots and pairs the covector slots with the inverse metric."""
    _require_conformal(geo)
    n = geo.n
    sp = geo.space if order is None else geo.space_at(order)
    h = np.zeros((n + 2, n + 2, sp.size))
    h[0, n + 1, 0] = 1.0
    h[n + 1, 0, 0] = 1.0
    h[1:n + 1, 1:n + 1] = geo.metric_at(sp.order).ginv
    return h


def project_X(V: Tensor) -> Tensor:
    """The canonical weight-1 slot of a tractor field."""
    return Tensor(V.space, V.comps[..., 0, :], V.indices, V.weight + 1, ())


def _scale_jets(sp, f, comps):
    """Multiply every component of ``comps`` by the scalar jet ``f``."""
    return jtensordot(sp, comps, f[: sp.size].reshape(1, -1))[..., 0, :]


def _require_tfs(geo, t, what="input"):
    sp = t.space if t.space.order <= geo.order else geo.space
    m = geo.metric_at(sp.order)
    comps = t.comps[..., : sp.size]
    sym_res = sup_residual(comps, np.swapaxes(comps, 0, 1))
    trace = jtensordot(sp, m.ginv, comps, (0, 1), (0, 1))
    bound = 1e-10 * (1.0 + sup_residual(comps))
    if sym_res > bound or sup_residual(trace) > bound:
        raise ValueError(f"{what} must be trace-free symmetric")


# ----------------------------------------------------------------------
# Splitting operators.


def splitting_D(geo: rm.GeometryPoint, sigma: Tensor) -> Tensor:
    """sigma -> (sigma, grad sigma, -(Lap sigma + J sigma)/n)."""
    _require_conformal(geo)
    if sigma.rank != 0 or sigma.fdims != ():
        raise ValueError("the tractor splitting starts from a scalar")
    n = geo.n
    ds = rm.covd(geo, sigma)
    dds = rm.covd(geo, ds)
    sp = dds.space
    lap = jtensordot(sp, geo.metric_at(sp.order).ginv, dds.comps, (0, 1), (0, 1))
    jay = geo.jay[: sp.size]
    rho = -(lap + sp.jmul_flat(jay, sigma.comps[: sp.size])) / n
    out = np.zeros((n + 2, sp.size), dtype=rho.dtype)
    out[0] = sigma.comps[: sp.size]
    out[1:n + 1] = ds.comps[:, : sp.size]
    out[n + 1] = rho
    return Tensor(sp, out, "", sigma.weight - 1, (n + 2,))


def adjoint_Dstar(geo: rm.GeometryPoint, V: Tensor) -> Tensor:
    """(sigma, mu, rho) -> rho - div mu - (Lap sigma + J sigma)/n."""
    _require_conformal(geo)
    n = geo.n
    if V.rank != 0 or V.fdims != (n + 2,):
        raise ValueError("expected a tractor field")
    sigma = Tensor(V.space, V.comps[0], "", 0)
    mu = Tensor(V.space, V.comps[1:n + 1], "l", 0)
    ds = rm.covd(geo, sigma)
    dds = rm.covd(geo, ds)
    sp = dds.space
    ginv = geo.metric_at(sp.order).ginv
    lap = jtensordot(sp, ginv, dds.comps, (0, 1), (0, 1))
    divmu = jtensordot(sp, ginv, rm.covd(geo, mu).comps[..., : sp.size], (0, 1), (0, 1))
    jay = geo.jay[: sp.size]
    out = (V.comps[n + 1][: sp.size] - divmu
           - (lap + sp.jmul_flat(jay, sigma.comps[: sp.size])) / n)
    return Tensor(sp, out, "", V.weight - 1, ())


def splitting_E(geo: rm.GeometryPoint, psi: Tensor) -> Tensor:
    """Trace-free symmetric psi_ab -> the tractor-valued 1-form
    (0, psi_ab, -(n-1)^{-1} grad^b psi_ab)."""
    _require_conformal(geo)
    n = geo.n
    if psi.rank != 2 or psi.indices != "ll" or psi.fdims != ():
        raise ValueError("expected a 2-tensor with both indices down")
    _require_tfs(geo, psi, "the splitting input")
    dpsi = rm.covd(geo, psi)
    sp = dpsi.space
    ginv = geo.metric_at(sp.order).ginv
    tau = -jtensordot(sp, ginv, dpsi.comps, (0, 1), (0, 2)) / (n - 1.0)
    out = np.zeros((n, n + 2, sp.size), dtype=tau.dtype)
    out[:, 1:n + 1] = psi.comps[..., : sp.size]
    out[:, n + 1] = tau
    return Tensor(sp, out, "l", psi.weight, (n + 2,))


def adjoint_Estar(geo: rm.GeometryPoint, nu: Tensor) -> Tensor:
    """Tractor-valued 1-form -> trace-free symmetric part of its middle
    block plus (n-1)^{-1} times the trace-free symmetrized gradient of
    its top slot; the top slot enters because the tractor metric pairs
    it against the slot created by the splitting."""
    _require_conformal(geo)
    n = geo.n
    if nu.rank != 1 or nu.fdims != (n + 2,):
        raise ValueError("expected a tractor-valued 1-form")
    alpha = Tensor(nu.space, nu.comps[:, 0], "l", 0)
    da = rm.covd(geo, alpha)
    sp = da.space
    block = nu.comps[:, 1:n + 1, : sp.size]
    m = geo.metric_at(sp.order)
    combined = Tensor(sp, block + da.comps / (n - 1.0), "ll", nu.weight, ())
    return tn.tfs(combined, m)


# ----------------------------------------------------------------------
# The conformal-to-Einstein operator, its adjoint, and the detour
# operator on trace-free symmetric 2-tensors.


def P_op(geo: rm.GeometryPoint, sigma: Tensor) -> Tensor:
    """sigma -> TFS(grad grad sigma + P sigma)."""
    _require_conformal(geo)
    if sigma.rank != 0 or sigma.fdims != ():
        raise ValueError("expected a scalar")
    dds = rm.covd(geo, rm.covd(geo, sigma))
    sp = dds.space
    P = geo.schouten[..., : sp.size]
    Ps = jtensordot(sp, P, sigma.comps[: sp.size].reshape(1, -1))[..., 0, :]
    m = geo.metric_at(sp.order)
    return tn.tfs(Tensor(sp, dds.comps + Ps, "ll", sigma.weight, ()), m)


def adjoint_Pstar(geo: rm.GeometryPoint, phi: Tensor) -> Tensor:
    """phi_ab -> grad^a grad^b phi_ab + P^ab phi_ab."""
    _require_conformal(geo)
    if phi.rank != 2 or phi.indices != "ll":
        raise ValueError("expected a 2-tensor with both indices down")
    dd = rm.covd(geo, rm.covd(geo, phi))
    sp = dd.space
    ginv = geo.metric_at(sp.order).ginv
    s1 = jtensordot(sp, ginv, dd.comps, (0, 1), (0, 2))  # [f, b]
    s2 = jtensordot(sp, ginv, s1, (0, 1), (0, 1))
    P = geo.schouten[..., : sp.size]
    Pup = jtensordot(sp, jtensordot(sp, ginv, P, (1,), (0,)), ginv, (1,), (0,))
    Pphi = jtensordot(sp, Pup, phi.comps[..., : sp.size], (0, 1), (0, 1))
    return Tensor(sp, s2 + Pphi, "", phi.weight - 4, ())


def M_T(geo: rm.GeometryPoint, h: Tensor) -> Tensor:
    """Detour operator on trace-free symmetric 2-tensors:

    (M h)_ab = -TFS( grad^c (grad_c h_ab - grad_a h_cb)
                     - (n-1)^{-1} grad_a grad^c h_bc
                     + W_a{}^c{}_b{}^d h_cd )

    with W the Weyl tensor.
    """
    _require_conformal(geo)
    n = geo.n
    if h.rank != 2 or h.indices != "ll":
        raise ValueError("expected a 2-tensor with both indices down")
    _require_tfs(geo, h, "the detour operand")
    dh = rm.covd(geo, h)
    dd = rm.covd(geo, dh)  # dd[e, c, a, b] = grad_e grad_c h_ab
    sp = dd.space
    ginv = geo.metric_at(sp.order).ginv
    lap = jtensordot(sp, ginv, dd.comps, (0, 1), (0, 1))
    t2 = jtensordot(sp, ginv, dd.comps, (0, 1), (0, 2))  # grad^c grad_a h_cb
    t3 = jtensordot(sp, ginv, dd.comps, (0, 1), (1, 3))  # grad_a grad^c h_bc
    weyl = geo.weyl[..., : sp.size]
    w1 = jtensordot(sp, weyl, ginv, (1,), (0,))
    w2 = jtensordot(sp, w1, ginv, (2,), (0,))  # W_a{}^c{}_b{}^d at [a, b, c, d]
    cw = jtensordot(sp, w2, h.comps[..., : sp.size], (2, 3), (0, 1))
    m = geo.metric_at(sp.order)
    body = Tensor(sp, lap - t2 - t3 / (n - 1.0) + cw, "ll", h.weight - 2, ())
    return tn.tfs(body, m) * (-1.0)


def Q_op(geo: rm.GeometryPoint, nu: Tensor) -> Tensor:
    """nu_bc -> 2 grad_[a nu_b]c + 2 g_c[a tau_b] with
    tau_b = -(n-1)^{-1} grad^a nu_ab."""
    _require_conformal(geo)
    n = geo.n
    if nu.rank != 2 or nu.indices != "ll":
        raise ValueError("expected a 2-tensor with both indices down")
    dnu = rm.covd(geo, nu)
    sp = dnu.space
    m = geo.metric_at(sp.order)
    anti = dnu.comps - np.transpose(dnu.comps, (1, 0, 2, 3))
    tau = -jtensordot(sp, m.ginv, dnu.comps, (0, 1), (0, 1)) / (n - 1.0)
    gt = jtensordot(sp, m.g, tau)  # [c, a, b]
    gterm = np.transpose(gt, (1, 2, 0, 3)) - np.transpose(gt, (2, 1, 0, 3))
    return Tensor(sp, anti + gterm, "lll", nu.weight, ())


def Q_star(geo: rm.GeometryPoint, w: Tensor) -> Tensor:
    """Formal adjoint of Q for the plain componentwise pairing on
    3-tensors (no combinatorial factor on the antisymmetric pair):

        omega_abc -> TFS( -2 grad^a omega_abc
                          + 2 (n-1)^{-1} grad_b Y_c ),

    with Y_c = g^{ab} omega_abc the trace over the outer pair.  With this
    normalization the second-order part of the detour operator on
    trace-free symmetric 2-tensors is (1/2) Q* Q.
    """
    _require_conformal(geo)
    n = geo.n
    if w.rank != 3 or w.indices != "lll":
        raise ValueError("expected a 3-tensor with all indices down")
    dw = rm.covd(geo, w)
    sp = dw.space
    m = geo.metric_at(sp.order)
    div = jtensordot(sp, m.ginv, dw.comps, (0, 1), (0, 1))  # [b, c]
    mw = geo.metric_at(w.space.order)
    Y = jtensordot(w.space, mw.ginv, w.comps, (0, 1), (0, 2))  # Y_b = g^{ac} w_abc
    dY = rm.covd(geo, Tensor(w.space, Y, "l", 0))
    body = Tensor(sp, -2.0 * div + 2.0 * dY.comps[..., : sp.size] / (n - 1.0),
                  "ll", w.weight - 2, ())
    return tn.tfs(body, m)


# ----------------------------------------------------------------------
# Curvature of the tractor connection.


def tractor_curvature(geo: rm.GeometryPoint) -> Tensor:
    """The curvature of the tractor connection as an endomorphism-valued
    2-form, computed from the connection matrices by the commutator
    formula of the bundle machinery."""
    conn = tractor_connection(geo)
    F = curvature_F(conn)
    return Tensor(F.space, F.comps.real, "ll", F.weight, F.fdims)


def div_tractor_curvature(geo: rm.GeometryPoint) -> Tensor:
    """grad^a Omega_ab, the divergence of the tractor curvature on its
    first form index, again computed through the coupled calculus."""
    conn = tractor_connection(geo)
    F = curvature_F(conn)
    div = coupled_delta(conn.endo(), F)
    return Tensor(div.space, -div.comps.real, "l", div.weight, div.fdims)


def tractor_curvature_blocks(geo: rm.GeometryPoint):
    """The tractor curvature assembled from the Weyl and Cotton tensors,
    laid out like the commutator matrices of the connection: an
    (n, n, n+2, n+2) block Omega_ab with

        Omega_ab [mu_c row, sigma col]  = A_cab
        Omega_ab [mu_c row, mu_d col]   = C_abc{}^d
        Omega_ab [rho row,  mu_d col]   = -A^d{}_ab

    and zeros elsewhere, where A is the Cotton tensor and C the Weyl
    tensor.  The commutator of the connection reproduces exactly this.
    """
    _require_conformal(geo)
    if geo.cotton is None:
        raise ValueError("curvature blocks need jets of the Cotton tensor")
    n = geo.n
    sp = geo.space_at(geo.order - 3)
    m = geo.metric_at(sp.order)
    weyl = geo.weyl[..., : sp.size]
    cotton = geo.cotton
    wm = jtensordot(sp, m.ginv, weyl, (1,), (3,))  # [d_up, a, b, c]
    wm = np.transpose(wm, (1, 2, 3, 0, 4))  # C_abc{}^d at [a, b, c, d]
    Aup = jtensordot(sp, cotton, m.ginv, (0,), (0,))  # A^d{}_{ab} at [a, b, d]
    out = np.zeros((n, n, n + 2, n + 2, sp.size))
    for a in range(n):
        for b in range(n):
            for c in range(n):
                out[a, b, 1 + c, 0] = cotton[c, a, b]
                out[a, b, n + 1, 1 + c] = -Aup[a, b, c]
                for d in range(n):
                    out[a, b, 1 + c, 1 + d] = wm[a, b, c, d]
    return out


# ----------------------------------------------------------------------
# Scale transformation.


def rescale_matrix(geo: rm.GeometryPoint, om: rm.RescaleSpec, order=None):
    """The fiberwise matrix carrying tractor components written in the
    scale of g to components written in the scale of e^{2 omega} g."""
    _require_conformal(geo)
    n = geo.n
    sp = geo.space if order is None else geo.space_at(order)
    ups = om.upsilon_at(geo.point, sp)
    m = geo.metric_at(sp.order)
    upsup = jtensordot(sp, m.ginv, ups, (1,), (0,))
    ups2 = jtensordot(sp, ups, upsup, (0,), (0,))
    f = om.factor(1, geo.point, sp)
    finv = om.factor(-1, geo.point, sp)
    U = np.zeros((n + 2, n + 2, sp.size))
    U[0, 0] = f
    for b in range(n):
        U[1 + b, 0] = sp.jmul_flat(f, ups[b])
        U[1 + b, 1 + b] = f
        U[n + 1, 1 + b] = -sp.jmul_flat(finv, upsup[b])
    U[n + 1, 0] = -0.5 * sp.jmul_flat(finv, ups2)
    U[n + 1, n + 1] = finv
    return U


# ----------------------------------------------------------------------
# Identity suites.


def check_eincomm(spec: rm.MetricSpec, point, order=5, seed=0, fixture=None):
    """The commuting square: applying the tractor derivative to the
    canonical lift of a scalar lands in the injection of the
    conformal-to-Einstein operator, and the adjoint square obtained by
    integration by parts holds as well."""
    fixture = fixture or spec.name
    geo = spec.geometry(point, order)
    conn = tractor_connection(geo)
    n = geo.n
    rng = np.random.default_rng(jc.subseed(seed, "eincomm", fixture))
    sigma = _random_section(geo, rng, (), rank=0)
    sigma = Tensor(sigma.space, sigma.comps, "", 1, ())

    lhs = conn.covd(splitting_D(geo, sigma))
    rhs = splitting_E(geo, P_op(geo, sigma))
    res = sup_residual(lhs.comps, rhs.comps.astype(complex))
    scale = 1.0 + max(sup_residual(lhs.comps), sup_residual(rhs.comps))
    results = [CheckResult(
        suite="eincomm", name="tractor-derivative-of-lift", fixture=fixture,
        point=tuple(point), residual=res / scale, tolerance=1e-9,
        info={"order": order})]

    # last-slot display: the rho component of the derivative of the lift
    ds = rm.covd(geo, sigma)
    dds = rm.covd(geo, ds)
    sp = dds.space
    ginv = geo.metric_at(sp.order).ginv
    lap = jtensordot(sp, ginv, dds.comps, (0, 1), (0, 1))
    jay = geo.jay[: sp.size]
    lapj = lap + sp.jmul_flat(jay, sigma.comps[: sp.size])
    dlap = rm.covd(geo, Tensor(sp, lapj, "", 0))
    spd = dlap.space
    P = geo.schouten[..., : spd.size]
    Pup = jtensordot(spd, P, geo.metric_at(spd.order).ginv[..., : spd.size], (1,), (0,))
    Pgrad = jtensordot(spd, Pup, ds.comps[..., : spd.size], (1,), (0,))
    slot = -dlap.comps / n - Pgrad
    res2 = sup_residual(lhs.comps[:, n + 1], slot.astype(complex))
    results.append(CheckResult(
        suite="eincomm", name="last-slot-display", fixture=fixture,
        point=tuple(point), residual=res2 / scale, tolerance=1e-9,
        info={"order": order}))

    # adjoint square: Dstar(delta nu) = Pstar(Estar nu)
    nu = _random_section(geo, rng, (n + 2,), rank=1)
    dnu = coupled_delta(conn, nu)
    left = adjoint_Dstar(geo, Tensor(dnu.space, dnu.comps.real, "",
                                     dnu.weight, dnu.fdims))
    right = adjoint_Pstar(geo, adjoint_Estar(geo, nu))
    res3 = sup_residual(left.comps, right.comps)
    scale3 = 1.0 + max(sup_residual(left.comps), sup_residual(right.comps))
    results.append(CheckResult(
        suite="eincomm", name="adjoint-square", fixture=fixture,
        point=tuple(point), residual=res3 / scale3, tolerance=1e-8,
        info={"order": order}))
    return results


def check_trmetric_parallel(spec: rm.MetricSpec, point, order=4, fixture=None):
    """The tractor metric is parallel for the tractor connection and has
    signature (p+1, q+1)."""
    fixture = fixture or spec.name
    geo = spec.geometry(point, order)
    conn = tractor_connection(geo)
    wsp = conn.space
    sub = geo.space_at(wsp.order - 1)
    h = tractor_metric(geo, wsp.order)
    W = conn.W.real
    res = 0.0
    for a in range(geo.n):
        dh = wsp.partial_coeffs(h, a)
        wth = jtensordot(sub, W[a][..., : sub.size], h[..., : sub.size], (0,), (0,))
        hw = jtensordot(sub, h[..., : sub.size], W[a][..., : sub.size], (1,), (0,))
        res = max(res, sup_residual(dh - wth - hw))
    scale = 1.0 + sup_residual(h)
    results = [CheckResult(
        suite="eincomm", name="tractor-metric-parallel", fixture=fixture,
        point=tuple(point), residual=res / scale, tolerance=1e-11,
        info={"order": order})]

    hval = h[..., 0]
    eig = np.linalg.eigvalsh(hval)
    sig = (int(np.sum(eig > 0)), int(np.sum(eig < 0)))
    p, q = geo.metric_at(wsp.order).signature
    results.append(CheckResult(
        suite="eincomm", name="tractor-metric-signature", fixture=fixture,
        point=tuple(point), residual=0.0, tolerance=1.0,
        passed=(sig == (p + 1, q + 1)),
        info={"order": order, "signature": list(sig)}))
    return results


def check_curvature_blocks(spec: rm.MetricSpec, point, order=4, fixture=None):
    """The commutator curvature of the tractor connection matches its
    block display in the Weyl and Cotton tensors."""
    fixture = fixture or spec.name
    geo = spec.geometry(point, order)
    F = tractor_curvature(geo)
    blocks = tractor_curvature_blocks(geo)
    res = sup_residual(F.comps[..., : blocks.shape[-1]], blocks)
    scale = 1.0 + sup_residual(blocks)
    return [CheckResult(
        suite="divtr", name="curvature-blocks", fixture=fixture,
        point=tuple(point), residual=res / scale, tolerance=1e-9,
        info={"order": order})]


def check_divtr(spec: rm.MetricSpec, point, order=4, fixture=None):
    """The divergence of the tractor curvature in its block display,

        grad^a Omega_ab = [mu_c, sigma] = B_cb
                          [mu_c, mu_d]  = (n-4) A_bc{}^d
                          [rho,  mu_d]  = -B^d{}_b

    so the middle block dies exactly in dimension 4 and the outer blocks
    carry the Bach tensor with opposite signs."""
    fixture = fixture or spec.name
    geo = spec.geometry(point, order)
    if geo.bach is None:
        raise ValueError("the divergence display needs Bach jets (order >= 4, n >= 4)")
    n = geo.n
    div = div_tractor_curvature(geo)
    sp = div.space
    m = geo.metric_at(sp.order)
    bach = geo.bach[..., : sp.size]
    cotton = geo.cotton[..., : sp.size]
    bup = jtensordot(sp, m.ginv, bach, (1,), (0,))  # B^d{}_b at [d, b]
    amix = jtensordot(sp, cotton, m.ginv, (2,), (0,))  # A_bc{}^d at [b, c, d]
    got = div.comps  # [b, row, col] = + grad^a Omega_ab
    want = np.zeros_like(got)
    want[:, 1:n + 1, 0] = np.transpose(bach, (1, 0, 2))
    want[:, n + 1, 1:n + 1] = -np.transpose(bup, (1, 0, 2))
    want[:, 1:n + 1, 1:n + 1] = (n - 4.0) * amix
    res = sup_residual(got, want)
    scale = 1.0 + sup_residual(got)
    semi = bool(max(sup_residual(bach), (abs(n - 4.0)) * sup_residual(cotton))
                < 1e-8 * scale)
    results = [CheckResult(
        suite="divtr", name="divergence-blocks", fixture=fixture,
        point=tuple(point), residual=res / scale, tolerance=1e-9,
        info={"order": order, "n": n, "middle-factor": n - 4,
              "semi_harmonic": semi})]
    if n == 4:
        results.append(CheckResult(
            suite="divtr", name="middle-block-dies-in-four", fixture=fixture,
            point=tuple(point),
            residual=sup_residual(got[:, 1:n + 1, 1:n + 1]) / scale,
            tolerance=1e-9, info={"order": order}))
    return results


def check_MT_composition(spec: rm.MetricSpec, point, order=5, seed=0,
                         fixture=None):
    """The detour operator on trace-free symmetric 2-tensors agrees with
    the composition through the tractor bundle: split the input into a
    tractor-valued 1-form, apply the twisted second-order operator of
    the coupled calculus, and project back with the adjoint splitting."""
    fixture = fixture or spec.name
    geo = spec.geometry(point, order)
    n = geo.n
    rng = np.random.default_rng(jc.subseed(seed, "mtcomp", fixture))
    raw = _random_section(geo, rng, (), rank=2, degree=3)
    m = geo.metric_at(geo.order)
    h = tn.tfs(Tensor(geo.space,
                      0.5 * (raw.comps + np.transpose(raw.comps, (1, 0, 2))),
                      "ll", 1, ()), m)
    direct = M_T(geo, h)
    conn = tractor_connection(geo)
    Eh = splitting_E(geo, h)
    MEh = M_D(conn, Eh)
    comp = adjoint_Estar(geo, Tensor(MEh.space, MEh.comps.real, "l",
                                     MEh.weight, MEh.fdims))
    sp = comp.space
    res = sup_residual(direct.comps[..., : sp.size], comp.comps)
    scale = 1.0 + max(sup_residual(direct.comps), sup_residual(comp.comps))
    return [CheckResult(
        suite="prop-agree", name="translated-detour-composition",
        fixture=fixture, point=tuple(point), residual=res / scale,
        tolerance=1e-8, info={"order": order, "n": n})]


def check_MP(spec: rm.MetricSpec, point, order=6, seed=0, fixture=None):
    """Applying the detour operator to the image of the
    conformal-to-Einstein operator collapses to curvature terms:

        M(P sigma) = -TFS(B_ab sigma) - (n-4) TFS(A_ab{}^c grad_c sigma)

    with B the Bach tensor and A the Cotton tensor.  In dimension 4 the
    Cotton term drops, so the P-then-M composition vanishes exactly when
    the geometry is Bach-flat; the verdict is reported per point."""
    fixture = fixture or spec.name
    geo = spec.geometry(point, order)
    if geo.bach is None:
        raise ValueError("the composition display needs Bach jets (order >= 4, n >= 4)")
    n = geo.n
    rng = np.random.default_rng(jc.subseed(seed, "MP", fixture))
    sigma = _random_section(geo, rng, (), rank=0, degree=3)
    sigma = Tensor(sigma.space, sigma.comps, "", 1, ())
    lhs = M_T(geo, P_op(geo, sigma))
    sp = lhs.space
    m = geo.metric_at(sp.order)
    bach = geo.bach[..., : sp.size]
    cotton = geo.cotton[..., : sp.size]
    bs = _scale_jets(sp, sigma.comps, bach)
    tfsB = tn.tfs(Tensor(sp, bs, "ll", sigma.weight - 4, ()), m)
    ds = rm.covd(geo, sigma)
    Aup = jtensordot(sp, cotton, m.ginv, (2,), (0,))  # A_ab{}^c at [a, b, c]
    Ags = jtensordot(sp, Aup, ds.comps[..., : sp.size], (2,), (0,))
    tfsA = tn.tfs(Tensor(sp, Ags, "ll", sigma.weight - 4, ()), m)
    rhs = -tfsB.comps - (n - 4.0) * tfsA.comps
    res = sup_residual(lhs.comps, rhs)
    scale = 1.0 + max(sup_residual(lhs.comps), sup_residual(rhs))
    results = [CheckResult(
        suite="MP", name="detour-of-einstein-operator", fixture=fixture,
        point=tuple(point), residual=res / scale, tolerance=1e-7,
        info={"order": order, "n": n})]
    if n == 4:
        gs = 1.0 + sup_residual(geo.riem[..., : sp.size])
        bach_flat = bool(sup_residual(bach) < 1e-7 * gs)
        comp_flat = bool(sup_residual(lhs.comps)
                         < 1e-7 * gs * (1.0 + sup_residual(sigma.comps)))
        results.append(CheckResult(
            suite="MP", name="complex-iff-bach-flat", fixture=fixture,
            point=tuple(point), residual=0.0, tolerance=1.0,
            passed=(bach_flat == comp_flat),
            info={"order": order, "bach_flat": bach_flat,
                  "composition_vanishes": comp_flat}))
    return results


def einstein_verdict(spec: rm.MetricSpec, point, order=3, sigma=None):
    """Whether the given weight-1 density (the constant 1 by default) is
    an Einstein scale at the point: the conformal-to-Einstein operator
    must annihilate it.  Returns the verdict and the residual."""
    geo = spec.geometry(point, order)
    if sigma is None:
        comps = np.zeros(geo.space.size)
        comps[0] = 1.0
        sigma = Tensor(geo.space, comps, "", 1, ())
    val = P_op(geo, sigma)
    res = sup_residual(val.comps)
    ok = bool(res < 1e-8 * (1.0 + sup_residual(sigma.comps)))
    return ok, res


def transf_equivariance(spec: rm.MetricSpec, om: rm.RescaleSpec, point,
                        order=5, seed=0, fixture=None):
    """Equivariance of the whole tractor package under changing the
    metric in its conformal class to e^{2 omega} g: the canonical lift
    transforms by the fiberwise rescale matrix, the connection and the
    tractor metric are invariant under that matrix, the
    conformal-to-Einstein operator and its adjoint are covariant in
    every dimension, and the detour operator is covariant precisely in
    dimension 4."""
    fixture = fixture or spec.name
    geo = spec.geometry(point, order)
    hat = rm.rescale_metric(spec, om).geometry(point, order)
    n = geo.n
    rng = np.random.default_rng(jc.subseed(seed, "transf", fixture))
    results = []

    sigma = _random_section(geo, rng, (), rank=0, degree=3)
    sigma = Tensor(sigma.space, sigma.comps, "", 1, ())
    f1 = om.factor(1, geo.point, geo.space)
    sighat = Tensor(geo.space, geo.space.jmul_flat(f1, sigma.comps), "", 1, ())

    D = splitting_D(geo, sigma)
    sp = D.space
    U = rescale_matrix(geo, om, order=sp.order)
    UD = jtensordot(sp, U, D.comps, (1,), (0,))
    Dhat = splitting_D(hat, sighat)
    scale = 1.0 + sup_residual(Dhat.comps)
    results.append(CheckResult(
        suite="conformal-n4", name="lift-transforms", fixture=fixture,
        point=tuple(point), residual=sup_residual(UD, Dhat.comps) / scale,
        tolerance=1e-9, info={"order": order}))

    conn = tractor_connection(geo)
    connh = tractor_connection(hat)
    V = _random_section(geo, rng, (n + 2,), rank=0, degree=3)
    spv = conn.space
    Uv = rescale_matrix(geo, om, order=spv.order)
    UV = Tensor(spv, jtensordot(spv, Uv, V.comps[..., : spv.size], (1,), (0,)),
                "", 0, (n + 2,))
    lhs = connh.covd(UV)
    rhs_base = conn.covd(Tensor(spv, V.comps[..., : spv.size], "", 0, (n + 2,)))
    spo = lhs.space
    Uo = rescale_matrix(geo, om, order=spo.order)
    rhs = np.stack([jtensordot(spo, Uo, rhs_base.comps[a][..., : spo.size],
                               (1,), (0,)) for a in range(n)])
    results.append(CheckResult(
        suite="conformal-n4", name="connection-invariance", fixture=fixture,
        point=tuple(point),
        residual=sup_residual(lhs.comps, rhs) / (1.0 + sup_residual(rhs)),
        tolerance=1e-9, info={"order": order}))

    spm = geo.space_at(order - 2)
    hm = tractor_metric(geo, spm.order)
    hmhat = tractor_metric(hat, spm.order)
    Um = rescale_matrix(geo, om, order=spm.order)
    t1 = jtensordot(spm, Um, hmhat, (0,), (0,))
    t2 = jtensordot(spm, t1, Um, (1,), (0,))
    results.append(CheckResult(
        suite="conformal-n4", name="metric-invariance", fixture=fixture,
        point=tuple(point),
        residual=sup_residual(t2, hm) / (1.0 + sup_residual(hm)),
        tolerance=1e-11, info={"order": order}))

    P1 = P_op(geo, sigma)
    P2 = P_op(hat, sighat)
    spp = P1.space
    want = _scale_jets(spp, om.factor(1, geo.point, spp), P1.comps)
    results.append(CheckResult(
        suite="conformal-n4", name="einstein-operator-covariance",
        fixture=fixture, point=tuple(point),
        residual=sup_residual(want, P2.comps) / (1.0 + sup_residual(P2.comps)),
        tolerance=1e-9, info={"order": order, "input-weight": 1,
                              "output-power": 1}))

    mfull = geo.metric_at(geo.order)
    raw = _random_section(geo, rng, (), rank=2, degree=3)
    hh = tn.tfs(Tensor(geo.space,
                       0.5 * (raw.comps + np.transpose(raw.comps, (1, 0, 2))),
                       "ll", 1, ()), mfull)
    hhat = Tensor(geo.space, _scale_jets(geo.space, f1, hh.comps), "ll", 1, ())
    M1 = M_T(geo, hh)
    M2 = M_T(hat, hhat)
    spm2 = M1.space
    wantM = _scale_jets(spm2, om.factor(-1, geo.point, spm2), M1.comps)
    resM = sup_residual(wantM, M2.comps) / (1.0 + sup_residual(M2.comps))
    if n == 4:
        results.append(CheckResult(
            suite="conformal-n4", name="detour-covariance-in-four",
            fixture=fixture, point=tuple(point), residual=resM,
            tolerance=1e-8, info={"order": order, "input-weight": 1,
                                  "output-power": -1}))
    else:
        results.append(CheckResult(
            suite="conformal-n4", name="detour-covariance-breaks",
            fixture=fixture, point=tuple(point), residual=0.0, tolerance=1.0,
            passed=resM > 1e-3,
            info={"order": order, "off-dimension-residual": resM}))

    phraw = _random_section(geo, rng, (), rank=2, degree=3)
    phi = tn.tfs(Tensor(geo.space,
                        0.5 * (phraw.comps + np.transpose(phraw.comps, (1, 0, 2))),
                        "ll", 3 - n, ()), mfull)
    fphi = om.factor(3 - n, geo.point, geo.space)
    phihat = Tensor(geo.space, _scale_jets(geo.space, fphi, phi.comps),
                    "ll", 3 - n, ())
    A1 = adjoint_Pstar(geo, phi)
    A2 = adjoint_Pstar(hat, phihat)
    spa = A1.space
    wantA = _scale_jets(spa, om.factor(-(n + 1), geo.point, spa), A1.comps)
    results.append(CheckResult(
        suite="conformal-n4", name="adjoint-covariance", fixture=fixture,
        point=tuple(point),
        residual=sup_residual(wantA, A2.comps) / (1.0 + sup_residual(A2.comps)),
        tolerance=1e-9, info={"order": order, "input-weight": 3 - n,
                              "output-power": -(n + 1)}))
    return results
