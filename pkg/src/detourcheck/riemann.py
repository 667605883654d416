"""Metric geometry at a point: Christoffel symbols, the curvature family
(Riemann, Ricci, scalar, Weyl, Schouten, Cotton, Bach), covariant
derivatives of tensor fields, and conformal rescaling.

Conventions, pinned once and tested:

* Riemann: ``R^e_{bcd} = d_c Gamma^e_{db} - d_d Gamma^e_{cb}
  + Gamma^e_{cf} Gamma^f_{db} - Gamma^f_{df} Gamma^f_{cb}`` (the sign that
  makes the unit round sphere come out with ``Sc = n(n-1) > 0``).
* All-lower Riemann ``R_abcd = g_ae R^e_{bcd}``; Ricci ``Ric_bd =
  g^{ac} R_abcd``; scalar ``Sc = g^{bd} Ric_bd``.
* Schouten ``P = (Ric - J g)/(n-2)`` with ``J = Sc / (2(n-1))`` (so
  ``J = tr P``); Weyl from the decomposition ``R_abcd = C_abcd
  + g_ca P_bd - g_cb P_ad + g_db P_ac - g_da P_bc``; Cotton
  ``A_abc = grad_b P_ca - grad_c P_ba``; Bach ``B_ab = grad^c A_acb
  + P^dc C_dacb``.

All derived fields are jets: a :class:`GeometryPoint` built from metric
jets of order ``r`` carries Christoffels at order ``r - 1``, the curvature
family at ``r - 2``, Cotton at ``r - 3`` and Bach at ``r - 4``.  Conformal
densities are trivialized by the metric in hand; the covariant derivative
therefore ignores the weight tag, and rescaling checks multiply by the
explicit ``e^{w omega}`` factors themselves.
"""

from __future__ import annotations

from math import comb

import numpy as np

from . import jetcalc as jc
from .jetcalc import expr as ex
from .tensor import MetricAtPoint, Tensor, jtensordot, tfs

__all__ = [
    "GeometryPoint",
    "MetricSpec",
    "RescaleSpec",
    "covd",
    "harmonic_curvature_op",
    "metric_fixture",
    "rescale_metric",
]


# ----------------------------------------------------------------------
# Metric specifications and fixtures.


class MetricSpec:
    """A symmetric array of expressions for g_ab over one chart."""

    def __init__(self, entries, signature=None, name="custom", box=None, exclude=()):
        rows = [[e if isinstance(e, ex.Expr) else jc.parse(str(e)) for e in row] for row in entries]
        n = len(rows)
        if any(len(row) != n for row in rows):
            raise ValueError("metric expression array must be square")
        for a in range(n):
            for b in range(a):
                if rows[a][b] != rows[b][a]:
                    raise ValueError(f"metric entries ({a},{b}) and ({b},{a}) differ")
        self.n = n
        self.entries = rows
        self.signature = tuple(signature) if signature is not None else None
        self.name = name
        self.box = box if box is not None else [(-0.4, 0.4)] * n
        self.exclude = tuple(exclude)
        self._cache = {}

    def metric_at(self, point, order=4) -> MetricAtPoint:
        sp = jc.get_space(self.n, order)
        g = np.zeros((self.n, self.n, sp.size))
        for a in range(self.n):
            for b in range(self.n):
                g[a, b] = self.entries[a][b].jet(np.asarray(point, float), order).coeffs
        return MetricAtPoint(sp, g, self.signature)

    def geometry(self, point, order=4) -> "GeometryPoint":
        key = (tuple(float(x) for x in point), order)
        if key not in self._cache:
            self._cache[key] = GeometryPoint(self, point, order)
        return self._cache[key]

    def plan(self, seed, count=5):
        return jc.SamplePlan(seed=seed, count=count, box=self.box, exclude=self.exclude)

    def __repr__(self):
        return f"MetricSpec({self.name!r}, n={self.n})"


def _diag_spec(diag_exprs, **kw):
    n = len(diag_exprs)
    entries = [[diag_exprs[a] if a == b else "0" for b in range(n)] for a in range(n)]
    return MetricSpec(entries, **kw)


def _conformal_factor(n, sign, radius):
    r2 = " + ".join(f"x{k}^2" for k in range(n))
    R2 = format(radius * radius, ".17g")
    R4 = format(radius ** 4, ".17g")
    if sign > 0:
        return f"4*{R4}/({R2} + {r2})^2"
    return f"4/(1 - ({r2}))^2"


def metric_fixture(name, n=4, **params) -> MetricSpec:
    """Built-in metrics addressable by name.

    ``flat`` (optional Lorentzian signature), ``sphere`` (stereographic
    chart of the round sphere, radius parameter), ``hyperbolic``
    (Poincare ball), ``schwarzschild`` (n = 4, polar chart (t, r, theta,
    phi), mass parameter), ``perturbed-flat`` (seeded random polynomial
    perturbation of the flat metric).
    """
    if name == "flat":
        lorentzian = params.get("lorentzian", False)
        diag = ["1"] * n
        sig = (n, 0)
        if lorentzian:
            diag[-1] = "-1"
            sig = (n - 1, 1)
        return _diag_spec(diag, signature=sig, name="flat")
    if name == "sphere":
        radius = params.get("radius", 1.0)
        f = _conformal_factor(n, +1, radius)
        return _diag_spec([f] * n, signature=(n, 0), name="sphere")
    if name == "hyperbolic":
        f = _conformal_factor(n, -1, 1.0)
        return _diag_spec(
            [f] * n,
            signature=(n, 0),
            name="hyperbolic",
            box=[(-0.35, 0.35)] * n,
        )
    if name == "schwarzschild":
        if n != 4:
            raise ValueError("the schwarzschild fixture is four-dimensional")
        m = format(params.get("mass", 1.0), ".17g")
        lapse = f"(1 - 2*{m}/x1)"
        return MetricSpec(
            [
                [f"-{lapse}", "0", "0", "0"],
                ["0", f"1/{lapse}", "0", "0"],
                ["0", "0", "x1^2", "0"],
                ["0", "0", "0", "x1^2*sin(x2)^2"],
            ],
            signature=(3, 1),
            name="schwarzschild",
            box=[(-0.5, 0.5), (4.5, 5.5), (0.9, 1.4), (0.2, 1.0)],
        )
    if name == "perturbed-flat":
        seed = params.get("seed", 0)
        amplitude = params.get("amplitude", 0.05)
        degree = params.get("degree", 3)
        rng = np.random.default_rng(jc.subseed(seed, "perturbed-flat", n))
        monomials = _monomials_up_to(n, degree)
        entries = [["0"] * n for _ in range(n)]
        for a in range(n):
            for b in range(a, n):
                coeffs = amplitude * rng.uniform(-1.0, 1.0, size=len(monomials))
                terms = [] if a != b else ["1"]
                for c, mono in zip(coeffs, monomials):
                    terms.append(f"({format(c, '.17g')})*{mono}" if mono else f"({format(c, '.17g')})")
                entry = " + ".join(terms)
                entries[a][b] = entry
                entries[b][a] = entry
        return MetricSpec(entries, signature=(n, 0), name="perturbed-flat")
    raise ValueError(f"unknown metric fixture {name!r}")


def _monomials_up_to(n, degree):
    out = []
    for d in range(1, degree + 1):
        for alpha in _exponents(n, d):
            parts = []
            for k, e in enumerate(alpha):
                if e == 1:
                    parts.append(f"x{k}")
                elif e > 1:
                    parts.append(f"x{k}^{e}")
            out.append("*".join(parts))
    return out


def _exponents(n, degree):
    if n == 1:
        return [(degree,)]
    out = []
    for first in range(degree, -1, -1):
        for rest in _exponents(n - 1, degree - first):
            out.append((first,) + rest)
    return out


# ----------------------------------------------------------------------
# Conformal rescaling.


class RescaleSpec:
    """A conformal factor omega and its gradient Upsilon = grad omega."""

    def __init__(self, omega):
        self.omega = omega if isinstance(omega, ex.Expr) else jc.parse(str(omega))

    def omega_jet(self, point, order):
        return self.omega.jet(np.asarray(point, float), order)

    def upsilon_at(self, point, space):
        """Upsilon_a as jets over ``space`` (componentwise d_a omega)."""
        parent = jc.get_space(space.n, space.order + 1)
        w = self.omega.jet(np.asarray(point, float), parent.order).coeffs
        return np.stack([parent.partial_coeffs(w, k) for k in range(space.n)])

    def factor(self, w, point, space):
        """Coefficients of e^{w omega} at the point over ``space``."""
        j = self.omega.jet(np.asarray(point, float), space.order)
        return jc.jexp(w * j).coeffs


def rescale_metric(spec: MetricSpec, omega) -> MetricSpec:
    """The metric spec for ghat = e^{2 omega} g, built at expression level."""
    om = omega.omega if isinstance(omega, RescaleSpec) else (
        omega if isinstance(omega, ex.Expr) else jc.parse(str(omega))
    )
    factor = ex.Call("exp", 2 * om)
    entries = [[factor * e for e in row] for row in spec.entries]
    return MetricSpec(
        entries,
        signature=spec.signature,
        name=f"{spec.name}-rescaled",
        box=spec.box,
        exclude=spec.exclude,
    )


# ----------------------------------------------------------------------
# Geometry at a point.


class GeometryPoint:
    """Curvature data derived from metric jets at one point.

    ``order`` is the jet order of the metric; every derived field lives at
    the highest order its defining formula allows.  Fields are plain
    arrays with a trailing jet-coefficient axis; the ``*_tensor``
    properties wrap them for the index algebra.
    """

    def __init__(self, spec: MetricSpec, point, order=4):
        if order < 2:
            raise ValueError("curvature needs metric jets of order >= 2")
        self.spec = spec
        self.point = np.asarray(point, dtype=np.float64)
        self.order = order
        self.n = spec.n
        self.space = jc.get_space(self.n, order)
        self.metric = spec.metric_at(point, order)
        self._metrics = {order: self.metric}
        self._build_christoffel()
        self._build_riemann()
        if self.n >= 3:
            self._build_conformal_family()
        else:
            self.schouten = self.jay = self.weyl = None
            self.cotton = self.bach = None

    # -- infrastructure -------------------------------------------------
    def space_at(self, order):
        return jc.get_space(self.n, order)

    def metric_at(self, order) -> MetricAtPoint:
        if order > self.order:
            raise ValueError("metric jets not available at this order")
        if order not in self._metrics:
            sp = self.space_at(order)
            self._metrics[order] = MetricAtPoint(
                sp, np.ascontiguousarray(self.metric.g[..., : sp.size]), self.metric.signature
            )
        return self._metrics[order]

    def gamma_at(self, space):
        if space.order > self.order - 1:
            raise ValueError("Christoffel jets not available at this order")
        return self.gamma[..., : space.size]

    # -- construction ---------------------------------------------------
    def _build_christoffel(self):
        sp = self.space
        sub = self.space_at(self.order - 1)
        n = self.n
        g = self.metric.g
        pg = np.stack(
            [sp.partial_coeffs(g, b) for b in range(n)]
        )  # pg[b, d, c] = d_b g_dc
        low = 0.5 * (
            np.transpose(pg, (1, 0, 2, 3)) + np.transpose(pg, (1, 2, 0, 3)) - pg
        )
        # low[d, b, c] = (d_b g_dc + d_c g_db - d_d g_bc) / 2
        ginv = self.metric.ginv[..., : sub.size]
        gam = jtensordot(sub, ginv, low, (1,), (0,))
        self.gamma = np.ascontiguousarray(gam)  # gamma[a, b, c] = Gamma^a_bc

    def _build_riemann(self):
        sub = self.space_at(self.order - 1)
        out = self.space_at(self.order - 2)
        n = self.n
        gam = self.gamma
        dgam = np.stack(
            [sub.partial_coeffs(gam, c) for c in range(n)]
        )  # dgam[c, e, d, b] = d_c Gamma^e_db
        gg = jtensordot(out, gam[..., : out.size], gam[..., : out.size], (2,), (0,))
        # gg[e, c, d, b] = Gamma^e_cf Gamma^f_db
        riem = (
            np.transpose(dgam, (1, 3, 0, 2, 4))
            - np.transpose(dgam, (1, 3, 2, 0, 4))
            + np.transpose(gg, (0, 3, 1, 2, 4))
            - np.transpose(gg, (0, 3, 2, 1, 4))
        )
        self.riem_mixed = riem  # riem[e, b, c, d] = R^e_bcd
        g_out = self.metric.g[..., : out.size]
        self.riem = jtensordot(out, g_out, riem, (1,), (0,))  # R_abcd
        self.ric = np.trace(riem, axis1=0, axis2=2)  # Ric_bd
        ginv_out = self.metric.ginv[..., : out.size]
        self.sc = jtensordot(out, ginv_out, self.ric, (0, 1), (0, 1))

    def _build_conformal_family(self):
        n = self.n
        out = self.space_at(self.order - 2)
        g = self.metric.g[..., : out.size]

        self.jay = self.sc / (2 * (n - 1))
        jg = jtensordot(out, g, self.jay)
        self.schouten = (self.ric - jg) / (n - 2)

        P = self.schouten
        gP = jtensordot(out, g, P)  # gP[x, y, z, w] = g_xy P_zw
        correction = (
            np.transpose(gP, (1, 2, 0, 3, 4))  # g_ca P_bd at [a, b, c, d]
            - np.transpose(gP, (2, 1, 0, 3, 4))  # g_cb P_ad
            + np.transpose(gP, (2, 1, 3, 0, 4))  # g_db P_ac
            - np.transpose(gP, (1, 2, 3, 0, 4))  # g_da P_bc
        )
        self.weyl = self.riem - correction

        if self.order >= 3:
            # Cotton A_abc = grad_b P_ca - grad_c P_ba
            dP = covd(self, Tensor(out, P, "ll")).comps  # dP[e, b, d] = grad_e P_bd
            self.cotton = np.transpose(dP, (2, 0, 1, 3)) - np.transpose(
                dP, (2, 1, 0, 3)
            )
        else:
            self.cotton = None

        if self.order >= 4:
            sub = self.space_at(self.order - 3)
            low = self.space_at(self.order - 4)
            dA = covd(self, Tensor(sub, self.cotton, "lll")).comps
            # grad^c A_acb: pair the derivative index and the middle slot
            ginv_low = self.metric.ginv[..., : low.size]
            divA = jtensordot(low, ginv_low, dA, (0, 1), (0, 2))
            inner = jtensordot(low, ginv_low, self.schouten[..., : low.size], (1,), (0,))
            Pup = jtensordot(low, ginv_low, inner, (1,), (1,))  # P^dc
            PC = jtensordot(low, Pup, self.weyl[..., : low.size], (0, 1), (0, 2))
            self.bach = divA + PC
        else:
            self.bach = None

    # -- tensor views ---------------------------------------------------
    def g_tensor(self, order=None):
        order = self.order if order is None else order
        m = self.metric_at(order)
        return Tensor(m.space, m.g, "ll", weight=2)

    def riemann_tensor(self):
        sp = self.space_at(self.order - 2)
        return Tensor(sp, self.riem, "llll")

    def ricci_tensor(self):
        sp = self.space_at(self.order - 2)
        return Tensor(sp, self.ric, "ll")

    def weyl_tensor(self):
        sp = self.space_at(self.order - 2)
        return Tensor(sp, self.weyl, "llll")

    def schouten_tensor(self):
        sp = self.space_at(self.order - 2)
        return Tensor(sp, self.schouten, "ll")

    def cotton_tensor(self):
        sp = self.space_at(self.order - 3)
        return Tensor(sp, self.cotton, "lll")

    def bach_tensor(self):
        sp = self.space_at(self.order - 4)
        return Tensor(sp, self.bach, "ll")

    def __repr__(self):
        return f"GeometryPoint({self.spec.name!r}, point={self.point.tolist()}, order={self.order})"


# ----------------------------------------------------------------------
# Covariant differentiation.


def covd(geo: GeometryPoint, t: Tensor) -> Tensor:
    """Levi-Civita covariant derivative of a tensor field at the point.

    The new covariant index comes first; the output jet order drops by
    one.  Fiber axes ride along untouched (use the bundle modules for
    connection-coupled derivatives), and the conformal weight tag is kept
    as is, matching the fixed-scale trivialization of density bundles.
    """
    sp = t.space
    if sp.order < 1:
        raise ValueError("cannot differentiate an order-0 field")
    out_sp = jc.get_space(sp.n, sp.order - 1)
    n = sp.n
    rank = t.rank
    nf = len(t.fdims)

    out = np.stack([sp.partial_coeffs(t.comps, k) for k in range(n)], axis=0)
    gam = geo.gamma_at(out_sp)
    tt = t.comps[..., : out_sp.size]
    for i, mark in enumerate(t.indices):
        if mark == "l":
            term = jtensordot(out_sp, tt, gam, (i,), (0,))
            term = np.moveaxis(term, rank - 1 + nf, 0)
            term = np.moveaxis(term, rank + nf, i + 1)
            out = out - term
        else:
            term = jtensordot(out_sp, tt, gam, (i,), (2,))
            term = np.moveaxis(term, rank + nf, 0)
            term = np.moveaxis(term, rank + nf, i + 1)
            out = out + term
    return Tensor(out_sp, out, "l" + t.indices, t.weight, t.fdims)


def covariant_derivative(t: Tensor, geo: GeometryPoint) -> Tensor:
    return covd(geo, t)


def conformal_covariance_check(spec: MetricSpec, omega, point, order=4):
    """Recompute the curvature family under ghat = e^{2 omega} g and test
    the covariance claims: the mixed-index Weyl tensor is unchanged, the
    Christoffels shift by the Upsilon law, and in dimension 4 the Bach
    tensor picks up exactly e^{-2 omega}.  Returns one result per claim.
    """
    from .report import CheckResult, sup_residual

    om = omega if isinstance(omega, RescaleSpec) else RescaleSpec(omega)
    geo = spec.geometry(point, order)
    hat = rescale_metric(spec, om).geometry(point, order)
    n = spec.n
    results = []

    sp2 = geo.space_at(order - 2)
    cmix = jtensordot(sp2, geo.metric.ginv[..., : sp2.size], geo.weyl, (1,), (0,))
    cmix_hat = jtensordot(sp2, hat.metric.ginv[..., : sp2.size], hat.weyl, (1,), (0,))
    results.append(
        CheckResult(
            suite="conformal-n4" if n == 4 else "conformal",
            name="weyl-mixed-invariance",
            fixture=spec.name,
            point=point,
            residual=sup_residual(cmix, cmix_hat),
            tolerance=1e-9,
        )
    )

    sub = geo.space_at(order - 1)
    ups = om.upsilon_at(point, sub)
    upsup = jtensordot(sub, geo.metric.ginv[..., : sub.size], ups, (1,), (0,))
    eye = np.eye(n)
    shift = (
        np.einsum("ab,ck->abck", eye, ups)
        + np.einsum("ac,bk->abck", eye, ups)
        - np.transpose(
            jtensordot(sub, geo.metric.g[..., : sub.size], upsup), (2, 0, 1, 3)
        )
    )
    results.append(
        CheckResult(
            suite="conformal-n4" if n == 4 else "conformal",
            name="christoffel-upsilon-law",
            fixture=spec.name,
            point=point,
            residual=sup_residual(hat.gamma, geo.gamma + shift),
            tolerance=1e-9,
        )
    )

    if n == 4 and order >= 4:
        sp0 = geo.space_at(order - 4)
        fac = om.factor(-2.0, point, sp0)
        want = jtensordot(sp0, geo.bach, fac)
        results.append(
            CheckResult(
                suite="conformal-n4",
                name="bach-weight-minus-two",
                fixture=spec.name,
                point=point,
                residual=sup_residual(hat.bach, want),
                tolerance=1e-8,
            )
        )
    return results


def harmonic_curvature_op(geo: GeometryPoint, S: Tensor) -> Tensor:
    """The second-order operator on sections of T*M (x) TM whose kernel
    condition characterizes harmonic curvature:

        S_b{}^c  ->  -2 grad^a grad_[a S_b]{}^c - R_ba{}^c{}_d S^{ad}
    """
    if S.indices != "lu":
        raise ValueError("expected a T*M (x) TM section with indices 'lu'")
    d1 = covd(geo, S)  # d1[a, b, ^c]
    d1 = d1.asym((0, 1))
    d2 = covd(geo, d1)  # d2[e, a, b, ^c]
    sp = d2.space
    ginv = geo.metric.ginv[..., : sp.size]
    lap = jtensordot(sp, ginv, d2.comps, (0, 1), (0, 1))  # grad^a grad_[a S_b]^c
    riem = geo.riem[..., : sp.size]
    Rmix = jtensordot(sp, ginv, riem, (1,), (2,))  # Rmix[^c, b, a, d] = R_ba{}^c{}_d
    Sup = jtensordot(sp, ginv, S.comps[..., : sp.size], (1,), (0,))  # S^{a d}
    act = jtensordot(sp, Rmix, Sup, (2, 3), (0, 1))  # act[^c, b]
    out = -2.0 * lap - np.transpose(act, (1, 0, 2))
    return Tensor(sp, out, "lu", S.weight, S.fdims)
