"""Curvature family, covariant derivative, and conformal rescaling."""

import math

import numpy as np
import pytest

from detourcheck import jetcalc as jc
from detourcheck import riemann as rm
from detourcheck.tensor import Tensor, jtensordot

P3 = [0.2, -0.1, 0.15]
P4 = [0.15, -0.2, 0.1, 0.05]


def scalar_field(geo, src):
    j = jc.jet_eval(src, list(geo.point), geo.order)
    return Tensor(geo.space, j.coeffs, "")


def test_flat_christoffels_vanish():
    geo = rm.metric_fixture("flat", n=3).geometry(P3)
    assert np.max(np.abs(geo.gamma)) == 0
    assert np.max(np.abs(geo.riem)) == 0


def test_polar_sphere_christoffels_frozen():
    spec = rm.MetricSpec([["1", "0"], ["0", "sin(x0)^2"]], name="polar-sphere")
    geo = spec.geometry([1.0, 0.3])
    th = 1.0
    assert geo.gamma[0, 1, 1, 0] == pytest.approx(-math.sin(th) * math.cos(th), abs=1e-12)
    assert geo.gamma[1, 0, 1, 0] == pytest.approx(math.cos(th) / math.sin(th), abs=1e-12)
    assert geo.gamma[1, 1, 0, 0] == geo.gamma[1, 0, 1, 0]
    # Gauss curvature 1: scalar curvature 2
    assert geo.sc[0] == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_sphere_scalar_curvature_sign_convention(n):
    geo = rm.metric_fixture("sphere", n=n).geometry([0.1] * n)
    assert geo.sc[0] == pytest.approx(n * (n - 1), rel=1e-12)


def test_sphere_curvature_zoo():
    geo = rm.metric_fixture("sphere", n=4).geometry(P4)
    sub = geo.schouten.shape[-1]
    assert np.allclose(geo.jay, [2.0] + [0.0] * (sub - 1), atol=1e-12)
    assert np.max(np.abs(geo.schouten - geo.metric.g[..., :sub] / 2)) < 1e-12
    assert np.max(np.abs(geo.weyl)) < 1e-12
    assert np.max(np.abs(geo.cotton)) < 1e-12
    assert np.max(np.abs(geo.bach)) < 1e-12


def test_sphere_radius_parameter():
    geo = rm.metric_fixture("sphere", n=4, radius=2.0).geometry(P4)
    assert geo.sc[0] == pytest.approx(12.0 / 4.0, rel=1e-12)


def test_hyperbolic_einstein():
    geo = rm.metric_fixture("hyperbolic", n=4).geometry([0.1, 0.05, -0.2, 0.1])
    sub = geo.schouten.shape[-1]
    assert geo.sc[0] == pytest.approx(-12.0, rel=1e-12)
    assert np.max(np.abs(geo.schouten + geo.metric.g[..., :sub] / 2)) < 1e-11
    assert np.max(np.abs(geo.bach)) < 1e-11


def test_schwarzschild_ricci_flat_not_conformally_flat():
    spec = rm.metric_fixture("schwarzschild", mass=1.0)
    for point in ([0.1, 5.0, 1.1, 0.4], [-0.3, 4.7, 1.3, 0.8]):
        geo = spec.geometry(point)
        assert np.max(np.abs(geo.ric)) < 1e-9
        assert np.max(np.abs(geo.sc)) < 1e-9
        assert np.max(np.abs(geo.weyl)) > 1e-2
        assert np.max(np.abs(geo.bach)) < 1e-9
        assert geo.metric.signature == (3, 1)


@pytest.fixture(scope="module")
def perturbed():
    return rm.metric_fixture("perturbed-flat", n=4, seed=3).geometry(P4)


def test_riemann_symmetries(perturbed):
    R = perturbed.riem
    assert np.max(np.abs(R + np.transpose(R, (1, 0, 2, 3, 4)))) < 1e-12
    assert np.max(np.abs(R + np.transpose(R, (0, 1, 3, 2, 4)))) < 1e-12
    assert np.max(np.abs(R - np.transpose(R, (2, 3, 0, 1, 4)))) < 1e-12


def test_first_bianchi(perturbed):
    R = perturbed.riem
    cyc = R + np.transpose(R, (0, 2, 3, 1, 4)) + np.transpose(R, (0, 3, 1, 2, 4))
    assert np.max(np.abs(cyc)) < 1e-10


def test_contracted_second_bianchi(perturbed):
    geo = perturbed
    sp = geo.space_at(geo.order - 2)
    ric = Tensor(sp, geo.ric, "ll")
    dric = rm.covd(geo, ric)
    out = dric.space
    div = jtensordot(out, geo.metric.ginv[..., : out.size], dric.comps, (0, 1), (0, 1))
    dsc = np.stack([sp.partial_coeffs(geo.sc, k) for k in range(geo.n)])
    assert np.max(np.abs(div - dsc / 2)) < 1e-9


def test_weyl_totally_trace_free(perturbed):
    C = perturbed.weyl
    sp = perturbed.space_at(perturbed.order - 2)
    ginv = perturbed.metric.ginv[..., : sp.size]
    for axes in ((0, 2), (0, 3), (1, 3)):
        tr = jtensordot(sp, ginv, C, (0, 1), axes)
        assert np.max(np.abs(tr)) < 1e-10


def test_decomposition_closure(perturbed):
    geo = perturbed
    sp = geo.space_at(geo.order - 2)
    g = geo.metric.g[..., : sp.size]
    P = geo.schouten
    n = geo.n
    corr = np.zeros_like(geo.riem)
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    corr[a, b, c, d] = (
                        sp.jmul_flat(g[c, a], P[b, d])
                        - sp.jmul_flat(g[c, b], P[a, d])
                        + sp.jmul_flat(g[d, b], P[a, c])
                        - sp.jmul_flat(g[d, a], P[b, c])
                    )
    assert np.max(np.abs(geo.riem - geo.weyl - corr)) < 1e-10


def test_cotton_traces_and_antisymmetry(perturbed):
    A = perturbed.cotton
    sp = perturbed.space_at(perturbed.order - 3)
    ginv = perturbed.metric.ginv[..., : sp.size]
    assert np.max(np.abs(A + np.transpose(A, (0, 2, 1, 3)))) < 1e-12
    tr1 = jtensordot(sp, ginv, A, (0, 1), (0, 1))
    tr2 = jtensordot(sp, ginv, A, (0, 1), (1, 2))
    assert np.max(np.abs(tr1)) < 1e-10
    assert np.max(np.abs(tr2)) < 1e-10


def test_schouten_trace_is_j(perturbed):
    sp = perturbed.space_at(perturbed.order - 2)
    tr = jtensordot(
        sp, perturbed.metric.ginv[..., : sp.size], perturbed.schouten, (0, 1), (0, 1)
    )
    assert np.max(np.abs(tr - perturbed.jay)) < 1e-12


def test_metric_compatibility(perturbed):
    g = Tensor(perturbed.space, perturbed.metric.g, "ll", weight=2)
    dg = rm.covd(perturbed, g)
    assert np.max(np.abs(dg.comps)) < 1e-10


def test_covd_scalar_and_hessian(perturbed):
    f = scalar_field(perturbed, "sin(x0)*x1 + x2^2*x3")
    df = rm.covd(perturbed, f)
    sp = perturbed.space
    want = np.stack([sp.partial_coeffs(f.comps, k) for k in range(4)])
    assert np.allclose(df.comps, want, atol=1e-13)
    hess = rm.covd(perturbed, df)
    assert np.max(np.abs(hess.comps - np.transpose(hess.comps, (1, 0, 2)))) < 1e-10


def test_covd_coordinate_vector_flat():
    geo = rm.metric_fixture("flat", n=3).geometry(P3)
    V = np.stack([jc.jet_eval(f"x{k}", P3, 4).coeffs for k in range(3)])
    dv = rm.covd(geo, Tensor(geo.space, V, "u"))
    want = np.zeros_like(dv.comps)
    want[np.arange(3), np.arange(3), 0] = 1.0
    assert np.allclose(dv.comps, want, atol=1e-13)


def test_covd_leibniz(perturbed):
    geo = perturbed
    rng = np.random.default_rng(5)
    sp = geo.space
    T = Tensor(sp, rng.standard_normal((4, sp.size)), "l")
    f = jc.jet_eval("exp(0.3*x0 - x1*x3)", list(geo.point), geo.order)
    lhs = rm.covd(geo, T * f)
    out = lhs.space
    df = np.stack([sp.partial_coeffs(f.coeffs, k) for k in range(4)])
    rhs = jtensordot(out, rm.covd(geo, T).comps, f.coeffs[: out.size]) + jtensordot(
        out, df, T.comps[..., : out.size]
    )
    assert np.max(np.abs(lhs.comps - rhs)) < 1e-11


def test_covd_raise_lower_commute(perturbed):
    # raising an index commutes with the covariant derivative
    geo = perturbed
    rng = np.random.default_rng(9)
    T = Tensor(geo.space, rng.standard_normal((4, geo.space.size)), "l")
    m_full = geo.metric
    up_then_d = rm.covd(geo, T.raise_index(0, m_full))
    d_then_up = rm.covd(geo, T).raise_index(1, geo.metric_at(geo.order - 1))
    assert np.max(np.abs(up_then_d.comps - d_then_up.comps)) < 1e-10


def test_harmonic_curvature_flat_and_sphere():
    flat = rm.metric_fixture("flat", n=3).geometry(P3)
    vex = ["x0^2*x1 + x2", "x1^3 - x0*x2", "x0 + x1*x2^2"]
    V = np.stack([jc.jet_eval(e, P3, 4).coeffs for e in vex])
    S = rm.covd(flat, Tensor(flat.space, V, "u"))
    assert np.max(np.abs(rm.harmonic_curvature_op(flat, S).comps)) < 1e-10

    sph = rm.metric_fixture("sphere", n=4).geometry(P4)
    vex4 = ["x0*x1", "x2^2 - x3", "x0 + x1*x3", "x2*x0^2"]
    V4 = np.stack([jc.jet_eval(e, P4, 4).coeffs for e in vex4])
    S4 = rm.covd(sph, Tensor(sph.space, V4, "u"))
    assert np.max(np.abs(rm.harmonic_curvature_op(sph, S4).comps)) < 1e-8


def test_harmonic_curvature_matches_divergence_action(perturbed):
    geo = perturbed
    vex4 = ["x0*x1", "x2^2 - x3", "x0 + x1*x3", "x2*x0^2"]
    V = np.stack([jc.jet_eval(e, P4, 4).coeffs for e in vex4])
    S = rm.covd(geo, Tensor(geo.space, V, "u"))
    got = rm.harmonic_curvature_op(geo, S)

    sp2 = geo.space_at(2)
    Rmix = jtensordot(sp2, geo.metric.ginv[..., : sp2.size], geo.riem, (1,), (2,))
    Rend = np.moveaxis(Rmix, 0, 2)  # [a, b, ^c, d] = R_ab{}^c{}_d
    dR = rm.covd(geo, Tensor(sp2, Rend, "llul")).comps
    sp1 = geo.space_at(1)
    divR = -jtensordot(sp1, geo.metric.ginv[..., : sp1.size], dR, (0, 1), (0, 1))
    act = jtensordot(sp1, divR, V[..., : sp1.size], (2,), (0,))
    assert np.max(np.abs(got.comps[..., : sp1.size] - act)) < 1e-8
    assert np.max(np.abs(got.comps)) > 1e-3  # generically nonzero


def test_conformal_covariance_trivial_rescale():
    spec = rm.metric_fixture("perturbed-flat", n=4, seed=3)
    for r in rm.conformal_covariance_check(spec, "0", P4):
        assert r.passed and r.residual < 1e-12


def test_conformal_covariance_n4():
    spec = rm.metric_fixture("perturbed-flat", n=4, seed=3)
    results = rm.conformal_covariance_check(spec, "0.1*x0 - 0.05*x1*x2", P4)
    names = {r.name for r in results}
    assert "bach-weight-minus-two" in names
    for r in results:
        assert r.passed, (r.name, r.residual)


def test_conformal_covariance_n5_weyl_only():
    spec = rm.metric_fixture("perturbed-flat", n=5, seed=11)
    results = rm.conformal_covariance_check(spec, "0.1*x0", [0.1, -0.2, 0.05, 0.3, -0.1])
    names = {r.name for r in results}
    assert "bach-weight-minus-two" not in names  # no claim away from n = 4
    for r in results:
        assert r.passed, (r.name, r.residual)


def test_perturbed_flat_deterministic():
    a = rm.metric_fixture("perturbed-flat", n=3, seed=7)
    b = rm.metric_fixture("perturbed-flat", n=3, seed=7)
    c = rm.metric_fixture("perturbed-flat", n=3, seed=8)
    assert all(
        a.entries[i][j] == b.entries[i][j] for i in range(3) for j in range(3)
    )
    assert any(
        a.entries[i][j] != c.entries[i][j] for i in range(3) for j in range(3)
    )


def test_metric_spec_rejects_asymmetric():
    with pytest.raises(ValueError):
        rm.MetricSpec([["1", "x0"], ["x1", "1"]])


def test_geometry_cache_reuses_instances():
    spec = rm.metric_fixture("flat", n=3)
    assert spec.geometry(P3) is spec.geometry(P3)
