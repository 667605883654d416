"""Spinor calculus: exact Clifford algebra, the frame gauge and spin
connection, twistor and Dirac operators, splittings into the spin-tractor
bundle, the third-order detour operator, and its Bach composition."""

import numpy as np
import pytest

import detourcheck.jetcalc as jc
import detourcheck.riemann as rm
import detourcheck.spin as sn
from detourcheck.report import sup_residual
from detourcheck.tensor import Tensor, jtensordot

P4 = (0.3, -0.2, 0.1, 0.4)
P5 = (0.3, -0.2, 0.1, 0.4, -0.3)

SIGNATURES = [(1, 0), (2, 0), (3, 0), (4, 0), (3, 1), (2, 2), (5, 0), (6, 0)]


@pytest.fixture(scope="module")
def flat4():
    return rm.metric_fixture("flat", n=4)


@pytest.fixture(scope="module")
def pert4():
    return rm.metric_fixture("perturbed-flat", n=4, seed=3, amplitude=0.08)


@pytest.fixture(scope="module")
def frame4(pert4):
    return sn.spin_connection(rm.GeometryPoint(pert4, P4, 6))


def flat_frame(flat4, order=5):
    return sn.spin_connection(rm.GeometryPoint(flat4, P4, order))


def random_twistor(frame, seed):
    geo = frame.geo
    sp = geo.space
    chi = sn.spinor_fixture(frame, "random-spinor", seed=seed)
    n, N = geo.n, frame.rep.dim
    rng = np.random.default_rng(jc.subseed(seed, "twistor-form"))
    comps = np.stack(
        [
            sn.spinor_fixture(frame, "random-spinor", seed=int(rng.integers(2**31))).comps
            for _ in range(n)
        ]
    )
    raw = Tensor(sp, comps, "l", 0, (N,))
    tr = sn.beta_trace(frame, raw)
    bl = frame.beta_lower()
    fixed = raw.comps + (2.0 / n) * jtensordot(sp, bl, tr, (2,), (0,))
    return Tensor(sp, fixed, "l", 0, (N,))


# ----------------------------------------------------------------------
# The Clifford layer.


def test_anticommutators_exact():
    for p, q in SIGNATURES:
        rep = sn.clifford_build(p, q)
        n = p + q
        eye = np.eye(rep.dim)
        for i in range(n):
            for j in range(n):
                ac = rep.bb(i, j) + rep.bb(j, i)
                want = -(rep.eta[i] if i == j else 0.0) * eye
                assert np.array_equal(ac, want)


def test_beta_trace_relation_n4():
    rep = sn.clifford_build(4, 0)
    assert rep.dim == 4
    for i in range(4):
        for j in range(4):
            tr = np.trace(rep.bb(i, j))
            want = -2.0 * (rep.eta[i] if i == j else 0.0)
            assert tr == want


def test_unsupported_dimension():
    with pytest.raises(ValueError):
        sn.clifford_build(4, 3)


def test_chirality_element():
    for p, q in SIGNATURES:
        rep = sn.clifford_build(p, q)
        if (p + q) % 2:
            assert rep.chirality is None
            continue
        G = rep.chirality
        assert np.array_equal(G @ G, np.eye(rep.dim, dtype=complex))
        for g in rep.gamma:
            assert np.array_equal(G @ g, -g @ G)
        # commutes with even products
        for i in range(p + q):
            for j in range(p + q):
                bb = rep.bb(i, j)
                assert np.array_equal(G @ bb, bb @ G)


def test_pairing_matrix_and_sign():
    for p, q in SIGNATURES:
        rep = sn.clifford_build(p, q)
        A = rep.pairing
        assert np.array_equal(A, A.conj().T)
        assert rep.clifford_sign == (1 if q == 1 else -1)
        Ainv = np.linalg.inv(A)
        for g in rep.gamma:
            assert np.array_equal(A @ g @ Ainv, rep.clifford_sign * g.conj().T)


def test_pairing_compatibility_on_fields(frame4):
    rep = frame4.rep
    sp = frame4.geo.space
    chi = sn.spinor_fixture(frame4, "random-spinor", seed=5)
    rho = sn.spinor_fixture(frame4, "random-spinor", seed=6)
    bl = frame4.beta_lower()
    for mu in range(frame4.geo.n):
        bchi = Tensor(sp, jtensordot(sp, bl[mu], chi.comps, (1,), (0,)), "", 0, (rep.dim,))
        brho = Tensor(sp, jtensordot(sp, bl[mu], rho.comps, (1,), (0,)), "", 0, (rep.dim,))
        lhs = sn.spinor_pairing(rep, bchi, rho)
        rhs = sn.spinor_pairing(rep, chi, brho)
        assert sup_residual(lhs, rep.clifford_sign * rhs) < 1e-13


# ----------------------------------------------------------------------
# Frame construction.


def test_flat_frame_is_identity(flat4):
    fr = flat_frame(flat4)
    want = np.zeros_like(fr.frame)
    for i in range(4):
        want[i, i, 0] = 1.0
    assert sup_residual(fr.frame, want) == 0.0
    assert sup_residual(fr.conn.W) == 0.0


def test_frame_orthonormal_curved(frame4):
    geo = frame4.geo
    sp = geo.space
    g = geo.metric_at(sp.order).g
    low = jtensordot(sp, g, frame4.frame, (1,), (1,))
    gram = jtensordot(sp, frame4.frame, low, (1,), (0,))
    want = np.zeros_like(gram)
    for i in range(4):
        want[i, i, 0] = frame4.rep.eta[i]
    assert sup_residual(gram, want) < 1e-12


def test_lorentzian_frame_signature():
    spec = rm.metric_fixture("schwarzschild", mass=1.0)
    fr = sn.spin_connection(rm.GeometryPoint(spec, (0.1, 5.0, 1.1, 0.4), 4))
    assert (fr.rep.p, fr.rep.q) == (3, 1)
    assert fr.rep.clifford_sign == 1


def test_frame_signature_mismatch():
    spec = rm.metric_fixture("schwarzschild", mass=1.0)
    geo = rm.GeometryPoint(spec, (0.1, 5.0, 1.1, 0.4), 4)
    with pytest.raises(ValueError):
        sn.spin_connection(geo, sn.clifford_build(4, 0))


def test_null_coordinate_frame_rejected():
    # non-degenerate metric, but the first coordinate direction is null,
    # so Gram-Schmidt cannot normalize it
    spec = rm.MetricSpec([["0", "1"], ["1", "0"]], name="null-chart")
    geo = rm.GeometryPoint(spec, (0.1, 0.3), 3)
    with pytest.raises(ValueError, match="frame construction failed"):
        sn.spin_connection(geo)


def test_coordinate_clifford_relation(frame4):
    # b^mu b^nu + b^nu b^mu = -g^{mu nu} as jets, away from the frame gauge
    geo = frame4.geo
    sp = geo.space
    bu = frame4.beta_upper()
    prod = jtensordot(sp, bu, bu, (2,), (1,))  # [mu, s, nu, t, S]
    prod = np.transpose(prod, (0, 2, 1, 3, 4))
    anti = prod + np.transpose(prod, (1, 0, 2, 3, 4))
    ginv = geo.metric_at(sp.order).ginv
    want = -np.einsum("mnS,st->mnstS", ginv, np.eye(frame4.rep.dim))
    assert sup_residual(anti, want) < 1e-13


# ----------------------------------------------------------------------
# Dirac and twistor operators.


def test_dirac_flat_constant(flat4):
    fr = flat_frame(flat4)
    psi = sn.spinor_fixture(fr, "const-spinor", slot=2)
    assert sup_residual(sn.dirac(fr, psi).comps) == 0.0


def test_dirac_flat_linear(flat4):
    # psi = x1 e_0 has D psi = b^1 e_0, a constant spinor
    fr = flat_frame(flat4)
    sp = fr.geo.space
    comps = np.zeros((4, sp.size), dtype=complex)
    comps[0] = jc.jet_eval("x1", P4, sp.order).coeffs
    D = sn.dirac(fr, Tensor(sp, comps, "", 0, (4,)))
    want = np.zeros_like(D.comps)
    want[:, 0] = fr.rep.betas[1][:, 0]
    assert sup_residual(D.comps, want) < 1e-15


def test_twistor_of_constant_and_linear(flat4):
    fr = flat_frame(flat4)
    for name, slot in [("const-spinor", 0), ("linear-twistor", 1)]:
        psi = sn.spinor_fixture(fr, name, slot=slot)
        assert sup_residual(sn.twistor_T(fr, psi).comps) < 1e-15


def test_twistor_output_trace_free(frame4):
    psi = sn.spinor_fixture(frame4, "random-spinor", seed=1)
    u = sn.twistor_T(frame4, psi)
    scale = 1.0 + sup_residual(u.comps)
    assert sup_residual(sn.beta_trace(frame4, u)) < 1e-12 * scale


def test_splitting_rejects_non_twistor(frame4):
    psi = sn.spinor_fixture(frame4, "random-spinor", seed=1)
    comps = np.stack([psi.comps for _ in range(4)])
    with pytest.raises(ValueError):
        sn.L1(frame4, Tensor(frame4.geo.space, comps, "l", 0, (4,)))


def test_L0_flat_constant(flat4):
    fr = flat_frame(flat4)
    psi = sn.spinor_fixture(fr, "const-spinor", slot=1)
    s = sn.L0(fr, psi)
    assert sup_residual(s.comps[4:]) == 0.0
    assert sup_residual(s.comps[:4], psi.comps[:, : s.space.size]) == 0.0
    conn2 = sn.spin_tractor_connection(fr)
    assert sup_residual(conn2.covd(s).comps) == 0.0


def test_twistor_spinor_gives_parallel_tractor(flat4):
    fr = flat_frame(flat4)
    conn2 = sn.spin_tractor_connection(fr)
    for slot in range(4):
        psi = sn.spinor_fixture(fr, "linear-twistor", slot=slot)
        assert sup_residual(sn.twistor_T(fr, psi).comps) < 1e-14
        assert sup_residual(conn2.covd(sn.L0(fr, psi)).comps) < 1e-14
    # and a non-twistor spinor is not parallel
    psi = sn.spinor_fixture(fr, "random-spinor", seed=3)
    assert sup_residual(conn2.covd(sn.L0(fr, psi)).comps) > 1e-3


def test_unknown_fixture_rejected(frame4):
    with pytest.raises(KeyError):
        sn.spinor_fixture(frame4, "nonsense")


# ----------------------------------------------------------------------
# The identity suite.


def test_spincomm_flat(flat4):
    res = sn.check_spincomm(flat4, P4, order=5, seed=1)
    assert {r.name for r in res} == {
        "splitting-square",
        "middle-slot",
        "dirac-laplacian",
        "curvature-clifford",
        "spinor-curvature",
    }
    assert all(r.residual < 1e-10 for r in res)


def test_spincomm_sphere():
    spec = rm.metric_fixture("sphere", n=4, radius=1.0)
    res = sn.check_spincomm(spec, P4, order=5, seed=1)
    assert all(r.passed for r in res)
    assert max(r.residual for r in res) < 1e-8


def test_spincomm_curved(pert4):
    for spec, pt in [(pert4, P4), (rm.metric_fixture("perturbed-flat", n=5, seed=9, amplitude=0.05), P5)]:
        res = sn.check_spincomm(spec, pt, order=5, seed=1)
        assert max(r.residual for r in res) < 1e-8


def test_spincomm_lorentzian():
    spec = rm.metric_fixture("schwarzschild", mass=1.0)
    res = sn.check_spincomm(spec, (0.1, 5.0, 1.1, 0.4), order=5, seed=1)
    assert max(r.residual for r in res) < 1e-8


def test_spincomm_seed_sweep():
    spec = rm.metric_fixture("perturbed-flat", n=4, seed=12, amplitude=0.1)
    worst = 0.0
    for seed in range(10):
        res = sn.check_spincomm(spec, P4, order=4, seed=seed)
        worst = max(worst, max(r.residual for r in res))
    assert worst < 1e-8


# ----------------------------------------------------------------------
# The detour operator and the Bach composition.


def test_bach_clifford_constant(pert4):
    res = sn.check_bach_clifford(pert4, P4, order=6, seed=1)
    c = complex(*res[0].info["constant"])
    assert abs(c - (-1.0)) < 1e-9
    assert res[0].residual < 1e-7


def test_bach_clifford_many_points(pert4):
    rng = np.random.default_rng(5)
    pts = [tuple(rng.uniform(-0.4, 0.4, size=4)) for _ in range(10)]
    cs = []
    for pt in pts:
        r = sn.check_bach_clifford(pert4, pt, order=6, seed=1)
        cs.append(complex(*r[0].info["constant"]))
        assert r[0].residual < 1e-7
    cs = np.array(cs)
    assert np.abs(cs - cs.mean()).max() < 1e-6 * abs(cs.mean())
    joint = sn.check_bach_clifford(pert4, pts, order=6, seed=1)
    assert len(joint) == 10
    assert max(r.residual for r in joint) < 1e-7


def test_bach_clifford_flat_and_schwarzschild(flat4):
    r = sn.check_bach_clifford(flat4, P4, order=6, seed=1)
    assert r[0].residual < 1e-12
    sch = rm.metric_fixture("schwarzschild", mass=1.0)
    geo = rm.GeometryPoint(sch, (0.1, 5.0, 1.1, 0.4), 6)
    fr = sn.spin_connection(geo)
    phi = sn.spinor_fixture(fr, "random-spinor", seed=1)
    u = sn.twistor_T(fr, phi)
    out = sn.M_Sigma(fr, u)
    assert sup_residual(out.comps) < 1e-7 * (1.0 + sup_residual(u.comps))


def test_detour_output_is_twistor(frame4):
    u = random_twistor(frame4, 7)
    out = sn.M_Sigma(frame4, u)
    scale = 1.0 + sup_residual(out.comps)
    assert sup_residual(sn.beta_trace(frame4, out)) < 1e-11 * scale


# ----------------------------------------------------------------------
# Conformal behavior.


def _hat_pair(spec, point, order, expr="0.1*x0"):
    om = rm.RescaleSpec(expr)
    geo = rm.GeometryPoint(spec, point, order)
    geoh = rm.GeometryPoint(rm.rescale_metric(spec, om), point, order)
    fr = sn.spin_connection(geo)
    frh = sn.spin_connection(geoh, fr.rep)
    return om, fr, frh


def _scaled(om, frame, comps, w, sp):
    f = om.factor(w, frame.geo.point, sp)
    return np.stack([jtensordot(sp, comps[i, ..., : sp.size], f) for i in range(comps.shape[0])])


def test_two_scale_frame_and_splittings(pert4):
    om, fr, frh = _hat_pair(pert4, P4, 5)
    sp = fr.geo.space
    n, N = 4, fr.rep.dim
    assert sup_residual(frh.frame, _scaled(om, fr, fr.frame, -1.0, sp)) < 1e-12
    psi = sn.spinor_fixture(fr, "random-spinor", seed=2)
    psih = Tensor(sp, _scaled(om, fr, psi.comps, 0.5, sp), "", 0, (N,))
    # splitting law: hat slots are (psi, phi + Upsilon_c b^c psi) with the
    # e^{+-omega/2} factors of the slot weights
    lh = sn.L0(frh, psih)
    l0 = sn.L0(fr, psi)
    spo = lh.space
    ups = om.upsilon_at(P4, spo)
    bu = fr.beta_upper(spo.order)
    ubu = jtensordot(spo, ups, bu, (0,), (0,))
    shift = jtensordot(spo, ubu, psi.comps[:, : spo.size], (1,), (0,))
    want_top = _scaled(om, fr, psi.comps, 0.5, spo)
    want_bot = _scaled(om, fr, l0.comps[N:] + shift, -0.5, spo)
    assert sup_residual(lh.comps[:N], want_top) < 1e-9
    assert sup_residual(lh.comps[N:], want_bot) < 1e-9
    # twistor operator is invariant at weight 1/2
    u = sn.twistor_T(fr, psi)
    uh = sn.twistor_T(frh, psih)
    spu = uh.space
    assert sup_residual(uh.comps, np.stack([_scaled(om, fr, u.comps[a], 0.5, spu) for a in range(n)])) < 1e-9
    # and the 1-form splitting follows the same slot law
    uhat = Tensor(spu, np.stack([_scaled(om, fr, u.comps[a], 0.5, spu) for a in range(n)]), "l", 0, (N,))
    l1 = sn.L1(fr, u)
    l1h = sn.L1(frh, uhat)
    sp1 = l1h.space
    ups1 = om.upsilon_at(P4, sp1)
    ubu1 = jtensordot(sp1, ups1, fr.beta_upper(sp1.order), (0,), (0,))
    shift1 = np.stack(
        [jtensordot(sp1, ubu1, u.comps[a, :, : sp1.size], (1,), (0,)) for a in range(n)]
    )
    want1_top = np.stack([_scaled(om, fr, l1.comps[a, :N], 0.5, sp1) for a in range(n)])
    want1_bot = np.stack(
        [_scaled(om, fr, l1.comps[a, N:, : sp1.size] + shift1[a], -0.5, sp1) for a in range(n)]
    )
    assert sup_residual(l1h.comps[:, :N], want1_top) < 1e-9
    assert sup_residual(l1h.comps[:, N:], want1_bot) < 1e-9


def test_detour_covariance_in_four(pert4):
    om, fr, frh = _hat_pair(pert4, P4, 6)
    psi = sn.spinor_fixture(fr, "random-spinor", seed=2)
    u = sn.twistor_T(fr, psi)
    spu = u.space
    uhat = Tensor(
        spu, np.stack([_scaled(om, fr, u.comps[a], 0.5, spu) for a in range(4)]), "l", 0, (4,)
    )
    mu = sn.M_Sigma(fr, u)
    muh = sn.M_Sigma(frh, uhat)
    spm = muh.space
    want = np.stack([_scaled(om, fr, mu.comps[a], -2.5, spm) for a in range(4)])
    assert sup_residual(muh.comps, want) < 1e-9 * (1.0 + sup_residual(mu.comps))


def test_detour_covariance_breaks_off_dimension():
    spec = rm.metric_fixture("perturbed-flat", n=5, seed=9, amplitude=0.05)
    om, fr, frh = _hat_pair(spec, P5, 6)
    N = fr.rep.dim
    psi = sn.spinor_fixture(fr, "random-spinor", seed=2)
    u = sn.twistor_T(fr, psi)
    spu = u.space
    uhat = Tensor(
        spu, np.stack([_scaled(om, fr, u.comps[a], 0.5, spu) for a in range(5)]), "l", 0, (N,)
    )
    mu = sn.M_Sigma(fr, u)
    muh = sn.M_Sigma(frh, uhat)
    spm = muh.space
    best = min(
        sup_residual(muh.comps, np.stack([_scaled(om, fr, mu.comps[a], b, spm) for a in range(5)]))
        for b in np.arange(-4.0, 1.01, 0.5)
    )
    assert best / (1.0 + sup_residual(mu.comps)) > 1e-3


# ----------------------------------------------------------------------
# Pairing preservation and chirality.


def test_connection_preserves_pairing(frame4):
    geo = frame4.geo
    sp = geo.space
    N = frame4.rep.dim
    conn2 = sn.spin_tractor_connection(frame4)
    rng = np.random.default_rng(8)
    import detourcheck.yangmills as ym

    def rnd():
        a = ym._random_section(geo, rng, (2 * N,), 0, 2)
        b = ym._random_section(geo, rng, (2 * N,), 0, 2)
        return Tensor(sp, a.comps + 1j * b.comps, "", 0, (2 * N,))

    s1, s2 = rnd(), rnd()
    h = sn.sigma_pairing(frame4.rep, s1, s2)
    ds1, ds2 = conn2.covd(s1), conn2.covd(s2)
    spo = ds1.space
    dh = np.stack([sp.partial_coeffs(h.reshape(1, -1), a)[0] for a in range(4)])
    terms = np.stack(
        [
            sn.sigma_pairing(frame4.rep, Tensor(spo, ds1.comps[a], "", 0, (2 * N,)),
                             Tensor(spo, s2.comps[:, : spo.size], "", 0, (2 * N,)))
            + sn.sigma_pairing(frame4.rep, Tensor(spo, s1.comps[:, : spo.size], "", 0, (2 * N,)),
                               Tensor(spo, ds2.comps[a], "", 0, (2 * N,)))
            for a in range(4)
        ]
    )
    sz = min(dh.shape[-1], terms.shape[-1])
    scale = 1.0 + sup_residual(h)
    assert sup_residual(dh[..., :sz], terms[..., :sz]) < 1e-9 * scale


def test_chirality_bookkeeping(frame4):
    rep = frame4.rep
    phi = sn.spinor_fixture(frame4, "random-spinor", seed=4)
    plus, minus = sn.chirality_split(rep, phi)
    assert sup_residual(plus.comps + minus.comps, phi.comps) < 1e-15
    G = rep.chirality
    for half, sign in [(plus, 1.0), (minus, -1.0)]:
        u = sn.twistor_T(frame4, half)
        gu = np.einsum("st,atS->asS", G, u.comps)
        assert sup_residual(gu, sign * u.comps) < 1e-12
        out = sn.M_Sigma(frame4, u)
        gout = np.einsum("st,atS->asS", G, out.comps)
        assert sup_residual(gout, -sign * out.comps) < 1e-12
        assert sup_residual(out.comps) > 1e-3  # the flipped image is not zero


def test_spin_connection_commutes_with_chirality(frame4):
    G = frame4.rep.chirality
    W = frame4.conn.W
    comm = np.einsum("st,atuS->asuS", G, W) - np.einsum("atsS,su->atuS", W, G)
    assert sup_residual(comm) < 1e-14


# ----------------------------------------------------------------------
# Formal self-adjointness under quadrature.


def test_detour_self_adjoint_quadrature(flat4):
    # Gauss-Legendre over [-1,1]^4 is exact for the polynomial integrands
    # of the flat metric, and the (1-x^2)^2 bumps kill every boundary term
    # of the three integrations by parts.
    # the u side is bump * constants (even), the v side carries a linear
    # factor so the integrand of the odd-order operator is not killed by
    # parity; per-axis degree stays at 9, still exact for NG = 5
    NG, ORD = 5, 4
    rng = np.random.default_rng(9)
    N = 4
    cu = rng.uniform(-1, 1, size=(4, N)) + 1j * rng.uniform(-1, 1, size=(4, N))
    cv = rng.uniform(-1, 1, size=(4, N)) + 1j * rng.uniform(-1, 1, size=(4, N))
    lv = rng.uniform(-1, 1, size=(4, N, 4))
    bump = "*".join(f"(1 - x{m}*x{m})*(1 - x{m}*x{m})" for m in range(4))
    xg, wg = np.polynomial.legendre.leggauss(NG)
    I1 = I2 = 0.0 + 0.0j
    for idx in np.ndindex(NG, NG, NG, NG):
        pt = tuple(xg[k] for k in idx)
        w = np.prod([wg[k] for k in idx])
        geo = rm.GeometryPoint(flat4, pt, ORD)
        fr = sn.spin_connection(geo)
        sp = geo.space
        bj = jc.jet_eval(bump, pt, ORD).coeffs
        xs = np.stack([jc.jet_eval(f"x{m}", pt, ORD).coeffs for m in range(4)])
        bl = fr.beta_lower()

        xb = np.stack([sp.jmul_flat(xs[m], bj) for m in range(4)])

        def mk(co, lin=None):
            vals = np.einsum("as,S->asS", co, bj).astype(complex)
            if lin is not None:
                vals = vals + np.einsum("asm,mS->asS", lin, xb)
            raw = Tensor(sp, vals, "l", 0, (N,))
            tr = sn.beta_trace(fr, raw)
            return Tensor(
                sp, raw.comps + (2.0 / 4) * jtensordot(sp, bl, tr, (2,), (0,)), "l", 0, (N,)
            )

        u, v = mk(cu), mk(cv, lv)
        Mu, Mv = sn.M_Sigma(fr, u), sn.M_Sigma(fr, v)
        spa = Mu.space
        ginv = geo.metric_at(spa.order).ginv
        for a in range(4):
            for b in range(4):
                va = Tensor(spa, v.comps[a, :, : spa.size], "", 0, (N,))
                ub = Tensor(spa, u.comps[b, :, : spa.size], "", 0, (N,))
                I1 += w * ginv[a, b, 0] * sn.spinor_pairing(fr.rep, va, Tensor(spa, Mu.comps[b], "", 0, (N,)))[0]
                I2 += w * ginv[a, b, 0] * sn.spinor_pairing(fr.rep, Tensor(spa, Mv.comps[a], "", 0, (N,)), ub)[0]
    assert abs(I1) > 1e-3
    assert abs(I1 - I2) / abs(I1) < 1e-3
