"""Acceptance suite: one test per headline claim, at its stated tolerance.

Each test aggregates every sub-check of one claim and reports a single
verdict, so ``pytest -v`` on this file reads as the scorecard for the
package.  Tolerances and fixture menus are part of the claims and are
not to be loosened here.
"""

import json

import numpy as np
import pytest

from detourcheck import cli
from detourcheck import riemann as rm
from detourcheck import spin as sn
from detourcheck import symbol as sy
from detourcheck import tractor as tr
from detourcheck import yangmills as ym
from detourcheck import jetcalc as jc
from detourcheck.jetcalc import oracle
from detourcheck.jetcalc.sampling import SamplePlan
from detourcheck.report import sup_residual
from detourcheck.tensor import Tensor, jtensordot

P4 = (0.3, -0.2, 0.1, 0.4)
OMEGA = "0.1*x0 + 0.05*x1*x2"


def points_of(spec, seed=0, count=5):
    return [tuple(p) for p in
            SamplePlan(jc.subseed(seed, "acceptance", spec.name), count,
                       tuple(spec.box), tuple(spec.exclude)).points()]


def rel(lhs, rhs=None):
    if rhs is None:
        return sup_residual(lhs) / (1.0 + sup_residual(lhs))
    scale = 1.0 + max(sup_residual(lhs), sup_residual(rhs))
    return sup_residual(lhs, rhs) / scale


def scaled_jets(om, point, comps, w, sp, lead_axes=1):
    f = om.factor(w, np.asarray(point, float), sp)
    flat = comps.reshape(-1, comps.shape[-1])[..., : sp.size]
    out = np.stack([sp.jmul_flat(f, row) if not np.iscomplexobj(row)
                    else sp.jmul_flat(f, row.real) + 1j * sp.jmul_flat(f, row.imag)
                    for row in flat])
    return out.reshape(comps.shape[:-1] + (sp.size,))


def test_c01_current_identities_for_twenty_connections():
    """M(d Phi) = e(delta F) Phi and delta(M psi) = -i(delta F) psi for 20
    random polynomial connections of rank <= 3 and degree <= 3, including
    non-Yang-Mills ones, across n in {3, 4, 5}; residual < 1e-8."""
    worst = 0.0
    for k in range(20):
        n = (3, 4, 5)[k % 3]
        if k % 5 == 4:
            spec = ym.connection_fixture("abelian-quadratic", n)
        else:
            spec = ym.connection_fixture("random-gl", n, rank=1 + k % 3,
                                         seed=k, degree=1 + k % 3)
        metric = rm.metric_fixture("flat", n)
        point = points_of(metric, seed=k, count=1)[0]
        for r in ym.check_algact(spec, metric, point, order=4, seed=k):
            if r.suite == "algact":
                worst = max(worst, r.residual)
    assert worst < 1e-8


def test_c02_detour_sequence_compositions():
    """On the constant-curvature abelian fixture and the instanton, all
    three compositions of the twisted sequence vanish (< 1e-8); on the
    quadratic abelian fixture the composition reproduces the nonzero
    current action rather than merely failing."""
    metric = rm.metric_fixture("flat", 4)
    worst = 0.0
    for name in ("abelian-linear", "bpst"):
        spec = ym.connection_fixture(name, 4)
        for point in points_of(metric, seed=11, count=5):
            geo = metric.geometry(point, 5)
            conn = ym.PointConnection.from_spec(spec, geo)
            k = spec.rank
            rng = np.random.default_rng(jc.subseed(3, "detseq", name))
            Phi = ym._random_section(geo, rng, (k,), rank=0, degree=3)
            Phi = Tensor(Phi.space, Phi.comps.astype(complex), "", 0, (k,))
            psi = ym._random_section(geo, rng, (k,), rank=1, degree=3)
            psi = Tensor(psi.space, psi.comps.astype(complex), "l", 0, (k,))
            dPhi = ym.coupled_d(conn, Phi)
            MdPhi = ym.M_D(conn, dPhi)
            Mpsi = ym.M_D(conn, psi)
            worst = max(
                worst,
                sup_residual(MdPhi.comps) / (1.0 + sup_residual(dPhi.comps)),
                sup_residual(ym.coupled_delta(conn, Mpsi).comps)
                / (1.0 + sup_residual(Mpsi.comps)),
                sup_residual(ym.coupled_delta(conn, MdPhi).comps)
                / (1.0 + sup_residual(dPhi.comps)),
            )
    assert worst < 1e-8

    spec = ym.connection_fixture("abelian-quadratic", 4)
    point = points_of(metric, seed=12, count=1)[0]
    geo = metric.geometry(point, 4)
    conn = ym.PointConnection.from_spec(spec, geo)
    assert sup_residual(ym.ym_current(conn).comps) > 1e-2
    results = ym.check_algact(spec, metric, point, order=4, seed=1)
    assert all(r.residual < 1e-8 for r in results if r.suite == "algact")


def test_c03_current_variation_matches_finite_differences():
    """Central differences (step 1e-4) of the current under 10 random
    connection variations, and under gauge-orbit variations, match the
    detour operator's prediction within 1e-6."""
    metric = rm.metric_fixture("flat", 4)
    worst = 0.0
    for s in range(10):
        spec = ym.connection_fixture("random-su2", 4, seed=s)
        point = points_of(metric, seed=100 + s, count=1)[0]
        for r in ym.variational_checks(spec, metric, point, order=4, seed=s):
            assert r.tolerance <= 1e-6
            worst = max(worst, r.residual)
    assert worst < 1e-6


def test_c04_curvature_on_reference_metrics():
    """Unit round sphere in n=4: J = 2, Schouten = g/2, Weyl = Cotton =
    Bach = 0 (< 1e-9).  Schwarzschild: Ricci = 0, Weyl nonzero, Bach = 0
    (< 1e-7).  Differential Bianchi identity < 1e-9 on every fixture."""
    sphere = rm.metric_fixture("sphere", 4)
    for point in points_of(sphere, seed=4, count=5):
        geo = sphere.geometry(point, 5)
        sp = geo.space_at(geo.order - 2)
        two = np.zeros(sp.size)
        two[0] = 2.0
        assert sup_residual(geo.jay[: sp.size], two) < 1e-9
        assert rel(geo.schouten, geo.metric.g[..., : sp.size] / 2.0) < 1e-9
        assert sup_residual(geo.weyl) < 1e-9
        assert sup_residual(geo.cotton) < 1e-9
        assert sup_residual(geo.bach) < 1e-9

    schw = rm.metric_fixture("schwarzschild", mass=1.0)
    for point in points_of(schw, seed=5, count=5):
        geo = schw.geometry(point, 6)
        assert rel(geo.ric) < 1e-7
        assert sup_residual(geo.weyl) > 1e-3
        assert rel(geo.bach) < 1e-7

    fixtures = [rm.metric_fixture("flat", 4), sphere,
                rm.metric_fixture("hyperbolic", 4), schw,
                rm.metric_fixture("perturbed-flat", 4, seed=3, amplitude=0.08)]
    for spec in fixtures:
        for point in points_of(spec, seed=6, count=5):
            geo = spec.geometry(point, 4)
            dR = rm.covd(geo, geo.riemann_tensor).comps
            cyc = (dR + np.transpose(dR, (1, 2, 0, 3, 4, 5))
                   + np.transpose(dR, (2, 0, 1, 3, 4, 5)))
            assert sup_residual(cyc) / (1.0 + sup_residual(dR)) < 1e-9, spec.name


def test_c05_conformal_covariance():
    """Under g -> e^{2 omega} g: the (1,3) Weyl tensor is invariant for
    n in {3,4,5} (< 1e-9); in n=4 the Bach tensor rescales by e^{-2
    omega} (< 1e-8); the tractor and spin-tractor splittings satisfy
    their two-path laws (< 1e-9); and the three detour operators are
    conformally covariant in dimension 4 (< 1e-8)."""
    om = rm.RescaleSpec(OMEGA)
    for n in (3, 4, 5):
        spec = rm.metric_fixture("perturbed-flat", n, seed=3, amplitude=0.08)
        hspec = rm.rescale_metric(spec, om)
        for point in points_of(spec, seed=7, count=5):
            geo = spec.geometry(point, 4)
            hat = hspec.geometry(point, 4)
            sp = geo.space_at(geo.order - 2)
            cmix = jtensordot(sp, geo.metric.ginv[..., : sp.size], geo.weyl,
                              (1,), (0,))
            cmixh = jtensordot(sp, hat.metric.ginv[..., : sp.size], hat.weyl,
                               (1,), (0,))
            assert rel(cmix, cmixh) < 1e-9
            if n == 4:
                want = scaled_jets(om, point, geo.bach, -2.0, sp)
                assert rel(hat.bach, want) < 1e-8

    spec = rm.metric_fixture("perturbed-flat", 4, seed=3, amplitude=0.08)
    point = points_of(spec, seed=8, count=1)[0]
    results = tr.transf_equivariance(spec, om, point, order=5, seed=1)
    assert all(r.passed for r in results)
    four = [r for r in results if r.name == "detour-covariance-in-four"]
    assert four and all(r.residual < 1e-8 for r in four)

    # spin-tractor splitting two-path law and twisted-Maxwell covariance
    geo = rm.GeometryPoint(spec, point, 5)
    geoh = rm.GeometryPoint(rm.rescale_metric(spec, om), point, 5)
    fr = sn.spin_connection(geo)
    frh = sn.spin_connection(geoh, fr.rep)
    N = fr.rep.dim
    sp = fr.geo.space
    psi = sn.spinor_fixture(fr, "random-spinor", seed=2)
    psih = Tensor(sp, scaled_jets(om, point, psi.comps, 0.5, sp), "", 0, (N,))
    lh = sn.L0(frh, psih)
    l0 = sn.L0(fr, psi)
    spo = lh.space
    ups = om.upsilon_at(point, spo)
    ubu = jtensordot(spo, ups, fr.beta_upper(spo.order), (0,), (0,))
    shift = jtensordot(spo, ubu, psi.comps[:, : spo.size], (1,), (0,))
    want_top = scaled_jets(om, point, psi.comps, 0.5, spo)
    want_bot = scaled_jets(om, point, l0.comps[N:] + shift, -0.5, spo)
    scale = 1.0 + sup_residual(l0.comps)
    assert sup_residual(lh.comps[:N], want_top) / scale < 1e-9
    assert sup_residual(lh.comps[N:], want_bot) / scale < 1e-9

    conn = ym.PointConnection.from_spec(
        ym.connection_fixture("random-su2", 4, seed=2), geo)
    connh = ym.PointConnection.from_spec(
        ym.connection_fixture("random-su2", 4, seed=2), geoh)
    rng = np.random.default_rng(jc.subseed(5, "mdconf"))
    phi = ym._random_section(geo, rng, (2,), rank=1, degree=3)
    phi = Tensor(phi.space, phi.comps.astype(complex), "l", 0, (2,))
    lhs = ym.M_D(connh, phi)
    base = ym.M_D(conn, phi)
    spm = lhs.space
    want = scaled_jets(om, point, base.comps, -2.0, spm)
    assert rel(lhs.comps, want) < 1e-8

    geo6 = rm.GeometryPoint(spec, point, 6)
    geoh6 = rm.GeometryPoint(rm.rescale_metric(spec, om), point, 6)
    fr6 = sn.spin_connection(geo6)
    frh6 = sn.spin_connection(geoh6, fr6.rep)
    psi6 = sn.spinor_fixture(fr6, "random-spinor", seed=2)
    u = sn.twistor_T(fr6, psi6)
    spu = u.space
    uhat = Tensor(spu, scaled_jets(om, point, u.comps, 0.5, spu), "l", 0.5, (N,))
    mu = sn.M_Sigma(fr6, u)
    muh = sn.M_Sigma(frh6, uhat)
    spm = muh.space
    want = scaled_jets(om, point, mu.comps, -2.5, spm)
    assert rel(muh.comps, want) < 1e-8


def test_c06_tractor_calculus_identities():
    """Tractor metric parallel and lift/connection identities < 1e-9;
    curvature block display < 1e-9; divergence display in n in {4, 5}
    including the (n-4) middle factor < 1e-8; the detour-of-Einstein
    identity < 1e-7; the detour operator agrees with its translated
    composition < 1e-8; Bach vanishes on Einstein fixtures < 1e-9."""
    for n in (4, 5):
        spec = rm.metric_fixture("perturbed-flat", n, seed=3, amplitude=0.08)
        for i, point in enumerate(points_of(spec, seed=9, count=5)):
            rs = tr.check_trmetric_parallel(spec, point, order=4)
            rs += tr.check_curvature_blocks(spec, point, order=4)
            assert all(r.tolerance <= 1e-9 and r.passed for r in rs)
            rs = tr.check_eincomm(spec, point, order=5, seed=i)
            assert all(r.tolerance <= 1e-9 and r.passed for r in rs)
            rs = tr.check_divtr(spec, point, order=4)
            assert all(r.residual < 1e-8 and r.passed for r in rs)
            if n == 5:
                assert {r.info["middle-factor"] for r in rs
                        if "middle-factor" in r.info} == {1}
            rs = tr.check_MP(spec, point, order=6, seed=i)
            assert all(r.residual < 1e-7 or r.name == "complex-iff-bach-flat"
                       for r in rs)
            assert all(r.passed for r in rs)
            rs = tr.check_MT_composition(spec, point, order=5, seed=i)
            assert all(r.residual < 1e-8 and r.passed for r in rs)

    for name in ("flat", "sphere", "hyperbolic"):
        spec = rm.metric_fixture(name, 4)
        for point in points_of(spec, seed=10, count=5):
            geo = spec.geometry(point, 4)
            assert rel(geo.bach) < 1e-9, name


def test_c07_half_flat_factorization_and_its_failure():
    """On the instanton the detour operator equals twice the matching
    half-complex composition (< 1e-8); on a mixed-duality connection the
    projected complexes fail in both duality directions."""
    metric = rm.metric_fixture("flat", 4)
    spec = ym.connection_fixture("bpst", 4, scale=1.2)
    for i, point in enumerate(points_of(metric, seed=13, count=5)):
        rs = ym.check_half_flat_complexes(spec, metric, point, order=4, seed=i)
        assert all(r.passed for r in rs)
        fact = [r for r in rs if r.name == "projected-factorization"]
        assert fact and all(r.residual < 1e-8 for r in fact)

    mixed = ym.connection_fixture("random-su2", 4, seed=5)
    point = points_of(metric, seed=14, count=1)[0]
    geo = metric.geometry(point, 4)
    conn = ym.PointConnection.from_spec(mixed, geo)
    rng = np.random.default_rng(jc.subseed(6, "mixed"))
    phi = ym._random_section(geo, rng, (2,), rank=0, degree=2)
    phi = Tensor(phi.space, phi.comps.astype(complex), "", 0, (2,))
    ddphi = ym.coupled_d(conn, ym.coupled_d(conn, phi))
    scale = 1.0 + sup_residual(phi.comps)
    for sign in (+1, -1):
        proj = ym.sd_project(geo, ddphi, sign)
        assert sup_residual(proj.comps) / scale > 1e-3


def test_c08_spinor_identities_and_twistor_fixtures():
    """Clifford relations hold bit-exactly; the spinor curvature, key
    commutator, Lichnerowicz and splitting identities hold < 1e-8 on
    flat, the sphere, and ten perturbed metrics; the linear twistor
    fixture is annihilated by T (< 1e-10) and its lift is parallel
    (< 1e-9)."""
    for p, q in [(4, 0), (3, 1), (5, 0)]:
        rep = sn.clifford_build(p, q)
        eta = rep.eta
        for i in range(rep.n):
            for j in range(rep.n):
                anti = rep.bb(i, j) + rep.bb(j, i)
                want = -eta[i, j] * np.eye(rep.dim)
                assert np.array_equal(anti, want)

    menus = [(rm.metric_fixture("flat", 4), 5, 0),
             (rm.metric_fixture("sphere", 4), 5, 0)]
    menus += [(rm.metric_fixture("perturbed-flat", 4, seed=s, amplitude=0.05),
               4, s) for s in range(10)]
    worst = 0.0
    for spec, order, seed in menus:
        point = points_of(spec, seed=20 + seed, count=1)[0]
        rs = sn.check_spincomm(spec, point, order=order, seed=seed)
        assert all(r.passed for r in rs)
        worst = max(worst, max(r.residual for r in rs))
    assert worst < 1e-8

    geo = rm.metric_fixture("flat", 4).geometry(P4, 5)
    fr = sn.spin_connection(geo)
    psi = sn.spinor_fixture(fr, "linear-twistor", slot=1)
    assert sup_residual(sn.twistor_T(fr, psi).comps) < 1e-10
    conn2 = sn.spin_tractor_connection(fr)
    lift = sn.L0(fr, psi)
    par = conn2.covd(Tensor(lift.space, lift.comps, "", 0, (8,)))
    assert sup_residual(par.comps) < 1e-9


def test_c09_bach_clifford_constant():
    """The twistor detour of a twistor-operator image vanishes on flat
    space and Schwarzschild (< 1e-7); on perturbed metrics a single
    fitted constant reproduces the Bach action at ten points (fit
    residual < 1e-8, point-to-point consistency 1e-6), and the constant
    itself is pinned as a regression value."""
    for name, params in [("flat", {}), ("schwarzschild", {"mass": 1.0})]:
        spec = rm.metric_fixture(name, 4, **params)
        point = points_of(spec, seed=30, count=1)[0]
        geo = spec.geometry(point, 6)
        fr = sn.spin_connection(geo)
        phi = sn.spinor_fixture(fr, "random-spinor", seed=1)
        tphi = sn.twistor_T(fr, phi)
        out = sn.M_Sigma(fr, tphi)
        assert sup_residual(out.comps) / (1.0 + sup_residual(tphi.comps)) < 1e-7

    spec = rm.metric_fixture("perturbed-flat", 4, seed=3, amplitude=0.08)
    pts = points_of(spec, seed=31, count=10)
    rs = sn.check_bach_clifford(spec, pts, order=6, seed=2)
    assert len(rs) == 10
    assert max(r.residual for r in rs) < 1e-8
    c_joint = complex(*rs[0].info["constant"])
    per_point = [complex(*sn.check_bach_clifford(spec, p, order=6, seed=2)[0]
                         .info["constant"]) for p in pts[:10]]
    spread = max(abs(c - c_joint) for c in per_point)
    assert spread < 1e-6 * abs(c_joint)
    assert abs(c_joint - (-1.0)) < 1e-6  # regression: the measured constant


def test_c10_leading_symbol_exactness():
    """Symbol ranks: Maxwell (1, n-1, 1) for n in {3,4,5}; trace-free
    sequence (1, 8, 1) on fibres (1, 9, 9, 1) and twistor sequence
    (4, 8, 4) on fibres (4, 12, 12, 4) in n=4.  Consecutive symbols
    compose to zero < 1e-10; homogeneity and the plane-wave operator
    oracle agree < 1e-8."""
    xi = np.array([0.7, -0.3, 0.2, 0.5])
    for n in (3, 4, 5):
        spec = rm.metric_fixture("flat", n)
        geo = spec.geometry(points_of(spec, seed=40, count=1)[0], 4)
        rs = sy.exactness_check("maxwell", geo, xi[:n])
        assert all(r.passed for r in rs)
        ranks = [r.info["ranks"] for r in rs if "ranks" in r.info]
        assert ranks == [[1, n - 1], [n - 1, 1]]

    spec = rm.metric_fixture("perturbed-flat", 4, seed=3, amplitude=0.08)
    for point in points_of(spec, seed=41, count=5):
        geo = spec.geometry(point, 4)
        for seq, table in [("einstein", [[1, 8], [8, 1]]),
                           ("twistor", [[4, 8], [8, 4]])]:
            rs = sy.exactness_check(seq, geo, xi)
            comp = [r.residual for r in rs if "composition" in r.name]
            assert max(comp) < 1e-10
            ranks = [r.info["ranks"] for r in rs if "ranks" in r.info]
            assert ranks == table, (seq, ranks)

    geo = spec.geometry(P4, 4)
    for op in ("deltad", "P", "MT", "T", "MSigma"):
        s1 = sy.symbol_of(op, geo, xi)
        s2 = sy.symbol_of(op, geo, 2.0 * xi)
        assert np.abs(s2.matrix - 2.0 ** s1.order * s1.matrix).max() < 1e-8

    gval = geo.metric.g[..., 0]
    basis = sy._tfs_basis(gval, geo.metric.ginv[..., 0])

    def apply_MT(w, s):
        comps = s.reshape(4, 4)[..., None] * w
        from detourcheck.tensor import tfs
        f = tfs(Tensor(geo.space, comps, "ll", 1, ()), geo.metric)
        return basis.conj().T @ tr.M_T(geo, f).comps[..., 0].reshape(16)

    secs = [basis[:, k] for k in range(basis.shape[1])]
    orac = sy.symbol_from_operator(apply_MT, secs, geo, xi, 2)
    assert np.abs(orac - sy.symbol_of("MT", geo, xi).matrix).max() < 1e-8


def test_c11_infrastructure(tmp_path):
    """Jet coefficients agree with a finite-difference oracle; manifest
    runs are deterministic modulo timing; the exit-code contract holds,
    exercised through an expected-fail manifest."""
    e = "sin(x0)*exp(x1) + x0^2*x1"
    point = np.array([0.3, -0.2])
    jet = jc.jet_eval(e, tuple(point), 3)
    sp = jet.space
    for alpha in [(1, 0), (0, 2), (2, 1)]:
        fd = oracle.fd_coefficient(e, point, alpha)
        assert abs(fd - jet.coeffs[sp.index[alpha]]) < 1e-6

    man = {
        "geometry": {"fixture": "flat", "n": 4},
        "connection": {"fixture": "abelian-quadratic"},
        "suites": ["prop-agree"],
        "samples": {"count": 2},
    }
    path = tmp_path / "m.json"
    path.write_text(json.dumps(man))
    a = cli.run(cli.load_manifest(str(path))).to_dict()
    b = cli.run(cli.load_manifest(str(path))).to_dict()
    a.pop("wall_time")
    b.pop("wall_time")
    assert a == b

    report = tmp_path / "r.json"
    assert cli.main(["check", str(path), "--report", str(report)]) == 1
    man["expected_fail"] = ["prop-agree:curvature-in-one-half",
                            "prop-agree:projected-*"]
    path.write_text(json.dumps(man))
    assert cli.main(["check", str(path), "--report", str(report)]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text('{"geometry": ')
    assert cli.main(["check", str(bad)]) == 2
