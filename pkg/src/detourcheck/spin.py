"""Spinor calculus in an orthonormal frame gauge: Clifford algebras, the
spin connection, the Dirac and twistor operators, splitting operators into
the spin-tractor bundle, and the third-order detour operator between
twistor fields, with identity checks for all of them.

Spinors have no coordinate components, so everything here is written in a
frame gauge: an orthonormal frame built from the coordinate basis by
jet-valued Gram-Schmidt, reordered so the spacelike legs come first.  The
Clifford generators are fixed constant matrices; only the frame and the
connection coefficients carry jets.

Conventions, pinned once and tested:

* ``eta = diag(+1 x p, -1 x q)``; Clifford relation ``b^i b^j + b^j b^i =
  -eta^{ij} Id`` with ``b = gamma / sqrt(2)``.  The gamma matrices are
  stored exactly (entries in ``{0, +-1, +-i}``) so the relation holds to
  the last bit; the factor ``1/sqrt(2)`` enters only through ``betas``.
* Spin connection ``W_a = -(1/4) omega_{aij} gamma^i gamma^j`` with
  ``omega_a{}^i{}_j = e^i(grad_a E_j)``; this is the sign that makes
  Clifford multiplication parallel (the Leibniz rule for ``b(X) psi``
  closes) and reproduces ``[grad_a, grad_b] psi = -(1/2) R_abcd b^c b^d
  psi`` with the curvature convention of the geometry module.
* Pairing matrix ``A``: identity when ``q = 0``, otherwise the product of
  the timelike gammas with a phase making ``A`` Hermitian.  The
  compatibility sign ``s`` in ``<b chi, rho> = s <chi, b rho>`` is then
  determined, not chosen: ``s = -1`` for definite signature and ``s = +1``
  for ``q = 1``.  The Dirac operator is ``(-s)``-self-adjoint.
"""

from __future__ import annotations

import numpy as np

from . import jetcalc as jc
from . import riemann as rm
from .report import CheckResult, sup_residual
from .tensor import Tensor, jtensordot
from .yangmills import M_D, PointConnection, _random_section, curvature_F

__all__ = [
    "CliffordRep",
    "L0",
    "L1",
    "M_Sigma",
    "SpinFrame",
    "adjoint_L1",
    "adjoint_Tstar",
    "beta_trace",
    "check_bach_clifford",
    "check_spincomm",
    "chirality_split",
    "clifford_build",
    "dirac",
    "sigma_pairing",
    "spin_connection",
    "spin_tractor_connection",
    "spinor_fixture",
    "spinor_pairing",
    "twistor_T",
]

_SQRT_HALF = np.sqrt(0.5)

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def _kron_chain(mats):
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def _hermitian_generators(n):
    """n anticommuting Hermitian matrices squaring to +Id, size 2^floor(n/2).

    Iterated Pauli products: the k-th pair is ``sigma3^k (x) sigma1 (x) 1...``
    and ``sigma3^k (x) sigma2 (x) 1...``; odd n appends ``sigma3^m``.
    """
    m = n // 2
    gens = []
    for k in range(m):
        for s in (_PAULI[0], _PAULI[1]):
            gens.append(_kron_chain([_PAULI[2]] * k + [s] + [np.eye(2)] * (m - k - 1)))
    if n % 2:
        gens.append(_kron_chain([_PAULI[2]] * m))
    return gens[:n]


class CliffordRep:
    """Constant Clifford matrices for signature ``(p, q)``.

    ``gamma[i]`` is stored exactly; spacelike generators are ``i`` times a
    Hermitian square root of ``Id``, timelike ones are Hermitian, so that
    ``(gamma^i)^2 = -eta^{ii} Id`` holds bit for bit.  ``betas`` carries
    the single inexact factor ``1/sqrt(2)``.
    """

    def __init__(self, p, q):
        n = p + q
        if n < 1 or n > 6:
            raise ValueError("supported signatures have 1 <= p + q <= 6")
        self.p, self.q, self.n = p, q, n
        self.eta = np.array([1.0] * p + [-1.0] * q)
        herm = _hermitian_generators(n)
        self.gamma = np.stack(
            [1j * h if self.eta[i] > 0 else h for i, h in enumerate(herm)]
        )
        self.dim = self.gamma.shape[-1]
        self.pairing, self.clifford_sign = self._build_pairing()
        self.chirality = self._build_chirality() if n % 2 == 0 else None

    # ------------------------------------------------------------------
    def _build_pairing(self):
        if self.q == 0:
            A = np.eye(self.dim, dtype=complex)
        else:
            A = _kron_chain([np.eye(self.dim)])
            for i in range(self.p, self.n):
                A = A @ self.gamma[i]
            A = A * (1j ** (self.q * (self.q - 1) // 2))
            if not np.array_equal(A.conj().T, A):
                A = 1j * A
        signs = set()
        Ainv = np.linalg.inv(A)
        for i in range(self.n):
            t = A @ self.gamma[i] @ Ainv
            td = self.gamma[i].conj().T
            if np.array_equal(t, td):
                signs.add(1)
            elif np.array_equal(t, -td):
                signs.add(-1)
            else:
                signs.add(0)
        if len(signs) != 1 or 0 in signs:
            raise ValueError("no uniform Clifford compatibility sign")
        return A, signs.pop()

    def _build_chirality(self):
        vol = _kron_chain([np.eye(self.dim)])
        for g in self.gamma:
            vol = vol @ g
        if np.array_equal(vol @ vol, -np.eye(self.dim, dtype=complex)):
            vol = 1j * vol
        return vol

    # ------------------------------------------------------------------
    @property
    def betas(self):
        """The symbols ``b^i = gamma^i / sqrt(2)``."""
        return self.gamma * _SQRT_HALF

    def bb(self, i, j):
        """The exact product ``b^i b^j = gamma^i gamma^j / 2``."""
        return 0.5 * (self.gamma[i] @ self.gamma[j])

    def __repr__(self):
        return f"CliffordRep(p={self.p}, q={self.q}, dim={self.dim})"


def clifford_build(p, q):
    """Clifford matrices, pairing and chirality for signature ``(p, q)``."""
    return CliffordRep(p, q)


# ----------------------------------------------------------------------
# Orthonormal frame and spin connection.


class SpinFrame:
    """Orthonormal frame gauge at a geometry point.

    ``frame[i, mu]`` are the jets of ``E_i^mu`` (Gram-Schmidt applied to
    the coordinate basis, spacelike legs first), ``coframe[i, mu]`` the
    jets of ``e^i_mu``, and ``conn`` the induced spin connection acting on
    frame-gauge spinor components.
    """

    def __init__(self, geo: rm.GeometryPoint, rep: CliffordRep | None = None):
        self.geo = geo
        n = geo.n
        sp = geo.space
        m = geo.metric_at(sp.order)
        raw, sgns = self._gram_schmidt(sp, m.g, n)
        order = [i for i in range(n) if sgns[i] > 0] + [
            i for i in range(n) if sgns[i] < 0
        ]
        p = sum(1 for s in sgns if s > 0)
        q = n - p
        if rep is None:
            rep = clifford_build(p, q)
        elif (rep.p, rep.q) != (p, q):
            raise ValueError(
                f"representation signature {(rep.p, rep.q)} does not match "
                f"the metric signature {(p, q)}"
            )
        self.rep = rep
        self.frame = np.stack([raw[i] for i in order])
        self._check_orthonormal(sp, m.g)
        # e^i_mu = eta^{ii} g_{mu nu} E_i^nu
        low = jtensordot(sp, m.g, self.frame, (1,), (1,))  # [mu, i, S]
        self.coframe = np.transpose(low, (1, 0, 2)) * rep.eta[:, None, None]
        self.omega = self._connection_coefficients()
        self.conn = self._spin_connection()

    # ------------------------------------------------------------------
    @staticmethod
    def _gram_schmidt(sp, g, n):
        def ip(a, b):
            tot = np.zeros(sp.size)
            for mu in range(n):
                row = sp.jmul_flat(a[mu], g[mu, 0] * 0.0)
                for nu in range(n):
                    row = row + sp.jmul_flat(g[mu, nu], b[nu])
                tot = tot + sp.jmul_flat(a[mu], row)
            return tot

        raw, sgns = [], []
        for i in range(n):
            v = np.zeros((n, sp.size))
            v[i, 0] = 1.0
            for u, sg in zip(raw, sgns):
                c = ip(v, u)
                v = v - sg * np.stack([sp.jmul_flat(c, u[mu]) for mu in range(n)])
            nn = ip(v, v)
            if abs(nn[0]) < 1e-12:
                raise ValueError("frame construction failed: degenerate metric")
            sg = 1.0 if nn[0] > 0 else -1.0
            inv = jc.jsqrt(jc.Jet(sp, (0.0,) * n, sg * nn)).reciprocal().coeffs
            raw.append(np.stack([sp.jmul_flat(inv, v[mu]) for mu in range(n)]))
            sgns.append(sg)
        return raw, sgns

    def _check_orthonormal(self, sp, g):
        low = jtensordot(sp, g, self.frame, (1,), (1,))  # [mu, j, S]
        gram = jtensordot(sp, self.frame, low, (1,), (0,))  # [i, j, S]
        want = np.zeros_like(gram)
        for i in range(self.geo.n):
            want[i, i, 0] = self.rep.eta[i]
        if sup_residual(gram, want) > 1e-10:
            raise ValueError("frame construction failed: orthonormality lost")

    def _connection_coefficients(self):
        """omega[a, i, j] = e^i_mu (grad_a E_j)^mu, all frame labels down."""
        geo = self.geo
        ef = Tensor(
            geo.space,
            np.transpose(self.frame, (1, 0, 2)),
            "u",
            0,
            (geo.n,),
        )
        dE = rm.covd(geo, ef)  # [a, mu, j, S]
        sp = dE.space
        cf = self.coframe[..., : sp.size]
        om = jtensordot(sp, cf, dE.comps, (1,), (1,))  # [i, a, j, S]
        om = np.moveaxis(om, 0, 1)
        return om * self.rep.eta[None, :, None, None]

    def _spin_connection(self):
        geo = self.geo
        sp = geo.space_at(geo.space.order - 1)
        bbmat = np.zeros((geo.n, geo.n, self.rep.dim, self.rep.dim), dtype=complex)
        for i in range(geo.n):
            for j in range(geo.n):
                bbmat[i, j] = self.rep.bb(i, j)
        W = -0.5 * np.einsum("aijS,ijst->astS", self.omega, bbmat)
        return PointConnection(geo, W, "vector", order=sp.order)

    # ------------------------------------------------------------------
    def beta_lower(self, order=None):
        """Coordinate symbols ``b_mu = e^i_mu eta_ii b^i`` as jet matrices."""
        sp = self.geo.space if order is None else self.geo.space_at(order)
        cf = self.coframe[..., : sp.size] * self.rep.eta[:, None, None]
        return np.einsum("imS,ist->mstS", cf, self.rep.betas)

    def beta_upper(self, order=None):
        """Coordinate symbols ``b^mu = E_i^mu b^i`` as jet matrices."""
        sp = self.geo.space if order is None else self.geo.space_at(order)
        fr = self.frame[..., : sp.size]
        return np.einsum("imS,ist->mstS", fr, self.rep.betas)

    def __repr__(self):
        return f"SpinFrame(n={self.geo.n}, rep={self.rep!r})"


def spin_connection(geo: rm.GeometryPoint, rep: CliffordRep | None = None) -> SpinFrame:
    """Orthonormal frame plus the induced spin connection at a point."""
    return SpinFrame(geo, rep)


# ----------------------------------------------------------------------
# First-order operators.


def _covd(frame: SpinFrame, t: Tensor) -> Tensor:
    return frame.conn.covd(t)


def dirac(frame: SpinFrame, psi: Tensor) -> Tensor:
    """Dirac operator ``b^a grad_a`` on spinor fields of any form rank."""
    d = _covd(frame, psi)
    sp = d.space
    bu = frame.beta_upper(sp.order)
    out = jtensordot(sp, bu, d.comps, (0, 2), (0, 1 + psi.rank))  # [s, rest...]
    out = np.moveaxis(out, 0, psi.rank)
    return Tensor(sp, out, psi.indices, psi.weight - 1, psi.fdims)


def beta_trace(frame: SpinFrame, u: Tensor) -> np.ndarray:
    """``b^a u_a`` of a spinor-valued 1-form, as spinor jets."""
    if u.rank != 1:
        raise ValueError("beta_trace needs a spinor-valued 1-form")
    sp = u.space
    bu = frame.beta_upper(sp.order)
    return jtensordot(sp, bu, u.comps, (0, 2), (0, 1))


def _require_twistor(frame: SpinFrame, u: Tensor, what="input"):
    tr = beta_trace(frame, u)
    if sup_residual(tr) > 1e-10 * (1.0 + sup_residual(u.comps)):
        raise ValueError(f"{what} must be a twistor field (b-trace-free)")


def twistor_T(frame: SpinFrame, psi: Tensor) -> Tensor:
    """Twistor operator ``grad_a psi + (2/n) b_a D psi`` (trace-free gradient)."""
    n = frame.geo.n
    d = _covd(frame, psi)
    sp = d.space
    Dp = dirac(frame, psi)
    bl = frame.beta_lower(sp.order)
    act = jtensordot(sp, bl, Dp.comps, (2,), (0,))  # [a, s, S]
    return Tensor(sp, d.comps + (2.0 / n) * act, "l", psi.weight, psi.fdims)


def adjoint_Tstar(frame: SpinFrame, u: Tensor) -> Tensor:
    """Formal adjoint of the twistor operator: ``u_a -> -grad^a u_a``."""
    if u.rank != 1:
        raise ValueError("the adjoint acts on spinor-valued 1-forms")
    d = _covd(frame, u)
    sp = d.space
    ginv = frame.geo.metric_at(sp.order).ginv
    out = jtensordot(sp, ginv, d.comps, (0, 1), (0, 1))
    return Tensor(sp, -out, "", u.weight - 2, u.fdims)


# ----------------------------------------------------------------------
# Splitting operators and the spin-tractor connection.


def L0(frame: SpinFrame, psi: Tensor) -> Tensor:
    """Splitting ``psi -> (psi, (2/n) D psi)`` into the spin-tractor bundle."""
    n = frame.geo.n
    Dp = dirac(frame, psi)
    sp = Dp.space
    N = frame.rep.dim
    out = np.zeros((2 * N, sp.size), dtype=complex)
    out[:N] = psi.comps[..., : sp.size]
    out[N:] = (2.0 / n) * Dp.comps
    return Tensor(sp, out, "", psi.weight, (2 * N,))


def L1(frame: SpinFrame, u: Tensor) -> Tensor:
    """Splitting of twistor fields into spin-tractor valued 1-forms:
    ``u_a -> (u_a, (2/(n-2)) (D u_a - (n-1)^{-1} b_a grad^b u_b))``."""
    _require_twistor(frame, u, "the splitting input")
    geo = frame.geo
    n = geo.n
    Du = dirac(frame, u)
    sp = Du.space
    d = _covd(frame, u)
    ginv = geo.metric_at(sp.order).ginv
    div = jtensordot(sp, ginv, d.comps, (0, 1), (0, 1))  # [s, S]
    bl = frame.beta_lower(sp.order)
    bdiv = jtensordot(sp, bl, div, (2,), (0,))  # [a, s, S]
    N = frame.rep.dim
    out = np.zeros((n, 2 * N, sp.size), dtype=complex)
    out[:, :N] = u.comps[..., : sp.size]
    out[:, N:] = (2.0 / (n - 2.0)) * (Du.comps - bdiv / (n - 1.0))
    return Tensor(sp, out, "l", u.weight, (2 * N,))


def spin_tractor_connection(frame: SpinFrame) -> PointConnection:
    """The connection ``grad_a (psi, phi) = (grad_a psi + b_a phi,
    grad_a phi + P_ab b^b psi)`` on pairs of spinors."""
    geo = frame.geo
    sp = geo.space_at(geo.space.order - 2)
    N = frame.rep.dim
    n = geo.n
    Wspin = frame.conn.W[..., : sp.size]
    bl = frame.beta_lower(sp.order)
    bu = frame.beta_upper(sp.order)
    Pb = jtensordot(sp, geo.schouten[..., : sp.size], bu, (1,), (0,))  # [a, s, t, S]
    W = np.zeros((n, 2 * N, 2 * N, sp.size), dtype=complex)
    W[:, :N, :N] = Wspin
    W[:, N:, N:] = Wspin
    W[:, :N, N:] = bl
    W[:, N:, :N] = Pb
    return PointConnection(geo, W, "vector", order=sp.order)


def adjoint_L1(frame: SpinFrame, nu: Tensor) -> Tensor:
    """Pairing-adjoint of the splitting ``L1``, projected to twistor fields.

    For a spin-tractor valued 1-form ``nu = (nu_top, nu_bot)`` this is
    ``pi(nu_bot_a + (2/(n-2)) s (-D nu_top_a
    + (n-1)^{-1} grad_a(b^b nu_top_b)))`` where ``s`` is the Clifford
    compatibility sign and ``pi`` removes the ``b``-trace.
    """
    if nu.rank != 1:
        raise ValueError("the adjoint splitting acts on 1-forms")
    geo = frame.geo
    n = geo.n
    N = frame.rep.dim
    s = float(frame.rep.clifford_sign)
    top = Tensor(nu.space, nu.comps[:, :N], "l", nu.weight, (N,))
    Dtop = dirac(frame, top)
    sp = Dtop.space
    btr = beta_trace(frame, top)  # [s, S] at the order of nu
    dbtr = _covd(frame, Tensor(nu.space, btr, "", nu.weight, (N,)))
    dbtr = dbtr.comps[..., : sp.size]
    body = nu.comps[:, N:, : sp.size] + (2.0 / (n - 2.0)) * s * (
        -Dtop.comps + dbtr / (n - 1.0)
    )
    cand = Tensor(sp, body, "l", nu.weight, (N,))
    # twistor projection pi(chi)_a = chi_a + (2/n) b_a b^b chi_b
    tr = beta_trace(frame, cand)
    bl = frame.beta_lower(sp.order)
    btrterm = jtensordot(sp, bl, tr, (2,), (0,))
    return Tensor(sp, cand.comps + (2.0 / n) * btrterm, "l", nu.weight, (N,))


def M_Sigma(frame: SpinFrame, u: Tensor) -> Tensor:
    """Third-order detour operator on twistor fields, by the composition
    ``adjoint splitting  o  twisted detour  o  splitting`` through the
    spin-tractor bundle."""
    conn2 = spin_tractor_connection(frame)
    lifted = L1(frame, u)
    mid = M_D(conn2, lifted)
    return adjoint_L1(frame, mid)


# ----------------------------------------------------------------------
# Pairings and chirality.


def spinor_pairing(rep: CliffordRep, chi: Tensor, rho: Tensor) -> np.ndarray:
    """Invariant pairing ``<chi, rho>`` of two spinor fields as scalar
    jets; conjugate linear in ``chi``."""
    if chi.rank != 0 or rho.rank != 0:
        raise ValueError("spinor_pairing pairs plain spinor fields")
    sp = chi.space if chi.space.size <= rho.space.size else rho.space
    a = np.conj(chi.comps[..., : sp.size])
    b = np.einsum("st,tS->sS", rep.pairing, rho.comps[..., : sp.size])
    return jtensordot(sp, a, b, (0,), (0,))


def sigma_pairing(rep: CliffordRep, s1: Tensor, s2: Tensor) -> np.ndarray:
    """The pseudo-Hermitian form ``<phi1, psi2> + <psi1, phi2>`` on
    spin-tractor sections."""
    N = rep.dim
    sp = s1.space if s1.space.size <= s2.space.size else s2.space

    def part(x, lo, hi):
        return Tensor(sp, x.comps[lo:hi, : sp.size], "", x.weight, (N,))

    return spinor_pairing(rep, part(s1, N, 2 * N), part(s2, 0, N)) + spinor_pairing(
        rep, part(s1, 0, N), part(s2, N, 2 * N)
    )


def chirality_split(rep: CliffordRep, t: Tensor):
    """Split the spinor fiber axis into chirality halves ``(plus, minus)``."""
    if rep.chirality is None:
        raise ValueError("chirality needs an even-dimensional signature")
    proj = 0.5 * (np.eye(rep.dim) + rep.chirality)
    comps = np.moveaxis(t.comps, t.rank, 0)
    plus = np.moveaxis(np.einsum("st,t...->s...", proj, comps), 0, t.rank)
    minus = t.comps - plus
    mk = lambda c: Tensor(t.space, c, t.indices, t.weight, t.fdims)
    return mk(plus), mk(minus)


# ----------------------------------------------------------------------
# Fixtures.


def spinor_fixture(frame: SpinFrame, name, seed=0, degree=2, amplitude=1.0, slot=0):
    """Named spinor fields: "const-spinor", "linear-twistor" (``x.b psi0``,
    a twistor spinor on the flat metric), "random-spinor"."""
    geo = frame.geo
    sp = geo.space
    N = frame.rep.dim
    if name == "const-spinor":
        comps = np.zeros((N, sp.size), dtype=complex)
        comps[slot, 0] = 1.0
        return Tensor(sp, comps, "", 0, (N,))
    if name == "linear-twistor":
        psi0 = np.zeros((N, sp.size), dtype=complex)
        psi0[slot, 0] = 1.0
        bl = frame.beta_lower()
        comps = np.zeros((N, sp.size), dtype=complex)
        for mu in range(geo.n):
            xj = jc.jet_eval(f"x{mu}", geo.point, sp.order).coeffs
            bp = jtensordot(sp, bl[mu], psi0, (1,), (0,))  # [s, S]
            comps = comps + jtensordot(sp, bp, xj)
        return Tensor(sp, comps, "", 0, (N,))
    if name == "random-spinor":
        rng = np.random.default_rng(jc.subseed(seed, "spinor", name))
        re = _random_section(geo, rng, (N,), 0, degree, amplitude)
        im = _random_section(geo, rng, (N,), 0, degree, amplitude)
        return Tensor(sp, re.comps + 1j * im.comps, "", 0, (N,))
    raise KeyError(f"unknown spinor fixture {name!r}")


# ----------------------------------------------------------------------
# Check suites.


def _geo(spec, point, order):
    return rm.GeometryPoint(spec, point, order)


def check_spincomm(spec, point, order=5, seed=0, fixture=None):
    """Identity suite for the spinor operators: the splitting square
    ``grad(L0 psi) = L1(T psi)``, the middle-slot display behind it, the
    Dirac-Laplacian identity for ``-T* T``, the Clifford contractions of
    the curvature tensor, and the spinor curvature itself."""
    geo = _geo(spec, point, order)
    frame = spin_connection(geo)
    rep = frame.rep
    n = geo.n
    N = rep.dim
    name = fixture or spec.name
    psi = spinor_fixture(frame, "random-spinor", seed=seed)
    scale = 1.0 + sup_residual(psi.comps)
    results = []

    def add(check, res, tol, **info):
        results.append(
            CheckResult("spincomm", check, name, tuple(point), res, tol, info=info)
        )

    # (i) the commuting square: covariant derivative of the lift against
    # the lifted twistor gradient, slot by slot.
    conn2 = spin_tractor_connection(frame)
    lhs = conn2.covd(L0(frame, psi))
    rhs = L1(frame, twistor_T(frame, psi))
    sz = min(lhs.space.size, rhs.space.size)
    add(
        "splitting-square",
        sup_residual(lhs.comps[..., :sz], rhs.comps[..., :sz]) / scale,
        1e-8,
    )

    # (ii) the display behind the bottom slot:
    # (2/n) grad_a D psi + P_ab b^b psi
    #   = (2/(n-2)) (D T_a psi - (n-1)^{-1} b_a grad^b T_b psi).
    Dpsi = dirac(frame, psi)
    dD = _covd(frame, Dpsi)
    sp = dD.space
    bu = frame.beta_upper(sp.order)
    Pb = jtensordot(sp, geo.schouten[..., : sp.size], bu, (1,), (0,))
    Pbpsi = jtensordot(sp, Pb, psi.comps[..., : sp.size], (2,), (0,))
    lhs2 = (2.0 / n) * dD.comps + Pbpsi
    u = twistor_T(frame, psi)
    Du = dirac(frame, u)
    du = _covd(frame, u)
    ginv = geo.metric_at(du.space.order).ginv
    div = jtensordot(du.space, ginv, du.comps, (0, 1), (0, 1))
    bl = frame.beta_lower(du.space.order)
    bdiv = jtensordot(du.space, bl, div, (2,), (0,))
    rhs2 = (2.0 / (n - 2.0)) * (Du.comps - bdiv / (n - 1.0))
    sz = min(lhs2.shape[-1], rhs2.shape[-1])
    add("middle-slot", sup_residual(lhs2[..., :sz], rhs2[..., :sz]) / scale, 1e-8)

    # (iii) -T* T psi = 2 ((1-n)/n) D^2 psi + (1/4) Sc psi.
    TstarT = adjoint_Tstar(frame, u)
    DD = dirac(frame, Dpsi)
    sp3 = DD.space
    spsi = jtensordot(sp3, psi.comps[..., : sp3.size], geo.sc[: sp3.size])
    rhs3 = 2.0 * ((1.0 - n) / n) * DD.comps + 0.25 * spsi
    sz = min(TstarT.space.size, sp3.size)
    add(
        "dirac-laplacian",
        sup_residual(-TstarT.comps[..., :sz], rhs3[..., :sz]) / scale,
        1e-8,
    )

    # (iv) Clifford contractions of the curvature: R_abcd b^b b^c b^d =
    # Ric_ab b^b and R_abcd b^a b^b b^c b^d = -Sc/2.
    spc = geo.space_at(geo.space.order - 2)
    buc = frame.beta_upper(spc.order)
    bb2 = jtensordot(spc, buc, buc, (2,), (1,))  # [b, s, c, t, S]
    bb2 = np.transpose(bb2, (0, 2, 1, 3, 4))  # [b, c, s, t, S]
    bb3 = jtensordot(spc, bb2, buc, (3,), (1,))  # [b, c, s, d, t, S]
    bb3 = np.transpose(bb3, (0, 1, 3, 2, 4, 5))  # [b, c, d, s, t, S]
    riem = geo.riem[..., : spc.size]
    lhs4 = jtensordot(spc, riem, bb3, (1, 2, 3), (0, 1, 2))  # [a, s, t, S]
    ricb = jtensordot(spc, geo.ric[..., : spc.size], buc, (1,), (0,))
    res4a = sup_residual(lhs4, ricb) / (1.0 + sup_residual(riem))
    bb4 = jtensordot(spc, buc, bb3, (2,), (3,))  # [a, s, b, c, d, t, S]
    bb4 = np.transpose(bb4, (0, 2, 3, 4, 1, 5, 6))  # [a, b, c, d, s, t, S]
    full = jtensordot(spc, riem, bb4, (0, 1, 2, 3), (0, 1, 2, 3))  # [s, t, S]
    scmag = 1.0 + sup_residual(geo.sc)
    res4b = sup_residual(full, -0.5 * np.eye(N)[..., None] * geo.sc[: spc.size]) / scmag
    add("curvature-clifford", max(res4a, res4b), 1e-8, ricci_residual=res4a,
        scalar_residual=res4b)

    # (v) the curvature of the spin connection against
    # -(1/2) R_abcd b^c b^d.
    F = curvature_F(frame.conn)
    spF = F.space
    buF = frame.beta_upper(spF.order)
    bbF = jtensordot(spF, buF, buF, (2,), (1,))
    bbF = np.transpose(bbF, (0, 2, 1, 3, 4))  # [c, d, s, t, S]
    want5 = -0.5 * jtensordot(
        spF, geo.riem[..., : spF.size], bbF, (2, 3), (0, 1)
    )  # [a, b, s, t, S]
    sz = min(F.space.size, want5.shape[-1])
    add(
        "spinor-curvature",
        sup_residual(F.comps[..., :sz], want5[..., :sz]) / (1.0 + sup_residual(geo.riem)),
        1e-9,
    )
    return results


def check_bach_clifford(spec, points, order=6, seed=0, fixture=None):
    """Fit the single constant in ``M_Sigma(T phi) = c B_ab b^b phi`` over
    one or more points and report the residual of the best fit."""
    if np.ndim(points[0]) == 0:
        points = [tuple(points)]
    name = fixture or spec.name
    lhs_all, rhs_all = [], []
    per_point = []
    for pt in points:
        geo = _geo(spec, pt, order)
        frame = spin_connection(geo)
        phi = spinor_fixture(frame, "random-spinor", seed=seed)
        out = M_Sigma(frame, twistor_T(frame, phi))
        sp = out.space
        bu = frame.beta_upper(sp.order)
        Bb = jtensordot(sp, geo.bach[..., : sp.size], bu, (1,), (0,))
        rhs = jtensordot(sp, Bb, phi.comps[..., : sp.size], (2,), (0,))
        lhs_all.append(out.comps.ravel())
        rhs_all.append(rhs.ravel())
        per_point.append((out, rhs, frame, phi))
    lhs = np.concatenate(lhs_all)
    rhs = np.concatenate(rhs_all)
    denom = np.vdot(rhs, rhs).real
    c = complex(np.vdot(rhs, lhs) / denom) if denom > 1e-28 else 0.0 + 0.0j
    results = []
    for pt, (out, r, frame, phi) in zip(points, per_point):
        scale = 1.0 + sup_residual(twistor_T(frame, phi).comps)
        res = sup_residual(out.comps, c * r) / scale
        results.append(
            CheckResult(
                "spincomm",
                "bach-clifford-fit",
                name,
                tuple(pt),
                res,
                1e-7,
                info={"constant": [c.real, c.imag]},
            )
        )
    return results
