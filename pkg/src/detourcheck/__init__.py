"""detourcheck: pointwise verification of differential-geometric operator
identities (curvature, gauge, tractor and spinor calculus) to machine
precision via truncated Taylor jets."""

__version__ = "0.1.0"
