"""Deterministic sample-point generation.

Points are drawn from numpy's PCG64 generator, whose stream is specified
and platform-stable, so a plan with a fixed seed produces bitwise-equal
points everywhere.  Exclusion predicates (for example metric degeneracy
guards) filter the stream; generation fails loudly rather than looping
forever if the box is mostly excluded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Tuple

import numpy as np


@dataclass(frozen=True)
class SamplePlan:
    seed: int
    count: int
    box: Tuple[Tuple[float, float], ...]
    exclude: Tuple[Callable[[np.ndarray], bool], ...] = field(default=())

    @property
    def n(self):
        return len(self.box)

    def points(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        out = []
        attempts = 0
        limit = 1000 * self.count + 1000
        while len(out) < self.count:
            if attempts >= limit:
                raise RuntimeError(
                    f"could not draw {self.count} admissible points in {limit} attempts"
                )
            p = lo + (hi - lo) * rng.random(self.n)
            attempts += 1
            if any(excl(p) for excl in self.exclude):
                continue
            out.append(p)
        return np.array(out)


def subseed(base: int, *tags) -> int:
    """Derive a stable child seed from a base seed and string/int tags.

    Uses SHA-256 rather than ``hash()`` so results do not depend on
    interpreter hash randomisation.
    """
    import hashlib

    h = hashlib.sha256()
    h.update(str(int(base)).encode())
    for t in tags:
        h.update(b"\x00")
        h.update(str(t).encode())
    return int.from_bytes(h.digest()[:8], "big")
