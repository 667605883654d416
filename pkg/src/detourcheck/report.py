"""Structured results for identity checks and whole runs.

A :class:`CheckResult` records one identity tested at one point of one
fixture: the residual, the tolerance it was held to, and the verdict.  A
:class:`RunReport` aggregates results, renders the human table, and
serializes to a versioned JSON document.  Reports are deterministic for a
fixed manifest and seed except for the wall-time field.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

REPORT_SCHEMA = "detourcheck-report/1"


def sup_residual(a, b=None):
    """Largest absolute coefficient difference (or magnitude if b is None).

    Inputs of different jet orders are compared on their common prefix,
    which is the lower-order truncation by the graded coefficient layout.
    """
    a = np.asarray(a)
    if b is None:
        if a.size == 0:
            return 0.0
        return float(np.max(np.abs(a)))
    b = np.asarray(b)
    if a.shape != b.shape:
        k = min(a.shape[-1], b.shape[-1])
        a, b = a[..., :k], b[..., :k]
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))


def rel_residual(a, b=None):
    """Scale-normalized residual: sup difference over (1 + the larger
    coefficient scale), so it reads as absolute for small values and
    relative for large ones."""
    a = np.asarray(a)
    if b is None:
        scale = 1.0 + (float(np.max(np.abs(a))) if a.size else 0.0)
        return sup_residual(a) / scale
    b = np.asarray(b)
    if a.shape != b.shape:
        k = min(a.shape[-1], b.shape[-1])
        a, b = a[..., :k], b[..., :k]
    scale = 1.0
    if a.size:
        scale += max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return sup_residual(a, b) / scale


@dataclass
class CheckResult:
    suite: str
    name: str
    fixture: str
    point: tuple
    residual: float
    tolerance: float
    passed: bool = None  # type: ignore[assignment]
    expected_fail: bool = False
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.point = tuple(float(x) for x in np.atleast_1d(self.point))
        self.residual = float(self.residual)
        if self.passed is None:
            self.passed = bool(self.residual <= self.tolerance)

    @property
    def ok(self):
        """Whether this result counts as success for the exit code: a pass
        when expected to pass, or a failure when marked expected to fail
        (an unexpected pass of an expected-fail check is an error)."""
        return self.passed != self.expected_fail

    def to_dict(self):
        return {
            "suite": self.suite,
            "name": self.name,
            "fixture": self.fixture,
            "point": list(self.point),
            "residual": self.residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "expected_fail": self.expected_fail,
            "info": _plain(self.info),
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


class RunReport:
    def __init__(self, manifest_name="", seed=None):
        self.manifest_name = manifest_name
        self.seed = seed
        self.results: list[CheckResult] = []
        self.wall_time = 0.0
        self._t0 = time.perf_counter()

    def add(self, result: CheckResult):
        self.results.append(result)

    def extend(self, results):
        for r in results:
            self.add(r)

    def finish(self):
        self.wall_time = time.perf_counter() - self._t0
        return self

    # -- aggregation ---------------------------------------------------
    def sorted_results(self):
        return sorted(
            self.results, key=lambda r: (r.suite, r.fixture, r.point, r.name)
        )

    @property
    def all_ok(self):
        return all(r.ok for r in self.results)

    def suite_summary(self):
        out = {}
        for r in self.sorted_results():
            entry = out.setdefault(
                r.suite, {"checks": 0, "failed": 0, "max_residual": 0.0}
            )
            entry["checks"] += 1
            entry["failed"] += 0 if r.ok else 1
            entry["max_residual"] = max(entry["max_residual"], r.residual)
        return out

    def measured_constants(self):
        """Fitted constants reported by any check, keyed by suite:name."""
        out = {}
        for r in self.sorted_results():
            if "constant" in r.info:
                out.setdefault("%s:%s" % (r.suite, r.name), _plain(r.info["constant"]))
        return out

    def to_dict(self):
        return {
            "schema": REPORT_SCHEMA,
            "manifest": self.manifest_name,
            "seed": self.seed,
            "counts": {
                "checks": len(self.results),
                "failed": sum(0 if r.ok else 1 for r in self.results),
            },
            "suites": self.suite_summary(),
            "constants": self.measured_constants(),
            "results": [r.to_dict() for r in self.sorted_results()],
            "wall_time": self.wall_time,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self):
        lines = []
        header = f"{'suite':<18} {'check':<34} {'fixture':<16} {'residual':>12} {'tol':>9}  verdict"
        lines.append(header)
        lines.append("-" * len(header))
        for r in self.sorted_results():
            verdict = "pass" if r.passed else "FAIL"
            if r.expected_fail:
                verdict = "xfail" if r.passed is False else "XPASS"
            lines.append(
                f"{r.suite:<18} {r.name:<34.34} {r.fixture:<16.16}"
                f" {r.residual:>12.3e} {r.tolerance:>9.1e}  {verdict}"
            )
        summary = self.suite_summary()
        lines.append("-" * len(header))
        lines.append(
            f"{len(self.results)} checks in {len(summary)} suites, "
            f"{sum(s['failed'] for s in summary.values())} failed"
        )
        return "\n".join(lines)
