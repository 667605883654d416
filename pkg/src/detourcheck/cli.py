"""Manifest-driven check runner.

A manifest is one JSON file describing a geometry (a built-in fixture or
an inline symmetric expression array), an optional connection and
conformal rescaling, a sample plan, and the list of check suites to run.
``load_manifest`` validates everything up front; ``run`` executes the
suites over the sampled points and assembles a :class:`RunReport` whose
JSON form is deterministic for a fixed manifest and seed apart from the
wall-time field.  Runtime errors inside a check become failing results
rather than crashes, so one bad fixture cannot hide the rest of a run.

Manifest schema (all keys optional unless noted)::

    {
      "schema": "detourcheck-manifest/1",
      "geometry": {                          # required
        "fixture": "perturbed-flat",         # or "entries": [["1","0"],...]
        "n": 4,
        "params": {"seed": 3, "amplitude": 0.08},
        "signature": [4, 0],                 # inline metrics only
        "name": "my-metric"                  # inline metrics only
      },
      "connection": {
        "fixture": "bpst",                   # or inline "terms" (below)
        "params": {"scale": 1.0},
        "rank": 2,                           # inline only
        "terms": [{"direction": 0, "expr": "x1", "matrix": [[0, 1], [1, 0]]}]
      },
      "rescale": "0.1*x0",                   # conformal factor exponent
      "samples": {"seed": 0, "count": 5, "box": [[-0.4, 0.4], ...]},
      "suites": ["algact", "spincomm"],      # required, see SUITES
      "tolerances": {"spincomm": 1e-7, "*": 1e-8},
      "expected_fail": ["prop-agree:curvature-in-one-half"]
    }

Matrix entries in inline connection terms may be numbers or ``[re, im]``
pairs.  ``tolerances`` replaces the default tolerance of every check in
the named suite ("*" applies to all suites).  ``expected_fail`` patterns
are shell globs matched against ``suite:check-name``; a matching check
must fail for the run to succeed, so regressions in known-broken
fixtures and accidental passes are both caught.  Suites that need a
connection fall back to a seeded ``random-su2`` fixture when the
manifest does not name one.  The sample box defaults to the geometry
fixture's own safe chart.

The ``check`` subcommand prints the human table and writes the JSON
report (``--report`` path, else ``$DETOURCHECK_REPORT_DIR``, else the
working directory).  Exit codes: 0 all checks ok, 1 at least one check
failed, 2 manifest or usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fnmatch import fnmatch
from pathlib import Path

import numpy as np

from . import jetcalc as jc
from . import riemann as rm
from . import spin as sn
from . import symbol as sy
from . import tractor as tr
from . import yangmills as ym
from .jetcalc.sampling import SamplePlan
from .report import CheckResult, RunReport

__all__ = [
    "Manifest",
    "ManifestError",
    "SUITES",
    "builtin_manifest",
    "load_manifest",
    "main",
    "run",
]

MANIFEST_SCHEMA = "detourcheck-manifest/1"
REPORT_DIR_ENV = "DETOURCHECK_REPORT_DIR"

_METRIC_FIXTURES = {
    "flat": "lorentzian flag",
    "sphere": "radius",
    "hyperbolic": "(none)",
    "schwarzschild": "mass (n = 4 only)",
    "perturbed-flat": "seed, amplitude, degree",
}
_CONNECTION_FIXTURES = {
    "zero": "rank",
    "abelian-linear": "(none)",
    "abelian-quadratic": "(none)",
    "bpst": "scale, anti (n = 4 only)",
    "random-su2": "seed, degree, amplitude",
    "random-gl": "rank, seed, degree, amplitude",
}

# suite id -> (description, needs connection, exact dimension or None)
SUITES = {
    "algact": ("current identities for the coupled detour operator", True, None),
    "currentder": ("finite-difference variation of the current", True, None),
    "prop-agree": ("detour factorizations and second-order displays", True, None),
    "eincomm": ("tractor lift, connection and metric identities", False, None),
    "divtr": ("tractor curvature blocks and their divergence", False, None),
    "MP": ("detour operator applied to the Einstein operator", False, None),
    "spincomm": ("spinor curvature, twistor and Dirac identities", False, None),
    "symbol-einstein": ("leading-symbol exactness, trace-free sequence", False, 4),
    "symbol-twistor": ("leading-symbol exactness, twistor sequence", False, 4),
    "conformal-n4": ("conformal covariance of the tractor package", False, 4),
}

_MIN_DIM = 3  # Schouten-based suites need at least 3 dimensions


class ManifestError(Exception):
    """A manifest failed to parse or validate."""


def _fail(msg, *args):
    raise ManifestError(msg % args if args else msg)


def _check_keys(obj, allowed, where):
    for key in obj:
        if key not in allowed:
            _fail("%s: unknown field %r (allowed: %s)", where, key,
                  ", ".join(sorted(allowed)))


class Manifest:
    """Validated run description; built by :func:`load_manifest`."""

    def __init__(self, name, geometry, connection, rescale, plan, suites,
                 tolerances, expected_fail):
        self.name = name
        self.geometry = geometry
        self.connection = connection
        self.rescale = rescale
        self.plan = plan
        self.suites = tuple(suites)
        self.tolerances = dict(tolerances)
        self.expected_fail = tuple(expected_fail)

    @property
    def n(self):
        return self.geometry.n

    def with_seed(self, seed):
        plan = SamplePlan(int(seed), self.plan.count, self.plan.box,
                          self.plan.exclude)
        return Manifest(self.name, self.geometry, self.connection,
                        self.rescale, plan, self.suites, self.tolerances,
                        self.expected_fail)


def _parse_geometry(node):
    if not isinstance(node, dict):
        _fail("geometry: expected an object")
    _check_keys(node, {"fixture", "n", "params", "entries", "signature",
                       "name", "box"}, "geometry")
    if ("fixture" in node) == ("entries" in node):
        _fail("geometry: give exactly one of 'fixture' or 'entries'")
    if "fixture" in node:
        name = node["fixture"]
        n = int(node.get("n", 4))
        params = node.get("params", {})
        if not isinstance(params, dict):
            _fail("geometry.params: expected an object")
        if name not in _METRIC_FIXTURES:
            _fail("geometry: unknown fixture %r (known: %s)", name,
                  ", ".join(sorted(_METRIC_FIXTURES)))
        try:
            return rm.metric_fixture(name, n, **params)
        except (ValueError, TypeError) as e:
            _fail("geometry: %s", e)
    entries = node["entries"]
    sig = node.get("signature")
    try:
        return rm.MetricSpec(entries, signature=sig,
                             name=node.get("name", "inline"),
                             box=node.get("box"))
    except Exception as e:
        _fail("geometry.entries: %s", e)


def _parse_matrix(rows, where):
    try:
        out = []
        for row in rows:
            out.append([complex(v[0], v[1]) if isinstance(v, list) else complex(v)
                        for v in row])
        return out
    except (TypeError, IndexError, ValueError):
        _fail("%s: matrix entries must be numbers or [re, im] pairs", where)


def _parse_connection(node, n):
    if node is None:
        return None
    if not isinstance(node, dict):
        _fail("connection: expected an object")
    _check_keys(node, {"fixture", "params", "rank", "terms", "name"},
                "connection")
    if ("fixture" in node) == ("terms" in node):
        _fail("connection: give exactly one of 'fixture' or 'terms'")
    if "fixture" in node:
        name = node["fixture"]
        if name not in _CONNECTION_FIXTURES:
            _fail("connection: unknown fixture %r (known: %s)", name,
                  ", ".join(sorted(_CONNECTION_FIXTURES)))
        try:
            return ym.connection_fixture(name, n, **node.get("params", {}))
        except (ValueError, TypeError) as e:
            _fail("connection: %s", e)
    rank = node.get("rank")
    if not isinstance(rank, int) or rank < 1:
        _fail("connection.rank: expected a positive integer")
    terms = []
    for i, t in enumerate(node["terms"]):
        where = "connection.terms[%d]" % i
        if not isinstance(t, dict):
            _fail("%s: expected an object", where)
        _check_keys(t, {"direction", "expr", "matrix"}, where)
        try:
            terms.append((int(t["direction"]), str(t["expr"]),
                          _parse_matrix(t["matrix"], where)))
        except KeyError as e:
            _fail("%s: missing field %s", where, e)
    try:
        return ym.ConnectionSpec(n, rank, terms, name=node.get("name", "inline"))
    except Exception as e:
        _fail("connection: %s", e)


def _parse_samples(node, spec):
    node = node or {}
    if not isinstance(node, dict):
        _fail("samples: expected an object")
    _check_keys(node, {"seed", "count", "box"}, "samples")
    seed = int(node.get("seed", 0))
    count = int(node.get("count", 5))
    if count < 1:
        _fail("samples.count: expected at least 1")
    box = node.get("box")
    if box is None:
        box = spec.box
    elif (len(box) == 2 and not isinstance(box[0], (list, tuple))):
        box = [tuple(box)] * spec.n
    if len(box) != spec.n:
        _fail("samples.box: %d intervals for an n=%d geometry",
              len(box), spec.n)
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    return SamplePlan(seed, count, box, tuple(spec.exclude))


def builtin_manifest(name):
    """Built-in manifest dictionaries addressable by name from the CLI."""
    if name == "paper-core":
        return {
            "schema": MANIFEST_SCHEMA,
            "geometry": {"fixture": "flat", "n": 4},
            "connection": {"fixture": "bpst", "params": {"scale": 1.2}},
            "rescale": "0.1*x0 + 0.05*x1",
            "samples": {"seed": 0, "count": 5},
            "suites": sorted(SUITES),
        }
    raise KeyError("unknown built-in manifest %r" % (name,))


def load_manifest(path):
    """Read and validate a manifest file (or built-in profile name)."""
    try:
        data = builtin_manifest(str(path))
        name = str(path)
    except KeyError:
        p = Path(path)
        if not p.exists():
            _fail("no such manifest file or built-in profile: %s", path)
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as e:
            _fail("%s: parse error at line %d, column %d: %s",
                  path, e.lineno, e.colno, e.msg)
        name = p.name
    return _validate(data, name)


def _validate(data, name):
    if not isinstance(data, dict):
        _fail("manifest root: expected an object")
    _check_keys(data, {"schema", "geometry", "connection", "rescale",
                       "samples", "suites", "tolerances", "expected_fail"},
                "manifest")
    schema = data.get("schema", MANIFEST_SCHEMA)
    if schema != MANIFEST_SCHEMA:
        _fail("manifest schema %r not supported (want %r)", schema,
              MANIFEST_SCHEMA)
    if "geometry" not in data:
        _fail("manifest: missing required field 'geometry'")
    geometry = _parse_geometry(data["geometry"])
    connection = _parse_connection(data.get("connection"), geometry.n)
    if connection is not None and connection.n != geometry.n:
        _fail("dimension mismatch: geometry has n=%d, connection has n=%d",
              geometry.n, connection.n)
    rescale = None
    if data.get("rescale") is not None:
        try:
            rescale = rm.RescaleSpec(str(data["rescale"]))
        except Exception as e:
            _fail("rescale: %s", e)
    plan = _parse_samples(data.get("samples"), geometry)

    suites = data.get("suites")
    if not isinstance(suites, list) or not suites:
        _fail("manifest: 'suites' must be a non-empty array")
    for s in suites:
        if s not in SUITES:
            _fail("unknown suite %r (known: %s)", s, ", ".join(sorted(SUITES)))
        _, needs_conn, exact_dim = SUITES[s]
        if exact_dim is not None and geometry.n != exact_dim:
            _fail("suite %r requires dimension %d, geometry has n=%d",
                  s, exact_dim, geometry.n)
        if geometry.n < _MIN_DIM and s not in ("algact", "currentder"):
            _fail("suite %r requires dimension >= %d, geometry has n=%d",
                  s, _MIN_DIM, geometry.n)
    suites = sorted(set(suites))

    tolerances = data.get("tolerances", {})
    if not isinstance(tolerances, dict):
        _fail("tolerances: expected an object")
    for key, val in tolerances.items():
        if key != "*" and key not in SUITES:
            _fail("tolerances: unknown suite %r", key)
        if not isinstance(val, (int, float)) or val <= 0:
            _fail("tolerances[%r]: expected a positive number", key)

    expected_fail = data.get("expected_fail", [])
    if not isinstance(expected_fail, list):
        _fail("expected_fail: expected an array of patterns")

    needs_conn = any(SUITES[s][1] for s in suites)
    if connection is None and needs_conn:
        connection = ym.connection_fixture("random-su2", geometry.n,
                                           seed=plan.seed)
    return Manifest(name, geometry, connection, rescale, plan, suites,
                    tolerances, expected_fail)


# -- suite execution ----------------------------------------------------


def _error_result(suite, fixture, point, exc):
    return CheckResult(suite, "runtime-error", fixture, tuple(point),
                       float("inf"), 0.0, passed=False,
                       info={"error": "%s: %s" % (type(exc).__name__, exc)})


def _suite_tasks(manifest, points):
    """One callable per (suite, point) unit of work, each returning a
    list of results.  Kept small so point-level parallelism stays easy."""
    geo_spec = manifest.geometry
    conn = manifest.connection
    om = manifest.rescale or rm.RescaleSpec("0.1*x0")
    seed = manifest.plan.seed
    tasks = []

    def per_point(suite, fn):
        for i, pt in enumerate(points):
            pt = tuple(float(v) for v in pt)
            tasks.append((suite, pt, lambda f=fn, p=pt, k=i: f(p, k)))

    for suite in manifest.suites:
        if suite == "algact":
            per_point(suite, lambda p, k: ym.check_algact(
                conn, geo_spec, p, order=4, seed=jc.subseed(seed, "pt", k)))
        elif suite == "currentder":
            per_point(suite, lambda p, k: ym.variational_checks(
                conn, geo_spec, p, order=4, seed=jc.subseed(seed, "pt", k)))
        elif suite == "prop-agree":
            per_point(suite, lambda p, k: ym.check_half_flat_complexes(
                conn, geo_spec, p, order=4, seed=jc.subseed(seed, "pt", k))
                + tr.check_MT_composition(
                    geo_spec, p, order=5, seed=jc.subseed(seed, "pt", k)))
        elif suite == "eincomm":
            per_point(suite, lambda p, k: tr.check_eincomm(
                geo_spec, p, order=5, seed=jc.subseed(seed, "pt", k))
                + tr.check_trmetric_parallel(geo_spec, p, order=4))
        elif suite == "divtr":
            per_point(suite, lambda p, k: tr.check_curvature_blocks(
                geo_spec, p, order=4) + tr.check_divtr(geo_spec, p, order=4))
        elif suite == "MP":
            per_point(suite, lambda p, k: tr.check_MP(
                geo_spec, p, order=6, seed=jc.subseed(seed, "pt", k)))
        elif suite == "spincomm":
            per_point(suite, lambda p, k: sn.check_spincomm(
                geo_spec, p, order=5, seed=jc.subseed(seed, "pt", k)))
            pts = [tuple(float(v) for v in p) for p in points]
            tasks.append(("spincomm", pts[0],
                          lambda: sn.check_bach_clifford(
                              geo_spec, pts, order=6, seed=seed)))
        elif suite in ("symbol-einstein", "symbol-twistor"):
            seqname = suite.split("-", 1)[1]

            def run_symbol(p, k, sq=seqname):
                rng = np.random.default_rng(jc.subseed(seed, "xi", k))
                xi = rng.standard_normal(geo_spec.n)
                geo = geo_spec.geometry(p, 4)
                return sy.exactness_check(sq, geo, xi)

            per_point(suite, run_symbol)
        elif suite == "conformal-n4":
            per_point(suite, lambda p, k: tr.transf_equivariance(
                geo_spec, om, p, order=5, seed=jc.subseed(seed, "pt", k)))
    return tasks


def _apply_overrides(result, manifest, tolerance_scale):
    tol = manifest.tolerances.get(
        result.suite, manifest.tolerances.get("*", result.tolerance))
    tol = float(tol) * tolerance_scale
    label = "%s:%s" % (result.suite, result.name)
    xfail = any(fnmatch(label, pat) for pat in manifest.expected_fail)
    return CheckResult(result.suite, result.name, result.fixture, result.point,
                       result.residual, tol, expected_fail=xfail,
                       info=result.info)


def run(manifest, tolerance_scale=1.0, jobs=1, seed=None):
    """Execute the manifest's suites and return the finished RunReport."""
    if seed is not None:
        manifest = manifest.with_seed(seed)
    points = manifest.plan.points()
    report = RunReport(manifest_name=manifest.name, seed=manifest.plan.seed)
    tasks = _suite_tasks(manifest, points)

    def run_task(task):
        suite, pt, fn = task
        try:
            return list(fn())
        except Exception as e:
            fixture = getattr(manifest.geometry, "name", "custom")
            return [_error_result(suite, fixture, pt, e)]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(run_task, tasks))
    else:
        batches = [run_task(t) for t in tasks]
    for batch in batches:
        for r in batch:
            report.add(_apply_overrides(r, manifest, tolerance_scale))
    return report.finish()


# -- report/output plumbing ---------------------------------------------


def _report_path(arg):
    if arg:
        return Path(arg)
    base = os.environ.get(REPORT_DIR_ENV)
    if base:
        return Path(base) / "detourcheck-report.json"
    return Path("detourcheck-report.json")


def _dump_curvature(manifest, index):
    points = manifest.plan.points()
    if not 0 <= index < len(points):
        _fail("--point %d out of range (have %d sampled points)",
              index, len(points))
    geo = manifest.geometry.geometry(tuple(points[index]), 4)

    def val(arr):
        return None if arr is None else np.asarray(arr)[..., 0].tolist()

    doc = {
        "fixture": getattr(manifest.geometry, "name", "custom"),
        "point": [float(v) for v in points[index]],
        "metric": val(geo.metric.g),
        "riemann": val(geo.riem),
        "ricci": val(geo.ric),
        "scalar": val(geo.sc),
        "schouten": val(geo.schouten),
        "jay": val(geo.jay),
        "weyl": val(geo.weyl),
        "cotton": val(geo.cotton),
        "bach": val(geo.bach),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def _cmd_check(args):
    manifest = load_manifest(args.manifest)
    report = run(manifest, tolerance_scale=args.tolerance_scale,
                 jobs=args.jobs, seed=args.seed)
    print(report.table())
    path = _report_path(args.report)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.to_json() + "\n")
    print("report written to %s" % path)
    return 0 if report.all_ok else 1


def _cmd_curvature(args):
    manifest = load_manifest(args.manifest)
    print(_dump_curvature(manifest, args.point))
    return 0


def _cmd_list_suites(_args):
    for name in sorted(SUITES):
        desc, needs_conn, exact = SUITES[name]
        extra = []
        if needs_conn:
            extra.append("uses connection")
        if exact:
            extra.append("n=%d" % exact)
        tail = (" [%s]" % ", ".join(extra)) if extra else ""
        print("%-16s %s%s" % (name, desc, tail))
    return 0


def _cmd_list_fixtures(_args):
    print("metric fixtures (parameters):")
    for name in sorted(_METRIC_FIXTURES):
        print("  %-16s %s" % (name, _METRIC_FIXTURES[name]))
    print("connection fixtures (parameters):")
    for name in sorted(_CONNECTION_FIXTURES):
        print("  %-16s %s" % (name, _CONNECTION_FIXTURES[name]))
    print("built-in manifests: paper-core")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="detourcheck",
        description="verify detour-complex identities from a manifest",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run the manifest's suites")
    p.add_argument("manifest", help="manifest file or built-in profile name")
    p.add_argument("--report", help="report path (default: "
                   "$%s or the working directory)" % REPORT_DIR_ENV)
    p.add_argument("--seed", type=int, help="override the sample-plan seed")
    p.add_argument("--tolerance-scale", type=float, default=1.0,
                   help="multiply every tolerance by this factor")
    p.add_argument("--jobs", type=int, default=1,
                   help="run this many point-level tasks in parallel")
    p.set_defaults(fn=_cmd_check)

    p = sub.add_parser("curvature", help="dump curvature tensors at a point")
    p.add_argument("manifest")
    p.add_argument("--point", type=int, default=0,
                   help="index into the sampled points")
    p.set_defaults(fn=_cmd_curvature)

    p = sub.add_parser("list-suites", help="list check suites")
    p.set_defaults(fn=_cmd_list_suites)

    p = sub.add_parser("list-fixtures", help="list built-in fixtures")
    p.set_defaults(fn=_cmd_list_fixtures)
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except ManifestError as e:
        print("error: %s" % e, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
