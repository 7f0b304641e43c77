"""Command-line front end.

Exit codes: 0 when every check passes, 1 on a verification failure,
2 on a usage or input error.  Reports are JSON with floats printed to 17
significant digits, so repeated runs produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

from . import __version__
from .symexpr.zerotest import DEFAULT_SEED

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DRIFT_LIMIT = 1e-8
SENSITIVITY_LIMIT = 1e-5


class UsageError(Exception):
    pass


# deterministic JSON ----------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return "%.17g" % x


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written as %.17g."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, Fraction):
        return json.dumps(str(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if hasattr(obj, "item") and not isinstance(obj, (list, tuple, dict)):
        return dumps(obj.item(), indent, _level)  # numpy scalars
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, str, bool)) or v is None for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(report: dict, out: str | None):
    text = dumps(report) + "\n"
    if out:
        try:
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {out}: {exc}") from None
    sys.stdout.write(text)


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


def _interval(text: str | None, default: tuple) -> tuple:
    if text is None:
        return default
    try:
        a, b = (float(Fraction(p)) for p in text.split(":"))
    except ValueError:
        raise UsageError(f"interval must look like t0:t1, got {text!r}") from None
    if not b > a:
        raise UsageError("interval end must exceed its start")
    return a, b


def _positive(name: str, v):
    if v is not None and not v > 0:
        raise UsageError(f"{name} must be positive")
    return v


def _strategy(args):
    from .symexpr import Auto

    return Auto(seed=args.seed)


def _header(args, command: str) -> dict:
    return {"command": command, "version": __version__, "seed": args.seed}


# kt-basis -----------------------------------------------------------------------------

def cmd_kt_basis(args) -> int:
    from .geometry import E2_PARAMS, PARAM_NAMES, KTParams, failing_components, kt_from_params, kt_space_dimension_check
    from .symexpr import to_prefix

    if args.dim not in (2, 3):
        raise UsageError("--dim must be 2 or 3")
    names = PARAM_NAMES if args.dim == 3 else E2_PARAMS
    tensors = {}
    all_kt = True
    for n in names:
        K = kt_from_params(KTParams.of(**{n: 1}), args.dim)
        bad = failing_components(K)
        all_kt &= not bad
        tensors[n] = {"components": [[to_prefix(c) for c in row] for row in K.components], "killing": not bad}
    rep = kt_space_dimension_check(list(names), args.dim, seed=args.seed)
    expected = 20 if args.dim == 3 else 6
    report = {**_header(args, "kt-basis"), "dim": args.dim, "rank": rep["rank"], "expected_rank": expected,
              "sample_points": rep["sample_points"], "all_killing": all_kt, "tensors": tensors}
    _emit(report, args.out)
    return EXIT_OK if all_kt and rep["rank"] == expected else EXIT_FAIL


# check --------------------------------------------------------------------------------

def cmd_check(args) -> int:
    from .conditions import DegenerateSystem, DynSystem, QFICandidate, determining_residuals
    from .symexpr import ParseError

    sdata = _load_json(args.system)
    cdata = _load_json(args.candidate)
    try:
        system = DynSystem.from_json(sdata)
    except DegenerateSystem as exc:
        raise UsageError(f"system rejected: {exc}") from None
    except (ValueError, TypeError, KeyError, ParseError) as exc:
        raise UsageError(f"invalid system: {exc}") from None
    try:
        cand = QFICandidate.from_json(cdata, system.dim)
    except (ValueError, TypeError, KeyError, ParseError) as exc:
        raise UsageError(f"invalid candidate: {exc}") from None
    if cand.dim != system.dim:
        raise UsageError("candidate and system dimensions differ")
    rep = determining_residuals(cand, system, _strategy(args))
    report = {**_header(args, "check"), "system": system.to_json(), "candidate": cand.to_json(), **rep.to_json(),
              "failed": rep.failed()}
    _emit(report, args.out)
    return EXIT_OK if rep.all_zero else EXIT_FAIL


# catalog-verify -------------------------------------------------------------------------

def _relation_suites():
    """(name, nu tags, builder) for every relation suite."""
    from . import catalog
    from .symexpr import fn, sym

    b0, b1, b2, c11, c0 = (sym(s) for s in ("b0", "b1", "b2", "c11", "c0"))
    return [
        ("time-dependent Kepler relations", (1,), lambda: catalog.kepler_relations(b0, b1, c11)),
        ("Kepler b1 = 0 reduction", (1,), lambda: catalog.kepler_reduction_relations(b0, c11)),
        ("energy relations", (1, 2), lambda: catalog.energy_relations(b0, b1, b2, Fraction(1))),
        ("polynomial family relations", (2, -2),
         lambda: catalog.polynomial_family_relations(Fraction(1), Fraction(1, 5), Fraction(1, 20), Fraction(1), Fraction(8))),
        ("exponential pair relations", (-2,), lambda: catalog.exponential_pair_relations(Fraction(2))),
        ("oscillator relations", (-2,), lambda: catalog.oscillator_relations(catalog.OscillatorSpec("f", fn("f"), c0))),
        ("oscillator reductions", (-2,), lambda: catalog.oscillator_reductions(c0, Fraction(-1))),
    ]


def _run_suite(name: str, seed: int) -> dict:
    from .catalog import check_relations
    from .symexpr import Auto

    build = {n: b for n, _, b in _relation_suites()}[name]
    verdicts = check_relations(build(), Auto(seed=seed))
    return {"suite": name, "ok": all(v.zero for v in verdicts.values()),
            "relations": {k: v.to_json() for k, v in verdicts.items()}}


def _run_entry(spec: dict, rtol: float, atol: float, seed: int, symbolic: bool) -> dict:
    from . import catalog
    from .dynamics import IntegrationError, run_manifest_entry
    from .symexpr import Auto

    out = {"id": spec.get("id", spec["key"]), "key": spec["key"]}
    try:
        if symbolic:
            fis = catalog.build(spec["key"], spec["params"])
            out["conserved"] = {fi.name: fi.is_conserved(Auto(seed=seed)) for fi in fis}
        res = run_manifest_entry(spec, rtol=rtol, atol=atol)
    except (IntegrationError, ValueError, ZeroDivisionError) as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
        out["ok"] = False
        return out
    out.update(res)
    drift_ok = all(r["max_rel"] <= DRIFT_LIMIT for r in res["integrals"])
    sens_ok = all(r["perturbed_min"] >= SENSITIVITY_LIMIT for r in res["integrals"])
    out["drift_ok"] = drift_ok
    out["sensitivity_ok"] = sens_ok
    out["ok"] = drift_ok and sens_ok and all(out.get("conserved", {}).values())
    return out


def _entry_nu(spec: dict):
    from .catalog import entry

    e = entry(spec["key"])
    if "nu" in spec["params"]:
        return Fraction(str(spec["params"]["nu"]))
    return e.nu


def _select(manifest: dict, args) -> list:
    entries = manifest["entries"]
    if args.key:
        known = {e["key"] for e in entries}
        unknown = [k for k in args.key if k not in known]
        if unknown:
            raise UsageError(f"unknown catalog keys {unknown}")
        entries = [e for e in entries if e["key"] in args.key]
    if getattr(args, "nu", None) is not None:
        entries = [e for e in entries if _entry_nu(e) == args.nu]
    return entries


def _pmap(fn, jobs: int, *iterables) -> list:
    if jobs <= 1:
        return list(map(fn, *iterables))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *iterables))  # map keeps submission order


def _manifest(args):
    from .dynamics import load_manifest

    try:
        return load_manifest(args.manifest)
    except OSError as exc:
        raise UsageError(f"cannot read manifest: {exc}") from None
    except (ValueError, KeyError) as exc:
        raise UsageError(f"invalid manifest: {exc}") from None


def _tols(args):
    rtol = _positive("--tol-rel", args.tol_rel)
    atol = _positive("--tol-abs", args.tol_abs)
    return rtol, atol if atol is not None else rtol * 1e-2


def cmd_catalog_verify(args) -> int:
    rtol, atol = _tols(args)
    manifest = _manifest(args)
    entries = _select(manifest, args)
    suites = [n for n, tags, _ in _relation_suites() if args.nu is None or args.nu in tags]
    if args.key:
        suites = []
    suite_reports = _pmap(_run_suite, args.jobs, suites, [args.seed] * len(suites))
    entry_reports = _pmap(_run_entry, args.jobs, entries, [rtol] * len(entries), [atol] * len(entries),
                          [args.seed] * len(entries), [True] * len(entries))
    ok = all(s["ok"] for s in suite_reports) and all(e["ok"] for e in entry_reports)
    report = {**_header(args, "catalog-verify"), "manifest_version": manifest["version"],
              "filters": {"nu": None if args.nu is None else str(args.nu), "key": args.key or []},
              "tol_rel": rtol, "tol_abs": atol, "ok": ok, "suites": suite_reports, "entries": entry_reports}
    if not entries and not suites:
        raise UsageError("the filters select nothing")
    _emit(report, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_drift(args) -> int:
    rtol, atol = _tols(args)
    manifest = _manifest(args)
    entries = _select(manifest, args)
    if not entries:
        raise UsageError("the filters select nothing")
    rows = _pmap(_run_entry, args.jobs, entries, [rtol] * len(entries), [atol] * len(entries),
                 [args.seed] * len(entries), [False] * len(entries))
    ok = all(r["ok"] for r in rows)
    report = {**_header(args, "drift"), "manifest_version": manifest["version"], "tol_rel": rtol, "tol_abs": atol,
              "limits": {"max_rel": DRIFT_LIMIT, "perturbed_min": SENSITIVITY_LIMIT}, "ok": ok, "entries": rows}
    _emit(report, args.out)
    return EXIT_OK if ok else EXIT_FAIL


# orbit --------------------------------------------------------------------------------

def cmd_orbit(args) -> int:
    from .dynamics import IntegrationError, kepler_orbit

    rtol, _ = _tols(args)
    t0, t1 = _interval(args.interval, (0.0, 5.0))
    try:
        b0, b1, k = Fraction(args.b0), Fraction(args.b1), Fraction(args.k)
        sol = kepler_orbit(b0, b1, k, args.x0, args.y0, args.vx0, args.vy0, t0, t1, rtol=rtol, grid=args.grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    except IntegrationError as exc:
        _emit({**_header(args, "orbit"), "ok": False, "error": str(exc)}, args.out)
        return EXIT_FAIL
    rep = sol.report()
    ok = (rep["max_radial_error"] <= 1e-6 and rep["conic_relation_residual"] <= 1e-10
          and rep["max_angular_momentum_error"] <= 1e-6 and rep["max_time_relation_error"] <= 1e-6)
    if args.csv:
        try:
            sol.trajectory.to_csv(args.csv)
        except OSError as exc:
            raise UsageError(f"cannot write {args.csv}: {exc}") from None
    _emit({**_header(args, "orbit"), "tol_rel": rtol, **rep, "ok": ok}, args.out)
    return EXIT_OK if ok else EXIT_FAIL


# lane-emden ------------------------------------------------------------------------------

def cmd_lane_emden(args) -> int:
    from .dampxform import lane_emden
    from .dynamics import IntegrationError, State, expression_drift
    from .symexpr import to_infix, to_prefix

    if args.json:
        data = _load_json(args.json)
        try:
            k, mu, cs = data["k"], data["mu"], data["c"]
        except (KeyError, TypeError):
            raise UsageError("Lane-Emden JSON needs k, mu and c") from None
    else:
        if args.k is None or args.mu is None:
            raise UsageError("--k and --mu are required")
        k, mu = args.k, args.mu
        cs = args.c.split(",")
    try:
        k, mu = Fraction(str(k)), Fraction(str(mu))
        cs = [Fraction(str(c).strip()) for c in cs]
        if len(cs) != 3:
            raise ValueError("c needs three values")
        res = lane_emden(k, mu, *cs)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(str(exc)) from None
    rtol, _ = _tols(args)
    t0, t1 = _interval(args.interval, (1.0, 5.0))
    report = {**_header(args, "lane-emden"), "k": str(k), "mu": str(mu), "c": [str(c) for c in cs],
              "label": res.label, "omega": to_infix(res.omega), "I": to_infix(res.normalized),
              "I_prefix": to_prefix(res.normalized), "factor": str(res.factor)}
    try:
        d = expression_drift(res.normalized, res.system, State(t0, (args.x0,), (args.v0,)), t1, rtol)
    except IntegrationError as exc:
        report.update(ok=False, error=str(exc))
        _emit(report, args.out)
        return EXIT_FAIL
    report["drift"] = d
    report["ok"] = d["max_rel"] <= DRIFT_LIMIT
    _emit(report, args.out)
    return EXIT_OK if report["ok"] else EXIT_FAIL


# parser ---------------------------------------------------------------------------------

def _frac(text: str) -> Fraction:
    try:
        return Fraction(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qfikit", description="Quadratic first integrals of time-dependent systems.")
    p.add_argument("--version", action="version", version=f"qfikit {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for sampled zero tests")
    common.add_argument("--out", help="also write the JSON report to this path")
    common.add_argument("--tol-rel", type=float, default=1e-12, help="integrator relative tolerance")
    common.add_argument("--tol-abs", type=float, default=None, help="integrator absolute tolerance (default tol-rel/100)")
    common.add_argument("--interval", help="time interval t0:t1")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for suites")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("kt-basis", parents=[common], help="Killing tensor basis and its rank")
    s.add_argument("--dim", type=int, default=3)
    s.set_defaults(func=cmd_kt_basis)

    s = sub.add_parser("check", parents=[common], help="determining residuals of a candidate")
    s.add_argument("system")
    s.add_argument("candidate")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("catalog-verify", parents=[common], help="relation suites, exact conservation and drift")
    s.add_argument("--nu", type=_frac)
    s.add_argument("--key", action="append")
    s.add_argument("--manifest")
    s.set_defaults(func=cmd_catalog_verify)

    s = sub.add_parser("drift", parents=[common], help="conservation drift of the manifest entries")
    s.add_argument("--key", action="append")
    s.add_argument("--manifest")
    s.set_defaults(func=cmd_drift)

    s = sub.add_parser("orbit", parents=[common], help="time-dependent Kepler orbit and its conic")
    s.add_argument("--b0", default="1")
    s.add_argument("--b1", default="1/10")
    s.add_argument("--k", default="1")
    s.add_argument("--x0", type=float, default=1.0)
    s.add_argument("--y0", type=float, default=0.0)
    s.add_argument("--vx0", type=float, default=0.0)
    s.add_argument("--vy0", type=float, default=1.1)
    s.add_argument("--grid", type=int, default=500)
    s.add_argument("--csv", help="trajectory CSV path")
    s.set_defaults(func=cmd_orbit)

    s = sub.add_parser("lane-emden", parents=[common], help="integrable Lane-Emden cases")
    s.add_argument("--k")
    s.add_argument("--mu")
    s.add_argument("--c", default="1,0,0")
    s.add_argument("--json", help="JSON file with k, mu and c")
    s.add_argument("--x0", type=float, default=0.5)
    s.add_argument("--v0", type=float, default=0.1)
    s.set_defaults(func=cmd_lane_emden)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    if getattr(args, "jobs", 1) < 1:
        print("qfikit: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"qfikit: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
