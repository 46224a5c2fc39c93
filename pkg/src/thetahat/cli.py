"""Command-line driver.

Every subcommand produces one JSON report::

    {
      "schema": "thetahat.report/1",
      "version": "...",
      "status": "pass" | "fail",
      "tasks": [ {"task": ..., "status": "pass" | "fail" | "computed", ...} ]
    }

Exact values are DSL text, numeric values are shortest round-trip decimal
strings.  Keys always appear in the order written here, so two runs on the
same input give identical bytes once ``--no-timing`` drops the wall clock.
The exit code is 0 iff no task failed.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from typing import Callable, Dict, List, Optional

from . import __version__
from .charforms import omega, omega_form
from .chernweil import (
    ConnectionSection,
    MetricSpec,
    chern_weil_form,
    connection_form,
    classical_curvature,
    levi_civita,
    section,
)
from .connspace import (
    ChartTransition,
    check_Theta_transition,
    check_theta_transition,
    transition_substitution,
)
from .dsl import DSLSyntaxError, render_form
from .forms import FormMatrix, d, pullback
from .manifest import Manifest, ManifestError, Task, parse_manifest
from .numeric import FIXTURES, characteristic_density, fixture, thread_count
from .symkernel import ZERO, x

SCHEMA = "thetahat.report/1"


class TaskError(Exception):
    pass


def _num(v: float) -> str:
    return repr(float(v))


def _render_matrix(m: FormMatrix) -> List[List[str]]:
    return [[render_form(e) for e in row] for row in m.entries]


def _timed(fn: Callable[[], dict], timing: bool) -> dict:
    t0 = time.perf_counter()
    rec = fn()
    rec["wall_time"] = _num(time.perf_counter() - t0) if timing else None
    if not timing and "runtime_s" in rec:
        rec["runtime_s"] = None
    return rec


# ---------------------------------------------------------------------------
# built-in chart changes, usable without a manifest


def builtin_transition(name: str, n: int) -> ChartTransition:
    xs = [x(i) for i in range(1, n + 1)]
    if name == "identity":
        return ChartTransition.identity(n)
    if name == "linear":
        # x'1 = x1 + 2 x2, remaining coordinates scaled by 3
        fw = [xs[0] + 2 * xs[1]] + [3 * v for v in xs[1:]] if n > 1 else [3 * xs[0]]
        if n == 1:
            inv = [xs[0] / 3]
        else:
            inv = [xs[0] - 2 * (xs[1] / 3)] + [v / 3 for v in xs[1:]]
        return ChartTransition.make(fw, inv)
    if name == "quadratic":
        if n < 2:
            raise TaskError("the quadratic map needs n >= 2")
        fw = [xs[0], xs[1] + xs[0] ** 2] + xs[2:]
        inv = [xs[0], xs[1] - xs[0] ** 2] + xs[2:]
        return ChartTransition.make(fw, inv)
    raise TaskError(f"unknown built-in map {name!r}")


# ---------------------------------------------------------------------------
# tasks


def task_verify_closed(n: int, k: int) -> dict:
    if n < 1 or not 1 <= k <= n:
        raise TaskError(f"need 1 <= k <= n, got n={n}, k={k}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        r = omega(n, k)
    return {
        "task": "verify-closed",
        "status": "pass" if r.closed else "fail",
        "n": n,
        "k": k,
        "term_count": r.term_count,
        "closed": r.closed,
        "nonzero": r.term_count > 0,
        "within_theorem_range": 2 * k <= n,
    }


def task_transition_check(t: ChartTransition, label: str, k: Optional[int] = None) -> dict:
    r1 = check_theta_transition(t)
    r2 = check_Theta_transition(t)
    rec = {
        "task": "transition-check",
        "status": "pass",
        "map": label,
        "n": t.n,
        "forward": [str(e) for e in t.forward],
        "inverse": [str(e) for e in t.inverse],
        "theta_residual": "0" if r1.is_zero() else _render_matrix(r1),
        "Theta_residual": "0" if r2.is_zero() else _render_matrix(r2),
    }
    ok = r1.is_zero() and r2.is_zero()
    if k is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            w = omega_form(t.n, k)
        res = pullback(w, transition_substitution(t)) - w
        rec["k"] = k
        rec["omega_residual"] = render_form(res)
        ok = ok and res.is_zero()
    rec["status"] = "pass" if ok else "fail"
    return rec


def _manifest_section(man: Manifest, source: str) -> ConnectionSection:
    if source == "connection":
        return section(man.n, man.connection, "explicit")
    if source == "metric":
        if not man.metric:
            raise TaskError("manifest has no [metric] entries")
        g = [[man.metric.get((min(i, j), max(i, j)), ZERO) for j in range(1, man.n + 1)]
             for i in range(1, man.n + 1)]
        return levi_civita(MetricSpec.make(g))
    raise TaskError(f"unknown source {source!r}; use connection or metric")


def task_pullback(man: Manifest, source: str, form: str, k: Optional[int]) -> dict:
    s = _manifest_section(man, source)
    rec = {"task": "pullback", "status": "computed", "n": man.n, "source": source, "form": form}
    if form == "omega":
        if k is None:
            raise TaskError("form=omega needs k")
        if not 1 <= k <= man.n:
            raise TaskError(f"need 1 <= k <= n, got k={k}")
        w = chern_weil_form(s, k)
        closed = d(w).is_zero()
        rec["k"] = k
        rec["result"] = render_form(w)
        rec["closed"] = closed
        rec["status"] = "pass" if closed else "fail"
    elif form == "theta":
        rec["result"] = _render_matrix(connection_form(s))
    elif form == "Theta":
        rec["result"] = _render_matrix(classical_curvature(s))
    else:
        raise TaskError(f"unknown form {form!r}; use omega, theta or Theta")
    return rec


# expected values and default tolerances per fixture
_EXPECTED = {
    "flat_t4": (0.0, 1e-3, "absolute, scaled by max(1, L1)"),
    "perturbed_t4": (0.0, 1e-3, "absolute, scaled by max(1, L1)"),
    "round_s2": (0.0, 1e-3, "absolute, scaled by max(1, L1)"),
    "fubini_study_cp2": (3.0, 2e-2, "relative, on the absolute value"),
}


def task_integrate(name: str, k: int, grid: Optional[int], tol: Optional[float],
                   threads: Optional[int], params: Dict[str, str]) -> dict:
    if name not in FIXTURES:
        raise TaskError(f"unknown fixture {name!r}; known: {', '.join(FIXTURES)}")
    kw = {}
    if "seed" in params:
        kw["seed"] = int(params["seed"])
    if "eps" in params:
        kw["eps"] = params["eps"]
    fx = fixture(name, grid, **kw)
    dens = characteristic_density(fx, k)
    t0 = time.perf_counter()
    val = dens.integral(fx.domain, threads)
    l1 = dens.l1_norm(fx.domain, threads)
    runtime = time.perf_counter() - t0
    expected, default_tol, kind = _EXPECTED[name]
    tol = default_tol if tol is None else tol
    if expected == 0.0:
        err = abs(val)
        ok = err <= tol * max(1.0, l1)
    else:
        err = abs(abs(val) - expected) / expected
        ok = err <= tol
    return {
        "task": "integrate",
        "status": "pass" if ok else "fail",
        "fixture": fx.name,
        "k": k,
        "grid": fx.domain.resolution,
        "value_re": _num(val.real),
        "value_im": _num(val.imag),
        "l1_norm": _num(l1),
        "expected_abs": _num(expected),
        "tol": _num(tol),
        "tol_kind": kind,
        "deviation": _num(err),
        "orientation": fx.orientation_note,
        "runtime_s": _num(runtime),
    }


# ---------------------------------------------------------------------------
# manifest execution


def _int(params: Dict[str, str], key: str, default=None) -> Optional[int]:
    if key not in params:
        return default
    try:
        return int(params[key])
    except ValueError:
        raise TaskError(f"{key} must be an integer, got {params[key]!r}") from None


def run_task(man: Manifest, task: Task, threads: Optional[int]) -> dict:
    p = task.params
    if task.name == "verify-closed":
        return task_verify_closed(_int(p, "n", man.n), _int(p, "k", 1))
    if task.name == "transition-check":
        if "map" in p:
            t = builtin_transition(p["map"], man.n)
            label = p["map"]
        elif man.has_transition:
            try:
                t = ChartTransition.make([man.forward[i] for i in range(1, man.n + 1)],
                                         [man.inverse[i] for i in range(1, man.n + 1)])
            except ValueError as exc:
                raise TaskError(str(exc)) from None
            label = "manifest"
        else:
            raise TaskError("transition-check needs a [transition] block or map=<name>")
        return task_transition_check(t, label, _int(p, "k"))
    if task.name == "pullback":
        return task_pullback(man, p.get("source", "connection"), p.get("form", "omega"),
                             _int(p, "k"))
    if task.name == "integrate":
        if "fixture" not in p:
            raise TaskError("integrate needs fixture=<name>")
        tol = float(p["tol"]) if "tol" in p else None
        return task_integrate(p["fixture"], _int(p, "k", 2), _int(p, "grid"), tol, threads, p)
    raise TaskError(f"unknown task {task.name!r}")


def _failed(name: str, exc: Exception, line: Optional[int] = None) -> dict:
    rec = {"task": name, "status": "fail", "error": str(exc)}
    if line is not None:
        rec["line"] = line
    return rec


def run_manifest(man: Manifest, timing: bool, threads: Optional[int]) -> List[dict]:
    out = []
    for task in man.tasks:
        try:
            out.append(_timed(lambda: run_task(man, task, threads), timing))
        except (TaskError, ValueError, ArithmeticError) as exc:
            rec = _failed(task.name, exc, task.line)
            rec["wall_time"] = None
            out.append(rec)
    return out


# ---------------------------------------------------------------------------
# entry points


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, help="base dimension")
    common.add_argument("--k", type=int, help="form order")
    common.add_argument("--grid", type=int, help="quadrature points per axis")
    common.add_argument("--tol", type=float, help="tolerance for numeric checks")
    common.add_argument("--manifest", help="manifest file")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--no-timing", action="store_true",
                        help="report null wall times so output is byte-stable")

    ap = argparse.ArgumentParser(prog="thetahat", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("verify-closed", parents=[common], help="expand d(omega_k) exactly")
    tc = sub.add_parser("transition-check", parents=[common], help="check the chart transition law")
    tc.add_argument("--map", choices=("identity", "linear", "quadratic"), default=None,
                    help="built-in chart change (default: quadratic, or the manifest's)")
    pb = sub.add_parser("pullback", parents=[common], help="pull forms back along a section")
    pb.add_argument("--source", choices=("connection", "metric"), default="connection")
    pb.add_argument("--form", choices=("omega", "theta", "Theta"), default="omega")
    it = sub.add_parser("integrate", parents=[common], help="integrate a characteristic form")
    it.add_argument("--fixture", choices=FIXTURES, required=True)
    it.add_argument("--seed", type=int, default=None)
    it.add_argument("--eps", default=None)
    sub.add_parser("report", parents=[common], help="run every task in a manifest")
    return ap


def _load(path: Optional[str]) -> Optional[Manifest]:
    if path is None:
        return None
    with open(path, encoding="utf-8") as fh:
        return parse_manifest(fh.read())


def build_report(args) -> List[dict]:
    timing = not args.no_timing
    threads = thread_count()
    man = _load(args.manifest)
    cmd = args.command
    if cmd == "report":
        if man is None:
            raise TaskError("report needs --manifest")
        return run_manifest(man, timing, threads)
    if cmd == "verify-closed":
        n = args.n if args.n is not None else (man.n if man else None)
        if n is None:
            raise TaskError("verify-closed needs --n")
        ks = [args.k] if args.k is not None else list(range(1, n // 2 + 1)) or [1]
        return [_timed(lambda k=k: task_verify_closed(n, k), timing) for k in ks]
    if cmd == "transition-check":
        if man is not None and args.map is None and man.has_transition:
            params = {} if args.k is None else {"k": str(args.k)}
            return run_manifest(Manifest(man.n, forward=man.forward, inverse=man.inverse,
                                         tasks=[Task("transition-check", params, 0)]),
                                timing, threads)
        n = args.n if args.n is not None else (man.n if man else 2)
        name = args.map or "quadratic"
        t = builtin_transition(name, n)
        return [_timed(lambda: task_transition_check(t, name, args.k), timing)]
    if cmd == "pullback":
        if man is None:
            raise TaskError("pullback needs --manifest")
        k = args.k if args.k is not None else (1 if args.form == "omega" else None)
        return [_timed(lambda: task_pullback(man, args.source, args.form, k), timing)]
    if cmd == "integrate":
        params = {}
        if args.seed is not None:
            params["seed"] = str(args.seed)
        if args.eps is not None:
            params["eps"] = args.eps
        k = args.k if args.k is not None else 2
        return [_timed(lambda: task_integrate(args.fixture, k, args.grid, args.tol, threads,
                                              params), timing)]
    raise TaskError(f"unknown command {cmd!r}")


def render_report(tasks: List[dict]) -> str:
    status = "pass" if all(t["status"] != "fail" for t in tasks) else "fail"
    doc = {"schema": SCHEMA, "version": __version__, "status": status, "tasks": tasks}
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        tasks = build_report(args)
    except (DSLSyntaxError, ManifestError) as exc:
        tasks = [dict(_failed(args.command, exc), line=exc.line, column=exc.column)]
    except (TaskError, ValueError, ArithmeticError) as exc:
        tasks = [_failed(args.command, exc)]
    except OSError as exc:
        print(f"thetahat: {exc}", file=sys.stderr)
        return 2
    text = render_report(tasks)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if all(t["status"] != "fail" for t in tasks) else 1


if __name__ == "__main__":
    sys.exit(main())
