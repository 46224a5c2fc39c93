"""Plain-text manifest format.

Example::

    # quadratic chart change on a 2-dimensional chart
    [chart]
    n = 2

    [connection]
    Gamma[1][2][2] = x1

    [metric]
    g[1][1] = 4/(1 + x1^2 + x2^2)^2
    g[2][2] = 4/(1 + x1^2 + x2^2)^2

    [transition]
    forward[1] = x1
    forward[2] = x2 + x1^2
    inverse[1] = x1
    inverse[2] = x2 - x1^2

    [tasks]
    verify-closed k=1
    transition-check
    pullback source=connection form=omega k=1
    integrate fixture=flat_t4 k=2 grid=16

``#`` starts a comment.  Every expression is in the DSL of ``thetahat.dsl``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .dsl import DSLSyntaxError, parse_expr
from .symkernel import Expr

TASKS = ("verify-closed", "transition-check", "pullback", "integrate")
SECTIONS = ("chart", "connection", "metric", "transition", "tasks")


@dataclass
class Task:
    name: str
    params: Dict[str, str]
    line: int


@dataclass
class Manifest:
    n: int
    connection: Dict[Tuple[int, int, int], Expr] = field(default_factory=dict)
    metric: Dict[Tuple[int, int], Expr] = field(default_factory=dict)
    forward: Dict[int, Expr] = field(default_factory=dict)
    inverse: Dict[int, Expr] = field(default_factory=dict)
    tasks: List[Task] = field(default_factory=list)

    @property
    def has_transition(self) -> bool:
        return bool(self.forward or self.inverse)


class ManifestError(DSLSyntaxError):
    pass


def _err(msg: str, line: int, col: int = 1) -> ManifestError:
    e = ManifestError.__new__(ManifestError)
    ValueError.__init__(e, f"line {line}, column {col}: {msg}")
    e.line, e.column, e.message = line, col, msg
    return e


_KEY = re.compile(r"^(Gamma|G|g|forward|inverse)((?:\[\s*\d+\s*\])+)$")


def parse_manifest(text: str) -> Manifest:
    section: Optional[str] = None
    n: Optional[int] = None
    pending: List[Tuple[str, str, Tuple[int, ...], str, int, int]] = []
    tasks: List[Task] = []
    seen_sections = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        stripped = line.strip()
        if stripped.startswith("["):
            m = re.fullmatch(r"\[\s*([a-z]+)\s*\]", stripped)
            if not m or m.group(1) not in SECTIONS:
                raise _err(f"unknown section header {stripped!r}", lineno, indent + 1)
            section = m.group(1)
            if section in seen_sections:
                raise _err(f"duplicate section [{section}]", lineno, indent + 1)
            seen_sections.add(section)
            continue
        if section is None:
            raise _err("content before the first section header", lineno, indent + 1)
        if section == "tasks":
            parts = stripped.split()
            name = parts[0]
            if name not in TASKS:
                raise _err(f"unknown task {name!r}", lineno, indent + 1)
            params = {}
            col = indent + 1 + len(name)
            for p in parts[1:]:
                col = line.index(p, col - 1) + 1
                if "=" not in p:
                    raise _err(f"task parameter {p!r} is not key=value", lineno, col)
                k, v = p.split("=", 1)
                params[k] = v
            tasks.append(Task(name, params, lineno))
            continue
        if "=" not in stripped:
            raise _err("expected 'key = value'", lineno, indent + 1)
        key, value = stripped.split("=", 1)
        key = key.strip()
        vcol = line.index("=") + 2 + (len(value) - len(value.lstrip()))
        if section == "chart":
            if key != "n":
                raise _err(f"unknown chart key {key!r}", lineno, indent + 1)
            try:
                n = int(value)
            except ValueError:
                raise _err("n must be an integer", lineno, vcol) from None
            if n < 1:
                raise _err("n must be >= 1", lineno, vcol)
            continue
        m = _KEY.match(key.replace(" ", ""))
        if not m:
            raise _err(f"malformed key {key!r}", lineno, indent + 1)
        idx = tuple(int(t) for t in re.findall(r"\d+", m.group(2)))
        pending.append((section, m.group(1), idx, value, lineno, vcol))

    if n is None:
        raise _err("missing [chart] n = ...", 1)
    man = Manifest(n=n, tasks=tasks)
    expected = {"connection": (("Gamma", "G"), 3), "metric": (("g",), 2),
                "transition": (("forward", "inverse"), 1)}
    for section, kind, idx, value, lineno, vcol in pending:
        names, arity = expected[section]
        if kind not in names or len(idx) != arity:
            raise _err(f"key {kind}{list(idx)} does not belong in [{section}]", lineno)
        if any(i < 1 or i > n for i in idx):
            raise _err(f"index out of range 1..{n} in {kind}{list(idx)}", lineno)
        try:
            e = parse_expr(value.strip(), n=n)
        except DSLSyntaxError as exc:
            raise _err(exc.message, lineno, vcol + exc.column - 1) from None
        except ZeroDivisionError:
            raise _err("division by zero", lineno, vcol) from None
        if section == "connection":
            k, i, j = idx
            key3 = (k, min(i, j), max(i, j))
            if key3 in man.connection:
                raise _err(f"duplicate entry for symmetric slot Gamma[{k}][{key3[1]}][{key3[2]}]",
                           lineno)
            man.connection[key3] = e
        elif section == "metric":
            i, j = idx
            key2 = (min(i, j), max(i, j))
            if key2 in man.metric:
                raise _err(f"duplicate entry for symmetric slot g[{key2[0]}][{key2[1]}]", lineno)
            man.metric[key2] = e
        else:
            target = man.forward if kind == "forward" else man.inverse
            if idx[0] in target:
                raise _err(f"duplicate {kind}[{idx[0]}]", lineno)
            target[idx[0]] = e
    if man.has_transition:
        for name, target in (("forward", man.forward), ("inverse", man.inverse)):
            missing = [i for i in range(1, n + 1) if i not in target]
            if missing:
                raise _err(f"transition is missing {name}{missing}", 1)
    return man
