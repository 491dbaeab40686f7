"""Solver-agnostic MILP container and LP text (CPLEX dialect) serialization."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

BINARY = "binary"
CONTINUOUS = "continuous"
INTEGER = "integer"

LE, EQ, GE = "<=", "=", ">="


class ModelError(ValueError):
    pass


@dataclass
class Variable:
    name: str
    kind: str = CONTINUOUS
    lb: float = 0.0
    ub: float = math.inf


@dataclass
class Constraint:
    name: str
    coeffs: dict[int, float]
    sense: str
    rhs: float


@dataclass
class SolveOptions:
    gap: float = 1e-3
    time_limit: float = 600.0
    int_tol: float = 1e-6
    seed: int = 0
    backend: str = "highs"

    def __post_init__(self):
        if self.gap < 0:
            raise ValueError("gap must be >= 0")
        if self.time_limit <= 0:
            raise ValueError("time limit must be > 0")


class MilpModel:
    """Variables, linear rows and a linear objective, all addressed by name.

    ``meta`` maps ``(tag, entity, hour)`` keys to variable ids and ``notes``
    carries free-form per-row annotations (big-M values, for instance).
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.obj_constant = 0.0
        self.meta: dict[tuple, int] = {}
        self.notes: dict[str, dict] = {}
        self._var_index: dict[str, int] = {}
        self._row_index: dict[str, int] = {}

    # construction -------------------------------------------------------
    def add_var(self, name: str, kind: str = CONTINUOUS, lb: float = 0.0, ub: float = math.inf,
                key: tuple | None = None) -> int:
        if name in self._var_index:
            raise ModelError(f"duplicate variable name {name}")
        if kind == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub:
            raise ModelError(f"variable {name}: lb {lb} > ub {ub}")
        vid = len(self.variables)
        self.variables.append(Variable(name, kind, float(lb), float(ub)))
        self._var_index[name] = vid
        if key is not None:
            self.meta[key] = vid
        return vid

    def add_constraint(self, name: str, coeffs: Mapping[int, float] | Iterable[tuple[int, float]],
                       sense: str, rhs: float) -> int:
        if name in self._row_index:
            raise ModelError(f"duplicate constraint name {name}")
        if sense not in (LE, EQ, GE):
            raise ModelError(f"constraint {name}: bad sense {sense!r}")
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        merged: dict[int, float] = {}
        n = len(self.variables)
        for vid, c in items:
            if not 0 <= vid < n:
                raise ModelError(f"constraint {name}: unknown variable id {vid}")
            merged[vid] = merged.get(vid, 0.0) + float(c)
        merged = {k: v for k, v in merged.items() if v != 0.0}
        rid = len(self.constraints)
        self.constraints.append(Constraint(name, merged, sense, float(rhs)))
        self._row_index[name] = rid
        return rid

    def add_objective(self, coeffs: Mapping[int, float] | Iterable[tuple[int, float]]) -> None:
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        for vid, c in items:
            self.objective[vid] = self.objective.get(vid, 0.0) + float(c)

    def add_to_row(self, row: str, vid: int, coef: float) -> None:
        r = self.constraints[self._row_index[row]]
        r.coeffs[vid] = r.coeffs.get(vid, 0.0) + coef

    # lookup ---------------------------------------------------------------
    def var(self, name: str) -> int:
        try:
            return self._var_index[name]
        except KeyError:
            raise KeyError(f"no variable named {name}") from None

    def has_var(self, name: str) -> bool:
        return name in self._var_index

    def row(self, name: str) -> Constraint:
        try:
            return self.constraints[self._row_index[name]]
        except KeyError:
            raise KeyError(f"no constraint named {name}") from None

    def has_row(self, name: str) -> bool:
        return name in self._row_index

    def rows_with_prefix(self, prefix: str) -> list[Constraint]:
        return [c for c in self.constraints if c.name.startswith(prefix)]

    def vars_with_prefix(self, prefix: str) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.name.startswith(prefix)]

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.constraints)

    def count(self, kind: str) -> int:
        return sum(1 for v in self.variables if v.kind == kind)

    # numerics ---------------------------------------------------------------
    def to_arrays(self):
        """Return ``c, A, row_lb, row_ub, lb, ub, integrality`` for array-based solvers."""
        n = self.n_vars
        c = np.zeros(n)
        for vid, v in self.objective.items():
            c[vid] = v
        rows, cols, vals = [], [], []
        rlb = np.empty(self.n_rows)
        rub = np.empty(self.n_rows)
        for i, con in enumerate(self.constraints):
            for vid, v in con.coeffs.items():
                rows.append(i)
                cols.append(vid)
                vals.append(v)
            rlb[i] = con.rhs if con.sense in (GE, EQ) else -np.inf
            rub[i] = con.rhs if con.sense in (LE, EQ) else np.inf
        A = sp.csr_matrix((vals, (rows, cols)), shape=(self.n_rows, n))
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        integ = np.array([0 if v.kind == CONTINUOUS else 1 for v in self.variables])
        return c, A, rlb, rub, lb, ub, integ

    def objective_value(self, values: Mapping[str, float] | np.ndarray) -> float:
        x = self._as_array(values)
        return self.obj_constant + sum(c * x[vid] for vid, c in self.objective.items())

    def _as_array(self, values) -> np.ndarray:
        if isinstance(values, np.ndarray):
            return values
        x = np.zeros(self.n_vars)
        for name, val in values.items():
            x[self.var(name)] = val
        return x

    def copy(self) -> "MilpModel":
        import copy

        return copy.deepcopy(self)

    def fix(self, name: str, value: float) -> None:
        v = self.variables[self.var(name)]
        v.lb = v.ub = float(value)


# LP text format -------------------------------------------------------------

_LP_NAME_MAP = str.maketrans({"[": "(", "]": ")"})
_LP_NAME_UNMAP = str.maketrans({"(": "[", ")": "]"})
_LINE_WIDTH = 200


def _lp_name(name: str) -> str:
    return name.translate(_LP_NAME_MAP)


def _num(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def _terms(coeffs: Mapping[int, float], model: MilpModel) -> list[str]:
    out = []
    for vid, c in coeffs.items():
        if c == 0.0:
            continue  # the parser drops them too, so keep column order stable
        sign = "-" if c < 0 else "+"
        out.append(f"{sign} {_num(abs(c))} {_lp_name(model.variables[vid].name)}")
    return out


def _wrap(prefix: str, terms: list[str], suffix: str = "") -> list[str]:
    lines, cur = [], prefix
    for t in terms:
        if len(cur) + len(t) + 1 > _LINE_WIDTH and cur.strip():
            lines.append(cur)
            cur = "   "
        cur += " " + t
    if suffix:
        cur += " " + suffix
    lines.append(cur)
    return lines


def write_lp(model: MilpModel) -> str:
    """Serialize ``model`` to LP text; names map ``[...]`` to ``(...)``."""
    lines = [f"\\ Model {model.name}", f"\\ objective constant: {_num(model.obj_constant)}", "Minimize"]
    obj_terms = _terms(model.objective, model) or ["0 " + _lp_name(model.variables[0].name)] if model.variables else []
    lines += _wrap(" obj:", obj_terms)
    lines.append("Subject To")
    for con in model.constraints:
        terms = _terms(con.coeffs, model)
        if not terms:
            terms = ["0 " + _lp_name(model.variables[0].name)]
        lines += _wrap(f" {_lp_name(con.name)}:", terms, f"{con.sense} {_num(con.rhs)}")
    lines.append("Bounds")
    for v in model.variables:
        n = _lp_name(v.name)
        if v.kind == BINARY and v.lb == 0.0 and v.ub == 1.0:
            continue
        if math.isinf(v.lb) and math.isinf(v.ub):
            lines.append(f" {n} free")
        elif v.lb == v.ub:
            lines.append(f" {n} = {_num(v.lb)}")
        else:
            lines.append(f" {_num(v.lb)} <= {n} <= {_num(v.ub)}")
    bins = [_lp_name(v.name) for v in model.variables if v.kind == BINARY]
    ints = [_lp_name(v.name) for v in model.variables if v.kind == INTEGER]
    if ints:
        lines.append("General")
        lines += _wrap("", ints)
    if bins:
        lines.append("Binary")
        lines += _wrap("", bins)
    lines.append("End")
    return "\n".join(lines) + "\n"


_SECTION = {
    "minimize": "obj", "minimise": "obj", "min": "obj",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "binary": "bin", "binaries": "bin", "bin": "bin",
    "general": "gen", "generals": "gen", "gen": "gen", "end": "end",
}


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _parse_expr(text: str) -> list[tuple[str, float]]:
    """Whitespace-tokenized linear expression: ``[sign] [coef] name ...``."""
    out = []
    sign, coef = 1.0, None
    for tok in text.split():
        if tok in ("+", "-"):
            sign = -1.0 if tok == "-" else 1.0
        elif _is_number(tok) and tok.lower() not in ("inf", "infinity", "nan"):
            coef = float(tok)
        else:
            if tok[0] in "+-" and len(tok) > 1:
                sign, tok = (-1.0 if tok[0] == "-" else 1.0), tok[1:]
            out.append((tok, sign * (1.0 if coef is None else coef)))
            sign, coef = 1.0, None
    return out


def parse_lp(text: str) -> MilpModel:
    """Parse LP text written by :func:`write_lp` (and simple hand-written files)."""
    model = MilpModel()
    section = None
    buf: list[str] = []
    obj_const = 0.0
    statements: dict[str, list[str]] = {"obj": [], "st": [], "bounds": [], "bin": [], "gen": []}

    def flush():
        if buf and section in statements:
            statements[section].append(" ".join(buf))
        buf.clear()

    for raw in text.splitlines():
        if raw.startswith("\\"):
            m = re.match(r"\\\s*objective constant:\s*(\S+)", raw)
            if m:
                obj_const = float(m.group(1))
            m = re.match(r"\\\s*Model\s+(\S+)", raw)
            if m:
                model.name = m.group(1)
            continue
        line = raw.strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTION:
            flush()
            section = _SECTION[key]
            if section == "end":
                break
            continue
        if section in ("obj", "st"):
            if ":" in line:
                flush()
            buf.append(line)
        else:
            flush()
            statements.setdefault(section, []).append(line)
    flush()

    # kept in text order (General is written before Binary) so a second round trip reproduces the columns
    declared: dict[str, str] = {}
    for line in statements["gen"]:
        for n in line.split():
            declared[n] = INTEGER
    for line in statements["bin"]:
        for n in line.split():
            declared[n] = BINARY

    def vid(name: str) -> int:
        if not model.has_var(name.translate(_LP_NAME_UNMAP)):
            kind = declared.get(name, CONTINUOUS)
            model.add_var(name.translate(_LP_NAME_UNMAP), kind, 0.0, 1.0 if kind == BINARY else math.inf)
        return model.var(name.translate(_LP_NAME_UNMAP))

    rows = []
    for stmt in statements["st"]:
        name, _, body = stmt.partition(":")
        m = re.match(r"(.*?)(<=|>=|=<|=>|=|<|>)\s*(\S+)\s*$", body)
        if not m:
            raise ModelError(f"cannot parse constraint {stmt[:60]!r}")
        expr, sense, rhs = m.groups()
        sense = {"=<": LE, "<": LE, "=>": GE, ">": GE}.get(sense, sense)
        rows.append((name.strip(), _parse_expr(expr), sense, float(rhs)))

    obj = []
    for stmt in statements["obj"]:
        _, _, body = stmt.partition(":") if ":" in stmt else ("", "", stmt)
        obj = _parse_expr(body)

    # variable order: first appearance in objective, then rows, then bounds/declarations
    # zero-coefficient terms are placeholders and do not fix a column's position
    for n, c in obj:
        if c != 0.0:
            vid(n)
    for _, expr, _, _ in rows:
        for n, c in expr:
            if c != 0.0:
                vid(n)
    for line in statements["bounds"]:
        toks = line.replace("<=", " <= ").split()
        if len(toks) == 2 and toks[1].lower() == "free":
            v = model.variables[vid(toks[0])]
            v.lb, v.ub = -math.inf, math.inf
        elif len(toks) == 3 and toks[1] == "=":
            v = model.variables[vid(toks[0])]
            v.lb = v.ub = float(toks[2])
        elif len(toks) == 5:
            v = model.variables[vid(toks[2])]
            v.lb, v.ub = float(toks[0]), float(toks[4])
        elif len(toks) == 3 and toks[1] == "<=":
            try:
                lb = float(toks[0])
                model.variables[vid(toks[2])].lb = lb
            except ValueError:
                model.variables[vid(toks[0])].ub = float(toks[2])
        else:
            raise ModelError(f"cannot parse bound {line!r}")
    for n in declared:
        vid(n)
    for n, _ in obj + [t for _, expr, _, _ in rows for t in expr]:
        vid(n)

    # zero-coefficient placeholder terms keep empty rows/objective parseable
    model.add_objective((model.var(n.translate(_LP_NAME_UNMAP)), c) for n, c in obj if c != 0.0)
    model.objective = {k: v for k, v in model.objective.items() if v != 0.0}
    model.obj_constant = obj_const
    for name, expr, sense, rhs in rows:
        model.add_constraint(
            name.translate(_LP_NAME_UNMAP),
            [(model.var(n.translate(_LP_NAME_UNMAP)), c) for n, c in expr],
            sense,
            rhs,
        )
    return model


def models_equal(a: MilpModel, b: MilpModel) -> bool:
    """Byte equality of the serialized models (same names, order and coefficients)."""
    return write_lp(a) == write_lp(b)


def canonical_form(model: MilpModel) -> tuple:
    """Order-independent description used to compare a model with its parsed LP text."""
    names = [v.name for v in model.variables]
    vars_ = sorted((v.name, v.kind, v.lb, v.ub) for v in model.variables)
    rows = sorted(
        (c.name, c.sense, c.rhs, tuple(sorted((names[k], v) for k, v in c.coeffs.items())))
        for c in model.constraints
    )
    obj = tuple(sorted((names[k], v) for k, v in model.objective.items() if v != 0.0))
    return vars_, rows, obj, model.obj_constant
