"""
JSON problem files and solve reports.

A problem file holds exactly one of

    {"quadratic": {"M": [[...]], "lin": [...], "offset": 0.0}, ...}
    {"least_squares": {"C": [[...]], "obs": [...]}, ...}

plus "gamma", optional "A"/"b" (A x >= b) and optional "g_quad": {"P", "c"}.
Matrices are row-major nested arrays. Floats are written with repr, the
shortest string that parses back to the same double.
"""

from __future__ import annotations

import json
import math
from importlib.resources import files
from pathlib import Path

import jsonschema
import numpy as np

from .errors import L0MpccError, ProblemFileError
from .problem import Problem, QuadraticTerm
from .storage import _local_path, write_text_atomic

SCHEMA_VERSION = 1


# ---- Generic JSON helpers ---------------------------------------------------


def read_json(path: str | Path) -> dict:
    final = _local_path(path)
    try:
        text = final.read_text(encoding="utf-8")
    except OSError as e:
        raise ProblemFileError("<file>", f"cannot read {final}: {e.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemFileError("<json>", f"line {e.lineno} column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ProblemFileError("<root>", "expected a JSON object")
    return doc


def load_schema(name: str) -> dict:
    return json.loads(files("l0_mpcc").joinpath("schemas", name).read_text(encoding="utf-8"))


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


# ---- Field readers ----------------------------------------------------------


def _number(v, field: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ProblemFileError(field, f"expected a number, got {type(v).__name__}")
    if not math.isfinite(v):
        raise ProblemFileError(field, "must be finite")
    return float(v)


def _vector(v, field: str) -> np.ndarray:
    if not isinstance(v, list):
        raise ProblemFileError(field, f"expected an array, got {type(v).__name__}")
    return np.array([_number(x, f"{field}[{i}]") for i, x in enumerate(v)], dtype=float)


def _matrix(v, field: str, cols: int | None = None) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise ProblemFileError(field, "expected a non-empty array of rows")
    rows = [_vector(r, f"{field}[{i}]") for i, r in enumerate(v)]
    width = cols if cols is not None else rows[0].shape[0]
    for i, r in enumerate(rows):
        if r.shape[0] != width:
            raise ProblemFileError(f"{field}[{i}]", f"row has {r.shape[0]} entries, expected {width}")
    return np.vstack(rows)


def _object(doc: dict, key: str) -> dict:
    v = doc[key]
    if not isinstance(v, dict):
        raise ProblemFileError(key, f"expected an object, got {type(v).__name__}")
    return v


def _require(doc: dict, key: str, prefix: str = "") -> object:
    if key not in doc:
        raise ProblemFileError(f"{prefix}{key}", "missing")
    return doc[key]


# ---- Problem files ----------------------------------------------------------


def problem_from_dict(doc: dict) -> Problem:
    forms = [k for k in ("quadratic", "least_squares") if k in doc]
    if len(forms) != 1:
        raise ProblemFileError("<root>", "exactly one of 'quadratic' or 'least_squares' is required")
    gamma = _number(_require(doc, "gamma"), "gamma")
    if not gamma > 0:
        raise ProblemFileError("gamma", f"must be positive, got {gamma}")

    if forms[0] == "quadratic":
        q = _object(doc, "quadratic")
        lin = _vector(_require(q, "lin", "quadratic."), "quadratic.lin")
        n = lin.shape[0]
        if n == 0:
            raise ProblemFileError("quadratic.lin", "dimension must be positive")
        M = _matrix(_require(q, "M", "quadratic."), "quadratic.M", cols=n)
        if M.shape[0] != n:
            raise ProblemFileError("quadratic.M", f"has {M.shape[0]} rows, expected {n}")
        offset = _number(q.get("offset", 0.0), "quadratic.offset")
    else:
        ls = _object(doc, "least_squares")
        C = _matrix(_require(ls, "C", "least_squares."), "least_squares.C")
        obs = _vector(_require(ls, "obs", "least_squares."), "least_squares.obs")
        if obs.shape[0] != C.shape[0]:
            raise ProblemFileError("least_squares.obs", f"has {obs.shape[0]} entries, C has {C.shape[0]} rows")
        n = C.shape[1]

    g_quad = None
    if "g_quad" in doc:
        g = _object(doc, "g_quad")
        c = _vector(_require(g, "c", "g_quad."), "g_quad.c")
        if c.shape[0] != n:
            raise ProblemFileError("g_quad.c", f"has {c.shape[0]} entries, expected {n}")
        P = _matrix(_require(g, "P", "g_quad."), "g_quad.P", cols=n)
        if P.shape[0] != n:
            raise ProblemFileError("g_quad.P", f"has {P.shape[0]} rows, expected {n}")
        try:
            g_quad = QuadraticTerm(P=P, c=c)
        except L0MpccError as e:
            raise ProblemFileError("g_quad.P", str(e)) from None

    A = b = None
    if ("A" in doc) != ("b" in doc):
        raise ProblemFileError("A" if "b" in doc else "b", "A and b must be given together")
    if "A" in doc:
        b = _vector(doc["b"], "b")
        A = _matrix(doc["A"], "A", cols=n)
        if A.shape[0] != b.shape[0]:
            raise ProblemFileError("b", f"has {b.shape[0]} entries, A has {A.shape[0]} rows")

    try:
        if forms[0] == "quadratic":
            return Problem(M=M, lin=lin, gamma=gamma, g_quad=g_quad, A=A, b=b, offset=offset)
        return Problem.from_least_squares(C, obs, gamma, g_quad=g_quad, A=A, b=b)
    except L0MpccError as e:
        raise ProblemFileError(forms[0], str(e)) from None


def problem_to_dict(p: Problem) -> dict:
    doc = {
        "schema": SCHEMA_VERSION,
        "quadratic": {"M": p.M.tolist(), "lin": p.lin.tolist(), "offset": p.offset},
        "gamma": p.gamma,
    }
    if p.g_quad is not None:
        doc["g_quad"] = {"P": p.g_quad.P.tolist(), "c": p.g_quad.c.tolist()}
    if p.A is not None:
        doc["A"] = p.A.tolist()
        doc["b"] = p.b.tolist()
    return doc


def least_squares_to_dict(C: np.ndarray, obs: np.ndarray, gamma: float) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "least_squares": {"C": np.asarray(C).tolist(), "obs": np.asarray(obs).tolist()},
        "gamma": float(gamma),
    }


def load_problem(path: str | Path) -> Problem:
    return problem_from_dict(read_json(path))


def save_problem(p: Problem, path: str | Path) -> Path:
    return write_text_atomic(dumps(problem_to_dict(p)), path)


# ---- Solve reports ----------------------------------------------------------


def finite_or_none(v: float | None) -> float | None:
    return None if v is None or not math.isfinite(v) else float(v)


def validate_solve_report(report: dict) -> None:
    try:
        jsonschema.validate(instance=report, schema=load_schema("solve_report.schema.json"))
    except jsonschema.ValidationError as e:
        path = ".".join(str(part) for part in e.absolute_path) or "<root>"
        raise ProblemFileError(path, f"solve report does not match its schema: {e.message}") from None


def write_solve_report(report: dict, path: str | Path) -> Path:
    validate_solve_report(report)
    return write_text_atomic(dumps(report), path)
