"""Plain-text LP export (CPLEX-LP-style sections) and the matching reader.

The format is deliberately simple and exact:

    Minimize
     obj: <coef> <var> + <coef> <var> - ...
    Subject To
     <rowname>: <terms> = <rhs>        (equality rows first, build order)
     <rowname>: <terms> <= <rhs>       (inequality rows, build order)
    Bounds
     <lb> <= <var> <= <ub>             (with -inf / +inf spelled out)
     <var> free
    End

Coefficients are printed with 17 significant digits, so a file read back by
`read_lp_text` reproduces the original coefficients exactly.  The objective
line lists every variable (zeros included) to pin down the column order.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .formulation import StandardFormLP, VariableMap

__all__ = ["export_lp_text", "read_lp_text", "LpTextError"]


class LpTextError(ValueError):
    """Malformed LP text file."""


def _num(value: float) -> str:
    return f"{value:.17g}"


def _terms(names, cols, coefs) -> str:
    if len(cols) == 0:
        return f"0 {names[0]}"
    parts = []
    for idx, (j, v) in enumerate(zip(cols, coefs)):
        mag = _num(abs(v))
        if idx == 0:
            parts.append(f"{_num(v)} {names[j]}")
        elif v < 0 or (v == 0 and math.copysign(1.0, v) < 0):
            parts.append(f"- {mag} {names[j]}")
        else:
            parts.append(f"+ {mag} {names[j]}")
    return " ".join(parts)


def export_lp_text(lp: StandardFormLP, vmap: VariableMap | None, path) -> Path:
    """Write `lp` to `path`; variable names come from `vmap` when given."""
    n = lp.n_vars
    if vmap is not None:
        names = vmap.var_names()
        if len(names) != n:
            raise ValueError("variable map does not match the LP width")
    else:
        names = [f"x{j}" for j in range(n)]

    eq_names = lp.eq_names or [f"r_eq_{i + 1}" for i in range(lp.a_eq.shape[0])]
    ub_names = lp.ub_names or [f"r_ub_{i + 1}" for i in range(lp.a_ub.shape[0])]

    lines = ["Minimize"]
    obj_cols = np.arange(n)
    lines.append(" obj: " + _terms(names, obj_cols, lp.c))
    lines.append("Subject To")
    for mat, rhs, row_names, sense in (
        (lp.a_eq.tocsr(), lp.b_eq, eq_names, "="),
        (lp.a_ub.tocsr(), lp.b_ub, ub_names, "<="),
    ):
        for i in range(mat.shape[0]):
            start, end = mat.indptr[i], mat.indptr[i + 1]
            cols = mat.indices[start:end]
            coefs = mat.data[start:end]
            order = np.argsort(cols, kind="stable")
            lines.append(
                f" {row_names[i]}: {_terms(names, cols[order], coefs[order])} "
                f"{sense} {_num(rhs[i])}"
            )
    lines.append("Bounds")
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if lo == -np.inf and hi == np.inf:
            lines.append(f" {names[j]} free")
        else:
            lo_text = "-inf" if lo == -np.inf else _num(lo)
            hi_text = "+inf" if hi == np.inf else _num(hi)
            lines.append(f" {lo_text} <= {names[j]} <= {hi_text}")
    lines.append("End")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _parse_bound(token: str) -> float:
    if token == "-inf":
        return -math.inf
    if token in ("+inf", "inf"):
        return math.inf
    return float(token)


def _parse_terms(tokens, var_index, where) -> list[tuple[int, float]]:
    out = []
    sign = 1.0
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok == "+":
            sign = 1.0
            i += 1
            continue
        if tok == "-":
            sign = -1.0
            i += 1
            continue
        try:
            coef = float(tok)
        except ValueError:
            raise LpTextError(f"{where}: expected a coefficient, got {tok!r}") from None
        if i + 1 >= len(tokens):
            raise LpTextError(f"{where}: dangling coefficient {tok!r}")
        var = tokens[i + 1]
        if var not in var_index:
            raise LpTextError(f"{where}: unknown variable {var!r}")
        out.append((var_index[var], sign * coef))
        sign = 1.0
        i += 2
    return out


def read_lp_text(path) -> tuple[StandardFormLP, list[str]]:
    """Parse a file produced by export_lp_text back into a StandardFormLP."""
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines()]
    lines = [ln for ln in lines if ln]
    section = None
    var_names: list[str] = []
    var_index: dict[str, int] = {}
    c = None
    eq_rows, ub_rows = [], []  # (name, terms, rhs)
    bounds_seen: dict[int, tuple[float, float]] = {}

    for ln in lines:
        low = ln.lower()
        if low == "minimize":
            section = "objective"
            continue
        if low == "subject to":
            section = "rows"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low == "end":
            section = "end"
            continue
        if section == "objective":
            if not ln.startswith("obj:"):
                raise LpTextError(f"{path}: objective line must start with 'obj:'")
            tokens = ln[4:].split()
            # First pass registers variables in order of appearance.
            expect_var = False
            for tok in tokens:
                if tok in ("+", "-"):
                    continue
                if expect_var:
                    if tok not in var_index:
                        var_index[tok] = len(var_names)
                        var_names.append(tok)
                    expect_var = False
                else:
                    expect_var = True
            c = np.zeros(len(var_names))
            for j, v in _parse_terms(tokens, var_index, f"{path}: objective"):
                c[j] = v
        elif section == "rows":
            if ":" not in ln:
                raise LpTextError(f"{path}: row without a name: {ln!r}")
            name, rest = ln.split(":", 1)
            tokens = rest.split()
            sense = None
            for idx, tok in enumerate(tokens):
                if tok in ("<=", "="):
                    sense = tok
                    break
            if sense is None:
                raise LpTextError(f"{path}: row {name!r} has no relational operator")
            rhs = float(tokens[idx + 1])
            terms = _parse_terms(tokens[:idx], var_index, f"{path}: row {name}")
            if sense == "=":
                eq_rows.append((name.strip(), terms, rhs))
            else:
                ub_rows.append((name.strip(), terms, rhs))
        elif section == "bounds":
            tokens = ln.split()
            if len(tokens) == 2 and tokens[1] == "free":
                j = var_index.get(tokens[0])
                if j is None:
                    raise LpTextError(f"{path}: bounds for unknown variable {tokens[0]!r}")
                bounds_seen[j] = (-math.inf, math.inf)
            elif len(tokens) == 5 and tokens[1] == "<=" and tokens[3] == "<=":
                j = var_index.get(tokens[2])
                if j is None:
                    raise LpTextError(f"{path}: bounds for unknown variable {tokens[2]!r}")
                bounds_seen[j] = (_parse_bound(tokens[0]), _parse_bound(tokens[4]))
            else:
                raise LpTextError(f"{path}: unrecognized bounds line {ln!r}")
        elif section is None:
            raise LpTextError(f"{path}: content before the objective sense line: {ln!r}")

    if c is None:
        raise LpTextError(f"{path}: missing objective")
    n = len(var_names)

    def assemble(rows):
        data, ri, ci = [], [], []
        rhs = np.zeros(len(rows))
        names = []
        for i, (name, terms, b) in enumerate(rows):
            names.append(name)
            rhs[i] = b
            for j, v in terms:
                if v != 0.0:
                    ri.append(i)
                    ci.append(j)
                    data.append(v)
        mat = sp.coo_matrix((data, (ri, ci)), shape=(len(rows), n)).tocsr()
        return mat, rhs, names

    a_eq, b_eq, eq_names = assemble(eq_rows)
    a_ub, b_ub, ub_names = assemble(ub_rows)
    lower = np.zeros(n)
    upper = np.full(n, math.inf)
    for j, (lo, hi) in bounds_seen.items():
        lower[j] = lo
        upper[j] = hi
    lp = StandardFormLP(
        c=c,
        a_eq=a_eq,
        b_eq=b_eq,
        a_ub=a_ub,
        b_ub=b_ub,
        lower=lower,
        upper=upper,
        eq_names=eq_names or None,
        ub_names=ub_names or None,
    )
    return lp, var_names
