"""LP / fixed-form MPS writers, an MPS reader, and MIP-start / solution files.

MPS output follows the fixed-column layout (fields at columns 2, 5, 15, 25).
Names longer than eight characters push later fields right; the reader
splits on whitespace, as every mainstream solver's MPS reader does.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import ModelError
from .model import IlpModel, x_name

_SENSE_LP = {"L": "<=", "E": "=", "G": ">="}


def _num(v):
    v = float(v)
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _lp_terms(coefs, names):
    parts = []
    for k, (c, nm) in enumerate(zip(coefs, names)):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        term = nm if mag == 1 else f"{_num(mag)} {nm}"
        if k == 0:
            parts.append(f"- {term}" if sign == "-" else term)
        else:
            parts.append(f"{sign} {term}")
    return parts


def _wrap(head, parts, tail=""):
    lines = []
    line = head
    for p in parts:
        if len(line) + len(p) + 1 > 200:
            lines.append(line)
            line = "  "
        line += (" " if not line.endswith(" ") else "") + p
    if tail:
        line += " " + tail
    lines.append(line)
    return lines


def emit_lp(model):
    """CPLEX-style LP text of ``model``."""
    out = [f"\\Problem name: {model.name}", "Minimize"]
    nz = np.nonzero(model.obj)[0]
    if len(nz):
        parts = _lp_terms(model.obj[nz], [model.var_names[k] for k in nz])
    else:
        parts = [f"0 {model.var_names[0]}"]
    out += _wrap(" obj:", parts)
    out.append("Subject To")
    A = model.A
    for r, rname in enumerate(model.row_names):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        cols, vals = A.indices[lo:hi], A.data[lo:hi]
        if len(cols):
            parts = _lp_terms(vals, [model.var_names[k] for k in cols])
        else:
            parts = [f"0 {model.var_names[0]}"]
        out += _wrap(f" {rname}:", parts, f"{_SENSE_LP[model.senses[r]]} {_num(model.rhs[r])}")
    out.append("Bounds")
    for k, nm in enumerate(model.var_names):
        lb, ub = model.lb[k], model.ub[k]
        if lb == ub:
            out.append(f" {nm} = {_num(lb)}")
        elif model.integer[k] and lb == 0 and ub == 1:
            continue
        elif lb == 0 and ub == np.inf:
            continue
        else:
            lo = "-inf" if lb == -np.inf else _num(lb)
            hi = "+inf" if ub == np.inf else _num(ub)
            out.append(f" {lo} <= {nm} <= {hi}")
    binaries = [nm for k, nm in enumerate(model.var_names) if model.integer[k] and model.lb[k] >= 0 and model.ub[k] <= 1]
    generals = [nm for k, nm in enumerate(model.var_names) if model.integer[k] and not (model.lb[k] >= 0 and model.ub[k] <= 1)]
    if binaries:
        out.append("Binaries")
        out += _wrap("", binaries)
    if generals:
        out.append("Generals")
        out += _wrap("", generals)
    out.append("End")
    return "\n".join(out) + "\n"


def _mps_line(f1, f2, f3, f4):
    return f" {f1:<2} {f2:<8}  {f3:<8}  {f4}".rstrip()


def emit_mps(model):
    """Fixed-form MPS text of ``model`` (objective row ``OBJ``, minimization)."""
    out = [f"NAME          {model.name}", "ROWS", " N  OBJ"]
    out += [f" {s}  {rn}" for s, rn in zip(model.senses, model.row_names)]
    out.append("COLUMNS")
    csc = sp.csc_matrix(model.A)
    csc.sort_indices()
    in_int = False
    for k, nm in enumerate(model.var_names):
        if bool(model.integer[k]) != in_int:
            tag = "'INTORG'" if not in_int else "'INTEND'"
            out.append(_mps_line("", "MARKER", "'MARKER'", tag))
            in_int = not in_int
        if model.obj[k] != 0:
            out.append(_mps_line("", nm, "OBJ", _num(model.obj[k])))
        lo, hi = csc.indptr[k], csc.indptr[k + 1]
        for r, v in zip(csc.indices[lo:hi], csc.data[lo:hi]):
            out.append(_mps_line("", nm, model.row_names[r], _num(v)))
        if model.obj[k] == 0 and lo == hi:
            out.append(_mps_line("", nm, "OBJ", "0"))
    if in_int:
        out.append(_mps_line("", "MARKER", "'MARKER'", "'INTEND'"))
    out.append("RHS")
    for r, rn in enumerate(model.row_names):
        if model.rhs[r] != 0:
            out.append(_mps_line("", "RHS", rn, _num(model.rhs[r])))
    out.append("BOUNDS")
    for k, nm in enumerate(model.var_names):
        lb, ub = model.lb[k], model.ub[k]
        if lb == ub:
            out.append(_mps_line("FX", "BND", nm, _num(lb)))
            continue
        if lb == -np.inf and ub == np.inf:
            out.append(_mps_line("FR", "BND", nm, ""))
            continue
        if lb == -np.inf:
            out.append(_mps_line("MI", "BND", nm, ""))
        elif lb != 0:
            out.append(_mps_line("LO", "BND", nm, _num(lb)))
        if ub != np.inf:
            out.append(_mps_line("UP", "BND", nm, _num(ub)))
        elif model.integer[k]:
            out.append(_mps_line("PL", "BND", nm, ""))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def parse_mps(text):
    """Read MPS text (fixed or free layout) back into an :class:`IlpModel`."""
    name = ""
    section = None
    obj_row = None
    row_names, senses = [], []
    row_index = {}
    var_names, var_index = [], {}
    entries = {}
    obj = {}
    rhs = {}
    integer_cols = set()
    bounds = {}
    in_int = False

    def col(nm):
        if nm not in var_index:
            var_index[nm] = len(var_names)
            var_names.append(nm)
            if in_int:
                integer_cols.add(nm)
        return var_index[nm]

    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip() or raw.startswith("*"):
            continue
        tok = raw.split()
        if not raw[0].isspace():
            section = tok[0].upper()
            if section == "NAME":
                name = tok[1] if len(tok) > 1 else ""
            elif section == "ENDATA":
                break
            elif section not in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "OBJSENSE"):
                raise ModelError(f"line {lineno}: unsupported MPS section {section}")
            continue
        try:
            if section == "ROWS":
                s, rn = tok[0].upper(), tok[1]
                if s == "N":
                    if obj_row is None:
                        obj_row = rn
                    continue
                if s not in "LEG":
                    raise ModelError(f"line {lineno}: bad row type {s}")
                row_index[rn] = len(row_names)
                row_names.append(rn)
                senses.append(s)
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1].strip("'") == "MARKER":
                    in_int = tok[2].strip("'") == "INTORG"
                    continue
                c = col(tok[0])
                for rn, val in zip(tok[1::2], tok[2::2]):
                    v = float(val)
                    if rn == obj_row:
                        obj[c] = v
                    elif rn in row_index:
                        entries[(row_index[rn], c)] = v
                    else:
                        raise ModelError(f"line {lineno}: unknown row {rn}")
            elif section == "RHS":
                pairs = tok[1:] if len(tok) % 2 == 1 else tok
                for rn, val in zip(pairs[0::2], pairs[1::2]):
                    if rn != obj_row:
                        rhs[row_index[rn]] = float(val)
            elif section == "BOUNDS":
                bt, nm = tok[0].upper(), tok[2]
                val = float(tok[3]) if len(tok) > 3 else None
                bounds.setdefault(nm, []).append((bt, val))
            elif section == "OBJSENSE":
                if tok[0].upper() not in ("MIN", "MINIMIZE"):
                    raise ModelError("only minimization is supported")
        except (IndexError, ValueError, KeyError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(f"line {lineno}: malformed MPS record {raw.strip()!r}") from None

    n = len(var_names)
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    integer = np.array([nm in integer_cols for nm in var_names], dtype=bool)
    for nm, items in bounds.items():
        if nm not in var_index:
            raise ModelError(f"bound on unknown column {nm}")
        k = var_index[nm]
        for bt, val in items:
            if bt == "UP":
                ub[k] = val
            elif bt == "LO":
                lb[k] = val
            elif bt == "FX":
                lb[k] = ub[k] = val
            elif bt == "BV":
                lb[k], ub[k] = 0.0, 1.0
                integer[k] = True
            elif bt == "MI":
                lb[k] = -np.inf
            elif bt == "PL":
                ub[k] = np.inf
            elif bt == "FR":
                lb[k], ub[k] = -np.inf, np.inf
            elif bt in ("LI", "UI"):
                integer[k] = True
                if bt == "LI":
                    lb[k] = val
                else:
                    ub[k] = val
            else:
                raise ModelError(f"unsupported bound type {bt}")
    c = np.zeros(n)
    for k, v in obj.items():
        c[k] = v
    if entries:
        (rows, cols), vals = zip(*entries.keys()), list(entries.values())
    else:
        rows, cols, vals = (), (), []
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(row_names), n))
    b = np.zeros(len(row_names))
    for r, v in rhs.items():
        b[r] = v
    return IlpModel(name, var_names, c, lb, ub, integer, A, senses, b, row_names)


def same_model(a, b):
    """True iff two models have identical names, matrix, bounds and objective."""
    return (
        a.var_names == b.var_names
        and a.row_names == b.row_names
        and a.senses == b.senses
        and a.A.shape == b.A.shape
        and (a.A != b.A).nnz == 0
        and np.array_equal(a.rhs, b.rhs)
        and np.array_equal(a.obj, b.obj)
        and np.array_equal(a.lb, b.lb)
        and np.array_equal(a.ub, b.ub)
        and np.array_equal(a.integer, b.integer)
    )


def emit_mip_start(partial, model):
    """``<varname> <value>`` lines, one-hot over all stages of every hinted node.

    ``partial`` is a :class:`~hybridsched.warmstart.PartialSolution` or a
    plain ``{node: stage}`` mapping.
    """
    assignments = getattr(partial, "assignments", partial)
    pb = model._require_problem()
    lines = []
    for v in sorted(assignments):
        a = assignments[v]
        if not 0 <= v < pb.dag.node_count:
            raise ModelError(f"hint references unknown node {v}")
        if not pb.earliest[v] <= a <= pb.latest[v]:
            raise ModelError(
                f"hint puts node {v} at stage {a}, outside its window "
                f"[{pb.earliest[v]}, {pb.latest[v]}]"
            )
        for b in range(pb.latency):
            nm = x_name(v, b)
            if not model.has_var(nm):
                raise ModelError(f"unknown variable {nm}")
            lines.append(f"{nm} {1 if b == a else 0}")
    return "".join(line + "\n" for line in lines)


def parse_solution(text, model):
    """Variable values and a status hint from a solver solution file.

    Accepts ``<varname> <value>`` columns and tolerates extra leading fields
    (index columns) or trailing ones (reduced costs); lines naming no known
    variable are treated as headers.
    """
    values = {}
    status = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        tok = line.replace("=", " ").split()
        hit = next((k for k, t in enumerate(tok[:-1]) if model.has_var(t)), None)
        if hit is None or line.startswith("#"):
            low = line.lower()
            if "infeasible" in low:
                status = "infeasible"
            elif "optimal" in low and status is None:
                status = "optimal"
            continue
        try:
            values[tok[hit]] = float(tok[hit + 1])
        except ValueError:
            raise ModelError(f"unparseable value in solution line {line!r}") from None
    return values, status
