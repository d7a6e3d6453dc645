"""Fixed-format MPS export/import and the `name value` assignment format.

Column and row names in the file are generated short names (c0000001,
r0000001) to fit the fixed 8-character name fields; positions follow the
published column layout (fields at columns 2-3, 5-12, 15-22, 25-36).  The
mapping back to model names is positional: column k of the model is
c{k+1:07d}, row k is r{k+1:07d}, and the objective row is named COST.

Assignment files hold one `name value` pair per line; names may be either
the generated short names or the model's own column names.  Lines starting
with '#' are ignored; missing columns default to zero.
"""

from __future__ import annotations

import numpy as np

from gwplan.milp import BINARY, CONTINUOUS, EQ, GE, LE, LinConstraint, MilpModel

_OBJ = "COST"


def _col_name(k: int) -> str:
    return f"c{k + 1:07d}"


def _row_name(k: int) -> str:
    return f"r{k + 1:07d}"


def _value(v: float) -> str:
    s = f"{v:.10g}"
    if len(s) > 12:
        s = f"{v:.6e}"
    if len(s) > 12:
        s = f"{v:.5e}"
    return s


def _line(f1: str = "", f2: str = "", f3: str = "", f4: str = "") -> str:
    buf = [" "] * 36
    for start, width, text in ((1, 2, f1), (4, 8, f2), (14, 8, f3), (24, 12, f4)):
        for i, ch in enumerate(text[:width]):
            buf[start + i] = ch
    return "".join(buf).rstrip()


def write_mps(model: MilpModel, path: str) -> None:
    """Write the model in fixed MPS format (binaries as BV bounds)."""
    lines = ["NAME          GWPLAN"]
    lines.append("ROWS")
    lines.append(_line("N", _OBJ))
    for k, con in enumerate(model.constraints):
        sense = {LE: "L", GE: "G", EQ: "E"}[con.sense]
        lines.append(_line(sense, _row_name(k)))

    by_col: dict[int, list[tuple[str, float]]] = {}
    for col, coef in model.objective.items():
        by_col.setdefault(col, []).append((_OBJ, coef))
    for k, con in enumerate(model.constraints):
        for col, coef in con.terms:
            by_col.setdefault(col, []).append((_row_name(k), coef))
    lines.append("COLUMNS")
    for j in range(model.n_cols):
        for row, coef in by_col.get(j, []):
            lines.append(_line("", _col_name(j), row, _value(coef)))

    lines.append("RHS")
    if model.objective_constant:
        lines.append(_line("", "RHS", _OBJ, _value(-model.objective_constant)))
    for k, con in enumerate(model.constraints):
        if con.rhs != 0.0:
            lines.append(_line("", "RHS", _row_name(k), _value(con.rhs)))

    lines.append("BOUNDS")
    for j, var in enumerate(model.columns):
        if var.domain == BINARY:
            lines.append(_line("BV", "BND", _col_name(j)))
            continue
        lo, hi = model.lb[j], model.ub[j]
        if lo == hi:
            lines.append(_line("FX", "BND", _col_name(j), _value(lo)))
            continue
        if lo != 0.0:
            if np.isfinite(lo):
                lines.append(_line("LO", "BND", _col_name(j), _value(lo)))
            else:
                lines.append(_line("MI", "BND", _col_name(j)))
        if np.isfinite(hi):
            lines.append(_line("UP", "BND", _col_name(j), _value(hi)))
    lines.append("ENDATA")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mps(path: str) -> MilpModel:
    """Read a fixed/free MPS file back into a MilpModel.

    Covers the subset this package writes: N/L/G/E rows, COLUMNS with one or
    two row/value pairs per line, RHS, and BOUNDS with BV/UP/LO/FX/MI.
    """
    section = None
    obj_row: str | None = None
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    col_order: list[str] = []
    col_terms: dict[str, list[tuple[str, float]]] = {}
    col_binary: dict[str, bool] = {}
    col_lb: dict[str, float] = {}
    col_ub: dict[str, float] = {}
    rhs: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for rawline in fh:
            line = rawline.rstrip("\n")
            if not line.strip() or line.startswith("*"):
                continue
            if line[0] not in " \t":
                head = line.split()[0].upper()
                if head in ("NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS",
                            "ENDATA", "OBJSENSE"):
                    section = head
                    continue
                raise ValueError(f"unknown MPS section line: {line!r}")
            fields = line.split()
            if section == "ROWS":
                sense, name = fields[0].upper(), fields[1]
                if sense == "N":
                    if obj_row is None:
                        obj_row = name
                    continue
                row_sense[name] = {"L": LE, "G": GE, "E": EQ}[sense]
                row_order.append(name)
            elif section == "COLUMNS":
                if len(fields) >= 3 and fields[1].upper() == "'MARKER'":
                    continue  # INTORG/INTEND markers are not produced here
                col = fields[0]
                if col not in col_terms:
                    col_terms[col] = []
                    col_order.append(col)
                pairs = fields[1:]
                for row, val in zip(pairs[0::2], pairs[1::2]):
                    col_terms[col].append((row, float(val)))
            elif section == "RHS":
                pairs = fields[1:]
                for row, val in zip(pairs[0::2], pairs[1::2]):
                    rhs[row] = float(val)
            elif section == "BOUNDS":
                btype = fields[0].upper()
                col = fields[2]
                val = float(fields[3]) if len(fields) > 3 else 0.0
                if btype == "BV":
                    col_binary[col] = True
                    col_lb[col], col_ub[col] = 0.0, 1.0
                elif btype == "UP":
                    col_ub[col] = val
                elif btype == "LO":
                    col_lb[col] = val
                elif btype == "FX":
                    col_lb[col] = col_ub[col] = val
                elif btype == "MI":
                    col_lb[col] = -np.inf
                else:
                    raise ValueError(f"unsupported bound type {btype!r}")
            elif section in ("NAME", "RANGES", "OBJSENSE", "ENDATA", None):
                continue
    model = MilpModel()
    for k, col in enumerate(col_order):
        domain = BINARY if col_binary.get(col) else CONTINUOUS
        lo = col_lb.get(col, 0.0)
        hi = col_ub.get(col, 1.0 if domain == BINARY else np.inf)
        model.add_column("col", (k,), domain, lo, hi, col)
    col_index = {name: k for k, name in enumerate(col_order)}
    terms_by_row: dict[str, list[tuple[int, float]]] = {name: [] for name in row_order}
    for col, terms in col_terms.items():
        for row, val in terms:
            if row == obj_row:
                model.objective[col_index[col]] = val
            else:
                terms_by_row[row].append((col_index[col], val))
    for name in row_order:
        model.constraints.append(
            LinConstraint(name, terms_by_row[name], row_sense[name], rhs.get(name, 0.0))
        )
    if obj_row is not None and obj_row in rhs:
        model.objective_constant = -rhs[obj_row]
    return model


def write_assignment(model: MilpModel, assignment, path: str) -> None:
    values = np.asarray(assignment, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# column value\n")
        for var in model.columns:
            fh.write(f"{var.name} {values[var.column]:.17g}\n")


def read_assignment(path: str, model: MilpModel) -> np.ndarray:
    """Parse `name value` lines into a column-ordered assignment vector."""
    by_name = {var.name: var.column for var in model.columns}
    by_short = {_col_name(k): k for k in range(model.n_cols)}
    values = np.zeros(model.n_cols)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, rawline in enumerate(fh, 1):
            line = rawline.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'name value'")
            name, val = parts
            col = by_name.get(name, by_short.get(name))
            if col is None:
                raise ValueError(f"{path}:{lineno}: unknown column {name!r}")
            values[col] = float(val)
    return values
