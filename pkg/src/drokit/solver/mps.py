"""MPS export/import for program descriptions.

The writer emits the classic fixed-format sections (ROWS / COLUMNS / RHS /
BOUNDS, with INTORG/INTEND markers around binary columns) using column-aligned
fields; long names and 17-digit values may overflow their historical widths,
which whitespace-based readers (including ours) accept. Program metadata and
the program name travel in a leading ``* META`` comment so a round trip
reproduces the canonical JSON exactly; other solvers ignore comment lines.

Conventions: a max objective is declared in an OBJSENSE section; a nonzero
objective constant is stored as the negated RHS entry of the objective row.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import MalformedProgram
from ..program import EQ, GE, LE, Constraint, ProgramDescription, Variable

_REL_CODE = {LE: "L", GE: "G", EQ: "E"}
_CODE_REL = {v: k for k, v in _REL_CODE.items()}


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _row_names(program: ProgramDescription) -> list[str]:
    names = []
    seen = set()
    for i, con in enumerate(program.constraints):
        name = con.name if con.name else f"C{i}"
        if " " in name or "\t" in name:
            raise MalformedProgram(f"row name {name!r} contains whitespace")
        if name in seen:
            raise MalformedProgram(f"duplicate row name {name!r}")
        seen.add(name)
        names.append(name)
    return names


def export_mps(program: ProgramDescription, path) -> None:
    """Write the program to ``path`` in MPS form; see the module notes."""
    program.validate()
    row_names = _row_names(program)
    lines = []
    meta = {"name": program.name, "metadata": program.metadata}
    lines.append("* META " + json.dumps(meta, sort_keys=True, separators=(",", ":")))
    lines.append(f"NAME          {program.name}")
    if program.objective_sense == "max":
        lines.append("OBJSENSE")
        lines.append("    MAX")
    lines.append("ROWS")
    lines.append(" N  OBJ")
    for i, con in enumerate(program.constraints):
        lines.append(f" {_REL_CODE[con.rel]}  {row_names[i]}")

    # Column-major coefficient table.
    obj = dict(program.objective_coeffs)
    by_col: dict[int, list] = {j: [] for j in range(program.n_variables)}
    for i, con in enumerate(program.constraints):
        for j, val in con.coeffs:
            by_col[j].append((row_names[i], val))

    lines.append("COLUMNS")
    in_int = False
    for j, var in enumerate(program.variables):
        if var.binary and not in_int:
            lines.append("    MARKER                 'MARKER'                 'INTORG'")
            in_int = True
        elif not var.binary and in_int:
            lines.append("    MARKER                 'MARKER'                 'INTEND'")
            in_int = False
        entries = []
        if j in obj:
            entries.append(("OBJ", obj[j]))
        entries.extend(by_col[j])
        if not entries:
            entries.append(("OBJ", 0.0))  # register otherwise-absent columns
        for row, val in entries:
            lines.append(f"    {var.name:<9} {row:<9} {_fmt(val)}")
    if in_int:
        lines.append("    MARKER                 'MARKER'                 'INTEND'")

    lines.append("RHS")
    if program.objective_constant != 0.0:
        lines.append(f"    RHS       OBJ       {_fmt(-program.objective_constant)}")
    for i, con in enumerate(program.constraints):
        if con.rhs != 0.0:
            lines.append(f"    RHS       {row_names[i]:<9} {_fmt(con.rhs)}")

    lines.append("BOUNDS")
    for var in program.variables:
        lo, hi = var.lower, var.upper
        if lo is not None and hi is not None and lo == hi:
            lines.append(f" FX BND       {var.name:<9} {_fmt(lo)}")
            continue
        if lo is None and hi is None:
            lines.append(f" FR BND       {var.name}")
            continue
        if lo is None:
            lines.append(f" MI BND       {var.name}")
        else:
            lines.append(f" LO BND       {var.name:<9} {_fmt(lo)}")
        if hi is not None:
            lines.append(f" UP BND       {var.name:<9} {_fmt(hi)}")
    lines.append("ENDATA")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def import_mps(path) -> ProgramDescription:
    """Read a program written by export_mps (whitespace-tolerant fields)."""
    text = Path(path).read_text(encoding="utf-8")
    name = "program"
    metadata: dict = {}
    sense = "min"
    row_order: list[str] = []
    row_rel: dict[str, str] = {}
    rhs: dict[str, float] = {}
    obj_constant = 0.0
    var_order: list[str] = []
    var_binary: dict[str, bool] = {}
    col_entries: dict[str, dict[str, float]] = {}
    obj_entries: dict[str, float] = {}
    bounds: dict[str, dict] = {}

    section = None
    in_int = False
    for raw in text.splitlines():
        if not raw.strip():
            continue
        if raw.startswith("*"):
            if raw.startswith("* META "):
                meta = json.loads(raw[len("* META "):])
                name = meta.get("name", name)
                metadata = meta.get("metadata", {})
            continue
        head = raw[:1].strip()
        token = raw.strip()
        if head and token in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA", "OBJSENSE"):
            section = token
            continue
        if head and token.startswith("NAME"):
            parts = token.split()
            if len(parts) > 1 and not metadata and name == "program":
                name = parts[1]
            section = "NAME"
            continue
        parts = token.split()
        if section == "OBJSENSE":
            sense = "max" if parts[0].upper().startswith("MAX") else "min"
        elif section == "ROWS":
            code, row = parts[0].upper(), parts[1]
            if code == "N":
                continue
            if code not in _CODE_REL:
                raise MalformedProgram(f"unknown row type {code!r}")
            row_order.append(row)
            row_rel[row] = _CODE_REL[code]
        elif section == "COLUMNS":
            if len(parts) >= 3 and parts[1].strip("'") == "MARKER":
                in_int = parts[2].strip("'") == "INTORG"
                continue
            if "'MARKER'" in parts:
                in_int = "'INTORG'" in parts
                continue
            col = parts[0]
            if col not in col_entries:
                col_entries[col] = {}
                var_order.append(col)
                var_binary[col] = in_int
            for k in range(1, len(parts) - 1, 2):
                row, val = parts[k], float(parts[k + 1])
                if row == "OBJ":
                    obj_entries[col] = obj_entries.get(col, 0.0) + val
                else:
                    col_entries[col][row] = col_entries[col].get(row, 0.0) + val
        elif section == "RHS":
            for k in range(1, len(parts) - 1, 2):
                row, val = parts[k], float(parts[k + 1])
                if row == "OBJ":
                    obj_constant = -val
                else:
                    rhs[row] = val
        elif section == "BOUNDS":
            code, col = parts[0].upper(), parts[2]
            b = bounds.setdefault(col, {})
            if code == "FR":
                b["lower"], b["upper"] = None, None
            elif code == "MI":
                b["lower"] = None
            elif code == "PL":
                b["upper"] = None
            elif code == "BV":
                b["lower"], b["upper"] = 0.0, 1.0
            elif code in ("LO", "UP", "FX"):
                val = float(parts[3])
                if code == "LO":
                    b["lower"] = val
                elif code == "UP":
                    b["upper"] = val
                else:
                    b["lower"] = b["upper"] = val
            else:
                raise MalformedProgram(f"unknown bound code {code!r}")
        elif section in ("RANGES",):
            raise MalformedProgram("RANGES sections are not supported")

    var_index = {v: j for j, v in enumerate(var_order)}
    variables = []
    for v in var_order:
        b = bounds.get(v, {})
        # MPS default: [0, +inf) for continuous, [0, 1] for marker binaries.
        lo = b.get("lower", 0.0)
        hi = b.get("upper", 1.0 if var_binary[v] and "upper" not in b else None)
        variables.append(Variable(name=v, lower=lo, upper=hi, binary=var_binary[v]))
    constraints = []
    for row in row_order:
        coeffs = []
        for v in var_order:
            if row in col_entries[v] and col_entries[v][row] != 0.0:
                coeffs.append((var_index[v], col_entries[v][row]))
        constraints.append(
            Constraint(
                coeffs=tuple(sorted(coeffs)),
                rel=row_rel[row],
                rhs=rhs.get(row, 0.0),
                name=row,
            )
        )
    program = ProgramDescription(
        variables=tuple(variables),
        objective_sense=sense,
        objective_coeffs=tuple(
            sorted((var_index[v], c) for v, c in obj_entries.items() if c != 0.0)
        ),
        objective_constant=obj_constant,
        constraints=tuple(constraints),
        metadata=metadata,
        name=name,
    )
    program.validate()
    return program
