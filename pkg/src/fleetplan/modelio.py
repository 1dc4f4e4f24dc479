"""Model serialization: free-format MPS out, MPS back in, CPLEX-style LP out.

The MPS writer is deterministic: fixed section order, one entry per line,
every variable anchored in COLUMNS by an explicit objective entry, floats
rendered with %.17g (shortest exact round-trip for doubles is not needed;
17 significant digits reproduce the double bit-exactly on reparse).
Emitting the same model twice yields byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse

from .errors import FormatError
from .model import INF, MatrixForm, MilpModel, VarKind


def _fmt(x: float) -> str:
    return f"{x:.17g}"


# --------------------------------------------------------------------------
# writers
# --------------------------------------------------------------------------

def write_mps(model: MilpModel) -> str:
    out: List[str] = []
    w = out.append
    w(f"* problem: {model.problem}  variant: {model.variant}")
    digest = model.metadata.get("instance_digest", "")
    if digest:
        w(f"* instance: {digest}")
    if "type_index" in model.metadata:
        w(f"* type_index: {model.metadata['type_index']}")
    w(f"NAME {model.name}")
    w("ROWS")
    w(" N obj")
    sense_code = {"<=": "L", ">=": "G", "==": "E"}
    for row in model.rows:
        w(f" {sense_code[row.sense]} {row.name}")

    # column-major entries: var -> [(row name, coeff)...] in row order
    per_col: List[List[Tuple[str, float]]] = [[] for _ in model.vars]
    for row in model.rows:
        for j in sorted(row.coeffs):
            per_col[j].append((row.name, row.coeffs[j]))

    w("COLUMNS")
    marker = 0
    in_int = False
    for j, var in enumerate(model.vars):
        is_int = var.kind in (VarKind.INTEGER, VarKind.BINARY)
        if is_int and not in_int:
            marker += 1
            w(f"    MARKER{marker:04d} 'MARKER' 'INTORG'")
            in_int = True
        elif not is_int and in_int:
            marker += 1
            w(f"    MARKER{marker:04d} 'MARKER' 'INTEND'")
            in_int = False
        w(f"    {var.name} obj {_fmt(var.obj)}")
        for row_name, coeff in per_col[j]:
            w(f"    {var.name} {row_name} {_fmt(coeff)}")
    if in_int:
        marker += 1
        w(f"    MARKER{marker:04d} 'MARKER' 'INTEND'")

    w("RHS")
    for row in model.rows:
        if row.rhs != 0.0:
            w(f"    RHS {row.name} {_fmt(row.rhs)}")

    w("BOUNDS")
    for var in model.vars:
        if var.lb == var.ub:
            w(f" FX BND {var.name} {_fmt(var.lb)}")
            continue
        if var.lb == -INF:
            w(f" MI BND {var.name}")
        else:
            w(f" LO BND {var.name} {_fmt(var.lb)}")
        if var.ub == INF:
            w(f" PL BND {var.name}")
        else:
            w(f" UP BND {var.name} {_fmt(var.ub)}")
    w("ENDATA")
    return "\n".join(out) + "\n"


def write_lp(model: MilpModel) -> str:
    """CPLEX-style LP text for eyeballing; same content as the MPS."""
    out: List[str] = []
    w = out.append
    w(f"\\ problem: {model.problem}  variant: {model.variant}")
    w("Minimize")
    terms = [f"{'+' if v.obj >= 0 else '-'} {_fmt(abs(v.obj))} {v.name}"
             for v in model.vars if v.obj]
    w(" obj: " + (" ".join(terms) if terms else "0"))
    w("Subject To")
    op = {"<=": "<=", ">=": ">=", "==": "="}
    for row in model.rows:
        parts = []
        for j in sorted(row.coeffs):
            c = row.coeffs[j]
            parts.append(f"{'+' if c >= 0 else '-'} {_fmt(abs(c))} "
                         f"{model.vars[j].name}")
        w(f" {row.name}: " + " ".join(parts)
          + f" {op[row.sense]} {_fmt(row.rhs)}")
    w("Bounds")
    for v in model.vars:
        if v.lb == v.ub:
            w(f" {v.name} = {_fmt(v.lb)}")
        elif v.lb == -INF and v.ub == INF:
            w(f" {v.name} free")
        elif v.ub == INF:
            w(f" {v.name} >= {_fmt(v.lb)}")
        else:
            w(f" {_fmt(v.lb)} <= {v.name} <= {_fmt(v.ub)}")
    generals = [v.name for v in model.vars if v.kind is VarKind.INTEGER]
    binaries = [v.name for v in model.vars if v.kind is VarKind.BINARY]
    if generals:
        w("Generals")
        for name in generals:
            w(f" {name}")
    if binaries:
        w("Binaries")
        for name in binaries:
            w(f" {name}")
    w("End")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# reader
# --------------------------------------------------------------------------

@dataclass
class ParsedModel:
    """Matrix-level view of an MPS file; enough to solve or re-emit."""

    name: str
    var_names: List[str] = field(default_factory=list)
    kinds: List[VarKind] = field(default_factory=list)
    lb: List[float] = field(default_factory=list)
    ub: List[float] = field(default_factory=list)
    obj: List[float] = field(default_factory=list)
    row_names: List[str] = field(default_factory=list)
    senses: List[str] = field(default_factory=list)
    rhs: List[float] = field(default_factory=list)
    row_coeffs: List[Dict[int, float]] = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @property
    def num_rows(self) -> int:
        return len(self.row_names)

    def to_matrices(self) -> MatrixForm:
        data, ri, ci = [], [], []
        row_lb = np.empty(self.num_rows)
        row_ub = np.empty(self.num_rows)
        for r, coeffs in enumerate(self.row_coeffs):
            for c, val in coeffs.items():
                ri.append(r)
                ci.append(c)
                data.append(val)
            if self.senses[r] == "<=":
                row_lb[r], row_ub[r] = -INF, self.rhs[r]
            elif self.senses[r] == ">=":
                row_lb[r], row_ub[r] = self.rhs[r], INF
            else:
                row_lb[r] = row_ub[r] = self.rhs[r]
        A = sparse.csr_matrix((data, (ri, ci)),
                              shape=(self.num_rows, self.num_vars))
        return MatrixForm(
            A=A, row_lb=row_lb, row_ub=row_ub,
            c=np.array(self.obj, dtype=float),
            lb=np.array(self.lb, dtype=float),
            ub=np.array(self.ub, dtype=float),
            integrality=np.array(
                [1 if k in (VarKind.INTEGER, VarKind.BINARY) else 0
                 for k in self.kinds], dtype=np.int8))

    def to_model(self) -> MilpModel:
        m = MilpModel(name=self.name, problem="parsed", variant="parsed")
        for j, name in enumerate(self.var_names):
            m.add_var(name, self.kinds[j], lb=self.lb[j], ub=self.ub[j],
                      obj=self.obj[j])
        for r, name in enumerate(self.row_names):
            m.add_row(name, list(self.row_coeffs[r].items()),
                      self.senses[r], self.rhs[r])
        return m


def parse_mps(text: str) -> ParsedModel:
    """Free-format MPS reader covering N/L/G/E rows, INTORG/INTEND markers,
    one or two data pairs per COLUMNS/RHS line, and LO/UP/FX/PL/MI/BV/LI/UI
    bounds. RANGES is not supported."""
    pm = ParsedModel(name="")
    section = None
    sense_of = {"L": "<=", "G": ">=", "E": "=="}
    var_idx: Dict[str, int] = {}
    row_idx: Dict[str, int] = {}
    obj_name: Optional[str] = None
    in_int = False
    explicit_lb: set = set()

    def get_var(name: str) -> int:
        if name in var_idx:
            return var_idx[name]
        j = len(pm.var_names)
        var_idx[name] = j
        pm.var_names.append(name)
        pm.kinds.append(VarKind.INTEGER if in_int else VarKind.CONTINUOUS)
        pm.lb.append(0.0)
        pm.ub.append(INF)
        pm.obj.append(0.0)
        return j

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("*"):
            continue
        is_header = not raw[0].isspace()
        tok = raw.split()
        if is_header:
            head = tok[0].upper()
            if head == "NAME":
                pm.name = tok[1] if len(tok) > 1 else ""
                continue
            if head in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "RANGES",
                        "ENDATA", "OBJSENSE"):
                if head == "RANGES":
                    raise FormatError("RANGES section is not supported",
                                      context="modelio.parse_mps")
                section = head
                if head == "ENDATA":
                    break
                continue
            raise FormatError(f"line {lineno}: unknown section {tok[0]!r}",
                              context="modelio.parse_mps")

        if section == "OBJSENSE":
            if tok[0].upper() not in ("MIN", "MINIMIZE"):
                raise FormatError(f"line {lineno}: only minimization supported",
                                  context="modelio.parse_mps")
        elif section == "ROWS":
            code, name = tok[0].upper(), tok[1]
            if code == "N":
                if obj_name is None:
                    obj_name = name
                continue
            if code not in sense_of:
                raise FormatError(f"line {lineno}: bad row type {tok[0]!r}",
                                  context="modelio.parse_mps")
            row_idx[name] = len(pm.row_names)
            pm.row_names.append(name)
            pm.senses.append(sense_of[code])
            pm.rhs.append(0.0)
            pm.row_coeffs.append({})
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1].strip("'").upper() == "MARKER":
                flag = tok[2].strip("'").upper()
                if flag == "INTORG":
                    in_int = True
                elif flag == "INTEND":
                    in_int = False
                else:
                    raise FormatError(f"line {lineno}: bad marker {flag!r}",
                                      context="modelio.parse_mps")
                continue
            if len(tok) not in (3, 5):
                raise FormatError(f"line {lineno}: bad COLUMNS line",
                                  context="modelio.parse_mps")
            j = get_var(tok[0])
            for pos in range(1, len(tok), 2):
                rname, sval = tok[pos], tok[pos + 1]
                try:
                    val = float(sval)
                except ValueError:
                    raise FormatError(f"line {lineno}: bad number {sval!r}",
                                      context="modelio.parse_mps")
                if rname == obj_name:
                    pm.obj[j] += val
                elif rname in row_idx:
                    r = row_idx[rname]
                    pm.row_coeffs[r][j] = pm.row_coeffs[r].get(j, 0.0) + val
                else:
                    raise FormatError(f"line {lineno}: unknown row {rname!r}",
                                      context="modelio.parse_mps")
        elif section == "RHS":
            if len(tok) not in (3, 5):
                raise FormatError(f"line {lineno}: bad RHS line",
                                  context="modelio.parse_mps")
            for pos in range(1, len(tok), 2):
                rname, sval = tok[pos], tok[pos + 1]
                if rname == obj_name:
                    continue  # objective offset unsupported, ignore
                if rname not in row_idx:
                    raise FormatError(f"line {lineno}: unknown row {rname!r}",
                                      context="modelio.parse_mps")
                pm.rhs[row_idx[rname]] = float(sval)
        elif section == "BOUNDS":
            btype = tok[0].upper()
            if btype in ("PL", "MI", "BV", "FR"):
                if len(tok) != 3:
                    raise FormatError(f"line {lineno}: bad BOUNDS line",
                                      context="modelio.parse_mps")
                j = get_var(tok[2])
                if btype == "PL":
                    pm.ub[j] = INF
                elif btype == "MI":
                    pm.lb[j] = -INF
                elif btype == "FR":
                    pm.lb[j], pm.ub[j] = -INF, INF
                else:  # BV
                    pm.kinds[j] = VarKind.BINARY
                    pm.lb[j], pm.ub[j] = 0.0, 1.0
                continue
            if btype not in ("LO", "UP", "FX", "LI", "UI"):
                raise FormatError(f"line {lineno}: bad bound type {tok[0]!r}",
                                  context="modelio.parse_mps")
            if len(tok) != 4:
                raise FormatError(f"line {lineno}: bad BOUNDS line",
                                  context="modelio.parse_mps")
            j = get_var(tok[2])
            val = float(tok[3])
            if btype in ("LO", "LI"):
                pm.lb[j] = val
                explicit_lb.add(j)
            elif btype in ("UP", "UI"):
                pm.ub[j] = val
                # MPS convention: UP with a negative value and no explicit
                # lower bound frees the lower bound
                if val < 0 and j not in explicit_lb:
                    pm.lb[j] = -INF
            else:
                pm.lb[j] = pm.ub[j] = val
            if btype in ("LI", "UI"):
                pm.kinds[j] = VarKind.INTEGER
        elif section is None:
            raise FormatError(f"line {lineno}: data before any section",
                              context="modelio.parse_mps")

    if obj_name is None:
        raise FormatError("no objective (N) row found", context="modelio.parse_mps")
    # integer vars declared by markers with unit range become binary
    for j, kind in enumerate(pm.kinds):
        if kind is VarKind.INTEGER and pm.lb[j] >= 0.0 and pm.ub[j] <= 1.0:
            pm.kinds[j] = VarKind.BINARY
    return pm
