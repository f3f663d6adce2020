"""Scenario documents: sectioned key-value text parsed to ScenarioConfig.

The format is INI-like: `[section]` headers, `key = value` lines, `#`
comments.  Sections: domain, crack, material, data, time, solver,
experiment; domain and time are required, the rest fill documented
defaults.  Parsing collects *all* problems with line numbers instead of
stopping at the first, and `parse(format_scenario(cfg))` reproduces the
configuration exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expressions import Expression
from .geometry import CrackSchedule, Domain1D, Domain2D
from .scenario import ScenarioConfig
from .tensors import Tensor4Field


@dataclass
class ConfigIssue:
    line: int
    message: str

    def __str__(self):
        return f"line {self.line}: {self.message}"


_REQUIRED_SECTIONS = ("domain", "time")

_SECTION_KEYS = {
    "domain": ("dim", "x", "y", "h", "dirichlet"),
    "crack": ("path", "break", "schedule"),
    "material": ("elastic", "viscous"),
    "data": ("f_x", "f_y", "F_xx", "F_xy", "F_yx", "F_yy",
             "u0_x", "u0_y", "u1_x", "u1_y", "uD_x", "uD_y"),
    "time": ("T", "dt"),
    "solver": ("cg_tol", "cg_max_iter", "picard_tol", "picard_max_iter",
               "subintervals", "h15"),
    "experiment": ("horizons", "sequence", "tip_offset", "data_eps",
                   "seed"),
}

_KEYS_1D_ONLY_DROP = {
    "domain": ("y",),
    "crack": ("path",),
    "data": ("f_y", "F_xy", "F_yx", "F_yy", "u0_y", "u1_y", "uD_y"),
}
_KEYS_2D_ONLY_DROP = {
    "crack": ("break",),
}


def _raw_parse(text, issues):
    """First pass: sections of {key: (line, value)}; header/shape errors."""
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                issues.append(ConfigIssue(lineno, "malformed section header"))
                current = None
                continue
            name = line[1:-1].strip()
            if name not in _SECTION_KEYS:
                issues.append(ConfigIssue(lineno,
                                          f"unknown section [{name}]"))
                current = None
                continue
            if name in sections:
                issues.append(ConfigIssue(
                    lineno, f"duplicate section [{name}]"))
                current = None
                continue
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            issues.append(ConfigIssue(lineno,
                                      "expected 'key = value' or a header"))
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if current is None:
            issues.append(ConfigIssue(
                lineno, f"key {key!r} outside any section"))
            continue
        if key not in _SECTION_KEYS[current]:
            issues.append(ConfigIssue(
                lineno, f"unknown key {key!r} in section [{current}]"))
            continue
        if key in sections[current]:
            issues.append(ConfigIssue(
                lineno, f"duplicate key {key!r} in section [{current}]"))
            continue
        sections[current][key] = (lineno, value)
    return sections


class _SectionReader:
    """Typed access to one parsed section, appending issues on failure."""

    def __init__(self, name, table, issues):
        self.name = name
        self.table = dict(table)
        self.issues = issues
        self.taken_lines = {}

    def take(self, key, convert, default):
        if key not in self.table:
            return default
        lineno, value = self.table.pop(key)
        self.taken_lines[key] = lineno
        try:
            return convert(value)
        except (ValueError, TypeError) as exc:
            # ExpressionError is a ValueError whose message carries the
            # offending column
            self.issues.append(ConfigIssue(lineno, f"key {key!r}: {exc}"))
        return default

    def line_of(self, key):
        """Line a taken key came from; 0 when it was absent."""
        return self.taken_lines.get(key, 0)

    def reject(self, key, why):
        if key in self.table:
            lineno, _ = self.table.pop(key)
            self.issues.append(ConfigIssue(lineno, f"key {key!r}: {why}"))


def _float(s):
    return float(s)


def _int(s):
    return int(s)


def _floats(count=None):
    def convert(s):
        vals = tuple(float(w) for w in s.split())
        if count is not None and len(vals) != count:
            raise ValueError(f"expected {count} numbers, got {len(vals)}")
        if not vals:
            raise ValueError("expected at least one number")
        return vals
    return convert


def _ints(s):
    vals = tuple(int(w) for w in s.split())
    if not vals:
        raise ValueError("expected at least one integer")
    return vals


def _words(allowed):
    def convert(s):
        vals = tuple(s.split())
        for w in vals:
            if w not in allowed:
                raise ValueError(
                    f"unknown value {w!r} (allowed: {', '.join(allowed)})")
        return vals
    return convert


def _choice(allowed):
    def convert(s):
        s = s.strip()
        if s not in allowed:
            raise ValueError(
                f"unknown value {s!r} (allowed: {', '.join(allowed)})")
        return s
    return convert


def _pairs(s):
    """Parse '(a,b) (c,d) ...' into a tuple of float pairs."""
    out = []
    rest = s.strip()
    while rest:
        if not rest.startswith("("):
            raise ValueError(f"expected '(' at {rest[:12]!r}")
        end = rest.find(")")
        if end < 0:
            raise ValueError("unclosed '('")
        body = rest[1:end]
        parts = body.split(",")
        if len(parts) != 2:
            raise ValueError(f"expected two comma-separated numbers "
                             f"in ({body})")
        out.append((float(parts[0]), float(parts[1])))
        rest = rest[end + 1:].strip()
    if not out:
        raise ValueError("expected at least one pair")
    return tuple(out)


def _schedule(s):
    words = s.split(None, 1)
    if not words:
        raise ValueError("empty schedule")
    kind = words[0]
    body = words[1] if len(words) > 1 else ""
    if kind == "linear":
        vals = body.split()
        if len(vals) != 2:
            raise ValueError("linear schedule needs: linear <s0> <speed>")
        return CrackSchedule.linear(float(vals[0]), float(vals[1]))
    if kind == "table":
        return CrackSchedule.from_table(_pairs(body))
    raise ValueError(f"unknown schedule kind {kind!r} "
                     "(allowed: linear, table)")


def _tensor(dim):
    def convert(s):
        words = s.split(None, 1)
        if not words:
            raise ValueError("empty tensor")
        kind = words[0]
        body = words[1] if len(words) > 1 else ""
        if kind == "isotropic":
            vals = body.split()
            if len(vals) != 2:
                raise ValueError(
                    "isotropic tensor needs: isotropic <lambda> <mu>")
            return Tensor4Field.isotropic(dim, float(vals[0]),
                                          float(vals[1]))
        if kind == "identity":
            vals = body.split()
            if len(vals) > 1:
                raise ValueError("identity tensor takes at most a scale")
            t = Tensor4Field.identity(dim)
            return t.scaled(float(vals[0])) if vals else t
        if kind == "matrix":
            rows = [r for r in (part.strip() for part in body.split(";"))
                    if r]
            mat = np.array([[float(w) for w in row.split()]
                            for row in rows])
            return Tensor4Field(mat, dim)
        raise ValueError(f"unknown tensor kind {kind!r} "
                         "(allowed: isotropic, identity, matrix)")
    return convert


def _expression(s):
    return Expression(s)


def _strictly_increasing(kind):
    def check(vals):
        if any(v <= 0 for v in vals):
            raise ValueError(f"{kind} must be positive")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError(f"{kind} must strictly increase")
        return vals
    return check


def _subintervals(s):
    s = s.strip()
    if s == "auto":
        return "auto"
    k = int(s)
    if k < 1:
        raise ValueError("subinterval count must be >= 1")
    return k


def parse_scenario(text, name="scenario"):
    """Parse a scenario document; returns (config or None, issues).

    A non-empty issue list means the parse failed; every issue carries
    the 1-based line it points at (line 0 for document-level problems).
    """
    issues = []
    sections = _raw_parse(text, issues)
    for required in _REQUIRED_SECTIONS:
        if required not in sections:
            issues.append(ConfigIssue(
                0, f"missing required section [{required}]"))
    if issues and any(s not in sections for s in _REQUIRED_SECTIONS):
        return None, issues

    readers = {name_: _SectionReader(name_, sections.get(name_, {}), issues)
               for name_ in _SECTION_KEYS}

    dom = readers["domain"]
    dim = dom.take("dim", _int, 2)
    if dim not in (1, 2):
        issues.append(ConfigIssue(dom.line_of("dim"),
                                  f"dim must be 1 or 2, got {dim}"))
        dim = 2
    for section, keys in (_KEYS_1D_ONLY_DROP if dim == 1
                          else _KEYS_2D_ONLY_DROP).items():
        for key in keys:
            readers[section].reject(key, f"not allowed for dim = {dim}")

    x = dom.take("x", _floats(2), (0.0, 1.0))
    h = dom.take("h", _float, 0.125)
    if h <= 0:
        issues.append(ConfigIssue(dom.line_of("h"),
                                  "mesh size h must be positive"))
        h = 0.125
    edge_names = ("left", "right") if dim == 1 else \
        ("left", "right", "bottom", "top")
    dirichlet = dom.take("dirichlet", _words(edge_names), ())
    try:
        if dim == 1:
            domain = Domain1D(x_min=x[0], x_max=x[1], dirichlet=dirichlet)
        else:
            y = dom.take("y", _floats(2), (0.0, 1.0))
            domain = Domain2D(x_min=x[0], x_max=x[1], y_min=y[0],
                              y_max=y[1], dirichlet=dirichlet)
    except ValueError as exc:
        issues.append(ConfigIssue(0, f"domain: {exc}"))
        domain = Domain2D() if dim == 2 else Domain1D()

    crack_points = None
    schedule = None
    if "crack" in sections:
        cr = readers["crack"]
        if dim == 2:
            crack_points = cr.take("path", _pairs, None)
            if crack_points is None:
                issues.append(ConfigIssue(
                    0, "section [crack] needs a path for dim = 2"))
            elif len(crack_points) < 2:
                issues.append(ConfigIssue(
                    cr.line_of("path"),
                    "crack path needs at least two points"))
                crack_points = None
        else:
            bp = cr.take("break", _float, None)
            if bp is None:
                issues.append(ConfigIssue(
                    0, "section [crack] needs a break point for dim = 1"))
            else:
                crack_points = (bp,)
        # no schedule means the crack never opens (extent stays zero)
        schedule = cr.take("schedule", _schedule, None)

    mat = readers["material"]
    elastic = mat.take("elastic", _tensor(dim), None)
    viscous = mat.take("viscous", _tensor(dim), None)

    data = readers["data"]

    def expr(key):
        return data.take(key, _expression, None)

    def pack(*exprs):
        return None if all(e is None for e in exprs) else tuple(exprs)

    if dim == 1:
        f_exprs = pack(expr("f_x"))
        u0_exprs = pack(expr("u0_x"))
        u1_exprs = pack(expr("u1_x"))
        uD_exprs = pack(expr("uD_x"))
        F_xx = expr("F_xx")
        F_exprs = None if F_xx is None else ((F_xx,),)
    else:
        f_exprs = pack(expr("f_x"), expr("f_y"))
        u0_exprs = pack(expr("u0_x"), expr("u0_y"))
        u1_exprs = pack(expr("u1_x"), expr("u1_y"))
        uD_exprs = pack(expr("uD_x"), expr("uD_y"))
        F_cells = [[expr("F_xx"), expr("F_xy")],
                   [expr("F_yx"), expr("F_yy")]]
        F_exprs = None if all(e is None for row in F_cells for e in row) \
            else tuple(tuple(row) for row in F_cells)

    tm = readers["time"]
    T = tm.take("T", _float, 1.0)
    dt = tm.take("dt", _float, 0.01)
    tm_line = max(tm.line_of("T"), tm.line_of("dt"))
    if not (T > 0 and dt > 0):
        issues.append(ConfigIssue(tm_line, "T and dt must be positive"))
    else:
        n = round(T / dt)
        if n < 1 or abs(n * dt - T) > 1e-9 * max(T, 1.0):
            issues.append(ConfigIssue(
                tm_line,
                f"T = {T!r} is not an integer multiple of dt = {dt!r}"))

    sol = readers["solver"]
    cg_tol = sol.take("cg_tol", _float, 1e-12)
    cg_max_iter = sol.take("cg_max_iter", _int, 50000)
    picard_tol = sol.take("picard_tol", _float, 1e-10)
    picard_max_iter = sol.take("picard_max_iter", _int, 200)
    subintervals = sol.take("subintervals", _subintervals, "auto")
    h15 = sol.take("h15", _choice(("warn", "strict", "off")), "warn")

    exp = readers["experiment"]
    horizons = exp.take(
        "horizons", lambda s: _strictly_increasing("horizons")(
            _floats()(s)), (0.25, 0.5, 1.0, 2.0))
    sequence = exp.take(
        "sequence", lambda s: _strictly_increasing("sequence")(_ints(s)),
        (1, 2, 4, 8))
    tip_offset = exp.take("tip_offset", _float, 0.1)
    data_eps = exp.take("data_eps", _float, 1e-9)
    seed = exp.take("seed", _int, 1234)

    if issues:
        return None, issues
    config = ScenarioConfig(
        name=name, domain=domain, h=h, crack_points=crack_points,
        schedule=schedule, elastic=elastic, viscous=viscous,
        f_exprs=f_exprs, F_exprs=F_exprs, u0_exprs=u0_exprs,
        u1_exprs=u1_exprs, uD_exprs=uD_exprs, T=T, dt=dt, cg_tol=cg_tol,
        cg_max_iter=cg_max_iter, picard_tol=picard_tol,
        picard_max_iter=picard_max_iter, subintervals=subintervals,
        h15_policy=h15, horizons=horizons, sequence_n=sequence,
        tip_offset=tip_offset, data_eps=data_eps, seed=seed)
    return config, issues


# ---------- Formatting ----------

def _fmt_float(v):
    return repr(float(v))


def _fmt_pairs(pairs):
    return " ".join(f"({_fmt_float(a)},{_fmt_float(b)})" for a, b in pairs)


def _fmt_schedule(schedule):
    if schedule.kind == "linear":
        return f"linear {_fmt_float(schedule.s0)} {_fmt_float(schedule.speed)}"
    return "table " + _fmt_pairs(schedule.table)


def _fmt_tensor(tensor):
    if not tensor.homogeneous:
        raise ValueError("per-cell tensor fields have no document form")
    rows = "; ".join(" ".join(_fmt_float(v) for v in row)
                     for row in tensor.matrix)
    return f"matrix {rows}"


def format_scenario(config):
    """Canonical document for a config; parse_scenario inverts it.

    Tensors print in explicit matrix form (the canonical spelling;
    isotropic/identity are input conveniences), floats print in
    shortest round-trip notation, and absent data keys are omitted.
    """
    lines = ["[domain]", f"dim = {config.dim}",
             f"x = {_fmt_float(config.domain.x_min)} "
             f"{_fmt_float(config.domain.x_max)}"]
    if config.dim == 2:
        lines.append(f"y = {_fmt_float(config.domain.y_min)} "
                     f"{_fmt_float(config.domain.y_max)}")
    lines.append(f"h = {_fmt_float(config.h)}")
    if config.domain.dirichlet:
        lines.append("dirichlet = " + " ".join(config.domain.dirichlet))

    if config.crack_points is not None:
        lines.append("")
        lines.append("[crack]")
        if config.dim == 2:
            lines.append("path = " + _fmt_pairs(config.crack_points))
        else:
            lines.append(
                "break = " + _fmt_float(np.ravel(config.crack_points)[0]))
        if config.schedule is not None:
            lines.append("schedule = " + _fmt_schedule(config.schedule))

    lines.append("")
    lines.append("[material]")
    lines.append("elastic = " + _fmt_tensor(config.elastic))
    lines.append("viscous = " + _fmt_tensor(config.viscous))

    data_lines = []

    def emit(key, expr):
        data_lines.append(f"{key} = {expr.source}")

    def emit_vector(prefix, exprs):
        if exprs is None:
            return
        suffixes = ("x", "y")[:config.dim]
        for suffix, expr in zip(suffixes, exprs):
            if expr is not None:
                emit(f"{prefix}_{suffix}", expr)

    emit_vector("f", config.f_exprs)
    emit_vector("u0", config.u0_exprs)
    emit_vector("u1", config.u1_exprs)
    emit_vector("uD", config.uD_exprs)
    if config.F_exprs is not None:
        suffixes = ("x", "y")[:config.dim]
        for i, row in enumerate(config.F_exprs):
            for j, expr in enumerate(row):
                if expr is not None:
                    emit(f"F_{suffixes[i]}{suffixes[j]}", expr)
    if data_lines:
        lines.append("")
        lines.append("[data]")
        lines.extend(data_lines)

    lines.append("")
    lines.append("[time]")
    lines.append(f"T = {_fmt_float(config.T)}")
    lines.append(f"dt = {_fmt_float(config.dt)}")

    lines.append("")
    lines.append("[solver]")
    lines.append(f"cg_tol = {_fmt_float(config.cg_tol)}")
    lines.append(f"cg_max_iter = {config.cg_max_iter}")
    lines.append(f"picard_tol = {_fmt_float(config.picard_tol)}")
    lines.append(f"picard_max_iter = {config.picard_max_iter}")
    lines.append(f"subintervals = {config.subintervals}")
    lines.append(f"h15 = {config.h15_policy}")

    lines.append("")
    lines.append("[experiment]")
    lines.append("horizons = "
                 + " ".join(_fmt_float(v) for v in config.horizons))
    lines.append("sequence = "
                 + " ".join(str(n) for n in config.sequence_n))
    lines.append(f"tip_offset = {_fmt_float(config.tip_offset)}")
    lines.append(f"data_eps = {_fmt_float(config.data_eps)}")
    lines.append(f"seed = {config.seed}")
    return "\n".join(lines) + "\n"


# ---------- Semantic equality ----------

def _exprs_equal(a, b):
    if a is None and b is None:
        return True
    if (a is None) != (b is None):
        return False
    if len(a) != len(b):
        return False
    for ea, eb in zip(a, b):
        if isinstance(ea, (tuple, list)) or isinstance(eb, (tuple, list)):
            if not _exprs_equal(ea, eb):
                return False
        elif (ea is None) != (eb is None):
            return False
        elif ea is not None and ea.source != eb.source:
            return False
    return True


def _schedules_equal(a, b):
    if a is None and b is None:
        return True
    if a is None or b is None or a.kind != b.kind:
        return False
    if a.kind == "linear":
        return a.s0 == b.s0 and a.speed == b.speed
    return np.array_equal(a.table, b.table)


def scenario_equal(a, b):
    """Field-by-field semantic equality, ignoring the scenario name."""
    if a.domain != b.domain or a.dim != b.dim:
        return False
    pa = None if a.crack_points is None else np.asarray(a.crack_points)
    pb = None if b.crack_points is None else np.asarray(b.crack_points)
    if (pa is None) != (pb is None):
        return False
    if pa is not None and not np.array_equal(pa, pb):
        return False
    if not _schedules_equal(a.schedule, b.schedule):
        return False
    for ta, tb in ((a.elastic, b.elastic), (a.viscous, b.viscous)):
        if ta.dim != tb.dim or not np.array_equal(
                np.asarray(ta.matrix), np.asarray(tb.matrix)):
            return False
    for ea, eb in ((a.f_exprs, b.f_exprs), (a.F_exprs, b.F_exprs),
                   (a.u0_exprs, b.u0_exprs), (a.u1_exprs, b.u1_exprs),
                   (a.uD_exprs, b.uD_exprs)):
        if not _exprs_equal(ea, eb):
            return False
    return (a.h == b.h and a.T == b.T and a.dt == b.dt
            and a.cg_tol == b.cg_tol and a.cg_max_iter == b.cg_max_iter
            and a.picard_tol == b.picard_tol
            and a.picard_max_iter == b.picard_max_iter
            and a.subintervals == b.subintervals
            and a.h15_policy == b.h15_policy
            and tuple(a.horizons) == tuple(b.horizons)
            and tuple(a.sequence_n) == tuple(b.sequence_n)
            and a.tip_offset == b.tip_offset
            and a.data_eps == b.data_eps and a.seed == b.seed)
