"""Result persistence: delimited tables, manifests, plot scripts, figures.

Numeric tables are comma-separated text with a fixed column order and
17-significant-digit floats, so repeated runs of a deterministic solve
produce bit-identical files.  Every run directory gets a JSON manifest
echoing the configuration and hashing the outputs.  Plot scripts are
standalone gnuplot-dialect text, emitted but never executed; the same
figures are also rendered directly to PNG files.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

__version__ = "0.1.0"


def _format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, header, rows):
    """Comma-separated table: fixed column order, %.17g floats."""
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(
                f"row width {len(row)} != header width {len(header)}")
        lines.append(",".join(_format_value(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Inverse of write_csv: (header list, rows of float-or-str)."""
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines:
        raise ValueError(f"empty table file {path}")
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        row = []
        for p in parts:
            try:
                row.append(float(p))
            except ValueError:
                row.append(p)
        rows.append(row)
    return header, rows


def file_sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Reproducibility record for one output directory."""

    command: str
    config_text: str
    version: str = __version__
    seed: int = 0
    threads: int = 1
    wall_seconds: float = 0.0
    files: dict = field(default_factory=dict)

    def add_file(self, path):
        self.files[os.path.basename(path)] = file_sha256(path)

    def write(self, out_dir):
        payload = {
            "command": self.command,
            "version": self.version,
            "seed": self.seed,
            "threads": self.threads,
            "wall_seconds": self.wall_seconds,
            "files": dict(sorted(self.files.items())),
            "config": self.config_text,
        }
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


class Stopwatch:
    def __init__(self):
        self.start = time.monotonic()

    def elapsed(self):
        return time.monotonic() - self.start


# ---------- Plot scripts (gnuplot-dialect text, never executed) ----------

_ENERGY_COLUMNS = ("t", "kinetic", "elastic", "work")
_CONVERGENCE_COLUMNS = ("n", "sup_dist", "w_dist")
_CONTRACTION_COLUMNS = ("T", "rho")
_KORN_COLUMNS = ("h", "korn")


def _script_header():
    return ["# plotting script (gnuplot dialect); written, not executed",
            'set datafile separator ","',
            "set terminal pngcairo size 900,600"]


def _has_columns(header, needed):
    return all(c in header for c in needed)


def _is_norm_series(header):
    """Any table of t against one or more norm_* columns."""
    return (len(header) >= 2 and header[0] == "t"
            and all(c.startswith("norm_") for c in header[1:]))


def has_plot_recipe(header):
    """Whether emit_plot_script knows how to plot this column set."""
    return (_has_columns(header, _ENERGY_COLUMNS)
            or _has_columns(header, _CONVERGENCE_COLUMNS)
            or _has_columns(header, _CONTRACTION_COLUMNS)
            or _has_columns(header, _KORN_COLUMNS)
            or _is_norm_series(header))


def _column_index(header, name):
    return header.index(name) + 1     # 1-based in the plot dialect


def _script_block(path, header, n_rows):
    name = os.path.basename(path)
    stem = os.path.splitext(name)[0]
    if n_rows == 0:
        return [f"# warning: no data rows in {name}; nothing to plot"]
    if _has_columns(header, _ENERGY_COLUMNS):
        ck = _column_index(header, "kinetic")
        ce = _column_index(header, "elastic")
        cw = _column_index(header, "work")
        ct = _column_index(header, "t")
        return [
            f'set output "{stem}.png"',
            f'stats "{name}" using (${ck}+${ce}) every ::0::0 nooutput',
            "E0 = STATS_max",
            'set xlabel "t"',
            'set ylabel "energy"',
            "unset logscale",
            f'plot "{name}" using {ct}:(${ck}+${ce}) with lines '
            f'title "E(t)", \\',
            f'     "{name}" using {ct}:(E0+${cw}) with lines '
            f'title "E(0)+W(t)"',
            "unset output",
        ]
    if _has_columns(header, _CONVERGENCE_COLUMNS):
        cn = _column_index(header, "n")
        cs = _column_index(header, "sup_dist")
        cw = _column_index(header, "w_dist")
        return [
            f'set output "{stem}.png"',
            'set xlabel "n"',
            'set ylabel "distance to base solution"',
            "set logscale xy",
            f'plot "{name}" using {cn}:{cs} with linespoints '
            f'title "sup over t", \\',
            f'     "{name}" using {cn}:{cw} with linespoints '
            f'title "space-time norm"',
            "unset output",
        ]
    if _has_columns(header, _CONTRACTION_COLUMNS):
        ct = _column_index(header, "T")
        cr = _column_index(header, "rho")
        return [
            f'set output "{stem}.png"',
            'set xlabel "horizon T"',
            'set ylabel "contraction factor"',
            "set logscale xy",
            f'plot "{name}" using {ct}:{cr} with linespoints '
            f'title "measured factor"',
            "unset output",
        ]
    if _has_columns(header, _KORN_COLUMNS):
        ch = _column_index(header, "h")
        ck = _column_index(header, "korn")
        return [
            f'set output "{stem}.png"',
            'set xlabel "mesh size h"',
            'set ylabel "Korn constant estimate"',
            "set logscale x",
            f'plot "{name}" using {ch}:{ck} with linespoints '
            f'title "estimate"',
            "unset output",
        ]
    if _is_norm_series(header):
        ct = _column_index(header, "t")
        plots = ", \\\n     ".join(
            f'"{name}" using {ct}:{_column_index(header, c)} with lines '
            f'title "{c}"' for c in header[1:])
        return [
            f'set output "{stem}.png"',
            'set xlabel "t"',
            'set ylabel "norm"',
            "unset logscale",
            f"plot {plots}",
            "unset output",
        ]
    raise ValueError(
        f"{name}: no plottable column set in header {header}")


def emit_plot_script(csv_paths):
    """One standalone script covering the given tables.

    Recognizes energy, convergence, contraction, and refinement tables
    by their headers; raises ValueError when a file has none of the
    required column sets.
    """
    lines = _script_header()
    for path in csv_paths:
        header, rows = read_csv(path)
        lines.append("")
        lines.extend(_script_block(path, header, len(rows)))
    return "\n".join(lines) + "\n"


def write_plot_script(out_dir, csv_paths, name="plots.gp"):
    text = emit_plot_script(csv_paths)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


# ---------- Direct figure rendering ----------

def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


_PNG_METADATA = {"Software": f"crackdyn {__version__}"}


def render_figure(csv_path, png_path=None):
    """Render the figure a table's plot-script block describes to PNG."""
    plt = _pyplot()
    header, rows = read_csv(csv_path)
    if png_path is None:
        png_path = os.path.splitext(csv_path)[0] + ".png"
    data = np.array([[v if isinstance(v, float) else np.nan for v in row]
                     for row in rows]) if rows else np.empty((0, len(header)))

    def col(name):
        return data[:, header.index(name)]

    fig, ax = plt.subplots(figsize=(9, 6))
    try:
        if len(rows) == 0:
            ax.set_title("no data rows")
        elif _has_columns(header, _ENERGY_COLUMNS):
            total = col("kinetic") + col("elastic")
            ax.plot(col("t"), total, label="E(t)")
            ax.plot(col("t"), total[0] + col("work"), "--",
                    label="E(0)+W(t)")
            ax.set_xlabel("t")
            ax.set_ylabel("energy")
            ax.legend()
        elif _has_columns(header, _CONVERGENCE_COLUMNS):
            ax.loglog(col("n"), col("sup_dist"), "o-", label="sup over t")
            ax.loglog(col("n"), col("w_dist"), "s-",
                      label="space-time norm")
            ax.set_xlabel("n")
            ax.set_ylabel("distance to base solution")
            ax.legend()
        elif _has_columns(header, _CONTRACTION_COLUMNS):
            ax.loglog(col("T"), col("rho"), "o-", label="measured factor")
            ax.set_xlabel("horizon T")
            ax.set_ylabel("contraction factor")
            ax.legend()
        elif _has_columns(header, _KORN_COLUMNS):
            ax.semilogx(col("h"), col("korn"), "o-", label="estimate")
            ax.set_xlabel("mesh size h")
            ax.set_ylabel("Korn constant estimate")
            ax.legend()
        elif _is_norm_series(header):
            for c in header[1:]:
                ax.plot(col("t"), col(c), label=c)
            ax.set_xlabel("t")
            ax.set_ylabel("norm")
            ax.legend()
        else:
            raise ValueError(f"{csv_path}: no plottable column set "
                             f"in header {header}")
        fig.savefig(png_path, metadata=_PNG_METADATA)
    finally:
        plt.close(fig)
    return png_path
