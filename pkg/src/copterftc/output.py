"""CSV emission/parsing and SVG rendering for logs and analysis grids.

CSV is locale-independent: '.' decimal point, 9 significant digits, a
fixed documented column order.  Angles are logged in degrees and rates
in deg/s for plot readability; everything upstream of this module is SI
radians.  Altitude columns are positive up (internal z is down).

SVG output is hand-assembled markup with no external styling.  Every
time-series panel carries data-min / data-max attributes and every grid
cell a data-rho attribute so the rendered extrema can be checked against
the source data mechanically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .controllability import ArcaiTable, FailureGrid
from .sim import SimLog


class OutputError(RuntimeError):
    """IO failure while writing results; message carries the path."""


def _fmt(x: float) -> str:
    return f"{x:.9g}"


# ---------------------------------------------------------------------------
# simulation log CSV


def log_columns(n: int) -> list[str]:
    cols = [
        "t_s",
        "pos_n_m",
        "pos_e_m",
        "alt_m",
        "vel_n_mps",
        "vel_e_mps",
        "climb_mps",
        "ref_n_m",
        "ref_e_m",
        "ref_alt_m",
        "ref_psi_deg",
        "phi_deg",
        "theta_deg",
        "psi_deg",
        "p_degps",
        "q_degps",
        "r_degps",
        "thrust_cmd_n",
        "roll_cmd_nm",
        "pitch_cmd_nm",
        "yaw_cmd_nm",
    ]
    for stem in ("f{}_n", "omega_cmd{}_radps", "omega{}_radps", "resid{}_n", "eps_hat{}"):
        cols += [stem.format(i) for i in range(1, n + 1)]
    cols += ["mode", "alloc_residual", "alloc_iterations"]
    return cols


def log_to_csv(log: SimLog) -> str:
    """Render a simulation log to CSV text (deterministic byte-for-byte)."""
    n = log.n_rotors
    deg = math.degrees
    lines = [",".join(log_columns(n))]
    for i in range(len(log.t)):
        row = [
            _fmt(log.t[i]),
            _fmt(log.pos[i, 0]),
            _fmt(log.pos[i, 1]),
            _fmt(-log.pos[i, 2]),
            _fmt(log.vel[i, 0]),
            _fmt(log.vel[i, 1]),
            _fmt(-log.vel[i, 2]),
            _fmt(log.ref_pos[i, 0]),
            _fmt(log.ref_pos[i, 1]),
            _fmt(-log.ref_pos[i, 2]),
            _fmt(deg(log.ref_psi[i])),
            _fmt(deg(log.att[i, 0])),
            _fmt(deg(log.att[i, 1])),
            _fmt(deg(log.att[i, 2])),
            _fmt(deg(log.omega[i, 0])),
            _fmt(deg(log.omega[i, 1])),
            _fmt(deg(log.omega[i, 2])),
            _fmt(log.tau_d[i, 0]),
            _fmt(log.tau_d[i, 1]),
            _fmt(log.tau_d[i, 2]),
            _fmt(log.tau_d[i, 3]),
        ]
        for block in (log.thrust, log.omega_cmd, log.omega_rotor, log.residuals, log.eps_hat):
            row += [_fmt(v) for v in block[i]]
        row += [log.mode[i], _fmt(log.alloc_residual[i]), str(int(log.alloc_iterations[i]))]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_log_csv(log: SimLog, path) -> None:
    try:
        Path(path).write_text(log_to_csv(log))
    except OSError as exc:
        raise OutputError(f"cannot write log CSV to {path}: {exc}") from exc


@dataclass
class LogFrame:
    """Columns of a parsed log CSV: numeric arrays plus the mode strings."""

    columns: dict[str, np.ndarray]
    mode: list[str]
    n_rotors: int

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]


def parse_log_csv(text: str) -> LogFrame:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty CSV")
    header = lines[0].split(",")
    try:
        mode_idx = header.index("mode")
    except ValueError as exc:
        raise ValueError("not a simulation log CSV: no 'mode' column") from exc
    n = sum(1 for name in header if name.startswith("f") and name.endswith("_n") and name[1:-2].isdigit())
    numeric = {name: [] for name in header if name != "mode"}
    modes: list[str] = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(header):
            raise ValueError(f"row has {len(parts)} fields, header has {len(header)}")
        for name, value in zip(header, parts):
            if name == "mode":
                modes.append(value)
            else:
                numeric[name].append(float(value))
    columns = {name: np.array(vals) for name, vals in numeric.items()}
    return LogFrame(columns=columns, mode=modes, n_rotors=n)


def read_log_csv(path) -> LogFrame:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OutputError(f"cannot read log CSV from {path}: {exc}") from exc
    return parse_log_csv(text)


# ---------------------------------------------------------------------------
# controllability grid / table CSV


def grid_to_csv(grid: FailureGrid) -> str:
    """Pairwise failure grid; row/column i is rotor i, diagonal = single.

    Pairs beyond the grid's failure depth render as empty fields.
    """
    n = grid.n
    lines = ["# config=" + grid.config + " nominal_rho=" + _fmt(grid.nominal.rho)]
    lines.append(",".join(["failed"] + [str(j) for j in range(1, n + 1)]))
    rho = grid.rho_matrix()
    for i in range(n):
        lines.append(
            ",".join([str(i + 1)] + ["" if math.isnan(v) else _fmt(v) for v in rho[i]])
        )
    return "\n".join(lines) + "\n"


def table_to_csv(table: ArcaiTable) -> str:
    lines = ["failed,full,phi,theta,psi,h_extrapolated"]
    for i, label in enumerate(table.row_labels):
        lines.append(
            ",".join(
                [
                    label,
                    _fmt(table.full[i]),
                    _fmt(table.phi[i]),
                    _fmt(table.theta[i]),
                    _fmt(table.psi[i]),
                    _fmt(table.h_extrapolated[i]),
                ]
            )
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# SVG helpers


def _cell_fill(rho: float, rho_max: float) -> str:
    if rho <= 0.0:
        return "#d9d9d9"
    frac = min(1.0, rho / rho_max) if rho_max > 0.0 else 1.0
    # blend white -> steel blue with authority margin
    red = int(round(255 - 185 * frac))
    green = int(round(255 - 125 * frac))
    blue = int(round(255 - 75 * frac))
    return f"#{red:02x}{green:02x}{blue:02x}"


def _heat_cells(values, row_labels, col_labels, title: str) -> str:
    values = np.asarray(values, dtype=float)
    n_rows, n_cols = values.shape
    cell = 46
    left, top = 70, 58
    width = left + n_cols * cell + 20
    height = top + n_rows * cell + 28
    finite = values[np.isfinite(values)]
    rho_max = float(finite.max()) if finite.size else 0.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif">',
        f'<text x="{width / 2}" y="24" text-anchor="middle" font-size="15">{title}</text>',
    ]
    for j, lab in enumerate(col_labels):
        parts.append(
            f'<text x="{left + j * cell + cell / 2}" y="{top - 10}" text-anchor="middle" '
            f'font-size="12">{lab}</text>'
        )
    for i, lab in enumerate(row_labels):
        parts.append(
            f'<text x="{left - 10}" y="{top + i * cell + cell / 2 + 4}" text-anchor="end" '
            f'font-size="12">{lab}</text>'
        )
    for i in range(n_rows):
        for j in range(n_cols):
            rho = float(values[i, j])
            x, y = left + j * cell, top + i * cell
            if math.isnan(rho):  # beyond the computed failure depth
                parts.append(
                    f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="white" '
                    f'stroke="#ddd"/>'
                )
                continue
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{_cell_fill(rho, rho_max)}" '
                f'stroke="#555" data-rho="{_fmt(rho)}"/>'
            )
            if rho <= 0.0:
                pad = 10
                parts.append(
                    f'<line x1="{x + pad}" y1="{y + pad}" x2="{x + cell - pad}" y2="{y + cell - pad}" '
                    f'stroke="#a00" stroke-width="3"/>'
                )
                parts.append(
                    f'<line x1="{x + pad}" y1="{y + cell - pad}" x2="{x + cell - pad}" y2="{y + pad}" '
                    f'stroke="#a00" stroke-width="3"/>'
                )
    parts.append("</svg>")
    return "\n".join(parts)


def grid_to_svg(grid: FailureGrid) -> str:
    """NxN heat grid; crossed cells mark failure sets with no margin."""
    labels = [str(i) for i in range(1, grid.n + 1)]
    return _heat_cells(
        grid.rho_matrix(),
        labels,
        labels,
        f"Control authority after failures ({grid.config}); x = uncontrollable",
    )


def table_to_svg(table: ArcaiTable) -> str:
    values = np.column_stack([table.full, table.phi, table.theta, table.psi])
    return _heat_cells(
        values,
        table.row_labels,
        ("full", "phi", "theta", "psi"),
        f"Reduced control authority, single failures ({table.config})",
    )


# ---------------------------------------------------------------------------
# time-series SVG

_PANELS = (
    (
        "Position [m]",
        (
            ("pos_n_m", "north", "#1f77b4", False),
            ("pos_e_m", "east", "#d62728", False),
            ("alt_m", "altitude", "#2ca02c", False),
            ("ref_n_m", "north ref", "#1f77b4", True),
            ("ref_e_m", "east ref", "#d62728", True),
            ("ref_alt_m", "altitude ref", "#2ca02c", True),
        ),
    ),
    (
        "Velocity [m/s]",
        (
            ("vel_n_mps", "north", "#1f77b4", False),
            ("vel_e_mps", "east", "#d62728", False),
            ("climb_mps", "climb", "#2ca02c", False),
        ),
    ),
    (
        "Attitude [deg]",
        (
            ("phi_deg", "phi", "#1f77b4", False),
            ("theta_deg", "theta", "#d62728", False),
            ("psi_deg", "psi", "#2ca02c", False),
        ),
    ),
    (
        "Body rates [deg/s]",
        (
            ("p_degps", "p", "#1f77b4", False),
            ("q_degps", "q", "#d62728", False),
            ("r_degps", "r", "#2ca02c", False),
        ),
    ),
)


def timeseries_svg(frame: LogFrame, title: str = "simulation log") -> str:
    """Four stacked panels: position+refs, velocity, attitude, body rates."""
    t = frame["t_s"]
    if len(t) == 0:
        raise ValueError("cannot plot an empty log")
    width, panel_h, pad_l, pad_r, pad_v = 860, 180, 64, 150, 34
    height = 40 + len(_PANELS) * (panel_h + pad_v)
    t0, t1 = float(t[0]), float(t[-1])
    t_span = (t1 - t0) or 1.0
    plot_w = width - pad_l - pad_r

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif">',
        f'<text x="{width / 2}" y="22" text-anchor="middle" font-size="15">{title}</text>',
    ]
    for pi, (panel_title, series) in enumerate(_PANELS):
        top = 40 + pi * (panel_h + pad_v)
        data = [frame[name] for name, *_ in series if name in frame.columns]
        lo = min(float(np.min(d)) for d in data)
        hi = max(float(np.max(d)) for d in data)
        span = (hi - lo) or 1.0
        y_of = lambda v: top + panel_h - (v - lo) / span * panel_h  # noqa: E731
        x_of = lambda tt: pad_l + (tt - t0) / t_span * plot_w  # noqa: E731

        parts.append(
            f'<g data-panel="{panel_title}" data-min="{_fmt(lo)}" data-max="{_fmt(hi)}">'
        )
        parts.append(
            f'<rect x="{pad_l}" y="{top}" width="{plot_w}" height="{panel_h}" fill="none" stroke="#888"/>'
        )
        parts.append(
            f'<text x="{pad_l}" y="{top - 8}" font-size="12">{panel_title}</text>'
        )
        parts.append(
            f'<text x="{pad_l - 6}" y="{top + 10}" text-anchor="end" font-size="10">{_fmt(hi)}</text>'
        )
        parts.append(
            f'<text x="{pad_l - 6}" y="{top + panel_h}" text-anchor="end" font-size="10">{_fmt(lo)}</text>'
        )
        if lo < 0.0 < hi:
            zy = y_of(0.0)
            parts.append(
                f'<line x1="{pad_l}" y1="{zy:.2f}" x2="{pad_l + plot_w}" y2="{zy:.2f}" '
                f'stroke="#ccc" stroke-dasharray="2,4"/>'
            )
        legend_y = top + 12
        # subsample long logs so the markup stays manageable
        stride = max(1, len(t) // 1600)
        for name, label, color, dashed in series:
            if name not in frame.columns:
                continue
            vals = frame[name]
            pts = " ".join(
                f"{x_of(t[i]):.2f},{y_of(vals[i]):.2f}" for i in range(0, len(t), stride)
            )
            dash = ' stroke-dasharray="6,4"' if dashed else ""
            parts.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.3"{dash}/>'
            )
            parts.append(
                f'<line x1="{width - pad_r + 8}" y1="{legend_y}" x2="{width - pad_r + 28}" '
                f'y2="{legend_y}" stroke="{color}" stroke-width="2"{dash}/>'
            )
            parts.append(
                f'<text x="{width - pad_r + 32}" y="{legend_y + 4}" font-size="10">{label}</text>'
            )
            legend_y += 14
        parts.append(
            f'<text x="{pad_l}" y="{top + panel_h + 14}" font-size="10">{_fmt(t0)} s</text>'
        )
        parts.append(
            f'<text x="{pad_l + plot_w}" y="{top + panel_h + 14}" text-anchor="end" '
            f'font-size="10">{_fmt(t1)} s</text>'
        )
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts)


def write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
