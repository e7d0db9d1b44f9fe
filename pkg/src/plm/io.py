"""CSV ingestion, JSON run configs, and output writers.

Numbers are serialized as shortest round-trip decimals (Python's repr), so
emitted files reproduce in-memory values exactly when read back. All
writers emit deterministic bytes for identical inputs.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Mapping

import numpy as np

from .adjust import ROLES, PlaceboSpec
from .engine import AnalysisConfig, ContourGrid, LineSlice, ResultTable, \
    TableRow
from .errors import (
    AmbiguousSpec,
    ConfigError,
    DataError,
    DuplicateHeader,
    IoError,
    NonFiniteValue,
    ParseError,
    TooFewRows,
)
from .regression import Dataset

TABLE_COLUMNS = ("label", "k", "direct_effect", "estimate", "std_error",
                 "ci_low", "ci_high")


def load_csv(path) -> Dataset:
    """Read a numeric CSV (header row, '.' decimals) into a Dataset.

    Raises
    ------
    ParseError
        Structural problems: empty file, ragged rows.
    DuplicateHeader
        Repeated column name.
    NonFiniteValue
        A cell that is not a finite number, reported with row and column.
    TooFewRows
        Header only, no data rows.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ParseError(f"{path}: file is empty") from None
            header = [name.strip() for name in header]
            if any(not name for name in header):
                raise ParseError(f"{path}: blank column name in header")
            seen = set()
            for name in header:
                if name in seen:
                    raise DuplicateHeader(
                        f"{path}: column {name!r} appears twice"
                    )
                seen.add(name)
            columns: list[list[float]] = [[] for _ in header]
            for row_number, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise ParseError(
                        f"{path}: row {row_number} has {len(row)} fields, "
                        f"expected {len(header)}"
                    )
                for col, cell in enumerate(row):
                    try:
                        value = float(cell)
                    except ValueError:
                        value = math.nan
                    if not math.isfinite(value):
                        raise NonFiniteValue(
                            f"{path}: row {row_number}, column "
                            f"{header[col]!r}: {cell.strip()!r} is not a "
                            "finite number"
                        )
                    columns[col].append(value)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not columns[0]:
        raise TooFewRows(f"{path}: no data rows")
    return Dataset({name: vals for name, vals in zip(header, columns)})


def check_fixture_manifest(data: Dataset, manifest: Mapping) -> None:
    """Compare a loaded fixture against its recorded manifest.

    ``manifest`` holds ``n_rows`` and ``column_means`` (name to mean).
    Mismatches raise DataError so fixture drift is caught before any
    numbers are trusted.
    """
    n_rows = int(manifest["n_rows"])
    if data.n_rows != n_rows:
        raise DataError(
            f"fixture has {data.n_rows} rows, manifest says {n_rows}"
        )
    means = manifest["column_means"]
    missing = [name for name in means if name not in data]
    if missing:
        raise DataError(f"fixture lacks manifest columns {missing}")
    for name, recorded in means.items():
        got = float(np.mean(data[name]))
        tol = 1e-6 * max(1.0, abs(float(recorded)))
        if abs(got - float(recorded)) > tol:
            raise DataError(
                f"fixture column {name!r} mean {got!r} differs from "
                f"manifest value {recorded!r}"
            )


def write_dataset_csv(data: Dataset, path) -> Path:
    """Write a Dataset as numeric CSV that load_csv reads back exactly."""
    lines = [",".join(data.names)]
    matrix = data.matrix(data.names)
    for row in matrix:
        lines.append(",".join(repr(float(v)) for v in row))
    return _write_text(Path(path), "\n".join(lines) + "\n")


_EDGE_KEYS = ("d_to_p", "p_to_y", "p_to_d", "y_to_p")
_BOOTSTRAP_KEYS = ("reps", "seed")
_OUTPUT_KEYS = ("table", "contour", "line", "svg")
_TOP_KEYS = ("data_path", "outcome", "treatment", "placebo", "role",
             "edges", "covariates", "k", "direct", "grid", "bootstrap",
             "ci_level", "outputs")


def _reject_unknown(mapping: Mapping, allowed, where: str) -> None:
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown {where} keys: {unknown}")


def _as_range(value, name: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a [low, high] pair") from None
    return lo, hi


class RunConfig:
    """File form of an analysis: data pointer, placebo spec, and settings.

    Mirrors AnalysisConfig plus the paths involved. ``outputs`` maps any of
    table/contour/line/svg to destination paths. The two implied-edge flags
    (placebo-to-treatment, outcome-to-placebo) are accepted only alongside
    the roles that define them.
    """

    def __init__(self, data_path, outcome, treatment, placebo, role,
                 edges=None, covariates=(), k=(-2.0, 2.0),
                 direct=(0.0, 0.0), grid=None, bootstrap=None,
                 ci_level=0.95, outputs=None, base_dir=None):
        base = Path(base_dir) if base_dir is not None else Path(".")
        self.data_path = (base / data_path).resolve()
        if not self.data_path.is_file():
            raise ConfigError(f"data_path {self.data_path} does not exist")
        edges = dict(edges or {})
        _reject_unknown(edges, _EDGE_KEYS, "edges")
        for key, value in edges.items():
            if not isinstance(value, bool):
                raise ConfigError(f"edges.{key} must be true or false")
        if role not in ROLES:
            raise ConfigError(
                f"unknown role {role!r}; expected one of {ROLES}"
            )
        if edges.get("p_to_d") and role != "observed_confounder_2":
            raise AmbiguousSpec(
                "a placebo that causes the treatment is the "
                "observed_confounder_2 role; declare it as such"
            )
        if edges.get("y_to_p") and role != "post_outcome":
            raise AmbiguousSpec(
                "an outcome that causes the placebo is the post_outcome "
                "role; declare it as such"
            )
        self.spec = PlaceboSpec(
            outcome_col=str(outcome),
            treatment_col=str(treatment),
            placebo_col=str(placebo),
            role=str(role),
            edge_d_to_p=edges.get("d_to_p", False),
            edge_p_to_y=edges.get("p_to_y", False),
            covariate_cols=tuple(str(c) for c in covariates),
            # Writing role: mediator in a config file is already an explicit
            # choice, so the in-code acknowledgment gate is satisfied here.
            acknowledge_mediator=(role == "mediator"),
        )
        self.k_range = _as_range(k, "k")
        self.direct_range = _as_range(direct, "direct")
        if grid is not None and (not isinstance(grid, int)
                                 or isinstance(grid, bool)):
            raise ConfigError("grid must be an integer")
        self.grid = grid
        bootstrap = dict(bootstrap or {})
        _reject_unknown(bootstrap, _BOOTSTRAP_KEYS, "bootstrap")
        self.bootstrap_reps = int(bootstrap.get("reps", 1000))
        self.seed = int(bootstrap.get("seed", 0))
        self.ci_level = float(ci_level)
        outputs = dict(outputs or {})
        _reject_unknown(outputs, _OUTPUT_KEYS, "outputs")
        self.outputs = {}
        for key, value in outputs.items():
            target = (base / value).resolve()
            if not target.parent.is_dir():
                raise ConfigError(
                    f"outputs.{key} directory {target.parent} does not exist"
                )
            self.outputs[key] = target

    def analysis_config(self, workers: int = 1, freeze_sf: bool = False,
                        cluster_col: str | None = None,
                        seed: int | None = None) -> AnalysisConfig:
        """Build the engine configuration, optionally overriding the seed."""
        return AnalysisConfig(
            spec=self.spec,
            k_range=self.k_range,
            direct_range=self.direct_range,
            grid_points_per_axis=self.grid,
            bootstrap_reps=self.bootstrap_reps,
            seed=self.seed if seed is None else seed,
            ci_level=self.ci_level,
            workers=workers,
            freeze_sf=freeze_sf,
            cluster_col=cluster_col,
        )


def parse_run_config(path) -> RunConfig:
    """Load and validate a JSON run config; unknown keys are rejected."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")
    missing = [key for key in ("data_path", "outcome", "treatment",
                               "placebo", "role") if key not in raw]
    if missing:
        raise ConfigError(f"config {path} lacks required keys: {missing}")
    return RunConfig(base_dir=path.parent, **raw)


def _fmt(value) -> str:
    return repr(float(value))


def _write_text(path: Path, text: str) -> Path:
    try:
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def write_table_csv(table: ResultTable, path) -> Path:
    rows = [",".join(TABLE_COLUMNS)]
    for row in table.rows:
        rows.append(",".join([
            row.label,
            _fmt(row.k),
            _fmt(row.direct),
            _fmt(row.estimate),
            _fmt(row.se),
            _fmt(row.ci_low),
            _fmt(row.ci_high),
        ]))
    return _write_text(Path(path), "\n".join(rows) + "\n")


def read_table_csv(path) -> ResultTable:
    """Read back a table CSV written by write_table_csv."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != TABLE_COLUMNS:
                raise ParseError(
                    f"{path}: expected header {','.join(TABLE_COLUMNS)}"
                )
            rows = []
            for row_number, row in enumerate(reader, start=2):
                if len(row) != len(TABLE_COLUMNS):
                    raise ParseError(f"{path}: malformed row {row_number}")
                try:
                    rows.append(TableRow(row[0],
                                         *(float(v) for v in row[1:])))
                except ValueError:
                    raise ParseError(
                        f"{path}: non-numeric value in row {row_number}"
                    ) from None
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return ResultTable(rows=tuple(rows), metadata={})


def write_contour_csv(grid: ContourGrid, path) -> Path:
    lines = ["k,direct,estimate"]
    for i, k in enumerate(grid.k_values):
        for j, dv in enumerate(grid.direct_values):
            lines.append(
                f"{_fmt(k)},{_fmt(dv)},{_fmt(grid.estimates[i, j])}"
            )
    return _write_text(Path(path), "\n".join(lines) + "\n")


def _json_ready(value):
    if isinstance(value, np.ndarray):
        return [_json_ready(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def write_contour_json(grid: ContourGrid, path) -> Path:
    payload = {
        "k_values": _json_ready(grid.k_values),
        "direct_values": _json_ready(grid.direct_values),
        "zero_contour": [_json_ready(p) for p in grid.zero_contour],
        "metadata": _json_ready(grid.metadata),
    }
    text = json.dumps(payload, sort_keys=True, indent=1)
    return _write_text(Path(path), text + "\n")


def write_line_csvs(line: LineSlice, path) -> list[Path]:
    """One CSV per curve; a single curve goes to the path itself."""
    path = Path(path)
    written = []
    for index, (fixed, curve) in enumerate(zip(line.fixed_values,
                                               line.curves)):
        if len(line.curves) == 1:
            target = path
        else:
            target = path.with_name(
                f"{path.stem}_{index + 1}{path.suffix or '.csv'}"
            )
        fixed_name = "fixed_direct" if line.varying == "k" else "fixed_k"
        lines = [f"{line.varying},estimate,ci_low,ci_high,{fixed_name}"]
        for param, est, lo, hi in curve:
            lines.append(",".join(
                [_fmt(param), _fmt(est), _fmt(lo), _fmt(hi), _fmt(fixed)]
            ))
        written.append(_write_text(target, "\n".join(lines) + "\n"))
    return written


# SVG rendering: minimal hand-rolled output, deterministic bytes.
_SVG_W, _SVG_H = 720, 540
_MARGIN = 60


def _scale(lo: float, hi: float, span: float):
    width = hi - lo
    if width <= 0:
        return lambda v: _MARGIN + span / 2.0
    return lambda v: _MARGIN + (v - lo) / width * span


def _heat_color(value: float, vmax: float) -> str:
    t = 0.0 if vmax <= 0 else max(-1.0, min(1.0, value / vmax))
    if t >= 0:
        r, g, b = 255, round(255 - 175 * t), round(255 - 217 * t)
    else:
        r, g, b = round(255 + 196 * t), round(255 + 179 * t), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def render_contour_svg(grid: ContourGrid) -> str:
    """Filled estimate surface with the zero isoline.

    Exactly one <path> element per zero-contour polyline; the fill uses
    <rect> cells so path count identifies contour pieces.
    """
    plot_w = _SVG_W - 2 * _MARGIN
    plot_h = _SVG_H - 2 * _MARGIN
    kv, dv, z = grid.k_values, grid.direct_values, grid.estimates
    to_x = _scale(float(kv[0]), float(kv[-1]), plot_w)
    to_y_raw = _scale(float(dv[0]), float(dv[-1]), plot_h)

    def to_y(v):
        return _SVG_H - to_y_raw(v)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" '
        f'height="{_SVG_H}" viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect x="0" y="0" width="{_SVG_W}" height="{_SVG_H}" '
        'fill="white"/>',
    ]
    vmax = float(np.abs(z).max()) if z.size else 0.0
    stride_k = max(1, (len(kv) - 1 + 39) // 40) if len(kv) > 1 else 1
    stride_d = max(1, (len(dv) - 1 + 39) // 40) if len(dv) > 1 else 1
    parts.append('<g stroke="none">')
    for i in range(0, max(len(kv) - 1, 1), stride_k):
        i2 = min(i + stride_k, len(kv) - 1)
        for j in range(0, max(len(dv) - 1, 1), stride_d):
            j2 = min(j + stride_d, len(dv) - 1)
            x = to_x(float(kv[i]))
            w = max(to_x(float(kv[i2])) - x, 1.0)
            y = to_y(float(dv[j2]))
            h = max(to_y(float(dv[j])) - y, 1.0)
            color = _heat_color(float(z[i, j]), vmax)
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" '
                f'height="{h:.2f}" fill="{color}"/>'
            )
    parts.append("</g>")
    for polyline in grid.zero_contour:
        coords = " L ".join(
            f"{to_x(float(k)):.2f} {to_y(float(d)):.2f}" for k, d in polyline
        )
        parts.append(
            f'<path d="M {coords}" fill="none" stroke="black" '
            'stroke-width="1.5"/>'
        )
    parts.append(
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="black"/>'
    )
    label_y = _SVG_H - _MARGIN / 3
    parts.append(
        f'<text x="{_SVG_W / 2:.0f}" y="{label_y:.0f}" '
        'text-anchor="middle" font-size="14">k</text>'
    )
    parts.append(
        f'<text x="{_MARGIN / 3:.0f}" y="{_SVG_H / 2:.0f}" '
        'text-anchor="middle" font-size="14" transform="rotate(-90 '
        f'{_MARGIN / 3:.0f} {_SVG_H / 2:.0f})">direct effect</text>'
    )
    for value, x in ((kv[0], _MARGIN), (kv[-1], _SVG_W - _MARGIN)):
        parts.append(
            f'<text x="{x}" y="{_SVG_H - _MARGIN + 18}" '
            f'text-anchor="middle" font-size="11">{float(value):g}</text>'
        )
    for value, y in ((dv[0], _SVG_H - _MARGIN), (dv[-1], _MARGIN)):
        parts.append(
            f'<text x="{_MARGIN - 8}" y="{y + 4}" text-anchor="end" '
            f'font-size="11">{float(value):g}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_line_svg(line: LineSlice) -> str:
    """Estimate curves with CI ribbons; ribbons are <path>, curves are
    <polyline>."""
    plot_w = _SVG_W - 2 * _MARGIN
    plot_h = _SVG_H - 2 * _MARGIN
    x_lo = min(float(c[0, 0]) for c in line.curves)
    x_hi = max(float(c[-1, 0]) for c in line.curves)
    y_lo = min(float(c[:, 2].min()) for c in line.curves)
    y_hi = max(float(c[:, 3].max()) for c in line.curves)
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad
    to_x = _scale(x_lo, x_hi, plot_w)
    to_y_raw = _scale(y_lo, y_hi, plot_h)

    def to_y(v):
        return _SVG_H - to_y_raw(v)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" '
        f'height="{_SVG_H}" viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect x="0" y="0" width="{_SVG_W}" height="{_SVG_H}" '
        'fill="white"/>',
    ]
    if y_lo < 0 < y_hi:
        zero_y = to_y(0.0)
        parts.append(
            f'<line x1="{_MARGIN}" y1="{zero_y:.2f}" '
            f'x2="{_SVG_W - _MARGIN}" y2="{zero_y:.2f}" stroke="#999" '
            'stroke-dasharray="4 3"/>'
        )
    for curve in line.curves:
        upper = [f"{to_x(float(p)):.2f} {to_y(float(hi)):.2f}"
                 for p, hi in zip(curve[:, 0], curve[:, 3])]
        lower = [f"{to_x(float(p)):.2f} {to_y(float(lo)):.2f}"
                 for p, lo in zip(curve[::-1, 0], curve[::-1, 2])]
        ribbon = " L ".join(upper + lower)
        parts.append(
            f'<path d="M {ribbon} Z" fill="#9db8d9" fill-opacity="0.35" '
            'stroke="none"/>'
        )
    for curve in line.curves:
        pts = " ".join(
            f"{to_x(float(p)):.2f},{to_y(float(e)):.2f}"
            for p, e in zip(curve[:, 0], curve[:, 1])
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="#1f4e8c" '
            'stroke-width="1.5"/>'
        )
    parts.append(
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="black"/>'
    )
    parts.append(
        f'<text x="{_SVG_W / 2:.0f}" y="{_SVG_H - _MARGIN / 3:.0f}" '
        f'text-anchor="middle" font-size="14">{line.varying}</text>'
    )
    parts.append(
        f'<text x="{_MARGIN / 3:.0f}" y="{_SVG_H / 2:.0f}" '
        'text-anchor="middle" font-size="14" transform="rotate(-90 '
        f'{_MARGIN / 3:.0f} {_SVG_H / 2:.0f})">estimate</text>'
    )
    for value, x in ((x_lo, _MARGIN), (x_hi, _SVG_W - _MARGIN)):
        parts.append(
            f'<text x="{x}" y="{_SVG_H - _MARGIN + 18}" '
            f'text-anchor="middle" font-size="11">{value:g}</text>'
        )
    for value, y in ((y_lo, _SVG_H - _MARGIN), (y_hi, _MARGIN)):
        parts.append(
            f'<text x="{_MARGIN - 8}" y="{y + 4}" text-anchor="end" '
            f'font-size="11">{value:.4g}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_outputs(results: Mapping, cfg: RunConfig) -> list[Path]:
    """Write every configured output whose result is present.

    ``results`` maps "table"/"contour"/"line" to engine results. The svg
    output renders the contour when one is present, otherwise the line
    slice. Returns the written paths in a fixed order.
    """
    written: list[Path] = []
    table = results.get("table")
    if table is not None and "table" in cfg.outputs:
        written.append(write_table_csv(table, cfg.outputs["table"]))
    contour = results.get("contour")
    if contour is not None and "contour" in cfg.outputs:
        csv_path = cfg.outputs["contour"]
        written.append(write_contour_csv(contour, csv_path))
        json_path = csv_path.with_suffix(".json")
        if json_path == csv_path:
            json_path = csv_path.with_name(csv_path.name + ".json")
        written.append(write_contour_json(contour, json_path))
    line = results.get("line")
    if line is not None and "line" in cfg.outputs:
        written.extend(write_line_csvs(line, cfg.outputs["line"]))
    if "svg" in cfg.outputs:
        if contour is not None:
            written.append(
                _write_text(cfg.outputs["svg"], render_contour_svg(contour))
            )
        elif line is not None:
            written.append(
                _write_text(cfg.outputs["svg"], render_line_svg(line))
            )
    return written
