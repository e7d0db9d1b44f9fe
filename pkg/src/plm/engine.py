"""Grid evaluation, contours, and bootstrap inference.

Every adjustment here is affine in the sensitivity parameters, so one pass
over the data yields the handful of coefficients and residual norms that
determine the whole surface. The bootstrap therefore resamples rows once,
stores those per-replicate quantities, and reuses them for every grid
point, anchor row, and line slice.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import solve_triangular

from .adjust import (
    LARGE_K,
    PlaceboSpec,
    dispatch_case,
)
from .double import DoublePlaceboSpec
from .errors import (
    BootstrapDegenerate,
    ConfigError,
    DegenerateResidual,
    DenominatorNearZero,
    MediatorCautionWarning,
    NonpositiveScale,
    NumericError,
    RankDeficient,
    ScaleConfusionWarning,
)
from .regression import RANK_TOL, Dataset

NEAR_ZERO = 1e-12


@dataclass(frozen=True)
class AnalysisConfig:
    """Settings shared by the table, contour, line, and bootstrap runners.

    ``k_range`` spans the relative-confounding parameter (the product
    parameter for double-placebo specs); ``direct_range`` spans the
    case-specific direct-effect coefficient (the treatment-to-placebo-
    outcome direct link for double-placebo specs). ``freeze_sf`` holds the
    scale factor at its full-sample value inside bootstrap replicates
    instead of re-estimating it. ``cluster_col`` switches the bootstrap to
    resampling whole clusters.
    """

    spec: PlaceboSpec | DoublePlaceboSpec | None = None
    k_range: tuple[float, float] = (-2.0, 2.0)
    direct_range: tuple[float, float] = (0.0, 0.0)
    grid_points_per_axis: int | None = None
    bootstrap_reps: int = 1000
    seed: int = 0
    ci_level: float = 0.95
    workers: int = 1
    freeze_sf: bool = False
    cluster_col: str | None = None

    def __post_init__(self):
        for name in ("k_range", "direct_range"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                raise ConfigError(
                    f"{name} must be a finite (low, high) pair, got "
                    f"{(lo, hi)}"
                )
            object.__setattr__(self, name, (float(lo), float(hi)))
        g = self.grid_points_per_axis
        if g is not None and g < 1:
            raise ConfigError("grid_points_per_axis must be at least 1")
        if self.bootstrap_reps < 2:
            raise ConfigError("bootstrap_reps must be at least 2")
        if not 0.0 < self.ci_level < 1.0:
            raise ConfigError("ci_level must sit strictly between 0 and 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")


class TableRow(NamedTuple):
    """One table entry: a labeled point in (k, direct) space."""

    label: str
    k: float
    direct: float
    estimate: float
    se: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class ResultTable:
    rows: tuple[TableRow, ...]
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ContourGrid:
    """Estimate surface over the (k, direct) rectangle.

    ``estimates[i, j]`` belongs to ``(k_values[i], direct_values[j])``;
    ``zero_contour`` holds polylines of (k, direct) points where the
    estimate crosses zero.
    """

    k_values: np.ndarray
    direct_values: np.ndarray
    estimates: np.ndarray
    zero_contour: tuple[np.ndarray, ...]
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LineSlice:
    """One-dimensional slices of the surface with bootstrap bands.

    ``curves[i]`` is an (n, 4) array of (parameter value, estimate,
    ci_low, ci_high) holding the fixed parameter at ``fixed_values[i]``.
    """

    varying: str
    fixed_values: tuple[float, ...]
    curves: tuple[np.ndarray, ...]
    metadata: dict = field(default_factory=dict)


def standard_did_k(sf: float) -> float:
    """The k value whose adjustment reproduces standard DID, 1 / SF."""
    if not np.isfinite(sf) or sf <= 0:
        raise NonpositiveScale(f"scale factor must be positive, got {sf}")
    return 1.0 / sf


def _fit_block(cols, idx, regressors, responses):
    """One QR shared by several responses on the same design.

    Returns (beta, l2) where beta[j + 1, r] is the coefficient of
    ``regressors[j]`` for ``responses[r]`` (row 0 is the intercept) and
    l2[r] the residual norm.
    """
    n = cols[responses[0]][idx].shape[0]
    p = len(regressors)
    if n <= p + 1:
        raise RankDeficient(
            f"{n} rows cannot support {p} regressors plus an intercept"
        )
    x = np.empty((n, p + 1))
    x[:, 0] = 1.0
    for j, name in enumerate(regressors):
        x[:, j + 1] = cols[name][idx]
    q, r = np.linalg.qr(x)
    diag = np.abs(np.diag(r))
    if diag.min() <= RANK_TOL * diag.max():
        raise RankDeficient(
            f"design with regressors {list(regressors)} is rank deficient"
        )
    y = np.empty((n, len(responses)))
    for j, name in enumerate(responses):
        y[:, j] = cols[name][idx]
    beta = solve_triangular(r, q.T @ y)
    resid = y - x @ beta
    return beta, np.linalg.norm(resid, axis=0)


def _guarded_l2(l2: float, col: np.ndarray, idx) -> float:
    values = col[idx]
    scale = float(np.sqrt(np.mean(values**2)))
    if l2 <= NEAR_ZERO * max(scale, 1e-300) * np.sqrt(values.shape[0]):
        raise DegenerateResidual(
            "a residual needed for the scale factor has (near) zero norm"
        )
    return float(l2)


class _SingleEngine:
    """Per-replicate quantities (target, placebo, SF) for a placebo spec."""

    width = 3

    def __init__(self, data: Dataset, spec: PlaceboSpec):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MediatorCautionWarning)
            self.case = dispatch_case(spec)
        self.spec = spec
        names = {spec.outcome_col, spec.treatment_col, spec.placebo_col,
                 *spec.covariate_cols}
        self.cols = {name: data[name] for name in names}
        self._quantities = getattr(self, "_q_" + spec.role)

    def quantities(self, idx):
        y, d, p = (self.spec.outcome_col, self.spec.treatment_col,
                   self.spec.placebo_col)
        return self._quantities(self.cols, idx, y, d, p,
                                self.spec.covariate_cols)

    @staticmethod
    def _q_placebo_outcome(cols, idx, y, d, p, x):
        beta, l2 = _fit_block(cols, idx, (d, *x), (y, p))
        sf = (_guarded_l2(l2[0], cols[y], idx)
              / _guarded_l2(l2[1], cols[p], idx))
        return beta[1, 0], beta[1, 1], sf

    @staticmethod
    def _q_placebo_treatment(cols, idx, y, d, p, x):
        beta, _ = _fit_block(cols, idx, (d, p, *x), (y,))
        _, l2_p = _fit_block(cols, idx, (d, *x), (p,))
        _, l2_d = _fit_block(cols, idx, (p, *x), (d,))
        sf = (_guarded_l2(l2_p[0], cols[p], idx)
              / _guarded_l2(l2_d[0], cols[d], idx))
        return beta[1, 0], beta[2, 0], sf

    @staticmethod
    def _q_observed_confounder_1(cols, idx, y, d, p, x):
        beta_y, l2_y = _fit_block(cols, idx, (d, p, *x), (y,))
        beta_p, l2_p = _fit_block(cols, idx, (d, *x), (p,))
        _, l2_d_px = _fit_block(cols, idx, (p, *x), (d,))
        _, l2_d_x = _fit_block(cols, idx, x, (d,))
        sf = (_guarded_l2(l2_y[0], cols[y], idx)
              / _guarded_l2(l2_d_px[0], cols[d], idx)) * (
            _guarded_l2(l2_d_x[0], cols[d], idx)
            / _guarded_l2(l2_p[0], cols[p], idx))
        return beta_y[1, 0], beta_p[1, 0], sf

    @staticmethod
    def _q_mediator(cols, idx, y, d, p, x):
        beta_s, l2_s = _fit_block(cols, idx, (d, *x), (y, p))
        beta_l, l2_l = _fit_block(cols, idx, (d, p, *x), (y,))
        _, l2_d_x = _fit_block(cols, idx, x, (d,))
        sf = (_guarded_l2(l2_s[1], cols[p], idx)
              / _guarded_l2(l2_d_x[0], cols[d], idx)) * (
            _guarded_l2(l2_s[0], cols[y], idx)
            / _guarded_l2(l2_l[0], cols[y], idx))
        return beta_s[1, 0], beta_l[2, 0], sf

    @staticmethod
    def _q_observed_confounder_2(cols, idx, y, d, p, x):
        beta_y, l2_y = _fit_block(cols, idx, (d, p, *x), (y,))
        beta_d, l2_d = _fit_block(cols, idx, (p, *x), (d,))
        _, l2_p_x = _fit_block(cols, idx, x, (p,))
        l2_d_px = _guarded_l2(l2_d[0], cols[d], idx)
        sf = (_guarded_l2(l2_y[0], cols[y], idx) / l2_d_px) * (
            _guarded_l2(l2_p_x[0], cols[p], idx) / l2_d_px)
        return beta_y[1, 0], beta_d[1, 0], sf

    @staticmethod
    def _q_post_outcome(cols, idx, y, d, p, x):
        beta_s, l2_s = _fit_block(cols, idx, (d, *x), (y,))
        beta_p, l2_p = _fit_block(cols, idx, (d, y, *x), (p,))
        _, l2_d_x = _fit_block(cols, idx, x, (d,))
        l2_y_dx = _guarded_l2(l2_s[0], cols[y], idx)
        sf = (l2_y_dx / _guarded_l2(l2_d_x[0], cols[d], idx)) * (
            l2_y_dx / _guarded_l2(l2_p[0], cols[p], idx))
        return beta_s[1, 0], beta_p[2, 0], sf

    @staticmethod
    def estimate(q, k, direct):
        """Adjusted estimate; q rows are (target, placebo, sf)."""
        t = q[..., 0]
        p = q[..., 1]
        s = q[..., 2]
        return t - k * (p - direct) * s


class _DoubleEngine:
    """Per-replicate short coefficients for a double-placebo spec."""

    width = 4

    def __init__(self, data: Dataset, spec: DoublePlaceboSpec):
        self.spec = spec
        names = {spec.outcome_col, spec.treatment_col,
                 spec.placebo_treatment_col, spec.placebo_outcome_col,
                 *spec.covariate_cols}
        self.cols = {name: data[name] for name in names}

    def quantities(self, idx):
        s = self.spec
        beta, _ = _fit_block(
            self.cols, idx,
            (s.treatment_col, s.placebo_treatment_col, *s.covariate_cols),
            (s.outcome_col, s.placebo_outcome_col),
        )
        return beta[1, 0], beta[2, 0], beta[1, 1], beta[2, 1]

    def estimate(self, q, k_product, beta_nd_long):
        """Adjusted estimate; q rows are (yd, yp, nd, np) coefficients."""
        denom = q[..., 3] - self.spec.beta_np_long
        return q[..., 0] - k_product * (
            (q[..., 1] - self.spec.beta_yp_long)
            * (q[..., 2] - beta_nd_long)
            / denom
        )

    def check_denominator(self, q) -> None:
        denom = float(q[3]) - self.spec.beta_np_long
        scale = max(1.0, abs(float(q[3])), abs(self.spec.beta_np_long))
        if abs(denom) <= NEAR_ZERO * scale:
            raise DenominatorNearZero(
                "measured placebo-pair coefficient equals its assumed "
                "direct part; the double-placebo surface is undefined"
            )

    def replicate_valid(self, q_rows: np.ndarray) -> np.ndarray:
        denom = q_rows[:, 3] - self.spec.beta_np_long
        scale = np.maximum(1.0, np.maximum(np.abs(q_rows[:, 3]),
                                           abs(self.spec.beta_np_long)))
        return np.abs(denom) > NEAR_ZERO * scale


def _build_engine(data: Dataset, cfg: AnalysisConfig):
    if isinstance(cfg.spec, PlaceboSpec):
        return _SingleEngine(data, cfg.spec)
    if isinstance(cfg.spec, DoublePlaceboSpec):
        return _DoubleEngine(data, cfg.spec)
    raise ConfigError(
        "config.spec must be a PlaceboSpec or DoublePlaceboSpec"
    )


def _warn_on_ranges(cfg: AnalysisConfig) -> None:
    if isinstance(cfg.spec, DoublePlaceboSpec):
        return
    largest = max(abs(cfg.k_range[0]), abs(cfg.k_range[1]))
    if largest > LARGE_K:
        warnings.warn(
            f"k range reaches |k| = {largest:g}, beyond {LARGE_K:g}; k is "
            "scale-free, so ranges this wide usually mean m (raw-bias "
            "ratio) was intended",
            ScaleConfusionWarning,
            stacklevel=3,
        )


def _cluster_index_pool(data: Dataset, cluster_col: str):
    ids = data[cluster_col]
    _, inverse = np.unique(ids, return_inverse=True)
    n_clusters = int(inverse.max()) + 1
    members = [np.flatnonzero(inverse == c) for c in range(n_clusters)]
    return members


def _replicate_indices(rng, n_rows: int, members) -> np.ndarray:
    if members is None:
        return rng.integers(0, n_rows, n_rows)
    n_clusters = len(members)
    chosen = rng.integers(0, n_clusters, n_clusters)
    return np.concatenate([members[c] for c in chosen])


def _replicate_rng(seed: int, rep: int):
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(rep,))
    )


def _run_replicates(task: Callable[[int], None], reps: int,
                    workers: int) -> None:
    if workers == 1:
        for rep in range(reps):
            task(rep)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # list() propagates the first worker exception, if any.
        list(pool.map(task, range(reps)))


def _bootstrap_quantities(engine, data: Dataset, cfg: AnalysisConfig):
    """Per-replicate quantity matrix and validity mask."""
    reps = cfg.bootstrap_reps
    members = (None if cfg.cluster_col is None
               else _cluster_index_pool(data, cfg.cluster_col))
    out = np.zeros((reps, engine.width))
    valid = np.zeros(reps, dtype=bool)

    def task(rep: int) -> None:
        rng = _replicate_rng(cfg.seed, rep)
        idx = _replicate_indices(rng, data.n_rows, members)
        try:
            out[rep] = engine.quantities(idx)
        except NumericError:
            return
        valid[rep] = True

    _run_replicates(task, reps, cfg.workers)
    failures = reps - int(valid.sum())
    if failures > 0.01 * reps:
        raise BootstrapDegenerate(
            f"{failures} of {reps} bootstrap replicates failed; the design "
            "is too close to degenerate for resampling inference"
        )
    q_rows = out[valid]
    if isinstance(engine, _DoubleEngine):
        keep = engine.replicate_valid(q_rows)
        dropped = int((~keep).sum())
        failures += dropped
        if failures > 0.01 * reps:
            raise BootstrapDegenerate(
                f"{failures} of {reps} bootstrap replicates degenerate "
                "(rank failures or vanishing placebo-pair coefficient)"
            )
        q_rows = q_rows[keep]
    if cfg.freeze_sf and isinstance(engine, _SingleEngine):
        q_full = engine.quantities(slice(None))
        q_rows = q_rows.copy()
        q_rows[:, 2] = q_full[2]
    return q_rows, failures


def _ci_bounds(values: np.ndarray, ci_level: float, axis=None):
    alpha = 1.0 - ci_level
    lo, hi = np.percentile(values,
                           [100.0 * alpha / 2.0, 100.0 * (1.0 - alpha / 2.0)],
                           axis=axis)
    return lo, hi


def _axis_quartiles(bounds: tuple[float, float], g: int) -> np.ndarray:
    """g interior range quantiles, i / (g + 1) of the way across."""
    lo, hi = bounds
    fractions = np.arange(1, g + 1) / (g + 1)
    return np.unique(lo + fractions * (hi - lo))


def _axis_lattice(bounds: tuple[float, float], g: int) -> np.ndarray:
    lo, hi = bounds
    return np.linspace(lo, hi, g)


def _base_metadata(engine, data: Dataset, cfg: AnalysisConfig) -> dict:
    meta = {"n_rows": data.n_rows, "seed": cfg.seed}
    if isinstance(engine, _SingleEngine):
        case = engine.case
        meta.update(
            role=engine.spec.role,
            direct_effect_name=case.direct_effect_name,
            alternatives=case.alternatives,
            cautions=case.cautions,
        )
    else:
        meta.update(
            role="double_placebo",
            direct_effect_name="treatment->placebo_outcome",
            alternatives=(),
            cautions=(),
            beta_yp_long=engine.spec.beta_yp_long,
            beta_np_long=engine.spec.beta_np_long,
        )
    return meta


def run_table(data: Dataset, cfg: AnalysisConfig) -> ResultTable:
    """Anchored sensitivity table with bootstrap SEs and CIs.

    Anchor rows: the unadjusted estimate (k = 0), the k that reproduces
    standard DID (1 / SF), and k = 1; double-placebo specs anchor at the
    unadjusted estimate and the single-confounder point identification
    (product = 1). Grid rows sit at interior range quantiles of both
    parameter ranges, i / (g + 1) across each span, so the default g = 3
    gives the quartile points.
    """
    engine = _build_engine(data, cfg)
    _warn_on_ranges(cfg)
    q_full = np.asarray(engine.quantities(slice(None)))
    if isinstance(engine, _DoubleEngine):
        engine.check_denominator(q_full)
        anchors = [("SOO", 0.0, 0.0), ("Point ID", 1.0, 0.0)]
    else:
        sf_full = float(q_full[2])
        anchors = [
            ("SOO", 0.0, 0.0),
            ("Standard DID", standard_did_k(sf_full), 0.0),
            ("k=1 DID", 1.0, 0.0),
        ]
    g = 3 if cfg.grid_points_per_axis is None else cfg.grid_points_per_axis
    k_values = _axis_quartiles(cfg.k_range, g)
    direct_values = _axis_quartiles(cfg.direct_range, g)
    points = anchors + [
        ("Grid", float(k), float(dv))
        for k in k_values
        for dv in direct_values
    ]
    q_rows, failures = _bootstrap_quantities(engine, data, cfg)
    rows = []
    for label, k, dv in points:
        est = float(engine.estimate(q_full, k, dv))
        draws = engine.estimate(q_rows, k, dv)
        lo, hi = _ci_bounds(draws, cfg.ci_level)
        rows.append(TableRow(
            label=label,
            k=k,
            direct=dv,
            estimate=est,
            se=float(np.std(draws, ddof=1)),
            ci_low=float(lo),
            ci_high=float(hi),
        ))
    meta = _base_metadata(engine, data, cfg)
    meta.update(
        bootstrap_reps=cfg.bootstrap_reps,
        bootstrap_failures=failures,
        ci_level=cfg.ci_level,
        freeze_sf=cfg.freeze_sf,
        cluster_col=cfg.cluster_col,
    )
    if isinstance(engine, _SingleEngine):
        meta.update(scale_factor=sf_full,
                    standard_did_k=standard_did_k(sf_full))
    return ResultTable(rows=tuple(rows), metadata=meta)


def run_contour(data: Dataset, cfg: AnalysisConfig) -> ContourGrid:
    """Estimate surface over the full (k, direct) rectangle.

    No bootstrap: the surface is a point-estimate map, with the zero-level
    set traced for overlay plots.
    """
    engine = _build_engine(data, cfg)
    _warn_on_ranges(cfg)
    q_full = np.asarray(engine.quantities(slice(None)))
    if isinstance(engine, _DoubleEngine):
        engine.check_denominator(q_full)
    g = 201 if cfg.grid_points_per_axis is None else cfg.grid_points_per_axis
    k_values = _axis_lattice(cfg.k_range, g)
    direct_values = _axis_lattice(cfg.direct_range, g)
    estimates = engine.estimate(
        q_full, k_values[:, None], direct_values[None, :]
    )
    contour = _zero_contour(k_values, direct_values, estimates)
    meta = _base_metadata(engine, data, cfg)
    if isinstance(engine, _SingleEngine):
        meta.update(scale_factor=float(q_full[2]))
    return ContourGrid(
        k_values=k_values,
        direct_values=direct_values,
        estimates=estimates,
        zero_contour=tuple(contour),
        metadata=meta,
    )


def run_line(data: Dataset, cfg: AnalysisConfig, varying: str = "k",
             fixed_percentiles: tuple[float, ...] = (0.5,)) -> LineSlice:
    """One-dimensional estimate curves with bootstrap confidence bands.

    ``varying`` is "k" or "direct"; the other parameter is held at the
    given fractions of its configured range (default: midpoint).
    """
    if varying not in ("k", "direct"):
        raise ConfigError("varying must be 'k' or 'direct'")
    for frac in fixed_percentiles:
        if not 0.0 <= frac <= 1.0:
            raise ConfigError("fixed_percentiles must sit in [0, 1]")
    if not fixed_percentiles:
        raise ConfigError("at least one fixed percentile is required")
    engine = _build_engine(data, cfg)
    _warn_on_ranges(cfg)
    q_full = np.asarray(engine.quantities(slice(None)))
    if isinstance(engine, _DoubleEngine):
        engine.check_denominator(q_full)
    g = 201 if cfg.grid_points_per_axis is None else cfg.grid_points_per_axis
    vary_bounds = cfg.k_range if varying == "k" else cfg.direct_range
    fixed_bounds = cfg.direct_range if varying == "k" else cfg.k_range
    axis = _axis_lattice(vary_bounds, g)
    fixed_values = tuple(
        float(fixed_bounds[0] + f * (fixed_bounds[1] - fixed_bounds[0]))
        for f in fixed_percentiles
    )
    q_rows, failures = _bootstrap_quantities(engine, data, cfg)
    curves = []
    for fv in fixed_values:
        if varying == "k":
            est = engine.estimate(q_full, axis, fv)
            draws = engine.estimate(q_rows[None, :, :], axis[:, None], fv)
        else:
            est = engine.estimate(q_full, fv, axis)
            draws = engine.estimate(q_rows[None, :, :], fv, axis[:, None])
        lo, hi = _ci_bounds(draws, cfg.ci_level, axis=1)
        curves.append(np.column_stack([axis, est, lo, hi]))
    meta = _base_metadata(engine, data, cfg)
    meta.update(
        bootstrap_reps=cfg.bootstrap_reps,
        bootstrap_failures=failures,
        ci_level=cfg.ci_level,
        freeze_sf=cfg.freeze_sf,
        cluster_col=cfg.cluster_col,
    )
    if isinstance(engine, _SingleEngine):
        meta.update(scale_factor=float(q_full[2]))
    return LineSlice(
        varying=varying,
        fixed_values=fixed_values,
        curves=tuple(curves),
        metadata=meta,
    )


def bootstrap(data: Dataset, cfg: AnalysisConfig,
              statistic: Callable[[Dataset], float]) -> dict:
    """Generic row (or cluster) bootstrap of a scalar statistic.

    Returns {"se": float, "ci": (low, high)} with a percentile interval at
    ``cfg.ci_level``. Replicates where the statistic raises a numeric
    error count as failures, tolerated up to 1 percent.
    """
    reps = cfg.bootstrap_reps
    members = (None if cfg.cluster_col is None
               else _cluster_index_pool(data, cfg.cluster_col))
    values = np.zeros(reps)
    valid = np.zeros(reps, dtype=bool)

    def task(rep: int) -> None:
        rng = _replicate_rng(cfg.seed, rep)
        idx = _replicate_indices(rng, data.n_rows, members)
        try:
            values[rep] = statistic(data.take(idx))
        except NumericError:
            return
        valid[rep] = True

    _run_replicates(task, reps, cfg.workers)
    failures = reps - int(valid.sum())
    if failures > 0.01 * reps:
        raise BootstrapDegenerate(
            f"{failures} of {reps} bootstrap replicates failed"
        )
    draws = values[valid]
    lo, hi = _ci_bounds(draws, cfg.ci_level)
    return {"se": float(np.std(draws, ddof=1)),
            "ci": (float(lo), float(hi))}


def _zero_contour(k_values, direct_values, z):
    """Zero-level polylines of the surface via marching squares.

    Edge crossings are computed once per canonical grid edge so shared
    points are bitwise identical; four-crossing cells are disambiguated
    with the cell-center sign.
    """
    gk, gd = z.shape
    if gk < 2 or gd < 2:
        return []
    positive = z > 0
    crossings: dict[tuple, tuple[float, float]] = {}

    def edge_point(kind, i, j):
        # kind "k": (i,j)-(i+1,j); kind "d": (i,j)-(i,j+1).
        key = (kind, i, j)
        if key in crossings:
            return key
        if kind == "k":
            v0, v1 = z[i, j], z[i + 1, j]
            p0 = (k_values[i], direct_values[j])
            p1 = (k_values[i + 1], direct_values[j])
        else:
            v0, v1 = z[i, j], z[i, j + 1]
            p0 = (k_values[i], direct_values[j])
            p1 = (k_values[i], direct_values[j + 1])
        t = v0 / (v0 - v1)
        crossings[key] = (p0[0] + t * (p1[0] - p0[0]),
                          p0[1] + t * (p1[1] - p0[1]))
        return key

    segments = []
    for i in range(gk - 1):
        for j in range(gd - 1):
            signs = (positive[i, j], positive[i + 1, j],
                     positive[i + 1, j + 1], positive[i, j + 1])
            if all(signs) or not any(signs):
                continue
            # Cyclic edge list with the sign pair along each edge.
            edges = (
                (("k", i, j), signs[0], signs[1]),
                (("d", i + 1, j), signs[1], signs[2]),
                (("k", i, j + 1), signs[3], signs[2]),
                (("d", i, j), signs[0], signs[3]),
            )
            crossed = [spec for spec, s0, s1 in edges if s0 != s1]
            keys = [edge_point(*spec) for spec in crossed]
            if len(keys) == 2:
                segments.append((keys[0], keys[1]))
            else:
                center = (z[i, j] + z[i + 1, j] + z[i + 1, j + 1]
                          + z[i, j + 1]) / 4.0
                # Cyclic crossed order: bottom, right, top, left.
                if (center > 0) == signs[0]:
                    segments.append((keys[0], keys[3]))
                    segments.append((keys[1], keys[2]))
                else:
                    segments.append((keys[0], keys[1]))
                    segments.append((keys[2], keys[3]))
    return _chain_segments(segments, crossings)


def _chain_segments(segments, crossings):
    """Join crossing-to-crossing segments into maximal polylines."""
    neighbors: dict[tuple, list[tuple]] = {}
    for a, b in segments:
        neighbors.setdefault(a, []).append(b)
        neighbors.setdefault(b, []).append(a)
    used = set()
    polylines = []

    def walk(start):
        chain = [start]
        current = start
        while True:
            step = None
            for nxt in neighbors[current]:
                pair = frozenset((current, nxt))
                if pair not in used:
                    step = nxt
                    used.add(pair)
                    break
            if step is None:
                return chain
            chain.append(step)
            current = step

    endpoints = [key for key, adj in neighbors.items() if len(adj) == 1]
    for start in endpoints:
        if any(frozenset((start, nxt)) not in used
               for nxt in neighbors[start]):
            chain = walk(start)
            polylines.append(np.array([crossings[key] for key in chain]))
    for a, b in segments:
        if frozenset((a, b)) not in used:
            used.add(frozenset((a, b)))
            chain = [a] + walk(b)
            polylines.append(np.array([crossings[key] for key in chain]))
    return polylines
