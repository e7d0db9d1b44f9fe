"""Single-placebo sensitivity adjustments.

A placebo variable P (a negative control) shares unobserved confounders Z
with the treatment D and outcome Y but is assumed to have no, or a known
small, direct causal tie to the variable of interest. Each supported causal
role of P comes with a pair of short regressions, a scale factor built from
residual norms, and an affine adjustment

    adjusted = short_target - k * (measured - direct_effect) * SF

where ``k`` is the scale-free relative-confounding parameter and
``direct_effect`` is the case's direct-link coefficient in the placebo's raw
units. ``m = k * SF`` is the same assumption on the raw-bias-ratio scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import (
    AmbiguousSpec,
    ConfigError,
    DegenerateResidual,
    MediatorCautionWarning,
    NonpositiveScale,
    ScaleConfusionWarning,
    UnsupportedCase,
)
from .regression import Dataset, fit_ols, residualize

ROLES = (
    "placebo_outcome",
    "placebo_treatment",
    "observed_confounder_1",
    "observed_confounder_2",
    "mediator",
    "post_outcome",
)

LARGE_K = 10.0


@dataclass(frozen=True)
class PlaceboSpec:
    """Declares which column plays the placebo and how it sits in the graph.

    ``edge_d_to_p`` and ``edge_p_to_y`` describe direct causal links from the
    treatment to the placebo and from the placebo to the outcome. Roles that
    put the placebo upstream of D (observed_confounder_2) or downstream of Y
    (post_outcome) imply their own extra edge and only use these two flags
    for the remaining variants.

    ``acknowledge_mediator`` must be set to run the mediator case, which is
    discouraged; see ``dispatch_case``.
    """

    outcome_col: str
    treatment_col: str
    placebo_col: str
    role: str
    edge_d_to_p: bool = False
    edge_p_to_y: bool = False
    covariate_cols: tuple[str, ...] = ()
    acknowledge_mediator: bool = False

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigError(
                f"unknown role {self.role!r}; expected one of {ROLES}"
            )
        object.__setattr__(self, "covariate_cols", tuple(self.covariate_cols))
        names = [self.outcome_col, self.treatment_col, self.placebo_col,
                 *self.covariate_cols]
        if len(set(names)) != len(names):
            raise ConfigError(
                "outcome, treatment, placebo, and covariates must be distinct"
            )


@dataclass(frozen=True)
class SensitivityPoint:
    """One (k, direct_effect) assumption.

    ``direct_effect`` is the case-specific direct-link coefficient, always in
    the placebo variable's raw units: the D-to-placebo coefficient for
    placebo outcomes and observed confounder 1, the placebo-to-Y coefficient
    for placebo treatments and mediators, the placebo-to-D coefficient for
    observed confounder 2, and the Y-to-placebo coefficient for post
    outcomes.
    """

    k: float
    direct_effect: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.k) and np.isfinite(self.direct_effect)):
            raise ConfigError("sensitivity parameters must be finite")


class ShortCoefficients(NamedTuple):
    """Observable inputs to an adjustment: target and measured coefficient."""

    target: float
    placebo: float


@dataclass(frozen=True)
class CaseFormula:
    """One taxonomy case, resolved against concrete column names.

    ``short_regressions`` lists (response, regressors) pairs the case fits;
    ``sf`` maps a dataset to the case's positive scale factor; ``adjust``
    maps (coefs, k, direct_effect, sf) to the adjusted estimate;
    ``fit_coefficients`` extracts the ShortCoefficients from a dataset.
    ``alternatives`` names other roles compatible with the declared edges and
    ``cautions`` carries flags (for example for the mediator case) that
    result tables propagate into their metadata.
    """

    role: str
    short_regressions: tuple[tuple[str, tuple[str, ...]], ...]
    sf: Callable[[Dataset], float]
    adjust: Callable[[ShortCoefficients, float, float, float], float]
    fit_coefficients: Callable[[Dataset], ShortCoefficients]
    direct_effect_name: str
    alternatives: tuple[str, ...] = ()
    cautions: tuple[str, ...] = ()


@dataclass(frozen=True)
class AdjustedEstimate:
    """A single adjusted estimate, optionally with bootstrap inference."""

    estimate: float
    point: SensitivityPoint
    label: str = ""
    se: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None


def _check_sf(sf: float) -> None:
    if not np.isfinite(sf) or sf <= 0:
        raise NonpositiveScale(f"scale factor must be positive, got {sf}")


def _warn_large_k(k: float) -> None:
    if abs(k) > LARGE_K:
        warnings.warn(
            f"|k| = {abs(k):.3g} exceeds {LARGE_K:g}; k is scale-free, so "
            "values this large usually mean m (raw-bias ratio) was intended",
            ScaleConfusionWarning,
            stacklevel=3,
        )


def _ovb_adjust(short: float, measured: float, point: SensitivityPoint,
                sf: float) -> float:
    _check_sf(sf)
    _warn_large_k(point.k)
    return short - point.k * (measured - point.direct_effect) * sf


def adjust_placebo_outcome(beta_y_short: float, beta_n_short: float,
                           point: SensitivityPoint, sf: float) -> float:
    """Adjusted Y~D coefficient using an outcome-side placebo N.

    ``beta_y_short`` is the D coefficient from Y ~ D + X and
    ``beta_n_short`` the D coefficient from N ~ D + X. ``direct_effect`` is
    the direct D-to-N coefficient (zero for a perfect placebo) and
    ``sf`` the ratio of residual scales of Y and N given (D, X).
    """
    return _ovb_adjust(beta_y_short, beta_n_short, point, sf)


def adjust_placebo_treatment(beta_yd_short: float, beta_yp_short: float,
                             point: SensitivityPoint, sf: float) -> float:
    """Adjusted Y~D coefficient using a treatment-side placebo P.

    Both inputs come from the single short regression Y ~ D + P + X:
    ``beta_yd_short`` is the D coefficient and ``beta_yp_short`` the P
    coefficient. ``direct_effect`` is the direct P-to-Y coefficient.
    """
    return _ovb_adjust(beta_yd_short, beta_yp_short, point, sf)


def adjust_observed_confounder_1(beta_yd_given_px: float, beta_pd_short: float,
                                 point: SensitivityPoint, sf: float) -> float:
    """Adjusted Y~D coefficient when P (a cause of Y) is controlled.

    ``beta_yd_given_px`` comes from Y ~ D + P + X and ``beta_pd_short`` from
    P ~ D + X. ``direct_effect`` is the direct D-to-P coefficient, zero when
    D does not cause P.
    """
    return _ovb_adjust(beta_yd_given_px, beta_pd_short, point, sf)


def adjust_mediator(beta_yd_short: float, beta_yp_given_dx: float,
                    point: SensitivityPoint, sf: float) -> float:
    """Total-effect adjustment when P mediates part of D's effect on Y.

    Discouraged: with a mediator the relative-confounding parameter mixes
    causal channels and is hard to reason about. Emits a
    MediatorCautionWarning every time. ``beta_yd_short`` comes from
    Y ~ D + X, ``beta_yp_given_dx`` is the P coefficient from Y ~ D + P + X,
    and ``direct_effect`` is the causal P-to-Y coefficient, which here is
    part of the total effect being recovered.
    """
    warnings.warn(
        "mediator-case adjustment: the sensitivity parameter conflates "
        "causal and confounding channels; interpret with care",
        MediatorCautionWarning,
        stacklevel=2,
    )
    return _ovb_adjust(beta_yd_short, beta_yp_given_dx, point, sf)


def adjust_observed_confounder_2(beta_yd_given_px: float, beta_dp_short: float,
                                 point: SensitivityPoint, sf: float) -> float:
    """Adjusted Y~D coefficient when P is an observed cause of D.

    ``beta_yd_given_px`` comes from Y ~ D + P + X and ``beta_dp_short`` is
    the P coefficient from D ~ P + X. ``direct_effect`` is the causal
    P-to-D coefficient, typically nonzero in this role.
    """
    return _ovb_adjust(beta_yd_given_px, beta_dp_short, point, sf)


def adjust_post_outcome(beta_yd_short: float, beta_py_given_dx: float,
                        point: SensitivityPoint, sf: float) -> float:
    """Adjusted Y~D coefficient when P is measured downstream of Y.

    ``beta_yd_short`` comes from Y ~ D + X and ``beta_py_given_dx`` is the Y
    coefficient from P ~ D + Y + X. ``direct_effect`` is the causal
    Y-to-P coefficient, typically nonzero in this role.
    """
    return _ovb_adjust(beta_yd_short, beta_py_given_dx, point, sf)


def m_from_k(k: float, sf: float) -> float:
    """Convert scale-free k to the raw bias ratio m = k * SF."""
    _check_sf(sf)
    return k * sf


def k_from_m(m: float, sf: float) -> float:
    """Convert a raw bias ratio m to the scale-free k = m / SF."""
    _check_sf(sf)
    return m / sf


def _l2(data: Dataset, variable: str, controls) -> float:
    res = residualize(data, variable, controls)
    scale = float(np.sqrt(np.mean(data[variable] ** 2)))
    if res.l2_norm <= 1e-12 * max(scale, 1e-300) * np.sqrt(data.n_rows):
        raise DegenerateResidual(
            f"residual of {variable!r} on {list(controls)} has (near) zero "
            "variance; scale factor undefined"
        )
    return res.l2_norm


def _sf_placebo_outcome(data, y, d, p, x):
    return _l2(data, y, (d, *x)) / _l2(data, p, (d, *x))


def _sf_placebo_treatment(data, y, d, p, x):
    return _l2(data, p, (d, *x)) / _l2(data, d, (p, *x))


def _sf_observed_confounder_1(data, y, d, p, x):
    return (_l2(data, y, (d, p, *x)) / _l2(data, d, (p, *x))) * (
        _l2(data, d, x) / _l2(data, p, (d, *x))
    )


def _sf_mediator(data, y, d, p, x):
    return (_l2(data, p, (d, *x)) / _l2(data, d, x)) * (
        _l2(data, y, (d, *x)) / _l2(data, y, (d, p, *x))
    )


def _sf_observed_confounder_2(data, y, d, p, x):
    return (_l2(data, y, (d, p, *x)) / _l2(data, d, (p, *x))) * (
        _l2(data, p, x) / _l2(data, d, (p, *x))
    )


def _sf_post_outcome(data, y, d, p, x):
    return (_l2(data, y, (d, *x)) / _l2(data, d, x)) * (
        _l2(data, y, (d, *x)) / _l2(data, p, (y, d, *x))
    )


_SF_BUILDERS = {
    "placebo_outcome": _sf_placebo_outcome,
    "placebo_treatment": _sf_placebo_treatment,
    "observed_confounder_1": _sf_observed_confounder_1,
    "mediator": _sf_mediator,
    "observed_confounder_2": _sf_observed_confounder_2,
    "post_outcome": _sf_post_outcome,
}

_ADJUSTERS = {
    "placebo_outcome": adjust_placebo_outcome,
    "placebo_treatment": adjust_placebo_treatment,
    "observed_confounder_1": adjust_observed_confounder_1,
    "mediator": adjust_mediator,
    "observed_confounder_2": adjust_observed_confounder_2,
    "post_outcome": adjust_post_outcome,
}

# Per role: short regressions as (response, regressors) and how to read the
# (target, placebo) coefficients out of them, with y/d/p placeholders
# resolved against the spec at dispatch time.
_DIRECT_EFFECT_NAMES = {
    "placebo_outcome": "treatment->placebo",
    "placebo_treatment": "placebo->outcome",
    "observed_confounder_1": "treatment->placebo",
    "mediator": "placebo->outcome",
    "observed_confounder_2": "placebo->treatment",
    "post_outcome": "outcome->placebo",
}


def _short_regressions(role, y, d, p, x):
    if role == "placebo_outcome":
        return ((y, (d, *x)), (p, (d, *x)))
    if role == "placebo_treatment":
        return ((y, (d, p, *x)),)
    if role == "observed_confounder_1":
        return ((y, (d, p, *x)), (p, (d, *x)))
    if role == "mediator":
        return ((y, (d, *x)), (y, (d, p, *x)))
    if role == "observed_confounder_2":
        return ((y, (d, p, *x)), (d, (p, *x)))
    if role == "post_outcome":
        return ((y, (d, *x)), (p, (d, y, *x)))
    raise ConfigError(f"unknown role {role!r}")


def _coefficient_reader(role, y, d, p, x):
    def read(data: Dataset) -> ShortCoefficients:
        if role == "placebo_outcome":
            return ShortCoefficients(
                target=fit_ols(data, y, (d, *x)).coef(d),
                placebo=fit_ols(data, p, (d, *x)).coef(d),
            )
        if role == "placebo_treatment":
            fit = fit_ols(data, y, (d, p, *x))
            return ShortCoefficients(target=fit.coef(d), placebo=fit.coef(p))
        if role == "observed_confounder_1":
            return ShortCoefficients(
                target=fit_ols(data, y, (d, p, *x)).coef(d),
                placebo=fit_ols(data, p, (d, *x)).coef(d),
            )
        if role == "mediator":
            return ShortCoefficients(
                target=fit_ols(data, y, (d, *x)).coef(d),
                placebo=fit_ols(data, y, (d, p, *x)).coef(p),
            )
        if role == "observed_confounder_2":
            return ShortCoefficients(
                target=fit_ols(data, y, (d, p, *x)).coef(d),
                placebo=fit_ols(data, d, (p, *x)).coef(p),
            )
        return ShortCoefficients(
            target=fit_ols(data, y, (d, *x)).coef(d),
            placebo=fit_ols(data, p, (d, y, *x)).coef(y),
        )

    return read


def _role_consistency(spec: PlaceboSpec) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Validate role against edges; return (alternatives, cautions)."""
    role = spec.role
    d_to_p, p_to_y = spec.edge_d_to_p, spec.edge_p_to_y
    if role == "placebo_outcome":
        if p_to_y and not d_to_p:
            raise AmbiguousSpec(
                "a placebo that causes the outcome is not a plain placebo "
                "outcome; declare role observed_confounder_1 (or "
                "placebo_treatment with a nonzero direct effect)"
            )
        if d_to_p and p_to_y:
            return ("mediator",), (
                "placebo lies on a causal path from treatment to outcome; "
                "the measured placebo coefficient is part of the total "
                "effect and the relative-confounding parameter includes "
                "the mediated channel",
            )
        return ((), ()) if d_to_p else (("placebo_treatment",), ())
    if role == "placebo_treatment":
        if d_to_p:
            raise AmbiguousSpec(
                "treatment causes the placebo, so it cannot be treated as a "
                "placebo treatment; consider placebo_outcome or mediator"
            )
        if p_to_y:
            return ("observed_confounder_1",), ()
        return ("placebo_outcome",), ()
    if role == "observed_confounder_1":
        if d_to_p:
            raise AmbiguousSpec(
                "observed_confounder_1 assumes no direct treatment-to-"
                "placebo edge; with one present use placebo_outcome or "
                "mediator"
            )
        if not p_to_y:
            raise AmbiguousSpec(
                "observed_confounder_1 needs the placebo-to-outcome edge; "
                "without it use placebo_outcome or placebo_treatment"
            )
        return ("placebo_treatment",), ()
    if role == "mediator":
        if not (d_to_p and p_to_y):
            raise AmbiguousSpec(
                "mediator role requires both the treatment-to-placebo and "
                "placebo-to-outcome edges"
            )
        if not spec.acknowledge_mediator:
            raise UnsupportedCase(
                "mediator-case adjustment is discouraged and gated; set "
                "acknowledge_mediator=True to run the total-effect "
                "adjustment anyway (direct/indirect decomposition is out of "
                "scope; see the mediation-analysis literature)"
            )
        return ("placebo_outcome",), (
            "mediator case acknowledged: parameters conflate causal and "
            "confounding channels",
        )
    if role == "observed_confounder_2":
        if d_to_p:
            raise AmbiguousSpec(
                "observed_confounder_2 places the placebo upstream of the "
                "treatment; a treatment-to-placebo edge contradicts that"
            )
        return (), ()
    # post_outcome
    if p_to_y:
        raise AmbiguousSpec(
            "post_outcome places the placebo downstream of the outcome; a "
            "placebo-to-outcome edge contradicts that"
        )
    return (), ()


def dispatch_case(spec: PlaceboSpec) -> CaseFormula:
    """Resolve a PlaceboSpec to its case formula.

    The declared role wins whenever several roles fit the declared edges;
    the other compatible roles are listed in ``alternatives``. Raises
    AmbiguousSpec when the role contradicts the edges and UnsupportedCase
    for the gated mediator role without its acknowledgment flag.
    """
    alternatives, cautions = _role_consistency(spec)
    y, d, p = spec.outcome_col, spec.treatment_col, spec.placebo_col
    x = spec.covariate_cols
    role = spec.role
    sf_builder = _SF_BUILDERS[role]

    def sf(data: Dataset) -> float:
        return sf_builder(data, y, d, p, x)

    def adjust(coefs: ShortCoefficients, k: float, direct_effect: float,
               sf_value: float) -> float:
        point = SensitivityPoint(k=k, direct_effect=direct_effect)
        return _ADJUSTERS[role](coefs.target, coefs.placebo, point, sf_value)

    return CaseFormula(
        role=role,
        short_regressions=_short_regressions(role, y, d, p, x),
        sf=sf,
        adjust=adjust,
        fit_coefficients=_coefficient_reader(role, y, d, p, x),
        direct_effect_name=_DIRECT_EFFECT_NAMES[role],
        alternatives=alternatives,
        cautions=cautions,
    )


def scale_factor(case: CaseFormula, data: Dataset, spec: PlaceboSpec) -> float:
    """Evaluate the case's scale factor on a dataset.

    The spec argument is accepted for symmetry with dispatch_case; the case
    already carries its resolved column names.
    """
    value = case.sf(data)
    _check_sf(value)
    return value
