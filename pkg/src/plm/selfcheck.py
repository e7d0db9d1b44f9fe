"""Internal consistency checks on freshly simulated data.

Every adjustment here has an exact finite-sample counterpart: feed it the
relative-confounding value and direct-effect value computed from the full
regressions (the ones that include the hidden driver Z) and it must return
the clean coefficient to floating-point accuracy. These routines run that
round trip for randomized structural models, plus the decomposition
identity that ties the bias factors together. They back the ``verify``
command and the test suite.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .adjust import PlaceboSpec, dispatch_case
from .double import (DoublePlaceboPoint, adjust_double_placebo,
                     fit_double_shorts, point_identify_double_placebo)
from .errors import MediatorCautionWarning, ScaleConfusionWarning
from .regression import (Dataset, bias_decomposition_oracle, fit_ols,
                         verify_bias_factor_identity)
from .simulate import GRAPH_EDGES, SCMRecipe, simulate_scm

# Graph label, placebo role, and the edge flags a user would declare.
SINGLE_CASES: tuple[tuple[str, str, dict], ...] = (
    ("a", "placebo_outcome", {}),
    ("a", "placebo_treatment", {}),
    ("b", "placebo_outcome", {"edge_d_to_p": True}),
    ("c", "placebo_treatment", {"edge_p_to_y": True}),
    ("c", "observed_confounder_1", {"edge_p_to_y": True}),
    ("d", "mediator", {"edge_d_to_p": True, "edge_p_to_y": True,
                       "acknowledge_mediator": True}),
    ("e", "observed_confounder_2", {}),
    ("f", "observed_confounder_2", {"edge_p_to_y": True}),
    ("g", "post_outcome", {}),
    ("h", "post_outcome", {"edge_d_to_p": True}),
)


@dataclass(frozen=True)
class CheckReport:
    """Worst-case errors from one self-check run."""

    draws: int
    max_recovery_error: float
    max_double_error: float
    max_identity_residual: float

    @property
    def ok(self) -> bool:
        return (self.max_recovery_error <= 1e-8
                and self.max_double_error <= 1e-8
                and self.max_identity_residual <= 1e-8)


def random_recipe(graph_case: str, seed: int, n: int = 160,
                  z_dim: int = 1) -> SCMRecipe:
    """Structural model with randomized, well-separated coefficients.

    Magnitudes stay in [0.5, 1.5] with random signs so no pathway is
    accidentally null and no denominator collapses.
    """
    rng = np.random.default_rng(seed)
    coefficients = {}
    nodes = set()
    for edge in sorted(GRAPH_EDGES[graph_case]):
        src, dst = edge.split("->")
        nodes.update((src, dst))
        size = z_dim if src == "z" else None
        mag = rng.uniform(0.5, 1.5, size=size)
        sign = rng.choice((-1.0, 1.0), size=size)
        value = mag * sign
        coefficients[edge] = float(value) if size is None else tuple(value)
    noise = {node: float(rng.uniform(0.7, 1.3)) for node in sorted(nodes)}
    return SCMRecipe(n=n, graph_case=graph_case, coefficients=coefficients,
                     z_dim=z_dim, noise_sd=noise, seed=int(rng.integers(2**31)))


def _oracle_quantities(role: str, data: Dataset, x: tuple[str, ...],
                       z: tuple[str, ...]):
    """Clean coefficient, true direct effect, and the two exact biases."""
    oracle = bias_decomposition_oracle
    if role == "placebo_outcome":
        target = fit_ols(data, "Y", ("D", *z, *x)).coef("D")
        direct = fit_ols(data, "P", ("D", *z, *x)).coef("D")
        bias_t = oracle(data, "Y", "D", x, z)
        bias_p = oracle(data, "P", "D", x, z)
    elif role == "placebo_treatment":
        long_fit = fit_ols(data, "Y", ("D", "P", *z, *x))
        target = long_fit.coef("D")
        direct = long_fit.coef("P")
        bias_t = oracle(data, "Y", "D", ("P", *x), z)
        bias_p = oracle(data, "Y", "P", ("D", *x), z)
    elif role == "observed_confounder_1":
        target = fit_ols(data, "Y", ("D", "P", *z, *x)).coef("D")
        direct = fit_ols(data, "P", ("D", *z, *x)).coef("D")
        bias_t = oracle(data, "Y", "D", ("P", *x), z)
        bias_p = oracle(data, "P", "D", x, z)
    elif role == "mediator":
        target = fit_ols(data, "Y", ("D", *z, *x)).coef("D")
        direct = fit_ols(data, "Y", ("D", "P", *z, *x)).coef("P")
        bias_t = oracle(data, "Y", "D", x, z)
        bias_p = oracle(data, "Y", "P", ("D", *x), z)
    elif role == "observed_confounder_2":
        target = fit_ols(data, "Y", ("D", "P", *z, *x)).coef("D")
        direct = fit_ols(data, "D", ("P", *z, *x)).coef("P")
        bias_t = oracle(data, "Y", "D", ("P", *x), z)
        bias_p = oracle(data, "D", "P", x, z)
    elif role == "post_outcome":
        target = fit_ols(data, "Y", ("D", *z, *x)).coef("D")
        direct = fit_ols(data, "P", ("Y", "D", *z, *x)).coef("Y")
        bias_t = oracle(data, "Y", "D", x, z)
        bias_p = oracle(data, "P", "Y", ("D", *x), z)
    else:
        raise ValueError(f"no oracle for role {role!r}")
    return target, direct, bias_t.product, bias_p.product


def recovery_error(graph_case: str, role: str, spec_kwargs: dict,
                   seed: int, n: int = 160, z_dim: int = 1) -> float:
    """Relative error of the exact-parameter round trip for one draw.

    The last hidden driver is treated as unobserved; earlier ones (when
    z_dim > 1) are used as observed covariates, exercising the X channel.
    """
    recipe = random_recipe(graph_case, seed, n=n, z_dim=z_dim)
    data = simulate_scm(recipe)
    x = tuple(f"Z{i}" for i in range(1, z_dim))
    z = (f"Z{z_dim}",)
    spec = PlaceboSpec(outcome_col="Y", treatment_col="D", placebo_col="P",
                       role=role, covariate_cols=x, **spec_kwargs)
    with warnings.catch_warnings():
        # The round trip feeds back whatever exact k the draw implies, so
        # both advisory warnings are expected noise here.
        warnings.simplefilter("ignore", MediatorCautionWarning)
        warnings.simplefilter("ignore", ScaleConfusionWarning)
        case = dispatch_case(spec)
        coefs = case.fit_coefficients(data)
        sf = case.sf(data)
        target, direct, bias_t, bias_p = _oracle_quantities(role, data, x, z)
        k_exact = bias_t / (bias_p * sf)
        adjusted = case.adjust(coefs, k_exact, direct, sf)
    return abs(adjusted - target) / max(1.0, abs(target))


def double_recovery_error(graph_case: str, seed: int, n: int = 200,
                          z_dim: int = 1,
                          point_identified: bool = True) -> float:
    """Round-trip error for the double-placebo formula on one draw.

    With ``point_identified`` the single-confounder shortcut (product
    fixed at 1) is used; it is exact only for z_dim = 1. Otherwise the
    product is computed from the four exact biases, which is exact for
    any z_dim.
    """
    recipe = random_recipe(graph_case, seed, n=n, z_dim=z_dim)
    data = simulate_scm(recipe)
    z = tuple(f"Z{i}" for i in range(1, z_dim + 1))
    fits = fit_double_shorts(data, "Y", "D", "P", "N")
    long_y = fit_ols(data, "Y", ("D", "P", *z))
    long_n = fit_ols(data, "N", ("D", "P", *z))
    target = long_y.coef("D")
    longs = {"beta_yp_long": long_y.coef("P"),
             "beta_nd_long": long_n.coef("D"),
             "beta_np_long": long_n.coef("P")}
    if point_identified:
        adjusted = point_identify_double_placebo(fits, longs)
    else:
        k_product = (((fits.beta_yd - target)
                      / (fits.beta_yp - longs["beta_yp_long"]))
                     / ((fits.beta_nd - longs["beta_nd_long"])
                        / (fits.beta_np - longs["beta_np_long"])))
        adjusted = adjust_double_placebo(
            fits, DoublePlaceboPoint(k_product=k_product, **longs))
    return abs(adjusted - target) / max(1.0, abs(target))


def identity_residual(seed: int, n: int = 400, z_dim: int = 1) -> float:
    """Residual of the bias-factor decomposition identity on one draw."""
    recipe = random_recipe("a", seed, n=n, z_dim=z_dim)
    data = simulate_scm(recipe)
    z = tuple(f"Z{i}" for i in range(1, z_dim + 1))
    return abs(verify_bias_factor_identity(data, "Y", "D", (), z))


def run_selfcheck(seed: int = 0, draws: int = 25) -> CheckReport:
    """Run all checks ``draws`` times per configuration.

    Alternates between a purely hidden driver and a two-component driver
    with one component observed.
    """
    rec_errors = []
    for base, (graph_case, role, kwargs) in enumerate(SINGLE_CASES):
        for i in range(draws):
            draw_seed = seed + 1000 * base + i
            z_dim = 1 + (i % 2)
            rec_errors.append(recovery_error(graph_case, role, kwargs,
                                             draw_seed, z_dim=z_dim))
    dbl_errors = []
    for base, graph_case in enumerate(("double_a", "double_b")):
        for i in range(draws):
            draw_seed = seed + 20000 + 1000 * base + i
            dbl_errors.append(double_recovery_error(graph_case, draw_seed))
            dbl_errors.append(double_recovery_error(
                graph_case, draw_seed, z_dim=2, point_identified=False))
    id_residuals = [identity_residual(seed + 40000 + i, z_dim=1 + (i % 3))
                    for i in range(draws)]
    return CheckReport(
        draws=draws,
        max_recovery_error=max(rec_errors),
        max_double_error=max(dbl_errors),
        max_identity_residual=max(id_residuals),
    )
