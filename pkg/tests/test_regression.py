"""Core OLS, residualization, and bias decomposition checks."""

import numpy as np
import pytest

from plm.errors import (
    DivisionByNearZero,
    NonFiniteValue,
    RankDeficient,
    TooFewRows,
    UnknownColumn,
)
from plm.regression import (
    Dataset,
    bias_decomposition_oracle,
    cohens_f,
    fit_ols,
    partial_corr,
    residualize,
    verify_bias_factor_identity,
)


def test_dataset_rejects_non_finite():
    with pytest.raises(NonFiniteValue):
        Dataset({"a": [1.0, np.nan, 3.0]})
    with pytest.raises(NonFiniteValue):
        Dataset({"a": [1.0, np.inf]})


def test_dataset_rejects_ragged_columns():
    with pytest.raises(ValueError):
        Dataset({"a": [1.0, 2.0], "b": [1.0]})


def test_dataset_take_resamples_rows():
    data = Dataset({"a": [1.0, 2.0, 3.0]})
    sub = data.take([2, 0, 2])
    assert sub.n_rows == 3
    assert sub["a"].tolist() == [3.0, 1.0, 3.0]


def test_noise_free_linear_fit_is_exact():
    d = np.array([0.0, 1.0] * 5)
    data = Dataset({"y": 2.0 * d, "d": d})
    fit = fit_ols(data, "y", ["d"])
    assert fit.coef("d") == pytest.approx(2.0, abs=1e-12)
    assert fit.intercept == pytest.approx(0.0, abs=1e-12)


def test_constant_response_gives_zero_slopes():
    rng = np.random.default_rng(3)
    data = Dataset({"y": np.full(30, 7.25), "x": rng.standard_normal(30)})
    fit = fit_ols(data, "y", ["x"])
    assert fit.coef("x") == pytest.approx(0.0, abs=1e-12)
    assert fit.intercept == pytest.approx(7.25, abs=1e-12)


def test_matches_high_precision_normal_equations():
    # Expected values computed once with 50-digit arithmetic on the exact
    # same draw: explicit solve of (X'X) b = X'y, intercept included.
    rng = np.random.default_rng(20260822)
    x = rng.standard_normal((200, 4))
    beta_true = np.array([1.5, -2.0, 0.0, 0.75])
    y = 3.0 + x @ beta_true + rng.standard_normal(200)
    data = Dataset(
        {"y": y, "x1": x[:, 0], "x2": x[:, 1], "x3": x[:, 2], "x4": x[:, 3]}
    )
    fit = fit_ols(data, "y", ["x1", "x2", "x3", "x4"])
    expected = {
        "x1": 1.6052864998758861631,
        "x2": -2.0387088156415741174,
        "x3": 0.089964300594232821728,
        "x4": 0.73996537494520189447,
    }
    assert fit.intercept == pytest.approx(3.0816799727769018184, rel=1e-9)
    for name, value in expected.items():
        assert fit.coef(name) == pytest.approx(value, rel=1e-9)


def test_classical_se_matches_direct_covariance():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((120, 3))
    y = x @ np.array([0.5, 0.0, -1.0]) + rng.standard_normal(120)
    data = Dataset({"y": y, "a": x[:, 0], "b": x[:, 1], "c": x[:, 2]})
    fit = fit_ols(data, "y", ["a", "b", "c"])
    design = np.column_stack([np.ones(120), x])
    resid = y - design @ np.linalg.lstsq(design, y, rcond=None)[0]
    sigma2 = resid @ resid / (120 - 4)
    cov = sigma2 * np.linalg.inv(design.T @ design)
    for j, name in enumerate(["a", "b", "c"], start=1):
        assert fit.se[name] == pytest.approx(np.sqrt(cov[j, j]), rel=1e-8)


def test_residuals_orthogonal_to_design():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((80, 2))
    y = x[:, 0] - x[:, 1] + rng.standard_normal(80)
    data = Dataset({"y": y, "u": x[:, 0], "v": x[:, 1]})
    fit = fit_ols(data, "y", ["u", "v"])
    scale = fit.residual_l2
    assert abs(fit.residuals.sum()) <= 1e-8 * scale * np.sqrt(80)
    for name in ("u", "v"):
        col = data[name]
        assert abs(fit.residuals @ col) <= 1e-8 * scale * np.linalg.norm(col)
    assert fit.dof == 80 - 3


def test_fit_errors():
    data = Dataset({"y": [1.0, 2.0, 3.0], "x": [0.0, 1.0, 2.0]})
    with pytest.raises(UnknownColumn):
        fit_ols(data, "y", ["missing"])
    with pytest.raises(TooFewRows):
        fit_ols(Dataset({"y": [1.0, 2.0], "x": [0.0, 1.0]}), "y", ["x"])
    dup = Dataset({"y": [1.0, 2.0, 3.0, 4.0], "a": [1.0, 2.0, 3.0, 4.0],
                   "b": [2.0, 4.0, 6.0, 8.0]})
    with pytest.raises(RankDeficient):
        fit_ols(dup, "y", ["a", "b"])


def test_residualize_orthogonal_variable_is_centering():
    rng = np.random.default_rng(5)
    c = rng.standard_normal(60)
    v_raw = rng.standard_normal(60)
    # Make v exactly orthogonal to the control and the intercept.
    design = np.column_stack([np.ones(60), c])
    v = v_raw - design @ np.linalg.lstsq(design, v_raw, rcond=None)[0]
    v = v + 4.0  # shift back; centering should remove it again
    data = Dataset({"v": v, "c": c})
    res = residualize(data, "v", ["c"])
    np.testing.assert_allclose(res.residual, v - v.mean(), atol=1e-10)
    assert res.sd == pytest.approx(np.std(v, ddof=1), rel=1e-10)


def test_residualize_exact_combination_has_zero_sd():
    rng = np.random.default_rng(6)
    a = rng.standard_normal(40)
    b = rng.standard_normal(40)
    data = Dataset({"v": 2.0 * a - b + 3.0, "a": a, "b": b})
    res = residualize(data, "v", ["a", "b"])
    assert res.sd <= 1e-10
    assert res.l2_norm <= 1e-9


def test_fwl_residual_on_residual_matches_joint_fit():
    rng = np.random.default_rng(8)
    x1 = rng.standard_normal(150)
    x2 = rng.standard_normal(150)
    d = 0.6 * x1 - 0.2 * x2 + rng.standard_normal(150)
    y = 1.5 * d + x1 + 0.5 * x2 + rng.standard_normal(150)
    data = Dataset({"y": y, "d": d, "x1": x1, "x2": x2})
    joint = fit_ols(data, "y", ["d", "x1", "x2"]).coef("d")
    ry = residualize(data, "y", ["x1", "x2"]).residual
    rd = residualize(data, "d", ["x1", "x2"]).residual
    slope = float(ry @ rd / (rd @ rd))
    assert slope == pytest.approx(joint, rel=1e-9)


def _single_z_scm(n, seed, gamma_y=2.0):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    d = z + rng.standard_normal(n)
    y = d + gamma_y * z + rng.standard_normal(n)
    return Dataset({"y": y, "d": d, "z": z})


def test_bias_decomposition_zero_coefficient_z():
    rng = np.random.default_rng(9)
    n = 5000
    z = rng.standard_normal(n)
    d = rng.standard_normal(n)
    y = d + rng.standard_normal(n)
    data = Dataset({"y": y, "d": d, "z": z})
    dec = bias_decomposition_oracle(data, "y", "d", [], ["z"])
    assert abs(dec.bias) < 0.1
    assert dec.bias == pytest.approx(dec.short_coef - dec.long_coef, abs=1e-12)
    assert dec.product == pytest.approx(dec.bias, abs=1e-8)


def test_bias_decomposition_single_z_identity():
    data = _single_z_scm(100_000, 10)
    dec = bias_decomposition_oracle(data, "y", "d", [], ["z"])
    assert dec.bias == pytest.approx(dec.short_coef - dec.long_coef, rel=1e-12)
    assert dec.product == pytest.approx(dec.bias, rel=1e-8)
    # With D = Z + e and Y = D + 2Z + u the population gap is 1.0.
    assert dec.bias == pytest.approx(1.0, abs=0.05)


def test_bias_decomposition_two_z_uses_fitted_combination():
    rng = np.random.default_rng(12)
    n = 20_000
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    d = z1 - 0.5 * z2 + rng.standard_normal(n)
    y = 0.8 * d + 2.0 * z1 + 1.0 * z2 + rng.standard_normal(n)
    data = Dataset({"y": y, "d": d, "z1": z1, "z2": z2})
    dec = bias_decomposition_oracle(data, "y", "d", [], ["z1", "z2"])
    assert dec.product == pytest.approx(dec.bias, rel=1e-8)


def test_identity_residual_small_on_simulated_data():
    for seed in (21, 22, 23):
        data = _single_z_scm(4000, seed)
        resid = verify_bias_factor_identity(data, "y", "d", [], ["z"])
        assert abs(resid) <= 1e-8


def test_identity_scale_free_in_outcome():
    data = _single_z_scm(4000, 24)
    scaled = Dataset({"y": 10.0 * data["y"], "d": data["d"], "z": data["z"]})
    assert abs(verify_bias_factor_identity(scaled, "y", "d", [], ["z"])) <= 1e-8


def test_identity_raises_when_z_unrelated_to_treatment():
    rng = np.random.default_rng(25)
    n = 500
    d = rng.standard_normal(n)
    z_raw = rng.standard_normal(n)
    # Construct z exactly orthogonal to the intercept and to d.
    design = np.column_stack([np.ones(n), d])
    z = z_raw - design @ np.linalg.lstsq(design, z_raw, rcond=None)[0]
    y = d + z + rng.standard_normal(n)
    data = Dataset({"y": y, "d": d, "z": z})
    with pytest.raises(DivisionByNearZero):
        verify_bias_factor_identity(data, "y", "d", [], ["z"])


def test_partial_corr_and_cohens_f():
    rng = np.random.default_rng(13)
    a = rng.standard_normal(3000)
    b = 0.5 * a + rng.standard_normal(3000)
    data = Dataset({"a": a, "b": b})
    r = partial_corr(data, "a", "b", [])
    expected = np.corrcoef(a, b)[0, 1]
    assert r == pytest.approx(expected, rel=1e-10)
    assert cohens_f(0.6) == pytest.approx(0.6 / np.sqrt(1 - 0.36), rel=1e-12)
    with pytest.raises(DivisionByNearZero):
        cohens_f(1.0)
