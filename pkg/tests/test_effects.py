import numpy as np
import numpy.testing as npt
import pytest
from scipy.special import expit, ndtr

from sorted_effects.data import Dataset
from sorted_effects.effects import (
    EffectConfig,
    EffectVector,
    parse_subgroup,
    partial_effects,
    pe_binary,
    pe_categorical,
    pe_continuous,
    restrict,
)
from sorted_effects.formula import build_design
from sorted_effects.models import ModelSpec, fit_model, fit_ols


def _fit(formula, ds, method="ols", taus=()):
    d = build_design(formula, ds)
    y = ds.numeric(d.info.response)
    return fit_model(ModelSpec(method, taus), d, y)


def _binary_ds(n=60, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset.from_arrays(
        {
            "y": rng.standard_normal(n),
            "t": rng.integers(0, 2, n).astype(float),
            "x": rng.standard_normal(n),
        }
    )


# ----------------------------------------------------------------------
# hand-checkable cases
# ----------------------------------------------------------------------


def test_zero_coefficients_give_zero_effects():
    ds = _binary_ds()
    d = build_design("y ~ t + x", ds)
    from sorted_effects.models import FittedModel

    m = FittedModel(ModelSpec("ols"), np.zeros(3), d.info)
    ev = pe_binary(m, ds, "t")
    npt.assert_allclose(ev.delta, 0.0)


def test_ols_binary_effect_equals_coefficient():
    ds = _binary_ds()
    m = _fit("y ~ t + x", ds)
    ev = pe_binary(m, ds, "t")
    j = m.info.column_names.index("t")
    npt.assert_allclose(ev.delta, m.beta[j], atol=1e-12)


def test_ols_interaction_effect_is_linear_in_x():
    ds = _binary_ds()
    m = _fit("y ~ t + x + t:x", ds)
    ev = pe_binary(m, ds, "t")
    names = m.info.column_names
    want = m.beta[names.index("t")] + m.beta[names.index("t:x")] * ds.numeric("x")
    npt.assert_allclose(ev.delta, want, atol=1e-12)


def test_probit_binary_effect_matches_formula():
    rng = np.random.default_rng(1)
    n = 80
    ds = Dataset.from_arrays(
        {
            "y": (rng.uniform(size=n) < 0.5).astype(float),
            "t": rng.integers(0, 2, n).astype(float),
            "x": rng.standard_normal(n),
        }
    )
    m = _fit("y ~ t + x", ds, method="probit")
    b0, bt, bx = m.beta
    x = ds.numeric("x")
    want = ndtr(b0 + bt + bx * x) - ndtr(b0 + bx * x)
    ev = pe_binary(m, ds, "t")
    npt.assert_allclose(ev.delta, want, atol=1e-12)


def test_categorical_effect_between_two_levels():
    rng = np.random.default_rng(2)
    n = 90
    ds = Dataset.from_arrays(
        {
            "y": rng.standard_normal(n),
            "g": [["a", "b", "c"][i % 3] for i in range(n)],
            "x": rng.standard_normal(n),
        },
        factors=("g",),
    )
    m = _fit("y ~ g + x + g:x", ds)
    names = m.info.column_names
    x = ds.numeric("x")
    # moving a -> c turns on g_c and g_c:x only
    want = m.beta[names.index("g_c")] + m.beta[names.index("g_c:x")] * x
    ev = pe_categorical(m, ds, "g", ("a", "c"))
    npt.assert_allclose(ev.delta, want, atol=1e-12)
    # b -> c flips both indicator pairs
    want_bc = (
        m.beta[names.index("g_c")] - m.beta[names.index("g_b")]
        + (m.beta[names.index("g_c:x")] - m.beta[names.index("g_b:x")]) * x
    )
    ev_bc = pe_categorical(m, ds, "g", ("b", "c"))
    npt.assert_allclose(ev_bc.delta, want_bc, atol=1e-12)


def test_continuous_effect_matches_analytic_ols():
    rng = np.random.default_rng(3)
    n = 200
    ds = Dataset.from_arrays(
        {"y": rng.standard_normal(n), "x": rng.standard_normal(n)}
    )
    m = _fit("y ~ x + I(x^2)", ds)
    b0, b1, b2 = m.beta
    want = b1 + 2.0 * b2 * ds.numeric("x")
    ev = pe_continuous(m, ds, "x")
    npt.assert_allclose(ev.delta, want, atol=1e-5)


def test_continuous_effect_matches_analytic_logit():
    rng = np.random.default_rng(4)
    n = 200
    x = rng.standard_normal(n)
    y = (rng.uniform(size=n) < expit(0.3 + 0.8 * x)).astype(float)
    ds = Dataset.from_arrays({"y": y, "x": x})
    m = _fit("y ~ x", ds, method="logit")
    p = expit(m.beta[0] + m.beta[1] * x)
    want = m.beta[1] * p * (1.0 - p)
    ev = pe_continuous(m, ds, "x")
    npt.assert_allclose(ev.delta, want, atol=1e-5)


# ----------------------------------------------------------------------
# vector layout
# ----------------------------------------------------------------------


def test_qr_effects_are_stacked_per_quantile():
    rng = np.random.default_rng(5)
    n = 50
    ds = Dataset.from_arrays(
        {
            "y": rng.standard_normal(n),
            "t": rng.integers(0, 2, n).astype(float),
            "x": rng.standard_normal(n),
        }
    )
    taus = (0.25, 0.5, 0.75)
    m = _fit("y ~ t + x", ds, method="qr", taus=taus)
    ev = pe_binary(m, ds, "t")
    assert ev.delta.shape == (n * 3,)
    assert ev.n_units == n
    assert ev.taus == taus
    npt.assert_array_equal(ev.unit, np.tile(np.arange(n), 3))
    npt.assert_allclose(ev.weights, 1.0 / 3.0)
    # each block is the per-quantile coefficient on t
    j = m.info.column_names.index("t")
    for k in range(3):
        npt.assert_allclose(
            ev.delta[k * n : (k + 1) * n], m.beta[j, k], atol=1e-9
        )


def test_effect_weights_follow_sampling_weights():
    ds = _binary_ds()
    m = _fit("y ~ t + x", ds)
    w = np.linspace(1.0, 2.0, ds.n_rows)
    ev = partial_effects(m, ds, EffectConfig("t", "binary"), samp_weight=w)
    npt.assert_allclose(ev.weights, w)


def test_restrict_narrows_population():
    ds = _binary_ds()
    m = _fit("y ~ t + x", ds)
    ev = pe_binary(m, ds, "t")
    keep = ds.numeric("x") > 0
    sub = restrict(ev, keep)
    assert sub.population.shape[0] == int(keep.sum())
    npt.assert_allclose(sub.population, ev.delta[keep])
    with pytest.raises(ValueError):
        restrict(ev, np.zeros(ds.n_rows, dtype=bool))


def test_effect_vector_alignment_checked():
    with pytest.raises(ValueError):
        EffectVector(
            delta=np.zeros(4),
            weights=np.zeros(3),
            mask=np.ones(4, dtype=bool),
            unit=np.arange(4),
            n_units=4,
        )


# ----------------------------------------------------------------------
# configuration errors
# ----------------------------------------------------------------------


def test_binary_requires_01_values():
    rng = np.random.default_rng(6)
    ds = Dataset.from_arrays(
        {"y": rng.standard_normal(20), "t": rng.standard_normal(20)}
    )
    m = _fit("y ~ t", ds)
    with pytest.raises(ValueError):
        pe_binary(m, ds, "t")


def test_categorical_requires_factor_and_known_levels():
    ds = _binary_ds()
    m = _fit("y ~ t + x", ds)
    with pytest.raises(ValueError):
        pe_categorical(m, ds, "x", ("0", "1"))
    rng = np.random.default_rng(7)
    ds2 = Dataset.from_arrays(
        {
            "y": rng.standard_normal(30),
            "g": [["a", "b"][i % 2] for i in range(30)],
        },
        factors=("g",),
    )
    m2 = _fit("y ~ g", ds2)
    with pytest.raises(ValueError):
        pe_categorical(m2, ds2, "g", ("a", "zebra"))


def test_config_validation():
    with pytest.raises(ValueError):
        EffectConfig("t", "nonsense")
    with pytest.raises(ValueError):
        EffectConfig("g", "categorical", compare=("a", "a"))
    with pytest.raises(ValueError):
        EffectConfig("x", "continuous", h=0.0)


# ----------------------------------------------------------------------
# subgroup expressions
# ----------------------------------------------------------------------


def _mixed_ds():
    return Dataset.from_arrays(
        {
            "age": [25.0, 35.0, 45.0, 55.0],
            "ms": ["single", "married", "married", "single"],
        },
        factors=("ms",),
    )


def test_parse_subgroup_numeric_and_factor():
    ds = _mixed_ds()
    npt.assert_array_equal(
        parse_subgroup("age > 30", ds), [False, True, True, True]
    )
    npt.assert_array_equal(
        parse_subgroup("ms == 'married'", ds), [False, True, True, False]
    )
    npt.assert_array_equal(
        parse_subgroup("ms == married", ds), [False, True, True, False]
    )
    npt.assert_array_equal(
        parse_subgroup("age > 30 & ms != married", ds),
        [False, False, False, True],
    )
    npt.assert_array_equal(
        parse_subgroup("age >= 35 & age <= 45", ds), [False, True, True, False]
    )


def test_parse_subgroup_errors():
    ds = _mixed_ds()
    with pytest.raises(ValueError):
        parse_subgroup("age >", ds)
    with pytest.raises(ValueError):
        parse_subgroup("height > 1", ds)
    with pytest.raises(ValueError):
        parse_subgroup("ms > married", ds)
    with pytest.raises(ValueError):
        parse_subgroup("ms == widowed", ds)
    with pytest.raises(ValueError):
        parse_subgroup("age > tall", ds)
