import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import dblquad

from forchheimer_afem.exceptions import SingularEvaluationError
from forchheimer_afem.mesh import DomainSpec, bisect, build_initial_mesh
from forchheimer_afem.spaces import FEFunction, build_space
from forchheimer_afem.weights import (AnalyticField, composite_weight, power_weight,
                                      separation_radius, unweighted, weight_value,
                                      weighted_h1_seminorm, weighted_l2_norm)

T_SHAPE = DomainSpec("t_shape").vertices()
Z_T = [(0.0, 0.5), (0.0, -1.0)]


def ones(x):
    return np.ones(x.shape[:-1])


def test_power_weight_values():
    assert weight_value(power_weight((0, 0), 1.0), np.array([3.0, 4.0])) == pytest.approx(5.0)
    w0 = power_weight((0.2, 0.1), 0.0)
    assert np.all(weight_value(w0, np.random.default_rng(0).random((10, 2))) == 1.0)
    with pytest.raises(SingularEvaluationError):
        weight_value(power_weight((0, 0), 1.0, sign=-1), np.array([0.0, 0.0]))
    for bad in (2.0, -2.5):
        with pytest.raises(ValueError):
            power_weight((0, 0), bad)


def test_composite_weight_branches():
    dz = separation_radius(Z_T, T_SHAPE)
    assert dz == pytest.approx(0.5)
    w = composite_weight(Z_T, 1.0, T_SHAPE)
    assert w.d_Z == pytest.approx(0.5)
    far = np.array([[1.0, 0.5], [0.0, -1.5], [-1.2, 0.8]])
    assert np.all(weight_value(w, far) == 1.0)
    rng = np.random.default_rng(1)
    for z in Z_T:
        r = rng.uniform(0, 0.24, 20)
        t = rng.uniform(0, 2 * np.pi, 20)
        x = np.asarray(z) + np.column_stack([r * np.cos(t), r * np.sin(t)])
        assert np.allclose(weight_value(w, x), weight_value(power_weight(z, 1.0), x), rtol=1e-14)
    with pytest.raises(ValueError):
        composite_weight([], 1.0, T_SHAPE)


def test_composite_on_grid_matches_definition():
    w = composite_weight(Z_T, 0.7, T_SHAPE)
    xs = np.stack(np.meshgrid(np.linspace(-1.5, 1.5, 31), np.linspace(-2, 1, 31)), -1).reshape(-1, 2)
    d = np.linalg.norm(xs[:, None] - np.asarray(Z_T)[None], axis=2)
    expect = np.where(d.min(axis=1) < 0.25, d.min(axis=1) ** 0.7, 1.0)
    assert np.allclose(weight_value(w, xs), expect, rtol=1e-14)


def test_l2_norm_of_one(square_mesh, l_mesh):
    assert weighted_l2_norm(ones, unweighted(), square_mesh) == pytest.approx(1.0, rel=1e-13)
    assert weighted_l2_norm(ones, unweighted(), l_mesh) == pytest.approx(np.sqrt(3.0), rel=1e-13)
    w2 = power_weight((0.5, 0.5), 2.0 - 1e-15)
    assert weighted_l2_norm(ones, w2, square_mesh) == pytest.approx(1 / np.sqrt(6), rel=1e-12)


def test_l2_norm_singular_weight_against_adaptive_integration(square_mesh):
    ref = dblquad(lambda y, x: np.hypot(x - 0.5, y - 0.5), 0, 1, 0, 1, epsabs=1e-12,
                  epsrel=1e-12)[0]
    val = weighted_l2_norm(ones, power_weight((0.5, 0.5), 1.0), square_mesh) ** 2
    assert val == pytest.approx(ref, rel=1e-6)


def test_h1_seminorm(square_mesh):
    f = AnalyticField(lambda x: x[..., 0], lambda x: np.stack([ones(x), 0 * ones(x)], -1))
    assert weighted_h1_seminorm(f, unweighted(), square_mesh) == pytest.approx(1.0, rel=1e-13)
    w2 = power_weight((0.5, 0.5), 2.0 - 1e-15)
    assert weighted_h1_seminorm(f, w2, square_mesh) == pytest.approx(1 / np.sqrt(6), rel=1e-12)
    c = AnalyticField(ones, lambda x: np.zeros(x.shape))
    assert weighted_h1_seminorm(c, w2, square_mesh) == 0.0


def test_alpha_zero_equals_unweighted(square_mesh):
    space = build_space(square_mesh, "th")
    v = FEFunction(space, np.random.default_rng(2).standard_normal(space.n_scalar), "scalar")
    a = weighted_l2_norm(v, power_weight((0.3, 0.6), 0.0), square_mesh)
    b = weighted_l2_norm(v, unweighted(), square_mesh)
    assert a == pytest.approx(b, rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([0.5, 1.0, 1.5]))
def test_cauchy_schwarz_weight_split(seed, alpha):
    mesh = bisect(build_initial_mesh(DomainSpec("unit_square")), [0, 1, 2])
    space = build_space(mesh, "th")
    v = FEFunction(space, np.random.default_rng(seed).standard_normal(space.n_scalar), "scalar")
    z = (0.5, 0.5)
    plain = weighted_l2_norm(v, unweighted(), mesh) ** 2
    pos = weighted_l2_norm(v, power_weight(z, alpha), mesh)
    neg = weighted_l2_norm(v, power_weight(z, alpha, sign=-1), mesh)
    assert plain <= pos * neg + 1e-8
