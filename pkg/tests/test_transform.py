import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ultraspec.rng import SplitMix64
from ultraspec.spectrum import Manifold, ModelOperator, basis_values, level_table
from ultraspec.synth import delta_at, poisson_kernel
from ultraspec.transform import (
    Grid,
    GridError,
    SampledFunction,
    SpectralVector,
    apply_derivative,
    apply_power,
    default_grid,
    forward,
    inverse,
    log_power_norm,
    plancherel_residual,
    random_bandlimited,
    sample,
)

CIRCLE = ModelOperator(Manifold.CIRCLE)
TORUS = ModelOperator(Manifold.TORUS2)
SPHERE = ModelOperator(Manifold.SPHERE2)
OPS = {"circle": (CIRCLE, 128), "torus": (TORUS, 128), "sphere": (SPHERE, 48)}


def test_circle_constant():
    f = sample(CIRCLE, lambda x: np.ones_like(x), Grid(Manifold.CIRCLE, n=16))
    c = forward(CIRCLE, f, 3).coeffs
    assert c[0] == pytest.approx(math.sqrt(2 * math.pi), abs=1e-14)
    np.testing.assert_allclose(c[1:], 0, atol=1e-14)


def test_circle_sine():
    f = sample(CIRCLE, np.sin, Grid(Manifold.CIRCLE, n=16))
    c = forward(CIRCLE, f, 2).coeffs
    # basis order k = 0, -1, +1, -2, +2
    a = math.sqrt(math.pi / 2)
    np.testing.assert_allclose(c, [0, 1j * a, -1j * a, 0, 0], atol=1e-14)


def test_poisson_coefficient_k10():
    f, _ = poisson_kernel(0.5, 128, n=512)
    c = forward(CIRCLE, f, 10)
    assert abs(c.block(10)[1] - math.sqrt(2 * math.pi) * 2.0**-10) <= 1e-12
    assert c.block(10)[1].real == pytest.approx(2.4479e-3, abs=1e-7)


@pytest.mark.parametrize("name", sorted(OPS))
@given(seed=st.integers(0, 2**32))
def test_round_trip(name, seed):
    op, J = OPS[name]
    v = random_bandlimited(op, J, SplitMix64(seed))
    back = forward(op, inverse(v), J)
    assert np.max(np.abs(back.coeffs - v.coeffs)) / np.max(np.abs(v.coeffs)) < 1e-12
    assert plancherel_residual(op, inverse(v), J) < 1e-10


def test_inverse_delta_matches_direct_sum():
    x0 = 0.9
    v = delta_at(CIRCLE, x0, 20)
    grid = Grid(Manifold.CIRCLE, n=128)
    f = inverse(v, grid)
    (x,) = grid.coords()
    idx = [0, 17, 29, 64, 100]
    E = basis_values(CIRCLE, 20, x[idx])
    direct = np.conj(basis_values(CIRCLE, 20, [x0])[:, 0]) @ E
    np.testing.assert_allclose(f.values[idx], direct, atol=1e-12)
    # Dirichlet kernel peak sits at the grid point nearest x0
    assert abs(x[np.argmax(f.values.real)] - x0) < 2 * math.pi / 128


def test_inverse_zero():
    for op, J in OPS.values():
        f = inverse(SpectralVector.zeros(op, 8))
        assert not np.any(f.values)
        assert plancherel_residual(op, f, 8) == 0.0


def test_sphere_constant():
    f = sample(SPHERE, lambda th, ph: np.ones_like(th), default_grid(SPHERE, 4))
    assert f.l2_norm_squared() == pytest.approx(4 * math.pi, rel=1e-14)
    c = forward(SPHERE, f, 4).coeffs
    assert c[0] == pytest.approx(math.sqrt(4 * math.pi), abs=1e-13)
    np.testing.assert_allclose(c[1:], 0, atol=1e-13)
    assert plancherel_residual(SPHERE, f, 4) < 1e-14


def test_plancherel_truncated_poisson():
    r, J = 0.9, 64
    f, _ = poisson_kernel(r, 2048)
    norm2 = 2 * math.pi * (1 + r * r) / (1 - r * r)
    tail = 2 * 2 * math.pi * r ** (2 * (J + 1)) / (1 - r * r)
    assert f.l2_norm_squared() == pytest.approx(norm2, rel=1e-12)
    assert abs(plancherel_residual(CIRCLE, f, J) - tail / norm2) < 1e-10


def test_grid_errors():
    f = sample(CIRCLE, np.cos, Grid(Manifold.CIRCLE, n=8))
    with pytest.raises(GridError):
        forward(CIRCLE, f, 4)
    with pytest.raises(GridError):
        forward(TORUS, f, 1)
    with pytest.raises(GridError):
        inverse(SpectralVector.zeros(SPHERE, 10), Grid(Manifold.SPHERE2, n_lat=5, n_lon=30))
    with pytest.raises(GridError):
        SampledFunction(Grid(Manifold.CIRCLE, n=8), np.zeros(7))
    with pytest.raises(GridError):
        sample(SPHERE, np.cos, Grid(Manifold.CIRCLE, n=8))


# -- spectral vectors ---------------------------------------------------------


def test_vector_helpers():
    v = random_bandlimited(SPHERE, 6, SplitMix64(1))
    assert [len(b) for b in v.blocks] == list(2 * np.arange(7) + 1)
    np.testing.assert_allclose(v.hs_norms(), [np.linalg.norm(b) for b in v.blocks], rtol=1e-14)
    s = v.scaled(1e200).scaled(1e200)
    np.testing.assert_allclose(s.log_hs_norms(), v.log_hs_norms() + 2 * math.log(1e200), rtol=1e-14)
    with pytest.raises(OverflowError):
        s.effective()
    back = s.scaled(1e-200).scaled(1e-200).normalized()
    assert not np.any(back.log_offset)
    np.testing.assert_allclose(back.coeffs, v.coeffs, rtol=1e-13)
    assert v.truncated(3).j_max == 3
    with pytest.raises(ValueError):
        v.truncated(7)
    with pytest.raises(ValueError):
        v.reindexed(CIRCLE)
    with pytest.raises(ValueError):
        SpectralVector(CIRCLE, np.zeros(4), 2)


# -- powers and derivatives ---------------------------------------------------


def test_power_examples():
    v = SpectralVector.zeros(CIRCLE, 3)
    v.coeffs[level_table(CIRCLE, 3).offsets[2]] = 1.0
    assert apply_power(v, 0).coeffs.tolist() == v.coeffs.tolist()
    p = apply_power(v, 3)
    assert p.hs_norms()[2] == pytest.approx(64.0, rel=1e-15)
    with pytest.raises(ValueError):
        apply_power(v, -1)


@given(st.integers(0, 30), st.integers(0, 30))
def test_power_composition(m1, m2):
    v = random_bandlimited(SPHERE, 10, SplitMix64(m1 * 31 + m2))
    a = apply_power(apply_power(v, m1), m2)
    b = apply_power(v, m1 + m2)
    np.testing.assert_allclose(a.log_hs_norms()[1:], b.log_hs_norms()[1:], rtol=1e-14)
    np.testing.assert_array_equal(a.coeffs, b.coeffs)


def test_power_never_overflows():
    v = random_bandlimited(CIRCLE, 200, SplitMix64(5))
    p = apply_power(v, 400)
    lh = p.log_hs_norms()
    assert np.all(np.isfinite(lh[1:])) and lh[-1] > 700
    assert math.isfinite(log_power_norm(v, 400))


@pytest.mark.parametrize("name", sorted(OPS))
def test_power_norm_spectral_vs_quadrature(name):
    op, _ = OPS[name]
    J = 20
    v = random_bandlimited(op, J, SplitMix64(9))
    for m in range(6):
        f = inverse(apply_power(v, m).normalized())
        quad = 0.5 * math.log(f.l2_norm_squared())
        assert abs(quad - log_power_norm(v, m)) <= 1e-8 * max(1.0, abs(quad))


def test_power_uses_shifted_eigenvalues():
    op = ModelOperator(Manifold.CIRCLE, 1.0)
    v = SpectralVector(op, np.ones(5), 2)
    np.testing.assert_allclose(apply_power(v, 2).hs_norms(), np.array([1.0, 4.0, 25.0]) * np.sqrt([1, 2, 2]), rtol=1e-14)


def test_derivative_of_sine():
    g = Grid(Manifold.CIRCLE, n=16)
    v = forward(CIRCLE, sample(CIRCLE, np.sin, g), 2)
    dv = apply_derivative(v, 1).normalized()
    ref = forward(CIRCLE, sample(CIRCLE, np.cos, g), 2)
    np.testing.assert_allclose(dv.effective(), ref.coeffs, atol=1e-14)
    np.testing.assert_array_equal(apply_derivative(v, 0).coeffs, v.coeffs)


def test_derivative_torus_mixed():
    g = Grid(Manifold.TORUS2, n=16)
    v = forward(TORUS, sample(TORUS, lambda a, b: np.sin(a) * np.sin(2 * b), g), 8)
    dv = apply_derivative(v, (1, 1)).normalized()
    ref = forward(TORUS, sample(TORUS, lambda a, b: 2 * np.cos(a) * np.cos(2 * b), g), 8)
    np.testing.assert_allclose(dv.effective(), ref.coeffs, atol=1e-13)
    with pytest.raises(ValueError):
        apply_derivative(v, 1)
    with pytest.raises(ValueError):
        apply_derivative(SpectralVector.zeros(SPHERE, 2), 1)


def test_poisson_derivative_bounds():
    # ||d^a P|| <= C h^a a! with a finite witness for a <= 40
    _, pk = poisson_kernel(0.5, 400)
    t = []
    for a in range(41):
        lh = apply_derivative(pk, a).log_hs_norms()
        top = np.max(lh)
        t.append(0.5 * (2 * top + math.log(np.sum(np.exp(2 * (lh - top))))) - math.lgamma(a + 1))
    a = np.arange(41.0)
    slope = np.polyfit(a[5:], t[5:], 1)[0]
    log_C = max(np.array(t) - slope * a)
    h = math.exp(slope)
    assert 1.0 < h < 2.0 and math.isfinite(log_C)
    # the fitted h is close to 1/log(1/r)
    assert h == pytest.approx(1 / math.log(2.0), rel=0.05)
