import numpy as np
import pytest
from fracbubble.errors import ConfigurationError, UsageError
from fracbubble.spectral import (BoxDomain, CompositeGrid, QuadratureGrid, build_basis, dual_norm, eigenfunction,
                                 evaluate, exterior_sine_moments, fractional_apply, fractional_solve,
                                 from_coeffs, gauss_legendre_panels, hs_inner, hs_norm, linear_lift,
                                 linear_lift_moments, to_coeffs)


def test_caixa_invalida():
    with pytest.raises(ConfigurationError, match="positivos"):
        BoxDomain((1.0, -2.0))
    with pytest.raises(ConfigurationError):
        BoxDomain(())


def test_distancia_a_fronteira():
    domain = BoxDomain((1.0, 2.0))
    np.testing.assert_allclose(domain.boundary_distance([[0.2, 1.0], [0.5, 1.9]]), [0.2, 0.1])
    assert domain.contains([[0.5, 1.0]])[0]
    assert not domain.contains([[0.5, 2.0]])[0]
    np.testing.assert_allclose(domain.center, [0.5, 1.0])


def test_quadratura_de_gauss_legendre():
    """16 pontos por painel integram polinômios de grau 31 exatamente."""

    x, w = gauss_legendre_panels([0.0, 0.3, 1.0])
    assert w.sum() == pytest.approx(1.0)
    assert np.sum(w * x ** 31) == pytest.approx(1 / 32)


def test_grade_graduada_integra_perfil_estreito():
    """Um pico de largura 1e-6 é integrado pela grade refinada em torno do centro."""

    domain = BoxDomain((1.0,))
    width = 1e-6
    grid = QuadratureGrid.graded(domain, [np.array([0.4])], [width])
    values = grid.evaluate(lambda p: width / (width ** 2 + (p[:, 0] - 0.4) ** 2))
    exact = np.arctan(0.6 / width) + np.arctan(0.4 / width)
    assert grid.integrate(values) == pytest.approx(exact, rel=1e-8)


def test_grade_composta_separa_centros():
    domain = BoxDomain((1.0,))
    grid = CompositeGrid.localized(domain, [np.array([0.3]), np.array([0.7])], [1e-3, 1e-3])
    assert len(grid.leaves) == 2
    assert grid.integrate(grid.evaluate(lambda leaf: np.ones(leaf.shape))) == pytest.approx(1.0)
    np.testing.assert_allclose([leaf.anchor[0] for leaf in grid.leaves], [0.3, 0.7])
    with pytest.raises(UsageError, match="coincidentes"):
        CompositeGrid.localized(domain, [np.array([0.3]), np.array([0.3])], [1e-3, 1e-3])


def test_base_sub_resolvida():
    with pytest.raises(ConfigurationError, match="sub-resolvida"):
        build_basis(BoxDomain((1.0,)), 16, grid_resolution=2)
    with pytest.raises(ConfigurationError, match="corte"):
        build_basis(BoxDomain((1.0,)), 0)


def test_autovalores():
    basis = build_basis(BoxDomain((1.0, 2.0)), 4)
    assert basis.shape == (4, 4)
    assert basis.eigenvalues[0, 0] == pytest.approx(np.pi ** 2 * (1 + 1 / 4))
    assert basis.eigenvalues[2, 1] == pytest.approx(np.pi ** 2 * (9 + 1))
    assert basis.modes.shape == (16, 2)
    assert basis.modes[1].tolist() == [1, 2]


def test_transformada_de_autofuncao(basis):
    """A transformada de phi_k na grade devolve o vetor canônico e_k."""

    e = eigenfunction(basis, [5])
    values = from_coeffs(basis, e)
    np.testing.assert_allclose(to_coeffs(basis, values), e, atol=1e-12)

    x = np.array([[0.13], [0.5]])
    np.testing.assert_allclose(evaluate(basis, e, x), np.sqrt(2) * np.sin(5 * np.pi * x[:, 0]))


def test_transformada_em_2d():
    basis = build_basis(BoxDomain((1.0, 0.5)), 6)
    coeffs = np.zeros(basis.shape)
    coeffs[1, 2] = 1.0
    coeffs[0, 0] = -0.5
    np.testing.assert_allclose(to_coeffs(basis, from_coeffs(basis, coeffs)), coeffs, atol=1e-12)

    point = np.array([[0.3, 0.2]])
    expected = (np.sqrt(2) * np.sin(2 * np.pi * 0.3) * np.sqrt(4) * np.sin(3 * np.pi * 0.2 / 0.5)
                - 0.5 * np.sqrt(2) * np.sin(np.pi * 0.3) * np.sqrt(4) * np.sin(np.pi * 0.2 / 0.5))
    assert evaluate(basis, coeffs, point)[0] == pytest.approx(expected)


def test_laplaciano_fracionario_espectral(basis):
    """(-Delta)^s multiplica por lambda_k^s e a solução com fonte é sua inversa."""

    rng = np.random.default_rng(0)
    v = rng.standard_normal(basis.shape)
    s = 0.4
    np.testing.assert_allclose(fractional_solve(basis, fractional_apply(basis, v, s), s), v)
    assert hs_inner(basis, v, v, s) == pytest.approx(hs_norm(basis, v, s) ** 2)
    e = eigenfunction(basis, [3])
    assert hs_norm(basis, e, s) == pytest.approx((3 * np.pi) ** s)
    assert dual_norm(basis, fractional_apply(basis, v, s), s) == pytest.approx(hs_norm(basis, v, s))


def test_coeficientes_com_formato_errado(basis):
    with pytest.raises(UsageError, match="formato"):
        fractional_apply(basis, np.zeros(basis.cutoff + 1), 0.5)
    with pytest.raises(ConfigurationError):
        hs_norm(basis, np.zeros(basis.shape), 1.5)


def test_momentos_exteriores():
    """Para h(x) = exp(-|x - 1/2|) fora de (0, 1) os momentos de seno têm forma fechada."""

    L, cutoff = 1.0, 6
    moments = exterior_sine_moments(lambda t: np.exp(-(t + 0.5)), lambda t: np.exp(-(t + 0.5)), L, cutoff)
    k = np.arange(1, cutoff + 1)
    omega = k * np.pi
    # int_0^inf e^{-t} sin(omega t) dt = omega / (1 + omega^2)
    base = np.exp(-0.5) * omega / (1 + omega ** 2)
    expected = np.sqrt(2.0) * ((-1.0) ** k * base - base)
    np.testing.assert_allclose(moments, expected, rtol=1e-8, atol=1e-12)


def test_interpolante_linear():
    L, cutoff = 2.0, 200
    moments = linear_lift_moments(1.0, 3.0, L, cutoff)
    basis = build_basis(BoxDomain((L,)), cutoff)
    x = np.array([0.5, 1.0, 1.5])
    series = evaluate(basis, moments, x)
    np.testing.assert_allclose(series, linear_lift(1.0, 3.0, L, x), atol=2e-2)
    assert linear_lift(1.0, 3.0, L, 0.0) == 1.0
    assert linear_lift(1.0, 3.0, L, L) == 3.0
