import logging
import numpy as np
import pytest
from fracbubble.bubble import compute_constants
from fracbubble.cache import DiskCache
from fracbubble.errors import ConfigurationError, SingularityError, UsageError
from fracbubble.green import GreenEvaluator, finite_gradient, free_kernel, green_series
from fracbubble.spectral import BoxDomain, build_basis


def spectral_green(s, x, y, modes=20000):
    """Série sum 2 sin(k pi x) sin(k pi y) / (k pi)^{2s} em (0, 1), longa o bastante para servir de referência."""
    k = np.arange(1, modes + 1)
    return float(np.sum(2 * np.sin(k * np.pi * x) * np.sin(k * np.pi * y) / (k * np.pi) ** (2 * s)))


def test_nucleo_livre(dims):
    assert free_kernel(dims, [0.2], [0.7]) == pytest.approx(dims.c_Ns * 0.5 ** (-(1 - 2 * dims.s)))
    with pytest.raises(SingularityError, match="x = y"):
        free_kernel(dims, [0.2], [0.2])


def test_serie_com_s_igual_a_um(basis):
    """Para s = 1 a série reproduz a função de Green de -u'' em (0, 1): x (1 - y) para x < y."""

    assert green_series(basis, 1.0, [0.3], [0.6]) == pytest.approx(0.3 * 0.4, abs=5e-3)
    with pytest.raises(ConfigurationError):
        green_series(basis, 1.5, [0.3], [0.6])


@pytest.mark.parametrize("x, y", [(0.3, 0.6), (0.2, 0.25), (0.5, 0.9)])
def test_green_coincide_com_a_serie_espectral(green, dims, x, y):
    """G = c|x-y|^{-(N-2s)} - H reproduz a série espectral sum phi_k(x) phi_k(y) lambda_k^{-s}."""

    assert green.green([x], [y]) == pytest.approx(spectral_green(dims.s, x, y), rel=1e-2)


def test_parte_regular_simetrica(green):
    assert green.regular_part([0.3], [0.7]) == green.regular_part([0.7], [0.3])


def test_robin_positiva_e_simetrica(green):
    """H(x, x) > 0, simétrica em torno do centro e crescente perto da fronteira."""

    assert green.robin([0.5]) > 0
    assert green.robin([0.2]) == pytest.approx(green.robin([0.8]), rel=1e-4)
    assert green.robin([0.1]) > green.robin([0.3]) > green.robin([0.5])


def test_robin_por_extrapolacao(green):
    """H(x, x + delta) extrapolada para delta -> 0 coincide com a avaliação direta na diagonal."""

    extrapolated, robin = green.richardson_diagonal([0.4])
    assert extrapolated == pytest.approx(robin, rel=1e-3)


def test_avaliacao_vetorizada(green):
    points = np.array([[0.2], [0.35], [0.8]])
    y = [0.6]
    np.testing.assert_allclose(green.regular_part_many(points, y),
                               [green.regular_part(p, y) for p in points], rtol=1e-10)
    np.testing.assert_allclose(green.green_many(points, y), [green.green(p, y) for p in points], rtol=1e-10)


def test_faixa_de_guarda(green, caplog):
    with caplog.at_level(logging.WARNING):
        value = green.regular_part_checked([0.005], [0.5])
    assert value.near_boundary
    assert any("faixa de guarda" in r.getMessage() for r in caplog.records)
    assert not green.regular_part_checked([0.3], [0.5]).near_boundary


def test_pontos_invalidos(green):
    with pytest.raises(SingularityError, match="diagonal"):
        green.green([0.4], [0.4])
    with pytest.raises(UsageError, match="fora do domínio"):
        green.regular_part([1.2], [0.4])
    with pytest.raises(SingularityError):
        green.varphi([0.3], [0.3])


def test_base_incompativel(dims):
    basis = build_basis(BoxDomain((1.0, 1.0)), 4)
    with pytest.raises(UsageError, match="incompatível"):
        GreenEvaluator(basis, dims)


def test_varphi(green):
    s1, s2 = [0.3], [0.7]
    expected = np.sqrt(green.robin(s1) * green.robin(s2)) + green.green(s1, s2)
    assert green.varphi(s1, s2) == pytest.approx(expected)
    assert green.varphi(s1, s2) == pytest.approx(green.varphi(s2, s1))


def test_gradiente_de_varphi(green):
    """Diferenças de ordem 2 e 4 concordam; pela simetria x -> 1 - x, o gradiente em (0.3, 0.7) é antissimétrico."""

    g2 = green.grad_varphi([0.3], [0.7], order=2)
    g4 = green.grad_varphi([0.3], [0.7], order=4)
    np.testing.assert_allclose(g2, g4, rtol=1e-4, atol=1e-8)
    assert g4[0] == pytest.approx(-g4[1], rel=1e-4)


def test_gradiente_finito():
    grad = finite_gradient(lambda z: z[0] ** 3 + 2 * z[1], np.array([1.0, 5.0]), 1e-3, order=4)
    np.testing.assert_allclose(grad, [3.0, 2.0], rtol=1e-10)


def test_tabela_em_cache(basis, dims, cache_dir):
    """A segunda construção com os mesmos parâmetros lê a tabela do disco."""

    cache = DiskCache(cache_dir)
    first = GreenEvaluator(basis, dims, y_grid_points=12, cache=cache)
    second = GreenEvaluator(basis, dims, y_grid_points=12, cache=cache)
    assert cache.hits == 1
    assert first.robin([0.4]) == second.robin([0.4])


@pytest.mark.slow
def test_parte_regular_em_2d():
    """Em N = 2 a parte regular é simétrica, respeita a reflexão da caixa e a tabela interpolada em y
    concorda com os coeficientes calculados diretamente."""

    dims = compute_constants(2, 0.5)
    ev = GreenEvaluator(build_basis(BoxDomain((1.0, 1.0)), 8), dims, y_grid_points=16)
    assert ev.regular_part([0.3, 0.5], [0.6, 0.4]) == pytest.approx(ev.regular_part([0.6, 0.4], [0.3, 0.5]))
    assert ev.robin([0.3, 0.5]) == pytest.approx(ev.robin([0.7, 0.5]), rel=1e-6)
    assert np.isfinite(ev.robin([0.5, 0.5]))

    x = np.array([[0.3, 0.5], [0.6, 0.4], [0.45, 0.55]])
    y = [0.37, 0.61]
    interpolated = ev.regular_part_many(x, y)
    direct = ev.one_sided_many(x, y)
    np.testing.assert_allclose(interpolated, direct, rtol=2e-2, atol=2e-2 * np.abs(direct).max())


def test_tabela_2d_exige_quatro_pontos():
    with pytest.raises(UsageError, match="4 pontos"):
        GreenEvaluator(build_basis(BoxDomain((1.0, 1.0)), 4), compute_constants(2, 0.5), y_grid_points=3)
