import numpy as np
import pytest
from fracbubble.energy import upsilon_2
from fracbubble.errors import UsageError
from fracbubble.optimizer import (brute_force_varphi, lambda_partials, lambda_stationary_root, minimize_lambdas,
                                  minimize_upsilon2, minimize_varphi, sigma_seeds, varphi_grid,
                                  verify_sigma_criticality)

ETA = 0.1


@pytest.fixture(scope="module")
def varphi_min(green):
    return minimize_varphi(green, ETA, per_axis=3)


def test_pontos_iniciais(green):
    """Um representante por troca das bolhas, sempre separados por mais de eta."""

    seeds = sigma_seeds(green, ETA, per_axis=3)
    np.testing.assert_allclose(seeds, [[0.1, 0.5], [0.1, 0.9], [0.5, 0.9]])


@pytest.mark.parametrize("eta", [0.0, 0.5, -0.1])
def test_eta_invalido(green, eta):
    with pytest.raises(UsageError, match="eta deve estar"):
        minimize_varphi(green, eta)


def test_minimo_de_varphi(green, varphi_min):
    assert varphi_min.objective == 'varphi'
    assert varphi_min.converged
    assert varphi_min.hessian_pd
    assert not varphi_min.boundary_hit
    assert varphi_min.starts == 3
    # Representante lexicográfico: sigma_1 < sigma_2
    s1, s2 = varphi_min.location
    assert s1 < s2
    assert varphi_min.value == pytest.approx(green.varphi([s1], [s2]))


def test_minimo_simetrico_na_caixa(varphi_min):
    """A reflexão x -> 1 - x leva o par (s1, s2) em (1 - s2, 1 - s1): o minimizador é invariante."""

    s1, s2 = varphi_min.location
    assert s1 + s2 == pytest.approx(1.0, abs=1e-4)
    assert len(varphi_min.orbit) >= 1


def test_busca_exaustiva_concorda(green, varphi_min):
    """O oráculo em grade não encontra valor menor que o multistart, e cai perto da mesma órbita."""

    n = 61
    point, value = brute_force_varphi(green, ETA, n)
    assert varphi_min.value <= value + 1e-10
    assert value - varphi_min.value <= 1e-2 * abs(varphi_min.value)
    spacing = (1 - 2 * ETA) / (n - 1)
    assert min(np.max(np.abs(point - np.asarray(m))) for m in varphi_min.orbit) <= 2 * spacing


def test_mapa_de_varphi(green):
    x, y, values = varphi_grid(green, ETA, 11)
    assert values.shape == (11, 11)
    # Diagonal fora de O_eta
    assert np.all(np.isnan(np.diag(values)))
    np.testing.assert_allclose(values, values.T, rtol=1e-6, equal_nan=True)


def test_escalas_estacionarias(green, dims):
    """Busca de raiz (brentq) e L-BFGS-B encontram o mesmo zero das derivadas em lambda."""

    sigmas = (np.array([0.3]), np.array([0.7]))
    root = lambda_stationary_root(green, dims, sigmas, eta=0.01)
    lbfgs = minimize_lambdas(green, dims, sigmas, eta=0.01)
    np.testing.assert_allclose(lambda_partials(green, dims, root, sigmas), [0.0, 0.0], atol=1e-9 * dims.c0 / root.min())
    np.testing.assert_allclose(lbfgs, root, rtol=1e-5)
    # Configuração simétrica: escalas iguais
    assert root[0] == pytest.approx(root[1], rel=1e-6)


def test_derivadas_em_lambda_por_diferencas(green, dims):
    sigmas = (np.array([0.25]), np.array([0.6]))
    lams = np.array([0.8, 1.3])
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (upsilon_2(green, dims, lams + e, sigmas) - upsilon_2(green, dims, lams - e, sigmas)) / (2 * h)
        assert lambda_partials(green, dims, lams, sigmas)[i] == pytest.approx(fd, rel=1e-6)


def test_criticidade_exige_upsilon2(green, varphi_min):
    with pytest.raises(UsageError, match="Upsilon_2"):
        verify_sigma_criticality(green, varphi_min, varphi_min)


@pytest.mark.slow
def test_minimizador_de_upsilon2_e_critico_para_varphi(green, dims, varphi_min):
    """O sigma* do minimizador de Upsilon_2 anula o gradiente de varphi e atinge seu mínimo."""

    cp = minimize_upsilon2(green, dims, ETA, per_axis=3)
    assert cp.objective == 'upsilon2'
    assert len(cp.location) == 4
    assert cp.converged
    report = verify_sigma_criticality(green, cp, varphi_min)
    assert [c.name for c in report.cases] == ['varphi_gradient', 'varphi_gap']
    assert report.passed, report.summary()
