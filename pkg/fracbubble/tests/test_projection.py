import numpy as np
import pytest
from fracbubble.bubble import BubbleParams, bubble_value
from fracbubble.errors import AdmissibilityError, ConfigurationError, UsageError
from fracbubble.projection import (build_ansatz, component_name, project_bubble, project_component, project_psi,
                                   psi_family)
from fracbubble.spectral import evaluate

EPS = 0.5  # mu = eps^2 = 0.25 com s = 0.25: bolhas largas, bem resolvidas pela base de 64 modos


@pytest.fixture(scope="module")
def projected(basis_fine, dims_mild):
    return project_bubble(basis_fine, dims_mild, EPS, 1.0, [0.4], eta=0.1)


def test_nomes_dos_componentes():
    assert component_name(-1) == 'w'
    assert component_name(0) == 'psi0'
    assert component_name(2) == 'psi2'


def test_projecao_se_anula_na_fronteira(projected):
    """P w satisfaz a condição de Dirichlet nas extremidades da caixa."""

    np.testing.assert_allclose(projected.values([[0.0], [1.0]]), [0.0, 0.0], atol=1e-10)


def test_projecao_entre_zero_e_o_perfil(projected, dims_mild):
    """0 < P w < w no interior."""

    x = np.linspace(0.05, 0.95, 19)
    values = projected.values(x)
    profile = bubble_value(dims_mild, BubbleParams(projected.mu * projected.lam, np.array([0.4])), x)
    assert np.all(values > 0)
    assert np.all(values <= profile * (1 + 1e-8))


def test_residuo_da_equacao_de_projecao(projected):
    assert projected.residual() < 1e-10


def test_serie_coincide_com_a_avaliacao_pontual(projected):
    """A série truncada dos coeficientes aproxima a avaliação pelo perfil menos a correção suave."""

    x = np.array([[0.2], [0.4], [0.7]])
    series = evaluate(projected.basis, projected.coeffs, x)
    np.testing.assert_allclose(series, projected.values(x), rtol=2e-2)


def test_derivada_em_lambda(basis_fine, dims_mild):
    """d/dlambda dos coeficientes de P w é mu vezes os coeficientes de P psi0."""

    h = 1e-4
    plus = project_bubble(basis_fine, dims_mild, EPS, 1.0 + h, [0.4])
    minus = project_bubble(basis_fine, dims_mild, EPS, 1.0 - h, [0.4])
    psi0 = project_psi(basis_fine, dims_mild, EPS, 1.0, [0.4], 0)
    fd = (plus.coeffs - minus.coeffs) / (2 * h)
    expected = psi0.mu * psi0.coeffs
    assert np.linalg.norm(fd - expected) <= 1e-4 * np.linalg.norm(expected)


def test_derivada_no_centro(basis_fine, dims_mild):
    """d/dsigma dos coeficientes de P w são os coeficientes de P psi^1."""

    h = 1e-5
    plus = project_bubble(basis_fine, dims_mild, EPS, 1.0, [0.4 + h])
    minus = project_bubble(basis_fine, dims_mild, EPS, 1.0, [0.4 - h])
    psi1 = project_psi(basis_fine, dims_mild, EPS, 1.0, [0.4], 1)
    fd = (plus.coeffs - minus.coeffs) / (2 * h)
    assert np.linalg.norm(fd - psi1.coeffs) <= 1e-4 * np.linalg.norm(psi1.coeffs)


def test_familia_psi(basis_fine, dims_mild):
    family = psi_family(basis_fine, dims_mild, EPS, 1.0, [0.4])
    assert [p.name for p in family] == ['psi0', 'psi1']
    assert family[1].frame_exponent == pytest.approx(dims_mild.beta + 1)


def test_entradas_invalidas(basis_fine, dims_mild):
    with pytest.raises(AdmissibilityError, match="distância"):
        project_bubble(basis_fine, dims_mild, EPS, 1.0, [0.05], eta=0.1)
    with pytest.raises(UsageError, match="inválido"):
        project_component(basis_fine, dims_mild, EPS, 1.0, [0.4], j=2)
    with pytest.raises(UsageError):
        project_psi(basis_fine, dims_mild, EPS, 1.0, [0.4], -1)
    with pytest.raises(ConfigurationError, match="epsilon"):
        project_bubble(basis_fine, dims_mild, 0.0, 1.0, [0.4])
    with pytest.raises(ConfigurationError, match="positiva"):
        project_bubble(basis_fine, dims_mild, EPS, -1.0, [0.4])
    with pytest.raises(UsageError, match="fora do domínio"):
        project_bubble(basis_fine, dims_mild, EPS, 1.0, [1.4])


def test_ansatz_com_sinais_opostos(basis_fine, dims_mild):
    ansatz = build_ansatz(basis_fine, dims_mild, EPS, (1, -1), (1.0, 1.0), ([0.3], [0.7]), eta=0.1)
    np.testing.assert_allclose(ansatz.coeffs, ansatz.bubbles[0].coeffs - ansatz.bubbles[1].coeffs)
    assert ansatz.mu == pytest.approx(EPS ** 2)
    assert len(ansatz.grid.leaves) == 2

    # Antissimetria em torno de x = 1/2
    values = ansatz.values()
    assert ansatz.grid.integrate(values) == pytest.approx(0.0, abs=1e-8)

    with pytest.raises(UsageError, match="mesmo comprimento"):
        build_ansatz(basis_fine, dims_mild, EPS, (1, -1), (1.0,), ([0.3], [0.7]))
