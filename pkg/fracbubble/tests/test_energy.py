import numpy as np
import pytest
from fracbubble.energy import (ReducedConfig, ansatz_energy, energy, energy_derivative, energy_expansion_report,
                               grad_upsilon, interaction_integrals, interaction_matrix, predicted_energy,
                               upsilon_2, upsilon_k)
from fracbubble.errors import AdmissibilityError, ConfigurationError, UsageError
from fracbubble.projection import build_ansatz
from fracbubble.spectral import BoxDomain, hs_inner


@pytest.fixture
def pair():
    return ReducedConfig(signs=(1, -1), lambdas=(1.0, 1.5), sigmas=((0.3,), (0.7,)), eta=0.1)


def test_configuracao_reduzida(pair):
    assert pair.k == 2
    assert pair.N == 1
    np.testing.assert_allclose(pair.to_vector(), [1.0, 1.5, 0.3, 0.7])
    assert pair.from_vector(pair.to_vector()) == pair
    swapped = pair.swapped()
    assert swapped.signs == (-1, 1)
    assert swapped.sigmas == ((0.7,), (0.3,))


def test_configuracao_invalida():
    with pytest.raises(ConfigurationError, match="Sinais"):
        ReducedConfig(signs=(1, 2), lambdas=(1.0, 1.0), sigmas=((0.3,), (0.7,)))
    with pytest.raises(ConfigurationError, match="mesmo comprimento"):
        ReducedConfig(signs=(1, -1), lambdas=(1.0,), sigmas=((0.3,), (0.7,)))


@pytest.mark.parametrize("lambdas, sigmas, match", [
    ((1.0, 1.0), ((0.05,), (0.7,)), "fronteira"),
    ((1.0, 20.0), ((0.3,), (0.7,)), "lambda_2"),
    ((1.0, 1.0), ((0.45,), (0.5,)), r"\|sigma_1 - sigma_2\|"),
])
def test_fora_do_conjunto_admissivel(lambdas, sigmas, match):
    """Cada condição de O_eta violada aparece na mensagem do AdmissibilityError."""

    cfg = ReducedConfig(signs=(1, -1), lambdas=lambdas, sigmas=sigmas, eta=0.1)
    domain = BoxDomain((1.0,))
    assert not cfg.is_admissible(domain)
    with pytest.raises(AdmissibilityError, match=match):
        cfg.check_admissible(domain)


def test_upsilon_geral_coincide_com_k_igual_a_dois(green, dims, pair):
    """Com sinais opostos, o termo cruzado de Upsilon_k é +2G."""

    assert upsilon_k(green, dims, pair) == pytest.approx(upsilon_2(green, dims, pair.lambdas, pair.sigmas))


def test_upsilon_invariante_pela_troca(green, dims, pair):
    assert upsilon_k(green, dims, pair) == pytest.approx(upsilon_k(green, dims, pair.swapped()))


def test_upsilon_uma_bolha(green, dims):
    """Com k = 1 só restam o termo de Robin e o logaritmo."""

    cfg = ReducedConfig(signs=(1,), lambdas=(2.0,), sigmas=((0.5,),), eta=0.1)
    b = dims.N - 2 * dims.s
    expected = dims.c1 ** 2 * 2.0 ** b * green.robin([0.5]) - dims.c0 * b / (dims.p + 1) * np.log(2.0)
    assert upsilon_k(green, dims, cfg) == pytest.approx(expected)


def test_gradiente_de_upsilon(green, dims, pair):
    g2 = grad_upsilon(green, dims, pair, order=2)
    g4 = grad_upsilon(green, dims, pair, order=4)
    assert not g2.shrunk
    np.testing.assert_allclose(g2.values, g4.values, rtol=1e-4, atol=1e-8)

    # Derivada em lambda_1 pela forma fechada
    b = dims.N - 2 * dims.s
    d1 = (dims.c1 ** 2 * (b * 1.0 ** (b - 1) * green.robin([0.3])
                          + 2 * green.green([0.3], [0.7]) * (b / 2) * 1.5 ** (b / 2))
          - dims.c0 * b / (dims.p + 1))
    assert g4.values[0] == pytest.approx(d1, rel=1e-6)


def test_gradiente_reduz_o_passo_na_fronteira(green, dims):
    edge = ReducedConfig(signs=(1, -1), lambdas=(1.0, 1.0), sigmas=((0.1 + 1e-5,), (0.7,)), eta=0.1)
    result = grad_upsilon(green, dims, edge)
    assert result.shrunk
    assert result.step < green.h_grad


def test_derivada_da_energia(basis, dims):
    """E_eps'(v)[phi] coincide com a derivada direcional por diferenças centrais."""

    rng = np.random.default_rng(1)
    v = np.zeros(basis.shape)
    v[:6] = 0.5 * rng.standard_normal(6)
    phi = np.zeros(basis.shape)
    phi[:6] = rng.standard_normal(6)
    eps, h = 0.05, 1e-6
    fd = (energy(basis, dims, eps, v + h * phi) - energy(basis, dims, eps, v - h * phi)) / (2 * h)
    assert energy_derivative(basis, dims, eps, v, phi) == pytest.approx(fd, rel=1e-5)


def test_energia_eps_invalido(basis, dims):
    with pytest.raises(ConfigurationError, match="epsilon"):
        energy(basis, dims, dims.p, np.zeros(basis.shape))


def test_matriz_de_interacao_e_o_produto_de_hs(basis_fine, dims_mild, pair):
    """int w_h^p P w_i = <P w_h, P w_i>_{H^s}: a matriz é o Gram das projeções."""

    ansatz = build_ansatz(basis_fine, dims_mild, 0.5, pair.signs, pair.lambdas, pair.sigmas, pair.eta)
    matrix = interaction_matrix(ansatz)
    coeffs = [b.coeffs for b in ansatz.bubbles]
    gram = np.array([[hs_inner(basis_fine, ci, ch, dims_mild.s) for ch in coeffs] for ci in coeffs])
    np.testing.assert_allclose(matrix, gram, rtol=2e-2)
    assert matrix[0, 1] == pytest.approx(matrix[1, 0], rel=2e-2)
    assert np.isfinite(ansatz_energy(ansatz))


def test_integrais_de_interacao(basis_fine, dims_mild, pair):
    self_term, cross = interaction_integrals(basis_fine, dims_mild, 0.5, pair, 0, 1)
    assert self_term > cross > 0
    with pytest.raises(UsageError, match="i != h"):
        interaction_integrals(basis_fine, dims_mild, 0.5, pair, 0, 0)


def test_energia_prevista(green, dims, pair):
    """Em eps = 0 resta o termo principal k s c0 / N."""

    assert predicted_energy(green, dims, pair, 0.0) == pytest.approx(2 * dims.s * dims.c0 / dims.N)


def test_relatorio_exige_quatro_eps(basis, green, dims, pair):
    with pytest.raises(UsageError, match="pelo menos 4"):
        energy_expansion_report(basis, green, dims, pair, [0.1, 0.05, 0.01])


@pytest.mark.slow
def test_relatorio_de_energia(basis_fine, green_mild, dims_mild, pair):
    """O relatório contém os casos da expansão; a simetria do termo cruzado sempre passa."""

    report = energy_expansion_report(basis_fine, green_mild, dims_mild, pair, [0.2, 0.15, 0.1, 0.075])
    names = [case.name for case in report.cases]
    assert names == ['residual', 'leading_constant', 'self_term_first_order', 'cross_term_first_order',
                     'cross_term_symmetry']
    assert report.metadata['k'] == 2
    assert report.cases[-1].passed
