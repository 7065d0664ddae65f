import logging
import numpy as np
import pytest
from fracbubble.bubble import compute_constants
from fracbubble.energy import ReducedConfig
from fracbubble.errors import ConfigurationError, UsageError
from fracbubble.reduction import (apply_L, assemble_and_residual, build_reduction, coercivity_check, phi_rate_report,
                                  predicted_phi_rate, solve_phi)

EPS = 0.5


@pytest.fixture(scope="module")
def cfg():
    return ReducedConfig(signs=(1, -1), lambdas=(1.0, 1.0), sigmas=((0.3,), (0.7,)), eta=0.1)


@pytest.fixture(scope="module")
def problem(basis_fine, dims_mild, cfg):
    return build_reduction(basis_fine, dims_mild, EPS, cfg)


@pytest.fixture(scope="module")
def phi(problem):
    return solve_phi(problem)


def test_espaco_de_restricoes(problem):
    """k(N+1) restrições; a projeção cai no complemento H^s-ortogonal e é idempotente."""

    space = problem.space
    assert space.rank == 4
    assert [label for label in space.labels] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert space.gram_condition < 1e8

    c = np.random.default_rng(3).standard_normal(space.dim)
    projected = space.project(c)
    assert space.orthogonality(projected) < 1e-10
    np.testing.assert_allclose(space.project(projected), projected, atol=1e-12 * space.norm(c))
    assert space.orthogonality(np.zeros(space.dim)) == 0.0


def test_operador_linear(problem):
    phi = problem.space.project(np.random.default_rng(4).standard_normal(problem.space.dim))
    np.testing.assert_allclose(apply_L(problem, phi, scale=0.0).reshape(-1), phi)
    np.testing.assert_allclose(apply_L(problem, phi).reshape(-1), problem.linear_matrix @ phi, atol=1e-12)
    with pytest.raises(UsageError, match="esperado"):
        apply_L(problem, np.zeros(problem.space.dim + 1))


def test_coercividade(problem):
    result = coercivity_check(problem)
    assert not result.flagged
    assert result.sigma_min > 0
    assert result.agreement < 1e-4
    assert result.to_dict()['flagged'] is False


def test_solucao_da_equacao_auxiliar(problem, phi):
    assert phi.residual < 1e-8
    assert phi.orthogonality < 1e-8
    assert phi.hs_norm > 0
    assert phi.method in ('fixed_point', 'newton')
    np.testing.assert_allclose(problem.equation(phi.coeffs), 0.0, atol=1e-8)


def test_montagem_e_residuo(problem, phi):
    assembly = assemble_and_residual(problem, phi)
    assert assembly.constrained_residual < 1e-8
    assert set(assembly.multipliers) == {'c_1_psi0', 'c_1_psi1', 'c_2_psi0', 'c_2_psi1'}
    # V positiva perto de sigma_1 e negativa perto de sigma_2
    assert assembly.nodal_values[0] > 0 > assembly.nodal_values[1]
    assert assembly.sign_violations == 0


@pytest.mark.parametrize("damping", [0.0, 1.5])
def test_amortecimento_invalido(problem, damping):
    with pytest.raises(UsageError, match="Amortecimento"):
        solve_phi(problem, damping=damping)


def test_eps_invalido(basis_fine, dims_mild, cfg):
    with pytest.raises(ConfigurationError, match="epsilon"):
        build_reduction(basis_fine, dims_mild, 0.0, cfg)


def test_taxa_prevista(caplog):
    assert predicted_phi_rate(compute_constants(1, 0.25)) == 1.0
    dims = compute_constants(1, 0.1)
    assert predicted_phi_rate(dims) == pytest.approx((1 + 0.2) * dims.alpha0 / 2)
    with caplog.at_level(logging.WARNING):
        assert predicted_phi_rate(compute_constants(3, 0.5)) == 1.0
    assert any("N = 6s" in r.getMessage() for r in caplog.records)


def test_relatorio_exige_quatro_eps(basis_fine, dims_mild, cfg):
    with pytest.raises(UsageError, match="pelo menos 4"):
        phi_rate_report(basis_fine, dims_mild, cfg, [0.5, 0.4])


@pytest.mark.slow
def test_relatorio_da_taxa_de_phi(basis_fine, dims_mild, cfg):
    report = phi_rate_report(basis_fine, dims_mild, cfg, [0.5, 0.45, 0.4, 0.35])
    assert [c.name for c in report.cases] == ['phi_norm', 'phi_monotone', 'coercivity_floor', 'coercivity_variation',
                                              'constrained_residual', 'multipliers', 'nodal_signs']
    assert report.suite('reduction')[4].passed
    assert report.metadata['lambdas'] == [1.0, 1.0]


def test_solucao_independe_do_amortecimento(problem, phi):
    """O amortecimento muda só o caminho do ponto fixo, não o Phi obtido."""

    damped = solve_phi(problem, damping=0.5)
    np.testing.assert_allclose(damped.coeffs, phi.coeffs, atol=1e-8 * max(phi.hs_norm, 1.0))


def test_jacobiano_com_termo_de_segunda_ordem(problem):
    """Com o termo f_eps'' o jacobiano acompanha as diferenças centrais da equação melhor que o potencial
    congelado em U; em Phi = 0 os dois coincidem com a derivada."""

    space = problem.space
    rng = np.random.default_rng(5)
    phi = space.project(rng.standard_normal(space.dim))
    phi *= 1e-2 / space.norm(phi)
    v = space.project(rng.standard_normal(space.dim))
    v /= np.linalg.norm(v)
    h = 1e-6
    zero = np.zeros(space.dim)

    frozen = problem.jacobian(zero) @ v
    at_zero = (problem.equation(h * v) - problem.equation(-h * v)) / (2 * h)
    np.testing.assert_allclose(frozen, at_zero, atol=1e-6)

    fd = (problem.equation(phi + h * v) - problem.equation(phi - h * v)) / (2 * h)
    with_second = problem.jacobian(phi) @ v
    assert np.linalg.norm(with_second - fd) < 0.5 * np.linalg.norm(frozen - fd)


def test_nucleo_aparece_sem_restricoes(problem):
    """Sem a projeção em K, I - B herda as direções psi quase no núcleo; em K o menor valor singular
    fica acima dele."""

    result = coercivity_check(problem)
    assert result.full_space_min < result.sigma_min


@pytest.mark.slow
def test_coercividade_estavel_na_escada(basis_fine, dims_mild, cfg):
    """sigma_min de L em K varia menos de 50% ao longo da escada de eps."""

    values = [coercivity_check(build_reduction(basis_fine, dims_mild, eps, cfg)).sigma_min
              for eps in (0.5, 0.45, 0.4, 0.35)]
    assert min(values) > 0
    assert (max(values) - min(values)) / max(values) < 0.5
