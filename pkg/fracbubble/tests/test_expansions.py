import pytest
import fracbubble.expansions as expansions
from fracbubble.energy import ReducedConfig
from fracbubble.errors import UsageError
from fracbubble.expansions import SUITES, ExpansionRunner, expansion_report
from fracbubble.green import GreenEvaluator
from fracbubble.spectral import build_basis

LADDER = (0.5, 0.45, 0.4, 0.35)


@pytest.fixture(scope="module")
def cfg():
    return ReducedConfig(signs=(1, -1), lambdas=(1.0, 1.0), sigmas=((0.3,), (0.7,)), eta=0.1)


@pytest.fixture(scope="module")
def runner(basis_fine, dims_mild, green_mild, cfg):
    return ExpansionRunner(basis_fine, dims_mild, green_mild, cfg, LADDER)


def test_escada_curta(basis_fine, dims_mild, green_mild, cfg):
    with pytest.raises(UsageError, match="pelo menos 4"):
        ExpansionRunner(basis_fine, dims_mild, green_mild, cfg, (0.5, 0.4, 0.3))


def test_suite_desconhecida(runner):
    with pytest.raises(UsageError, match="Suíte desconhecida"):
        runner.run('inexistente')


def test_pontos_de_amostra(runner, cfg):
    points = runner.interior_points()
    assert points.shape == (runner.sample_points, 1)
    far = runner.far_points(0)
    assert len(far) < len(points)
    assert all(abs(x - 0.3) >= cfg.eta / 2 for x in far[:, 0])


def test_projecoes_reaproveitadas(runner):
    assert runner.projected(0.5, 0, -1) is runner.projected(0.5, 0, -1)
    assert runner.ansatz(0.5).bubbles[1] is runner.projected(0.5, 1, -1)


@pytest.mark.slow
def test_limites_de_norma(runner):
    """||P w||_{L^q} <= ||w||_{L^q} ao longo de toda a escada."""

    report = runner.run('norm_bounds')
    cases = {c.name: c for c in report.cases}
    assert set(cases) == {'projection_below_profile', 'psi_critical_norm', 'psi_dual_norm', 'w_dual_norm',
                          'psi0_dual_norm'}
    assert cases['projection_below_profile'].passed
    assert cases['w_dual_norm'].notes['regime'] == 'log_growth'


@pytest.mark.slow
def test_todas_as_suites(basis_fine, dims_mild, green_mild, cfg):
    """Cada suíte contribui com casos próprios e valores para todos os eps."""

    report = expansion_report('all', basis_fine, dims_mild, green_mild, cfg, LADDER)
    assert {c.suite for c in report.cases} == set(SUITES)
    for case in report.cases:
        if case.kind != 'check':
            assert len(case.values) == len(LADDER)
        if case.suite in ('derivative_rates', 'nonlinearity', 'linearized_coupling'):
            assert case.kind == 'rate'


def test_taxa_acima_da_prevista_reprova(runner, monkeypatch):
    """Com ||P psi - psi|| trocado por 1, os valores decaem como mu = eps^{alpha0} = eps^2: inclinação 2
    contra o expoente 0.5 de psi0, que um critério só de cota inferior aceitaria."""

    monkeypatch.setattr(expansions, 'lebesgue_norm', lambda grid, values, q: 1.0)
    report = runner.derivative_rates()
    psi0 = report.cases[0]
    assert psi0.name == 'psi0' and psi0.kind == 'rate'
    assert psi0.predicted == pytest.approx(0.5)
    assert psi0.observed == pytest.approx(2.0)
    assert not psi0.passed


@pytest.mark.slow
def test_inclinacoes_estaveis_no_refinamento(runner, interval, dims_mild, cfg):
    """Dobrar os modos e refinar a grade muda as inclinações ajustadas em no máximo 0.05."""

    fine = build_basis(interval, 128, 12)
    refined = ExpansionRunner(fine, dims_mild, GreenEvaluator(fine, dims_mild, y_grid_points=24), cfg, LADDER)
    coarse_slopes = {c.name: c.observed for c in runner.derivative_rates().cases}
    fine_slopes = {c.name: c.observed for c in refined.derivative_rates().cases}
    assert set(coarse_slopes) == set(fine_slopes)
    for name, slope in coarse_slopes.items():
        assert fine_slopes[name] == pytest.approx(slope, abs=0.05), name
