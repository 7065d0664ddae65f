import csv
import glob
import json
import os
import pytest
from fracbubble.cli import main
from fracbubble.config import RunConfig
from fracbubble.errors import CalibrationError, ConfigurationError
from fracbubble.pipeline import Pipeline


@pytest.fixture
def dirs(tmp_path, cache_dir):
    """Flags de saída num diretório temporário, reaproveitando o cache da sessão."""
    out = tmp_path / 'out'
    return out, ['--output-dir', str(out), '--cache-dir', str(cache_dir)]


def read_json(path):
    with open(path, encoding='utf-8') as fh:
        return json.load(fh)


def test_ordem_fora_do_intervalo(dirs):
    _, flags = dirs
    assert main(['constants', '--s', '0.6', *flags]) == 1


def test_subcomando_invalido():
    assert main(['inexistente']) == 1
    assert main([]) == 1


def test_suite_invalida(dirs):
    _, flags = dirs
    assert main(['verify', 'inexistente', *flags]) == 1


def test_configuracao_ilegivel(dirs, tmp_path):
    _, flags = dirs
    assert main(['constants', '-c', str(tmp_path / 'nao_existe.json'), *flags]) == 1


def test_constantes(dirs, capsys):
    """constants grava um JSON determinístico com o hash da configuração."""

    out, flags = dirs
    assert main(['constants', *flags]) == 0
    first = read_json(out / 'constants.json')
    assert first['config_hash'] == RunConfig().config_hash()
    assert first['constants']['p'] == pytest.approx(9.0)
    assert not first['calibration']['flagged']
    assert first['flags'] == []
    assert 'config_hash' in capsys.readouterr().out

    assert main(['constants', *flags]) == 0
    assert read_json(out / 'constants.json') == first


def test_constantes_com_configuracao_em_arquivo(dirs, tmp_path):
    out, flags = dirs
    path = tmp_path / 'cfg.json'
    path.write_text(json.dumps({'s': 0.25, 'cutoff': 16}), encoding='utf-8')
    assert main(['constants', '-c', str(path), *flags]) == 0
    payload = read_json(out / 'constants.json')
    assert payload['constants']['s'] == 0.25
    assert payload['config_hash'] == RunConfig(s=0.25, cutoff=16).config_hash()


def test_amplitude_errada_grava_diagnostico(dirs):
    """Amplitude sobrescrita não confere com a calibração: código 2 e JSON de diagnóstico."""

    out, flags = dirs
    assert main(['constants', '--amplitude', '1.0', *flags]) == 2
    reports = glob.glob(os.path.join(out, '*_CalibrationError.json'))
    assert len(reports) == 1
    payload = read_json(reports[0])
    assert payload['error'] == 'CalibrationError'
    assert 'used_amplitude_difference' in payload['diagnostics']


def test_verificacao_em_rn(dirs, capsys):
    out, flags = dirs
    assert main(['verify', 'wholespace', *flags]) == 0
    report = read_json(out / 'verify_wholespace.json')
    assert report['passed']
    assert report['metadata']['flags'] == []
    assert os.path.exists(out / 'verify_wholespace.csv')
    assert 'REPROVADO' not in capsys.readouterr().out


def test_verificacao_em_rn_reprova_amplitude_errada(dirs):
    out, flags = dirs
    assert main(['verify', 'wholespace', '--amplitude', '1.0', *flags]) == 2
    assert not read_json(out / 'verify_wholespace.json')['passed']
    assert glob.glob(os.path.join(out, '*_VerificationError.json'))


def test_tabela_de_green(dirs, capsys):
    out, flags = dirs
    code = main(['green', '--cutoff', '32', '--y-grid-points', '24', '--green-grid-points', '5', *flags])
    assert code == 0
    with open(out / 'green.csv', encoding='utf-8', newline='') as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 25
    assert set(rows[0]) == {'x1', 'y1', 'G', 'H', 'robin_x', 'config_hash'}
    diagonal = [r for r in rows if r['x1'] == r['y1']]
    assert len(diagonal) == 5
    assert all(r['G'] == '' for r in diagonal)
    assert str(out / 'green.csv') in capsys.readouterr().out


def test_pipeline_sem_diagnostico(run_config):
    """Com save_diagnostics_on_error=False a exceção sobe sem gravar arquivo."""

    pipeline = Pipeline(RunConfig(**{**run_config.to_dict(), 'amplitude': 1.0}), save_diagnostics_on_error=False)
    with pytest.raises(CalibrationError):
        pipeline.constants()
    assert not glob.glob(os.path.join(run_config.output_dir, '*_CalibrationError.json'))


def test_configuracao_reduzida_explicita(run_config):
    cfg = RunConfig(**{**run_config.to_dict(), 'lambdas': (1.0, 2.0), 'sigmas': ((0.3,), (0.7,))})
    reduced = Pipeline(cfg).reduced_config(eps=0.1)
    assert reduced.lambdas == (1.0, 2.0)
    assert reduced.eps == 0.1


def test_configuracao_reduzida_sem_pontos(run_config):
    cfg = RunConfig(**{**run_config.to_dict(), 'k': 3, 'signs': (1, -1, 1)})
    with pytest.raises(ConfigurationError, match="k = 3"):
        Pipeline(cfg, save_diagnostics_on_error=False).reduced_config()


def test_uma_bolha_no_centro(run_config):
    cfg = RunConfig(**{**run_config.to_dict(), 'k': 1, 'signs': (1,)})
    reduced = Pipeline(cfg).reduced_config()
    assert reduced.sigmas == ((0.5,),)
    assert reduced.lambdas[0] > 0


@pytest.mark.slow
def test_pontos_de_concentracao(dirs):
    out, flags = dirs
    code = main(['find-concentration', '--cutoff', '32', '--y-grid-points', '24', '--seeds-per-axis', '3', *flags])
    assert code == 0
    payload = read_json(out / 'concentration.json')
    assert {'varphi', 'upsilon2'} <= set(payload)


@pytest.mark.slow
def test_solucao(dirs):
    """Fluxo completo de solve com (lambda, sigma) fixos e eps grande o bastante para a base."""

    out, flags = dirs
    code = main(['solve', '--s', '0.25', '--cutoff', '64', '--eps', '0.5', '--eps-ladder', '0.5', '0.45', '0.4',
                 '0.35', '--lambdas', '1.0', '1.0', '--sigmas', '[[0.3], [0.7]]', *flags])
    assert code == 0
    payload = read_json(out / 'solve.json')
    assert isinstance(payload['flags'], list)
    assert payload['assembly']['sign_violations'] == 0
    assert payload['phi']['orthogonality'] < 1e-8
    with open(out / 'solution_profile.csv', encoding='utf-8', newline='') as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1001
    assert float(rows[0]['v']) == pytest.approx(0.0, abs=1e-8)
