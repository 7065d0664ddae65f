'Soluções nodais de duas bolhas para o laplaciano fracionário espectral em caixas.'

import sys
import json
import argparse
from dataclasses import fields
from typing import Any, Sequence
from .config import RunConfig
from .controller import exit_code_for
from .errors import FracBubbleError, UsageError
from .log import log
from .pipeline import Pipeline, VERIFY_SUITES


TUPLE_FIELDS = {'lengths': float, 'eps_ladder': float, 'lambdas': float, 'signs': int}
JSON_FIELDS = ('sigmas',)
FLAG_FIELDS = ('heatmap',)


class _Parser(argparse.ArgumentParser):
    """ArgumentParser que reporta erros de uso como UsageError (código de saída 1)."""

    def error(self, message: str) -> None:
        raise UsageError(message)


def _field_type(name: str, default: Any):
    if isinstance(default, bool):
        return None
    if isinstance(default, int):
        return int
    if isinstance(default, float) or name in ('eps', 'amplitude'):
        return float
    return str


def _add_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('-c', '--config', help='arquivo JSON de configuração')
    group = parser.add_argument_group('sobrescritas', 'cada campo da configuração pode ser sobrescrito')
    defaults = RunConfig()
    for f in fields(RunConfig):
        flag = '--' + f.name.replace('_', '-')
        if f.name in TUPLE_FIELDS:
            group.add_argument(flag, dest=f.name, nargs='+', type=TUPLE_FIELDS[f.name])
        elif f.name in JSON_FIELDS:
            group.add_argument(flag, dest=f.name, type=json.loads, help='lista JSON de pontos')
        elif f.name in FLAG_FIELDS:
            group.add_argument(flag, dest=f.name, action='store_true', default=None)
        else:
            group.add_argument(flag, dest=f.name, type=_field_type(f.name, getattr(defaults, f.name)))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='fracbubble', description=__doc__)
    subparsers = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    # constants subcomand
    parser_constants = subparsers.add_parser('constants', help='constantes de (N, s) e calibração da amplitude')
    _add_overrides(parser_constants)
    parser_constants.set_defaults(func=lambda pipeline, args: pipeline.constants())

    # green subcomand
    parser_green = subparsers.add_parser('green', help='tabela de G, H e Robin numa grade')
    _add_overrides(parser_green)
    parser_green.set_defaults(func=lambda pipeline, args: pipeline.green_table())

    # find-concentration subcomand
    parser_find = subparsers.add_parser('find-concentration', help='minimiza varphi e Upsilon_2')
    _add_overrides(parser_find)
    parser_find.set_defaults(func=lambda pipeline, args: pipeline.find_concentration())

    # verify subcomand
    parser_verify = subparsers.add_parser('verify', help='executa as suítes de verificação')
    parser_verify.add_argument('suite', choices=(*VERIFY_SUITES, 'all'), help='suíte a executar')
    _add_overrides(parser_verify)
    parser_verify.set_defaults(func=lambda pipeline, args: pipeline.verify(args.suite))

    # solve subcomand
    parser_solve = subparsers.add_parser('solve', help='otimização, equação auxiliar e montagem da solução')
    _add_overrides(parser_solve)
    parser_solve.set_defaults(func=lambda pipeline, args: pipeline.solve())

    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    overrides = {f.name: getattr(args, f.name, None) for f in fields(RunConfig)}
    return RunConfig.from_json(args.config, **overrides)


def main(argv: Sequence[str] | None = None) -> int:
    """
    Ponto de entrada da CLI.

    Returns:
        0 se o comando passou, 1 em erro de uso ou configuração, 2 em falha numérica ou de verificação.
    """
    try:
        args = build_parser().parse_args(argv)
        pipeline = Pipeline(load_config(args))
        result = args.func(pipeline, args)
    except FracBubbleError as e:
        log.error(f"{e.__class__.__name__}: {e}")
        return exit_code_for(e)
    except Exception as e:
        log.error(f"Erro inesperado: {e.__class__.__name__}: {e}")
        return exit_code_for(e)

    if isinstance(result, str):
        print(result)
    elif hasattr(result, 'summary'):
        print(result.summary())
    else:
        print(f"config_hash: {pipeline.config_hash}")
    return 0


if __name__ == '__main__':
    sys.exit(main())
