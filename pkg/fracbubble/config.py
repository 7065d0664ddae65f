import os
import json
import hashlib
import logging
from dataclasses import dataclass, field, fields, asdict, replace
from typing import Any
from .errors import ConfigurationError


class Config:

    BASE_DIR = os.getcwd()
    LOG_DIR = os.environ.get('FRACBUBBLE_LOG_DIR', os.path.join(BASE_DIR, 'logs'))
    OUTPUT_DIR = os.path.join(BASE_DIR, 'out')
    CACHE_DIR = os.environ.get('FRACBUBBLE_CACHE_DIR', os.path.join(BASE_DIR, '.fracbubble_cache'))

    LOG_LEVEL = getattr(logging, os.environ.get('FRACBUBBLE_LOG_LEVEL', 'INFO').upper(), logging.INFO)
    LOG_TO_FILE = False


DEFAULT_EPS_LADDER = (1e-2, 10 ** -2.5, 1e-3, 10 ** -3.5)


@dataclass(frozen=True)
class RunConfig:
    """
    Configuração completa de uma execução da CLI.

    Todos os campos têm valor padrão; um arquivo JSON e as flags de linha de
    comando sobrescrevem apenas o que informam.
    """

    N: int = 1
    s: float = 0.4
    lengths: tuple[float, ...] = (1.0,)
    cutoff: int = 128
    grid_resolution: int = 8
    eta: float = 0.1
    eps_ladder: tuple[float, ...] = DEFAULT_EPS_LADDER
    k: int = 2
    signs: tuple[int, ...] = (1, -1)
    lambdas: tuple[float, ...] | None = None
    sigmas: tuple[tuple[float, ...], ...] | None = None
    eps: float | None = None
    seeds_per_axis: int = 5
    tol_grad: float = 1e-7
    slope_slack: float = 0.15
    solver_tol: float = 1e-10
    max_fixed_point_iter: int = 50
    max_newton_iter: int = 20
    amplitude: float | None = None
    guard_fraction: float = 0.02
    y_grid_points: int = 64
    interpolation_order: int = 3
    h_grad_fraction: float = 1e-4
    green_grid_points: int = 21
    pv_inner_cutoff: float = 1e-4
    pv_outer_cutoff: float = 1e4
    pv_nodes_per_decade: int = 250
    heatmap: bool = False
    output_dir: str = field(default_factory=lambda: Config.OUTPUT_DIR)
    cache_dir: str = field(default_factory=lambda: Config.CACHE_DIR)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """Verifica as invariantes da configuração. Levanta ConfigurationError."""

        if self.N < 1:
            raise ConfigurationError(f"Dimensão N deve ser >= 1, recebido {self.N}")
        if not 0 < self.s < 1:
            raise ConfigurationError(f"Ordem s deve estar em (0, 1), recebido {self.s}")
        if not self.N > 2 * self.s:
            raise ConfigurationError(f"N > 2s violated: N={self.N}, s={self.s}")
        if len(self.lengths) != self.N or any(L <= 0 for L in self.lengths):
            raise ConfigurationError(f"'lengths' deve ter {self.N} lados positivos, recebido {self.lengths}")
        if self.cutoff < 1:
            raise ConfigurationError("'cutoff' deve ser >= 1")
        if not 0 < self.eta < 1:
            raise ConfigurationError(f"'eta' deve estar em (0, 1), recebido {self.eta}")
        ladder = self.eps_ladder
        if any(e <= 0 for e in ladder) or any(a <= b for a, b in zip(ladder, ladder[1:])):
            raise ConfigurationError(f"A escada de epsilon deve ser positiva e estritamente decrescente: {ladder}")
        if self.k < 1 or len(self.signs) != self.k or any(a not in (1, -1) for a in self.signs):
            raise ConfigurationError(f"'signs' deve conter {self.k} valores em {{1, -1}}, recebido {self.signs}")
        if self.lambdas is not None and len(self.lambdas) != self.k:
            raise ConfigurationError(f"'lambdas' deve ter {self.k} valores")
        if self.sigmas is not None and (len(self.sigmas) != self.k or any(len(p) != self.N for p in self.sigmas)):
            raise ConfigurationError(f"'sigmas' deve ter {self.k} pontos de dimensão {self.N}")
        for name in ('tol_grad', 'slope_slack', 'solver_tol', 'guard_fraction', 'h_grad_fraction',
                     'pv_inner_cutoff', 'pv_outer_cutoff'):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"'{name}' deve ser positivo")

    def with_overrides(self, **overrides: Any) -> 'RunConfig':
        """Retorna uma cópia com os campos informados (None é ignorado)."""
        values = {key: _coerce(key, value) for key, value in overrides.items() if value is not None}
        unknown = set(values) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigurationError(f"Campos desconhecidos na configuração: {sorted(unknown)}")
        return replace(self, **values)

    @classmethod
    def from_json(cls, path: str | None, **overrides: Any) -> 'RunConfig':
        data: dict[str, Any] = {}
        if path is not None:
            try:
                with open(path, encoding='utf-8') as fh:
                    data = json.load(fh)
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigurationError(f"Não foi possível ler a configuração '{path}': {e}") from e
            if not isinstance(data, dict):
                raise ConfigurationError("O arquivo de configuração deve conter um objeto JSON")
        data.update({key: value for key, value in overrides.items() if value is not None})
        return cls().with_overrides(**data)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def hashed_subset(self, *names: str) -> str:
        """Hash SHA-256 de um subconjunto canônico dos campos (chave de cache)."""
        payload = {name: getattr(self, name) for name in names} if names else self.to_dict()
        for transient in ('output_dir', 'cache_dir'):
            payload.pop(transient, None)
        text = json.dumps(payload, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(text.encode('utf-8')).hexdigest()

    def config_hash(self) -> str:
        return self.hashed_subset()


def _coerce(key: str, value: Any) -> Any:
    """Converte listas vindas de JSON/CLI para as tuplas do dataclass."""
    if key in ('lengths', 'eps_ladder', 'lambdas'):
        return tuple(float(v) for v in value)
    if key == 'signs':
        return tuple(int(v) for v in value)
    if key == 'sigmas':
        return tuple(tuple(float(c) for c in point) for point in value)
    return value
