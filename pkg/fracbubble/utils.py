from typing import Any, TypeGuard, Sequence
import numpy as np
from .errors import UsageError, ConfigurationError
from .types import FloatArray


def is_point(value: Any, dim: int) -> TypeGuard[FloatArray]:
    """Verifica se o valor é um vetor real finito de dimensão 'dim'."""
    try:
        arr = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        return False
    return arr.size == dim and bool(np.all(np.isfinite(arr)))


def is_sign_vector(value: Any) -> TypeGuard[tuple[int, ...]]:
    return isinstance(value, (tuple, list)) and all(a in (1, -1) for a in value)


def as_point(value: Any, dim: int, name: str = 'ponto') -> FloatArray:
    """Converte para vetor de dimensão 'dim' ou levanta UsageError."""
    if not is_point(value, dim):
        raise UsageError(f"O parâmetro '{name}' deve ser um vetor real de dimensão {dim}, não {value!r}")
    return np.asarray(value, dtype=float).reshape(dim)


def as_points(values: Any, dim: int, name: str = 'pontos') -> FloatArray:
    """Converte para uma matriz (n, dim) de pontos."""
    arr = np.asarray(values, dtype=float)
    if dim == 1 and arr.ndim <= 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim == 1 and arr.size == dim:
        arr = arr.reshape(1, dim)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise UsageError(f"O parâmetro '{name}' deve ter formato (n, {dim}), não {arr.shape}")
    return arr


def check_inside_box(point: FloatArray, lengths: Sequence[float], name: str = 'ponto') -> FloatArray:
    """Garante que o ponto está no interior aberto da caixa (0, L_1) x ... x (0, L_N)."""
    lengths = np.asarray(lengths, dtype=float)
    if np.any(point <= 0) or np.any(point >= lengths):
        raise UsageError(f"O {name} {point.tolist()} está fora do domínio aberto de lados {lengths.tolist()}")
    return point


def check_order(s: float, allow_one: bool = False) -> float:
    upper_ok = s <= 1 if allow_one else s < 1
    if not (s > 0 and upper_ok):
        interval = '(0, 1]' if allow_one else '(0, 1)'
        raise ConfigurationError(f"A ordem s deve estar em {interval}, recebido {s}")
    return s
