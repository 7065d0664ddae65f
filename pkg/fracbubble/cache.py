import os
import json
import hashlib
import tempfile
from typing import Callable
import numpy as np
from .config import Config
from .log import log


class DiskCache:
    """
    Cache em disco de arrays numpy, com chave dada pelo hash do conteúdo dos parâmetros.

    Cada entrada é um .npz com os arrays e os parâmetros serializados em JSON. A escrita é
    atômica: arquivo temporário no mesmo diretório seguido de os.replace.
    """

    def __init__(self, root: str | None = None) -> None:
        self.root = root if root is not None else Config.CACHE_DIR
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(namespace: str, params: dict) -> str:
        text = json.dumps({'namespace': namespace, **params}, sort_keys=True, separators=(',', ':'), default=_jsonable)
        return hashlib.sha256(text.encode('utf-8')).hexdigest()

    def path(self, namespace: str, params: dict) -> str:
        return os.path.join(self.root, namespace, f"{self.key(namespace, params)}.npz")

    def load(self, namespace: str, params: dict) -> dict[str, np.ndarray] | None:
        path = self.path(namespace, params)
        if not os.path.exists(path):
            return None
        try:
            with np.load(path, allow_pickle=False) as data:
                stored = json.loads(str(data['__params__']))
                if stored != json.loads(json.dumps(params, sort_keys=True, default=_jsonable)):
                    log.warning(f"Cache '{namespace}' inválido (parâmetros divergentes); recalculando")
                    return None
                return {name: data[name] for name in data.files if name != '__params__'}
        except (OSError, ValueError, KeyError) as e:
            log.warning(f"Cache '{namespace}' ilegível em {path}: {e}")
            return None

    def save(self, namespace: str, params: dict, arrays: dict[str, np.ndarray]) -> str:
        path = self.path(namespace, params)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), suffix='.tmp')
        try:
            with os.fdopen(fd, 'wb') as fh:
                np.savez(fh, __params__=np.array(json.dumps(params, sort_keys=True, default=_jsonable)), **arrays)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.remove(tmp)
            raise
        return path

    def load_or_compute(
        self,
        namespace: str,
        params: dict,
        compute: Callable[[], dict[str, np.ndarray]],
    ) -> dict[str, np.ndarray]:
        cached = self.load(namespace, params)
        if cached is not None:
            self.hits += 1
            log.debug(f"Cache '{namespace}' encontrado")
            return cached
        self.misses += 1
        arrays = compute()
        self.save(namespace, params, arrays)
        return arrays


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    raise TypeError(f"Tipo não serializável na chave de cache: {type(value).__name__}")
