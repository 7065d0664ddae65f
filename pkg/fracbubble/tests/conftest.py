import pytest
from fracbubble.bubble import compute_constants
from fracbubble.cache import DiskCache
from fracbubble.config import RunConfig
from fracbubble.green import GreenEvaluator
from fracbubble.spectral import BoxDomain, build_basis


@pytest.fixture(scope="session")
def dims():
    """Constantes de (N, s) = (1, 0.4), o caso padrão da CLI."""
    return compute_constants(1, 0.4)


@pytest.fixture(scope="session")
def dims_mild():
    """
    (N, s) = (1, 0.25): p = 3 e alpha0 = 2, de modo que mu = eps^2 continua resolvido
    por poucas dezenas de modos mesmo com eps na casa de 0.1.
    """
    return compute_constants(1, 0.25)


@pytest.fixture(scope="session")
def interval():
    return BoxDomain((1.0,))


@pytest.fixture(scope="session")
def basis(interval):
    return build_basis(interval, 32)


@pytest.fixture(scope="session")
def basis_fine(interval):
    return build_basis(interval, 64)


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return str(tmp_path_factory.mktemp("cache"))


@pytest.fixture(scope="session")
def green(basis, dims, cache_dir):
    """Avaliador de Green em (0, 1) com tabela pequena em y, guardada num cache temporário."""
    return GreenEvaluator(basis, dims, y_grid_points=24, cache=DiskCache(cache_dir))


@pytest.fixture(scope="session")
def green_mild(basis_fine, dims_mild, cache_dir):
    return GreenEvaluator(basis_fine, dims_mild, y_grid_points=24, cache=DiskCache(cache_dir))


@pytest.fixture
def run_config(tmp_path):
    """Configuração barata com saída e cache em diretórios temporários."""
    return RunConfig(
        cutoff=32,
        y_grid_points=24,
        seeds_per_axis=3,
        green_grid_points=5,
        output_dir=str(tmp_path / "out"),
        cache_dir=str(tmp_path / "cache"),
    )
