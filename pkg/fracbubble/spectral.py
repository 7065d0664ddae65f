"""
Base de autofunções de Dirichlet de -Delta em caixas, transformadas de coeficientes,
aplicação/solução do Laplaciano fracionário espectral e produto interno de H_0^s.

Coeficientes são arrays de formato (M,) * N indexados pelo multi-índice k - 1, na
ordem lexicográfica (C) do numpy.
"""
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from .cache import DiskCache
from .errors import ConfigurationError, UsageError
from .types import FloatArray
from .utils import as_points, check_order


PANEL_ORDER = 16


@dataclass(frozen=True)
class BoxDomain:
    lengths: tuple[float, ...]

    def __post_init__(self) -> None:
        lengths = tuple(float(L) for L in np.atleast_1d(self.lengths))
        if not lengths or any(L <= 0 for L in lengths):
            raise ConfigurationError(f"Os lados da caixa devem ser positivos, recebido {self.lengths}")
        object.__setattr__(self, 'lengths', lengths)

    @property
    def N(self) -> int:
        return len(self.lengths)

    @property
    def min_side(self) -> float:
        return min(self.lengths)

    @property
    def center(self) -> FloatArray:
        return np.asarray(self.lengths) / 2

    def contains(self, points: FloatArray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.all((points > 0) & (points < np.asarray(self.lengths)), axis=-1)

    def boundary_distance(self, points: FloatArray) -> FloatArray:
        points = np.atleast_2d(points)
        lengths = np.asarray(self.lengths)
        return np.min(np.minimum(points, lengths - points), axis=-1)


@dataclass(frozen=True)
class QuadratureGrid:
    """Grade tensorial de Gauss-Legendre composta: nós e pesos por eixo."""

    nodes: tuple[FloatArray, ...]
    weights: tuple[FloatArray, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(x) for x in self.nodes)

    @property
    def N(self) -> int:
        return len(self.nodes)

    def points(self) -> FloatArray:
        mesh = np.meshgrid(*self.nodes, indexing='ij')
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def weight_tensor(self) -> FloatArray:
        w = self.weights[0]
        for wj in self.weights[1:]:
            w = np.multiply.outer(w, wj)
        return w

    def integrate(self, values: FloatArray) -> float:
        values = np.asarray(values).reshape(self.shape)
        return float(np.sum(values * self.weight_tensor()))

    def evaluate(self, func: Callable[[FloatArray], FloatArray]) -> FloatArray:
        """Avalia func nos pontos (n, N) da grade e devolve o tensor no formato da grade."""
        return np.asarray(func(self.points())).reshape(self.shape)

    @classmethod
    def from_breaks(cls, breaks: Sequence[Sequence[float]], order: int = PANEL_ORDER) -> 'QuadratureGrid':
        nodes, weights = zip(*(gauss_legendre_panels(b, order) for b in breaks))
        return cls(tuple(nodes), tuple(weights))

    @classmethod
    def uniform(cls, domain: BoxDomain, panels: int | Sequence[int], order: int = PANEL_ORDER) -> 'QuadratureGrid':
        panels = [panels] * domain.N if np.isscalar(panels) else list(panels)
        return cls.from_breaks([np.linspace(0.0, L, n + 1) for L, n in zip(domain.lengths, panels)], order)

    @classmethod
    def graded(
        cls,
        domain: BoxDomain,
        centers: Sequence[FloatArray],
        scales: Sequence[float],
        coarse_panels: int = 16,
        order: int = PANEL_ORDER,
        ratio: float = 2.0,
    ) -> 'QuadratureGrid':
        """
        Grade refinada geometricamente em torno de cada centro.

        Args:
            domain: Caixa.
            centers: Centros das bolhas.
            scales: Escala de concentração de cada centro; o menor painel mede scales/8.
            coarse_panels: Painéis uniformes de fundo por eixo.
            order: Pontos de Gauss por painel.
            ratio: Razão geométrica entre painéis consecutivos.
        """
        breaks = []
        for axis, L in enumerate(domain.lengths):
            b = list(np.linspace(0.0, L, coarse_panels + 1))
            for center, scale in zip(centers, scales):
                c = float(np.atleast_1d(center)[axis])
                h = scale / 8
                while h < L:
                    b.extend((c - h, c + h))
                    h *= ratio
                b.append(c)
            b = np.unique(np.clip(b, 0.0, L))
            breaks.append(b[np.concatenate(([True], np.diff(b) > 1e-300))])
        return cls.from_breaks(breaks, order)


def gauss_legendre_panels(breaks: Sequence[float], order: int = PANEL_ORDER) -> tuple[FloatArray, FloatArray]:
    """Nós e pesos de Gauss-Legendre compostos sobre os painéis definidos por 'breaks'."""
    x, w = leggauss(order)
    breaks = np.asarray(breaks, dtype=float)
    a, b = breaks[:-1, None], breaks[1:, None]
    half = (b - a) / 2
    nodes = (a + b) / 2 + half * x
    weights = half * w
    return nodes.reshape(-1), weights.reshape(-1)


@dataclass(frozen=True)
class LocalGrid:
    """
    Folha de uma grade composta. Os nós ficam em coordenadas relativas à âncora, de modo
    que bolhas com escala abaixo do espaçamento de ponto flutuante perto da âncora
    continuam resolvidas.
    """

    anchor: FloatArray
    grid: QuadratureGrid

    @property
    def shape(self) -> tuple[int, ...]:
        return self.grid.shape

    def points(self) -> FloatArray:
        return self.anchor + self.grid.points()

    def offsets(self, xi: FloatArray) -> FloatArray:
        """x - xi calculado como (âncora - xi) + nó relativo; exato quando xi é a âncora."""
        return (self.anchor - np.asarray(xi, dtype=float)) + self.grid.points()

    def absolute(self) -> QuadratureGrid:
        nodes = tuple(a + x for a, x in zip(self.anchor, self.grid.nodes))
        return QuadratureGrid(nodes, self.grid.weights)


@dataclass(frozen=True)
class CompositeGrid:
    """União disjunta de folhas tensoriais que cobre a caixa."""

    leaves: tuple[LocalGrid, ...]

    @property
    def size(self) -> int:
        return sum(int(np.prod(leaf.shape)) for leaf in self.leaves)

    def evaluate(self, func: Callable[[LocalGrid], FloatArray]) -> list[FloatArray]:
        return [np.asarray(func(leaf)).reshape(leaf.shape) for leaf in self.leaves]

    def integrate(self, values: Sequence[FloatArray]) -> float:
        return float(sum(leaf.grid.integrate(v) for leaf, v in zip(self.leaves, values)))

    def norm(self, values: Sequence[FloatArray], q: float) -> float:
        return self.integrate([np.abs(v) ** q for v in values]) ** (1.0 / q)

    def max_abs(self, values: Sequence[FloatArray]) -> float:
        return float(max(np.max(np.abs(v)) for v in values))

    @classmethod
    def localized(
        cls,
        domain: BoxDomain,
        centers: Sequence[FloatArray],
        scales: Sequence[float],
        coarse_panels: int = 16,
        order: int = PANEL_ORDER,
        ratio: float = 2.0,
    ) -> 'CompositeGrid':
        """
        Divide a caixa em sub-caixas com no máximo um centro cada e refina geometricamente
        em torno do centro, até o painel mínimo scale/8.

        Args:
            domain: Caixa.
            centers: Centros das bolhas (distintos).
            scales: Escala de concentração de cada centro.
            coarse_panels: Painéis uniformes por eixo na caixa inteira.
            order: Pontos de Gauss por painel.
            ratio: Razão geométrica entre painéis consecutivos.
        """
        centers = [np.atleast_1d(np.asarray(c, dtype=float)) for c in centers]
        lengths = np.asarray(domain.lengths)
        leaves: list[LocalGrid] = []

        def leaf(lo: FloatArray, hi: FloatArray, members: list[int]) -> None:
            if len(members) > 1:
                pts = np.array([centers[i] for i in members])
                axis = int(np.argmax(np.ptp(pts, axis=0)))
                if np.ptp(pts[:, axis]) == 0:
                    raise UsageError("Centros coincidentes na grade localizada")
                ordered = sorted(members, key=lambda i: centers[i][axis])
                m = len(ordered) // 2
                cut = 0.5 * (centers[ordered[m - 1]][axis] + centers[ordered[m]][axis])
                hi_left, lo_right = hi.copy(), lo.copy()
                hi_left[axis] = cut
                lo_right[axis] = cut
                leaf(lo, hi_left, ordered[:m])
                leaf(lo_right, hi, ordered[m:])
                return

            anchor = centers[members[0]] if members else lo
            breaks = []
            for axis in range(domain.N):
                a, b = lo[axis] - anchor[axis], hi[axis] - anchor[axis]
                panels = max(1, int(np.ceil(coarse_panels * (b - a) / lengths[axis])))
                br = list(np.linspace(a, b, panels + 1))
                if members:
                    h = scales[members[0]] / 8
                    while h < b - a:
                        br.extend((-h, h))
                        h *= ratio
                    br.append(0.0)
                br = np.unique(np.clip(br, a, b))
                breaks.append(br)
            leaves.append(LocalGrid(anchor=np.array(anchor, dtype=float),
                                    grid=QuadratureGrid.from_breaks(breaks, order)))

        leaf(np.zeros(domain.N), lengths.astype(float), list(range(len(centers))))
        return cls(tuple(leaves))


@dataclass(frozen=True)
class SpectralBasis:
    domain: BoxDomain
    cutoff: int
    grid_resolution: int
    grid: QuadratureGrid

    @property
    def N(self) -> int:
        return self.domain.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cutoff,) * self.N

    @cached_property
    def frequencies(self) -> tuple[FloatArray, ...]:
        """k_j pi / L_j por eixo."""
        k = np.arange(1, self.cutoff + 1)
        return tuple(k * np.pi / L for L in self.domain.lengths)

    @cached_property
    def eigenvalues(self) -> FloatArray:
        lam = np.zeros(self.shape)
        for axis, omega in enumerate(self.frequencies):
            shape = [1] * self.N
            shape[axis] = self.cutoff
            lam = lam + (omega ** 2).reshape(shape)
        return lam

    @cached_property
    def modes(self) -> FloatArray:
        """Multi-índices (M^N, N) em ordem lexicográfica."""
        mesh = np.meshgrid(*[np.arange(1, self.cutoff + 1)] * self.N, indexing='ij')
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def sine_table(self, axis: int, x: FloatArray) -> FloatArray:
        """Tabela (M, len(x)) de sqrt(2/L) sin(k pi x / L)."""
        L = self.domain.lengths[axis]
        return np.sqrt(2.0 / L) * np.sin(np.outer(self.frequencies[axis], np.asarray(x, dtype=float)))

    @cached_property
    def _grid_tables(self) -> tuple[FloatArray, ...]:
        return tuple(self.sine_table(axis, x) for axis, x in enumerate(self.grid.nodes))

    def tables(self, grid: QuadratureGrid | None = None) -> tuple[FloatArray, ...]:
        if grid is None or grid is self.grid:
            return self._grid_tables
        return tuple(self.sine_table(axis, x) for axis, x in enumerate(grid.nodes))

    def metadata(self) -> dict:
        return {'N': self.N, 'lengths': list(self.domain.lengths), 'M': self.cutoff,
                'grid_resolution': self.grid_resolution, 'grid_shape': list(self.grid.shape)}


def build_basis(
    domain: BoxDomain,
    cutoff: int,
    grid_resolution: int = 8,
    cache: DiskCache | None = None,
) -> SpectralBasis:
    """
    Constrói a base de senos analítica da caixa.

    Com cache, a grade e as tabelas de senos ficam em disco no espaço 'basis', com chave
    (N, lengths, M, grid_resolution). Arrays gravados: nodes_j, weights_j e table_j por
    eixo j (tabela (M, nós) de sqrt(2/L) sin(k pi x / L)) e eigenvalues (M,) * N.

    Args:
        domain: Caixa (0, L_1) x ... x (0, L_N).
        cutoff: Número máximo M de modos por eixo.
        grid_resolution: Pontos de quadratura por meia onda do modo mais alto (>= 4).
        cache: Cache em disco opcional.
    """
    if cutoff < 1:
        raise ConfigurationError(f"O corte de modos deve ser >= 1, recebido {cutoff}")
    if grid_resolution < 4:
        raise ConfigurationError(
            f"Grade sub-resolvida: {grid_resolution} pontos por meia onda (mínimo 4)")
    panels = int(np.ceil(cutoff * grid_resolution / PANEL_ORDER))
    grid = QuadratureGrid.uniform(domain, panels)
    basis = SpectralBasis(domain=domain, cutoff=cutoff, grid_resolution=grid_resolution, grid=grid)
    if cache is None:
        return basis

    def compute() -> dict[str, FloatArray]:
        arrays = {'eigenvalues': basis.eigenvalues}
        for axis, table in enumerate(basis.tables()):
            arrays[f'nodes_{axis}'] = grid.nodes[axis]
            arrays[f'weights_{axis}'] = grid.weights[axis]
            arrays[f'table_{axis}'] = table
        return arrays

    params = {'N': domain.N, 'lengths': list(domain.lengths), 'M': cutoff, 'grid_resolution': grid_resolution}
    arrays = cache.load_or_compute('basis', params, compute)
    cached_grid = QuadratureGrid(tuple(arrays[f'nodes_{a}'] for a in range(domain.N)),
                                 tuple(arrays[f'weights_{a}'] for a in range(domain.N)))
    basis = SpectralBasis(domain=domain, cutoff=cutoff, grid_resolution=grid_resolution, grid=cached_grid)
    basis.__dict__['_grid_tables'] = tuple(arrays[f'table_{a}'] for a in range(domain.N))
    basis.__dict__['eigenvalues'] = arrays['eigenvalues']
    return basis


def _contract(values: FloatArray, tables: Sequence[FloatArray], table_axis: int) -> FloatArray:
    out = values
    for axis, table in enumerate(tables):
        out = np.moveaxis(np.tensordot(out, table, axes=([axis], [table_axis])), -1, axis)
    return out


def to_coeffs(basis: SpectralBasis, grid_function: FloatArray, grid: QuadratureGrid | None = None) -> FloatArray:
    """Coeficientes a_k = integral de u phi_k pela quadratura da grade."""
    grid = grid if grid is not None else basis.grid
    values = np.asarray(grid_function, dtype=float)
    if values.shape != grid.shape:
        if values.size != int(np.prod(grid.shape)):
            raise UsageError(f"Função na grade com formato {values.shape}, esperado {grid.shape}")
        values = values.reshape(grid.shape)
    weighted = [t * w for t, w in zip(basis.tables(grid), grid.weights)]
    return _contract(values, weighted, table_axis=1)


def from_coeffs(basis: SpectralBasis, coeffs: FloatArray, grid: QuadratureGrid | None = None) -> FloatArray:
    """Reconstrói sum_k a_k phi_k nos nós da grade."""
    coeffs = _check_coeffs(basis, coeffs)
    return _contract(coeffs, basis.tables(grid), table_axis=0)


def evaluate(basis: SpectralBasis, coeffs: FloatArray, points: FloatArray) -> FloatArray:
    """Avalia sum_k a_k phi_k em pontos esparsos (n, N)."""
    coeffs = _check_coeffs(basis, coeffs)
    points = as_points(points, basis.N)
    out = np.einsum('k...,kn->n...', coeffs, basis.sine_table(0, points[:, 0]))
    for axis in range(1, basis.N):
        out = np.einsum('nk...,kn->n...', out, basis.sine_table(axis, points[:, axis]))
    return out


def eigenfunction(basis: SpectralBasis, mode: Sequence[int]) -> FloatArray:
    """Vetor canônico e_k do modo k (multi-índice começando em 1)."""
    e = np.zeros(basis.shape)
    e[tuple(int(k) - 1 for k in mode)] = 1.0
    return e


def _check_coeffs(basis: SpectralBasis, coeffs: FloatArray) -> FloatArray:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != basis.shape:
        if coeffs.size != int(np.prod(basis.shape)):
            raise UsageError(f"Vetor de coeficientes com formato {coeffs.shape}, esperado {basis.shape}")
        coeffs = coeffs.reshape(basis.shape)
    return coeffs


def fractional_apply(basis: SpectralBasis, v: FloatArray, s: float) -> FloatArray:
    """(-Delta)^s nos coeficientes: multiplicação por lambda_k^s."""
    check_order(s, allow_one=True)
    return _check_coeffs(basis, v) * basis.eigenvalues ** s


def fractional_solve(basis: SpectralBasis, g: FloatArray, s: float) -> FloatArray:
    """Resolve (-Delta)^s Z = g com Z = 0 na fronteira: divisão por lambda_k^s."""
    check_order(s, allow_one=True)
    return _check_coeffs(basis, g) / basis.eigenvalues ** s


def hs_inner(basis: SpectralBasis, u: FloatArray, v: FloatArray, s: float) -> float:
    """Produto interno de H_0^s: sum_k a_k b_k lambda_k^s."""
    check_order(s, allow_one=True)
    return float(np.sum(_check_coeffs(basis, u) * _check_coeffs(basis, v) * basis.eigenvalues ** s))


def hs_norm(basis: SpectralBasis, u: FloatArray, s: float) -> float:
    return float(np.sqrt(max(hs_inner(basis, u, u, s), 0.0)))


def dual_norm(basis: SpectralBasis, r: FloatArray, s: float) -> float:
    """Norma H^{-s}: coeficientes ponderados por lambda_k^{-s}."""
    r = _check_coeffs(basis, r)
    return float(np.sqrt(np.sum(r * r / basis.eigenvalues ** s)))


def lebesgue_norm(grid: QuadratureGrid, values: FloatArray, q: float) -> float:
    """Norma L^q pela quadratura da grade."""
    return grid.integrate(np.abs(values) ** q) ** (1.0 / q)


def exterior_sine_moments(
    right: Callable[[float], float],
    left: Callable[[float], float],
    L: float,
    cutoff: int,
    epsabs: float = 1e-13,
) -> FloatArray:
    """
    Momentos de uma função da reta fora de (0, L) contra sqrt(2/L) sin(k pi x / L).

    A função é dada pelos ramos right(t) = h(L + t) e left(t) = h(-t), t >= 0, e cada
    integral de Fourier em [0, inf) é feita pela rotina QAWF do QUADPACK.

    Returns:
        Array (cutoff,) com int_{R \\ (0,L)} h(x) sqrt(2/L) sin(k pi x / L) dx.
    """
    out = np.empty(cutoff)
    options = {"weight": "sin", "limlst": 200, "epsabs": epsabs}
    # QAWF avisa quando epsabs não é atingida
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for k in range(1, cutoff + 1):
            omega = k * np.pi / L
            r, _ = integrate.quad(right, 0.0, np.inf, wvar=omega, **options)
            l, _ = integrate.quad(left, 0.0, np.inf, wvar=omega, **options)
            out[k - 1] = (-1) ** k * r - l
    return np.sqrt(2.0 / L) * out


def linear_lift_moments(f0: float, fL: float, L: float, cutoff: int) -> FloatArray:
    """Coeficientes de seno do interpolante linear com valores f0 em 0 e fL em L."""
    k = np.arange(1, cutoff + 1)
    omega = k * np.pi / L
    return np.sqrt(2.0 / L) * (f0 - (-1.0) ** k * fL) / omega


def linear_lift(f0: float, fL: float, L: float, x: FloatArray) -> FloatArray:
    return f0 * (1 - x / L) + fL * x / L
