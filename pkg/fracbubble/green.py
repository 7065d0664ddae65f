"""
Função de Green do Laplaciano fracionário espectral de Dirichlet em caixas, núcleo livre
de Riesz, parte regular H, função de Robin e a função reduzida varphi.

A parte regular é montada modo a modo: os coeficientes de seno do núcleo livre restrito
à caixa diferem de lambda_k^{-s} phi_k(y) apenas pelo momento exterior do núcleo. Em N = 1
esse momento é uma integral de Fourier exata, e o interpolante linear dos valores de
fronteira absorve a cauda 1/k, de modo que a série restante decai como k^{-3}.
"""
from dataclasses import dataclass
import numpy as np
from scipy.interpolate import RegularGridInterpolator, make_interp_spline
from .bubble import FracDims
from .cache import DiskCache
from .errors import NumericError, SingularityError, UsageError
from .log import log
from .spectral import (SpectralBasis, QuadratureGrid, evaluate, exterior_sine_moments,
                       linear_lift, linear_lift_moments, to_coeffs)
from .types import FloatArray, Point
from .utils import as_point, check_inside_box, check_order


@dataclass(frozen=True)
class GreenValue:
    value: float
    near_boundary: bool


def free_kernel(dims: FracDims, x: Point, y: Point) -> float:
    """c_{N,s} / |x - y|^{N-2s}."""
    d = np.atleast_1d(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    r = float(np.linalg.norm(d))
    if r == 0.0:
        raise SingularityError("Núcleo livre avaliado com x = y")
    return dims.c_Ns * r ** (-(dims.N - 2 * dims.s))


def free_kernel_many(dims: FracDims, points: FloatArray, y: FloatArray) -> FloatArray:
    r = np.linalg.norm(np.atleast_2d(points) - y, axis=-1)
    with np.errstate(divide='ignore'):
        return dims.c_Ns * r ** (-(dims.N - 2 * dims.s))


def green_series(basis: SpectralBasis, s: float, x: Point, y: Point) -> float:
    """Série truncada sum_k phi_k(x) phi_k(y) / lambda_k^s, válida para s em (0, 1]."""
    check_order(s, allow_one=True)
    x = as_point(x, basis.N, 'x')
    y = as_point(y, basis.N, 'y')
    coeffs = np.ones(basis.shape)
    for axis in range(basis.N):
        shape = [1] * basis.N
        shape[axis] = basis.cutoff
        coeffs = coeffs * basis.sine_table(axis, y[axis:axis + 1]).reshape(shape)
    coeffs = coeffs / basis.eigenvalues ** s
    return float(evaluate(basis, coeffs, x[np.newaxis, :])[0])


class GreenEvaluator:

    def __init__(
        self,
        basis: SpectralBasis,
        dims: FracDims,
        guard_fraction: float = 0.02,
        y_grid_points: int = 64,
        interpolation_order: int = 3,
        h_grad_fraction: float = 1e-4,
        cache: DiskCache | None = None,
    ) -> None:
        """
        Avaliador de G, H e Robin sobre uma base espectral.

        Args:
            basis: Base de senos da caixa.
            dims: Constantes de (N, s).
            guard_fraction: Distância de guarda à fronteira, em fração do menor lado.
            y_grid_points: Pontos por eixo da tabela em y dos coeficientes.
            interpolation_order: Ordem do spline de interpolação em y (N = 1; em N >= 2 a
                interpolação é cúbica).
            h_grad_fraction: Passo das diferenças centrais, em fração do menor lado.
            cache: Cache em disco das tabelas de coeficientes.
        """
        if basis.N != dims.N:
            raise UsageError(f"Base de dimensão {basis.N} incompatível com N = {dims.N}")

        self.basis = basis
        self.dims = dims
        self.guard = guard_fraction * basis.domain.min_side
        self.h_grad = h_grad_fraction * basis.domain.min_side
        self._beta = dims.N - 2 * dims.s
        self._inv_eig = basis.eigenvalues ** (-dims.s)
        self._table = self._build_table(y_grid_points, interpolation_order, cache)

    # ------------------------------------------------------------------ tabelas

    def _build_table(self, points: int, order: int, cache: DiskCache | None):
        """
        Tabela dos coeficientes de correção numa grade de y afastada da fronteira pela guarda.

        Em N = 1 interpola por spline de ordem `order`; em N >= 2, por interpolação cúbica
        tensorial sobre points^N nós.
        """
        lengths = self.basis.domain.lengths
        axes = [np.linspace(self.guard, L - self.guard, points) for L in lengths]
        params = {'N': self.basis.N, 'lengths': list(lengths), 'M': self.basis.cutoff, 's': self.dims.s,
                  'y_grid': points, 'guard': self.guard}
        if self.basis.N >= 2 and points < 4:
            raise UsageError(f"Interpolação cúbica em y exige ao menos 4 pontos por eixo, recebido {points}")

        @log.step(f"Tabelando coeficientes do núcleo livre ({self.basis.cutoff} modos x {points}^{self.basis.N} pontos)")
        def compute() -> dict[str, np.ndarray]:
            if self.basis.N == 1:
                return {'table': np.stack([self._mode_correction_1d(y) for y in axes[0]])}
            mesh = np.meshgrid(*axes, indexing='ij')
            ys = np.stack([m.reshape(-1) for m in mesh], axis=-1)
            table = np.stack([self._mode_correction_nd(y) for y in ys])
            return {'table': table.reshape((points,) * self.basis.N + self.basis.shape)}

        table = cache.load_or_compute('free_kernel', params, compute)['table'] if cache else compute()['table']
        if self.basis.N == 1:
            return make_interp_spline(axes[0], table, k=order, axis=0)
        return RegularGridInterpolator(tuple(axes), table, method='cubic')

    def _mode_correction_1d(self, y: float) -> FloatArray:
        """Coeficientes D_k(y) - l_k(y): núcleo livre menos G, sem a parte linear de fronteira."""
        L = self.basis.domain.lengths[0]
        c, beta = self.dims.c_Ns, self._beta
        exterior = exterior_sine_moments(
            right=lambda t: c * (t + L - y) ** (-beta),
            left=lambda t: c * (t + y) ** (-beta),
            L=L, cutoff=self.basis.cutoff,
        )
        lift = linear_lift_moments(c * y ** (-beta), c * (L - y) ** (-beta), L, self.basis.cutoff)
        return -exterior - lift

    def _mode_correction_nd(self, y: FloatArray) -> FloatArray:
        """Coeficientes do núcleo livre restrito à caixa menos lambda_k^{-s} phi_k(y), por quadratura graduada."""
        grid = QuadratureGrid.graded(self.basis.domain, [y], [self.basis.domain.min_side * 1e-4],
                                     coarse_panels=max(8, self.basis.cutoff // 2))
        values = free_kernel_many(self.dims, grid.points(), y).reshape(grid.shape)
        coeffs = to_coeffs(self.basis, values, grid)
        phi_y = np.ones(self.basis.shape)
        for axis in range(self.basis.N):
            shape = [1] * self.basis.N
            shape[axis] = self.basis.cutoff
            phi_y = phi_y * self.basis.sine_table(axis, y[axis:axis + 1]).reshape(shape)
        return coeffs - self._inv_eig * phi_y

    def _in_table(self, y: FloatArray) -> bool:
        return float(self.basis.domain.boundary_distance(y)[0]) >= self.guard

    def _coeffs_nd(self, y: FloatArray) -> FloatArray:
        if self._in_table(y):
            return self._table(y[np.newaxis, :])[0]
        return self._mode_correction_nd(y)

    def _one_sided(self, x: FloatArray, y: FloatArray) -> float:
        """h(x; y) = lift_y(x) + sum_k e_k(y) phi_k(x), sem simetrização."""
        if self.basis.N == 1:
            L = self.basis.domain.lengths[0]
            yy = float(y[0])
            coeffs = self._table(yy) if self._in_table(y) else self._mode_correction_1d(yy)
            c, beta = self.dims.c_Ns, self._beta
            lift = linear_lift(c * yy ** (-beta), c * (L - yy) ** (-beta), L, float(x[0]))
            return float(lift + evaluate(self.basis, coeffs, x[np.newaxis, :])[0])
        return float(evaluate(self.basis, self._coeffs_nd(y), x[np.newaxis, :])[0])

    def _points(self, x: Point, y: Point) -> tuple[FloatArray, FloatArray]:
        lengths = self.basis.domain.lengths
        x = check_inside_box(as_point(x, self.basis.N, 'x'), lengths, 'ponto x')
        y = check_inside_box(as_point(y, self.basis.N, 'y'), lengths, 'ponto y')
        return x, y

    # ------------------------------------------------------------------ avaliação

    def regular_part_checked(self, x: Point, y: Point) -> GreenValue:
        x, y = self._points(x, y)
        near = bool(min(self.basis.domain.boundary_distance(x)[0],
                        self.basis.domain.boundary_distance(y)[0]) < self.guard)
        if near:
            log.flag(f"H avaliada na faixa de guarda ({self.guard:.3g}) da fronteira: x={x.tolist()}, y={y.tolist()}")
        value = 0.5 * (self._one_sided(x, y) + self._one_sided(y, x))
        return GreenValue(value=value, near_boundary=near)

    def regular_part(self, x: Point, y: Point) -> float:
        return self.regular_part_checked(x, y).value

    def robin(self, x: Point) -> float:
        return self.regular_part(x, x)

    def green(self, x: Point, y: Point) -> float:
        """G(x, y) = c_{N,s}|x - y|^{-(N-2s)} - H(x, y)."""
        x, y = self._points(x, y)
        if np.array_equal(x, y):
            raise SingularityError(f"G avaliada na diagonal x = y = {x.tolist()}")
        return free_kernel(self.dims, x, y) - self.regular_part(x, y)

    def regular_part_many(self, points: FloatArray, y: Point) -> FloatArray:
        """H(x_i, y) para muitos x com y fixo (usado nas suítes de expansão)."""
        y = as_point(y, self.basis.N, 'y')
        points = np.atleast_2d(points)
        if self.basis.N == 1:
            L = self.basis.domain.lengths[0]
            c, beta = self.dims.c_Ns, self._beta
            xs = points[:, 0]
            coeffs_y = self._table(float(y[0])) if self._in_table(y) else self._mode_correction_1d(float(y[0]))
            forward = linear_lift(c * y[0] ** (-beta), c * (L - y[0]) ** (-beta), L, xs) \
                + evaluate(self.basis, coeffs_y, points)
            inside = (xs >= self.guard) & (xs <= L - self.guard)
            table = np.empty((len(xs), self.basis.cutoff))
            if np.any(inside):
                table[inside] = self._table(xs[inside])
            for i in np.flatnonzero(~inside):
                table[i] = self._mode_correction_1d(float(xs[i]))
            backward = linear_lift(c * xs ** (-beta), c * (L - xs) ** (-beta), L, float(y[0])) \
                + table @ self.basis.sine_table(0, y)[:, 0]
            return 0.5 * (forward + backward)
        return evaluate(self.basis, self._coeffs_nd(y), points)

    def green_many(self, points: FloatArray, y: Point) -> FloatArray:
        y = as_point(y, self.basis.N, 'y')
        return free_kernel_many(self.dims, points, y) - self.regular_part_many(points, y)

    def grad_sigma(self, points: FloatArray, sigma: Point, j: int, which: str = 'H') -> FloatArray:
        """Derivada em sigma^j (j = 1..N) de H(x, sigma) ou G(x, sigma) por diferenças centrais."""
        sigma = as_point(sigma, self.basis.N, 'sigma')
        e = np.zeros(self.basis.N)
        e[j - 1] = self.h_grad
        f = self.regular_part_many if which == 'H' else self.green_many
        return (f(points, sigma + e) - f(points, sigma - e)) / (2 * self.h_grad)

    def one_sided_many(self, points: FloatArray, y: Point) -> FloatArray:
        """
        Parte regular não simetrizada h(x; y) com os coeficientes calculados diretamente em y,
        sem a tabela interpolada. É a mesma série truncada usada nas projeções de bolhas.
        """
        y = as_point(y, self.basis.N, 'y')
        points = np.atleast_2d(points)
        if self.basis.N == 1:
            L = self.basis.domain.lengths[0]
            c, beta = self.dims.c_Ns, self._beta
            lift = linear_lift(c * y[0] ** (-beta), c * (L - y[0]) ** (-beta), L, points[:, 0])
            return lift + evaluate(self.basis, self._mode_correction_1d(float(y[0])), points)
        return evaluate(self.basis, self._mode_correction_nd(y), points)

    def one_sided_grad(self, points: FloatArray, y: Point, j: int) -> FloatArray:
        """Derivada de h(x; y) em y^j (j = 1..N) por diferenças centrais."""
        y = as_point(y, self.basis.N, 'y')
        e = np.zeros(self.basis.N)
        e[j - 1] = self.h_grad
        return (self.one_sided_many(points, y + e) - self.one_sided_many(points, y - e)) / (2 * self.h_grad)

    # ------------------------------------------------------------------ varphi

    def varphi(self, sigma1: Point, sigma2: Point) -> float:
        """varphi(s1, s2) = H^{1/2}(s1, s1) H^{1/2}(s2, s2) + G(s1, s2)."""
        s1, s2 = self._points(sigma1, sigma2)
        if np.array_equal(s1, s2):
            raise SingularityError("varphi avaliada com sigma1 = sigma2")
        r1, r2 = self.robin(s1), self.robin(s2)
        if r1 <= 0 or r2 <= 0:
            raise NumericError(f"Função de Robin não positiva ({r1:.3g}, {r2:.3g}); série sub-resolvida",
                               diagnostics={'robin': [r1, r2]})
        return float(np.sqrt(r1 * r2) + self.green(s1, s2))

    def grad_varphi(self, sigma1: Point, sigma2: Point, order: int = 2) -> FloatArray:
        """Gradiente em R^{2N} por diferenças centrais de ordem 2 ou 4."""
        z = np.concatenate([as_point(sigma1, self.basis.N), as_point(sigma2, self.basis.N)])
        return finite_gradient(lambda v: self.varphi(v[:self.basis.N], v[self.basis.N:]), z, self.h_grad, order)

    def richardson_diagonal(self, x: Point, delta: float | None = None) -> tuple[float, float]:
        """
        Extrapola H(x, x + delta e_1) para delta -> 0 e compara com Robin(x).

        Returns:
            (valor extrapolado, robin(x)).
        """
        x = as_point(x, self.basis.N, 'x')
        delta = delta if delta is not None else 0.01 * self.basis.domain.min_side
        e = np.zeros(self.basis.N)
        e[0] = 1.0
        values = [self.regular_part(x, x + e * delta / 2 ** m) for m in range(3)]
        # Dois passos de Richardson para erro O(delta) + O(delta^2)
        r1 = [2 * values[m + 1] - values[m] for m in range(2)]
        extrapolated = (4 * r1[1] - r1[0]) / 3
        return float(extrapolated), self.robin(x)


def finite_gradient(func, z: FloatArray, h: float, order: int = 2) -> FloatArray:
    """Gradiente por diferenças centrais (ordem 2) ou estêncil de cinco pontos (ordem 4)."""
    z = np.asarray(z, dtype=float)
    grad = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h
        if order == 4:
            grad[i] = (-func(z + 2 * e) + 8 * func(z + e) - 8 * func(z - e) + func(z - 2 * e)) / (12 * h)
        else:
            grad[i] = (func(z + e) - func(z - e)) / (2 * h)
    return grad
