"""
Projeções P_eps de bolhas e de suas derivadas, realizadas no domínio fixo.

No quadro de Omega_eps = Omega / mu, com mu = eps^{alpha0}, a projeção de w_{lambda, sigma/mu}
é a dilatação da projeção em Omega da bolha estreita w_{mu lambda, sigma}:

    P w_{lambda, sigma/mu}(x / mu) = mu^{(N-2s)/2} P w_{mu lambda, sigma}(x),

e o mesmo vale para psi^j com o expoente (N-2s+2)/2. Toda a aritmética é feita em Omega.

A avaliação pontual usa a identidade do espaço todo: como (-Delta)^s w = g em R^N, a
projeção difere do perfil apenas por uma correção suave,

    P w = w - l_w - sum_k e_k phi_k,

com e_k obtido dos momentos exteriores de w e de g (N = 1) ou por quadratura (N >= 2).
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence
import numpy as np
from .bubble import BubbleParams, FracDims, bubble_component, bubble_value
from .errors import AdmissibilityError, ConfigurationError, UsageError
from .log import log
from .spectral import (PANEL_ORDER, CompositeGrid, LocalGrid, SpectralBasis, evaluate,
                       exterior_sine_moments, fractional_apply, linear_lift, linear_lift_moments,
                       to_coeffs)
from .types import FloatArray, Point
from .utils import as_point, as_points, check_inside_box


COMPONENT_NAMES = {-1: 'w', 0: 'psi0'}


def component_name(j: int) -> str:
    return COMPONENT_NAMES.get(j, f'psi{j}')


def bubble_grid(basis: SpectralBasis, centers: Sequence[FloatArray], scales: Sequence[float]) -> CompositeGrid:
    """Grade composta com o mesmo fundo uniforme da base e refinamento em torno das bolhas."""
    coarse = len(basis.grid.nodes[0]) // PANEL_ORDER
    return CompositeGrid.localized(basis.domain, centers, scales, coarse_panels=coarse)


def profile_source(dims: FracDims, params: BubbleParams, offsets: FloatArray, j: int) -> FloatArray:
    """Lado direito g do componente: w^p (j = -1) ou p w^{p-1} psi^j (j = 0..N)."""
    w = bubble_value(dims, params, offsets)
    if j < 0:
        return w ** dims.p
    return dims.p * w ** (dims.p - 1) * bubble_component(dims, params, offsets, j)


@dataclass(frozen=True, eq=False)
class ProjectedBubble:
    """
    Projeção de um componente da família de bolhas (w, psi0 ou psi^j) em Omega.

    Attributes:
        basis: Base de senos da caixa fixa.
        dims: Constantes de (N, s).
        eps: Parâmetro eps > 0.
        lam: Escala lambda no quadro de Omega_eps.
        sigma: Centro em Omega.
        component: -1 para w, 0 para psi0, j = 1..N para psi^j.
        coeffs: Coeficientes lambda_k^{-s} <g, phi_k> da projeção.
        correction: Coeficientes e_k da correção suave.
        boundary_values: Valores do perfil nas extremidades (N = 1), ou None.
    """

    basis: SpectralBasis
    dims: FracDims
    eps: float
    lam: float
    sigma: FloatArray
    component: int
    coeffs: FloatArray
    correction: FloatArray
    boundary_values: tuple[float, float] | None = None
    grid: CompositeGrid | None = field(default=None, repr=False, compare=False)

    @property
    def mu(self) -> float:
        return self.eps ** self.dims.alpha0

    @property
    def params(self) -> BubbleParams:
        """Parâmetros da bolha estreita em Omega: escala mu lambda, centro sigma."""
        return BubbleParams(lam=self.mu * self.lam, xi=np.zeros(self.dims.N))

    @property
    def frame_exponent(self) -> float:
        return self.dims.beta if self.component < 0 else self.dims.beta + 1

    @property
    def name(self) -> str:
        return component_name(self.component)

    def profile_at_offsets(self, offsets: FloatArray) -> FloatArray:
        return bubble_component(self.dims, self.params, offsets, self.component)

    def source_at_offsets(self, offsets: FloatArray) -> FloatArray:
        return profile_source(self.dims, self.params, offsets, self.component)

    def correction_values(self, points: FloatArray) -> FloatArray:
        """Perfil menos projeção (suave em Omega): l(x) + sum_k e_k phi_k(x)."""
        points = as_points(points, self.dims.N)
        out = evaluate(self.basis, self.correction, points)
        if self.boundary_values is not None:
            f0, fL = self.boundary_values
            out = out + linear_lift(f0, fL, self.basis.domain.lengths[0], points[:, 0])
        return out

    def values_at_offsets(self, offsets: FloatArray) -> FloatArray:
        """Projeção em sigma + offsets, com o perfil avaliado nos deslocamentos exatos."""
        offsets = as_points(offsets, self.dims.N)
        return self.profile_at_offsets(offsets) - self.correction_values(self.sigma + offsets)

    def values(self, points: Point) -> FloatArray:
        points = as_points(points, self.dims.N)
        return self.values_at_offsets(points - self.sigma)

    def on_leaf(self, leaf: LocalGrid) -> FloatArray:
        offsets = leaf.offsets(self.sigma)
        return (self.profile_at_offsets(offsets) - self.correction_values(leaf.points())).reshape(leaf.shape)

    def profile_on_leaf(self, leaf: LocalGrid) -> FloatArray:
        return self.profile_at_offsets(leaf.offsets(self.sigma)).reshape(leaf.shape)

    def frame_values(self, y: Point) -> FloatArray:
        """Projeção no quadro de Omega_eps: mu^{e} (P u)(mu y), e = (N-2s)/2 ou (N-2s+2)/2."""
        y = as_points(y, self.dims.N)
        return self.mu ** self.frame_exponent * self.values(self.mu * y)

    def residual(self) -> float:
        """Norma do resíduo lambda^s c - <g, phi> da equação que define a projeção."""
        grid = self.grid if self.grid is not None else bubble_grid(self.basis, [self.sigma], [self.mu * self.lam])
        source = np.zeros(self.basis.shape)
        for leaf in grid.leaves:
            g = self.source_at_offsets(leaf.offsets(self.sigma)).reshape(leaf.shape)
            source = source + to_coeffs(self.basis, g, leaf.absolute())
        r = fractional_apply(self.basis, self.coeffs, self.dims.s) - source
        return float(np.linalg.norm(r) / max(np.linalg.norm(source), 1e-300))


def _check_admissible(basis: SpectralBasis, sigma: Point, eta: float) -> FloatArray:
    sigma = check_inside_box(as_point(sigma, basis.N, 'sigma'), basis.domain.lengths, 'centro sigma')
    distance = float(basis.domain.boundary_distance(sigma)[0])
    if distance <= eta:
        raise AdmissibilityError(
            f"Centro sigma={sigma.tolist()} a distância {distance:.3g} da fronteira, exigido > {eta}",
            diagnostics={'sigma': sigma.tolist(), 'distance': distance, 'eta': eta},
        )
    return sigma


def project_component(
    basis: SpectralBasis,
    dims: FracDims,
    eps: float,
    lam: float,
    sigma: Point,
    j: int = -1,
    eta: float = 0.0,
) -> ProjectedBubble:
    """
    Projeta o componente j da família de bolhas centrada em sigma.

    Args:
        basis: Base de senos de Omega.
        dims: Constantes de (N, s).
        eps: Parâmetro eps em (0, p - 1).
        lam: Escala lambda no quadro de Omega_eps.
        sigma: Centro em Omega, a distância > eta da fronteira.
        j: -1 para w, 0 para psi0, 1..N para psi^j.
        eta: Distância mínima à fronteira.
    """
    if not 0 < eps < dims.p - 1:
        raise ConfigurationError(f"epsilon deve estar em (0, p - 1), recebido {eps}")
    if not -1 <= j <= dims.N:
        raise UsageError(f"Componente j={j} inválido; use -1 (w), 0 (psi0) ou 1..{dims.N}")
    sigma = _check_admissible(basis, sigma, eta)
    params = BubbleParams(lam=lam, xi=np.zeros(dims.N))  # valida lambda > 0
    mu = eps ** dims.alpha0
    narrow = BubbleParams(lam=mu * params.lam, xi=sigma)

    grid = bubble_grid(basis, [sigma], [narrow.lam])
    local = BubbleParams(lam=narrow.lam, xi=np.zeros(dims.N))
    source = np.zeros(basis.shape)
    profile = np.zeros(basis.shape)
    for leaf in grid.leaves:
        offsets = leaf.offsets(sigma)
        absolute = leaf.absolute()
        source = source + to_coeffs(basis, profile_source(dims, local, offsets, j).reshape(leaf.shape), absolute)
        if basis.N > 1:
            profile = profile + to_coeffs(basis, bubble_component(dims, local, offsets, j).reshape(leaf.shape), absolute)

    inv_eig = basis.eigenvalues ** (-dims.s)
    coeffs = inv_eig * source
    boundary_values = None
    if basis.N == 1:
        L = basis.domain.lengths[0]

        def comp(x: float) -> float:
            return float(bubble_component(dims, narrow, x, j))

        def src(x: float) -> float:
            return float(profile_source(dims, local, x - sigma[0], j))

        ext_source = exterior_sine_moments(lambda t: src(L + t), lambda t: src(-t), L, basis.cutoff)
        ext_profile = exterior_sine_moments(lambda t: comp(L + t), lambda t: comp(-t), L, basis.cutoff)
        boundary_values = (comp(0.0), comp(L))
        correction = inv_eig * ext_source - ext_profile - linear_lift_moments(*boundary_values, L, basis.cutoff)
    else:
        correction = profile - coeffs

    return ProjectedBubble(
        basis=basis, dims=dims, eps=eps, lam=float(lam), sigma=sigma, component=j,
        coeffs=coeffs, correction=correction, boundary_values=boundary_values, grid=grid,
    )


@log.step("Projetando bolha P_eps w", level=logging.DEBUG)
def project_bubble(basis: SpectralBasis, dims: FracDims, eps: float, lam: float, sigma: Point,
                   eta: float = 0.0) -> ProjectedBubble:
    return project_component(basis, dims, eps, lam, sigma, -1, eta)


@log.step("Projetando derivada P_eps psi^j", level=logging.DEBUG)
def project_psi(basis: SpectralBasis, dims: FracDims, eps: float, lam: float, sigma: Point, j: int,
                eta: float = 0.0) -> ProjectedBubble:
    if j < 0:
        raise UsageError(f"project_psi exige j em 0..{dims.N}, recebido {j}")
    return project_component(basis, dims, eps, lam, sigma, j, eta)


@dataclass(eq=False)
class BubbleAnsatz:
    """
    Combinação V = sum_i a_i P_eps w_i no domínio fixo, com a grade composta que resolve
    todas as bolhas.
    """

    basis: SpectralBasis
    dims: FracDims
    eps: float
    signs: tuple[int, ...]
    bubbles: list[ProjectedBubble]

    @cached_property
    def grid(self) -> CompositeGrid:
        return bubble_grid(self.basis, [b.sigma for b in self.bubbles], [b.mu * b.lam for b in self.bubbles])

    @property
    def mu(self) -> float:
        return self.eps ** self.dims.alpha0

    @property
    def coeffs(self) -> FloatArray:
        return sum(a * b.coeffs for a, b in zip(self.signs, self.bubbles))

    def values(self) -> list[FloatArray]:
        """V nos nós da grade composta."""
        return self.grid.evaluate(lambda leaf: sum(a * b.on_leaf(leaf) for a, b in zip(self.signs, self.bubbles)))

    def profiles(self) -> list[list[FloatArray]]:
        """w_i (sem projeção) nos nós da grade composta, uma lista por bolha."""
        return [self.grid.evaluate(b.profile_on_leaf) for b in self.bubbles]

    def component_on_grid(self, projected: ProjectedBubble) -> list[FloatArray]:
        return self.grid.evaluate(projected.on_leaf)

    def profile_component_on_grid(self, projected: ProjectedBubble) -> list[FloatArray]:
        return self.grid.evaluate(projected.profile_on_leaf)

    def tables(self, leaf: LocalGrid) -> tuple[FloatArray, ...]:
        return self.basis.tables(leaf.absolute())


@log.step("Montando o ansatz sum a_i P_eps w_i")
def build_ansatz(
    basis: SpectralBasis,
    dims: FracDims,
    eps: float,
    signs: Sequence[int],
    lambdas: Sequence[float],
    sigmas: Sequence[Point],
    eta: float = 0.0,
) -> BubbleAnsatz:
    if not (len(signs) == len(lambdas) == len(sigmas)):
        raise UsageError("signs, lambdas e sigmas devem ter o mesmo comprimento")
    bubbles = [project_component(basis, dims, eps, lam, sigma, -1, eta) for lam, sigma in zip(lambdas, sigmas)]
    return BubbleAnsatz(basis=basis, dims=dims, eps=eps, signs=tuple(int(a) for a in signs), bubbles=bubbles)


def psi_family(basis: SpectralBasis, dims: FracDims, eps: float, lam: float, sigma: Point,
               eta: float = 0.0) -> list[ProjectedBubble]:
    """P_eps psi^0, ..., P_eps psi^N de uma bolha."""
    return [project_component(basis, dims, eps, lam, sigma, j, eta) for j in range(dims.N + 1)]
