"""
Funcionais reduzidos Upsilon_k e Upsilon_2, o funcional de energia E_eps na forma espectral
e a verificação da expansão de energia do ansatz sum a_i P_eps w_i.
"""
from dataclasses import dataclass, replace
from typing import Sequence
import numpy as np
from .bubble import FracDims
from .errors import AdmissibilityError, ConfigurationError, UsageError
from .green import GreenEvaluator, finite_gradient
from .log import log
from .projection import BubbleAnsatz, build_ansatz
from .report import RateReport, make_case
from .spectral import BoxDomain, QuadratureGrid, SpectralBasis, from_coeffs, hs_inner
from .types import FloatArray
from .utils import is_sign_vector


@dataclass(frozen=True)
class ReducedConfig:
    """
    Ponto (lambda, sigma) do problema reduzido com sinais fixos.

    Attributes:
        signs: a_1..a_k em {+1, -1}.
        lambdas: Escalas lambda_i > 0.
        sigmas: Centros sigma_i em Omega.
        eps: Parâmetro eps (opcional para os funcionais que não dependem dele).
        eta: Parâmetro de separação do conjunto admissível O_eta.
    """

    signs: tuple[int, ...]
    lambdas: tuple[float, ...]
    sigmas: tuple[tuple[float, ...], ...]
    eps: float | None = None
    eta: float = 0.1

    def __post_init__(self) -> None:
        if not is_sign_vector(self.signs):
            raise ConfigurationError(f"Sinais devem estar em {{+1, -1}}, recebido {self.signs}")
        object.__setattr__(self, 'signs', tuple(int(a) for a in self.signs))
        object.__setattr__(self, 'lambdas', tuple(float(v) for v in self.lambdas))
        object.__setattr__(self, 'sigmas', tuple(tuple(float(c) for c in np.atleast_1d(p)) for p in self.sigmas))
        if not len(self.signs) == len(self.lambdas) == len(self.sigmas):
            raise ConfigurationError("signs, lambdas e sigmas devem ter o mesmo comprimento k")

    @property
    def k(self) -> int:
        return len(self.signs)

    @property
    def N(self) -> int:
        return len(self.sigmas[0])

    def sigma(self, i: int) -> FloatArray:
        return np.asarray(self.sigmas[i])

    def violations(self, domain: BoxDomain) -> list[str]:
        """Lista as condições de O_eta que falham (vazia se admissível)."""
        eta = self.eta
        out = []
        for i, (lam, sigma) in enumerate(zip(self.lambdas, self.sigmas)):
            d = float(domain.boundary_distance(np.asarray(sigma))[0])
            if not d > eta:
                out.append(f"dist(sigma_{i + 1}, fronteira) = {d:.4g} <= eta = {eta}")
            if not eta < lam < 1 / eta:
                out.append(f"lambda_{i + 1} = {lam:.4g} fora de ({eta}, {1 / eta:.4g})")
        for i in range(self.k):
            for h in range(i + 1, self.k):
                d = float(np.linalg.norm(self.sigma(i) - self.sigma(h)))
                if not d > eta:
                    out.append(f"|sigma_{i + 1} - sigma_{h + 1}| = {d:.4g} <= eta = {eta}")
        return out

    def is_admissible(self, domain: BoxDomain) -> bool:
        return not self.violations(domain)

    def check_admissible(self, domain: BoxDomain) -> 'ReducedConfig':
        problems = self.violations(domain)
        if problems:
            raise AdmissibilityError("Configuração fora de O_eta: " + '; '.join(problems),
                                     diagnostics={'violations': problems})
        return self

    def to_vector(self) -> FloatArray:
        """z = (lambda_1..lambda_k, sigma_1, ..., sigma_k) em R^{k(1+N)}."""
        return np.concatenate([np.asarray(self.lambdas), np.asarray(self.sigmas).reshape(-1)])

    def from_vector(self, z: FloatArray) -> 'ReducedConfig':
        z = np.asarray(z, dtype=float)
        lambdas = tuple(z[:self.k])
        sigmas = tuple(tuple(p) for p in z[self.k:].reshape(self.k, self.N))
        return replace(self, lambdas=lambdas, sigmas=sigmas)

    def swapped(self) -> 'ReducedConfig':
        """Troca a ordem das bolhas (i <-> k - 1 - i)."""
        return replace(self, signs=self.signs[::-1], lambdas=self.lambdas[::-1], sigmas=self.sigmas[::-1])


def upsilon_k(ev: GreenEvaluator, dims: FracDims, cfg: ReducedConfig, check: bool = True) -> float:
    """
    Upsilon_k = c1^2 (sum_i lambda_i^{N-2s} H(sigma_i, sigma_i)
                      - sum_{i != h} a_i a_h G(sigma_i, sigma_h) (lambda_i lambda_h)^{(N-2s)/2})
                - c0 (N - 2s) / (p + 1) log(lambda_1 ... lambda_k).
    """
    if check:
        cfg.check_admissible(ev.basis.domain)
    b = dims.N - 2 * dims.s
    lam = np.asarray(cfg.lambdas)
    diag = sum(lam[i] ** b * ev.robin(cfg.sigma(i)) for i in range(cfg.k))
    cross = 0.0
    for i in range(cfg.k):
        for h in range(cfg.k):
            if i != h:
                cross += cfg.signs[i] * cfg.signs[h] * ev.green(cfg.sigma(i), cfg.sigma(h)) \
                    * (lam[i] * lam[h]) ** (b / 2)
    return float(dims.c1 ** 2 * (diag - cross) - dims.c0 * b / (dims.p + 1) * np.sum(np.log(lam)))


def upsilon_2(ev: GreenEvaluator, dims: FracDims, lambdas: Sequence[float], sigmas: Sequence[FloatArray]) -> float:
    """Forma especializada para k = 2 com sinais opostos (termo de interação +2G)."""
    b = dims.N - 2 * dims.s
    l1, l2 = lambdas
    s1, s2 = sigmas
    value = ev.robin(s1) * l1 ** b + ev.robin(s2) * l2 ** b + 2 * ev.green(s1, s2) * (l1 * l2) ** (b / 2)
    return float(dims.c1 ** 2 * value - dims.c0 * b / (dims.p + 1) * np.log(l1 * l2))


@dataclass(frozen=True)
class UpsilonGradient:
    values: FloatArray
    step: float
    shrunk: bool


def grad_upsilon(ev: GreenEvaluator, dims: FracDims, cfg: ReducedConfig, order: int = 2) -> UpsilonGradient:
    """
    Gradiente de Upsilon_k em (lambda, sigma) por diferenças centrais.

    O passo parte de h_grad e é reduzido à metade (até 20 vezes) enquanto algum ponto do
    estêncil sai do conjunto admissível.
    """
    domain = ev.basis.domain
    cfg.check_admissible(domain)
    z = cfg.to_vector()
    reach = 2 if order == 4 else 1
    h = ev.h_grad
    for _ in range(20):
        stencil = [cfg.from_vector(z + sign * reach * h * e) for e in np.eye(z.size) for sign in (1, -1)]
        if all(c.is_admissible(domain) for c in stencil):
            break
        h /= 2
    else:
        raise AdmissibilityError(f"Sem passo admissível para o gradiente em {z.tolist()}")
    shrunk = h < ev.h_grad
    if shrunk:
        log.flag(f"Passo do gradiente de Upsilon reduzido para {h:.3g} perto da fronteira de O_eta")

    def f(v: FloatArray) -> float:
        return upsilon_k(ev, dims, cfg.from_vector(v), check=False)

    return UpsilonGradient(values=finite_gradient(f, z, h, order), step=h, shrunk=shrunk)


def _check_eps(dims: FracDims, eps: float) -> None:
    if eps < 0 or not eps < dims.p - 1:
        raise ConfigurationError(f"epsilon deve estar em [0, p - 1), recebido {eps}")


def energy(basis: SpectralBasis, dims: FracDims, eps: float, v: FloatArray,
           grid: QuadratureGrid | None = None) -> float:
    """E_eps(v) = 1/2 ||v||^2_{H_0^s} - int |v|^{p+1-eps} / (p+1-eps), com v em coeficientes."""
    _check_eps(dims, eps)
    grid = grid if grid is not None else basis.grid
    q = dims.p + 1 - eps
    values = from_coeffs(basis, v, grid)
    return 0.5 * hs_inner(basis, v, v, dims.s) - grid.integrate(np.abs(values) ** q) / q


def energy_derivative(basis: SpectralBasis, dims: FracDims, eps: float, v: FloatArray, phi: FloatArray,
                      grid: QuadratureGrid | None = None) -> float:
    """E_eps'(v)[phi] = <v, phi>_{H_0^s} - int f_eps(v) phi."""
    _check_eps(dims, eps)
    grid = grid if grid is not None else basis.grid
    values = from_coeffs(basis, v, grid)
    direction = from_coeffs(basis, phi, grid)
    nonlinear = np.abs(values) ** (dims.p - 1 - eps) * values
    return hs_inner(basis, v, phi, dims.s) - grid.integrate(nonlinear * direction)


def interaction_matrix(ansatz: BubbleAnsatz) -> FloatArray:
    """M[i, h] = int_{Omega_eps} w_h^p P_eps w_i, calculado no domínio fixo."""
    profiles = ansatz.profiles()
    projected = [ansatz.component_on_grid(b) for b in ansatz.bubbles]
    p = ansatz.dims.p
    k = len(ansatz.bubbles)
    out = np.empty((k, k))
    for i in range(k):
        for h in range(k):
            out[i, h] = ansatz.grid.integrate([wh ** p * ui for wh, ui in zip(profiles[h], projected[i])])
    return out


def ansatz_energy(ansatz: BubbleAnsatz) -> float:
    """
    E_eps(sum a_i P_eps w_i) no quadro de Omega_eps, por pullback:

        1/2 sum_{i,h} a_i a_h int w_h^p P w_i - mu^{-eps(N-2s)/2} / (p+1-eps) int_Omega |U|^{p+1-eps}.
    """
    dims, eps = ansatz.dims, ansatz.eps
    a = np.asarray(ansatz.signs, dtype=float)
    quadratic = 0.5 * float(a @ interaction_matrix(ansatz) @ a)
    q = dims.p + 1 - eps
    kappa = ansatz.mu ** (-dims.beta * eps)
    potential = ansatz.grid.integrate([np.abs(u) ** q for u in ansatz.values()])
    return quadratic - kappa * potential / q


def interaction_integrals(
    basis: SpectralBasis,
    dims: FracDims,
    eps: float,
    cfg: ReducedConfig,
    i: int,
    h: int,
) -> tuple[float, float]:
    """
    Returns:
        (int w_i^p P_eps w_i, int w_h^p P_eps w_i) em Omega_eps.
    """
    cfg.check_admissible(basis.domain)
    if i == h:
        raise UsageError("O termo cruzado exige i != h")
    ansatz = build_ansatz(basis, dims, eps, cfg.signs, cfg.lambdas, cfg.sigmas, cfg.eta)
    matrix = interaction_matrix(ansatz)
    return float(matrix[i, i]), float(matrix[i, h])


def predicted_energy(ev: GreenEvaluator, dims: FracDims, cfg: ReducedConfig, eps: float) -> float:
    """k s c0 / N - eps k c0 / (p+1)^2 + eps Upsilon_k / 2 + eps k c_log / (p+1)."""
    k = cfg.k
    return (k * dims.s * dims.c0 / dims.N - eps * k * dims.c0 / (dims.p + 1) ** 2
            + 0.5 * eps * upsilon_k(ev, dims, cfg) + eps * k * dims.c_log / (dims.p + 1))


@log.step("Verificando a expansão de energia do ansatz")
def energy_expansion_report(
    basis: SpectralBasis,
    ev: GreenEvaluator,
    dims: FracDims,
    cfg: ReducedConfig,
    eps_ladder: Sequence[float],
    slope_slack: float = 0.15,
) -> RateReport:
    if len(eps_ladder) < 4:
        raise UsageError(f"A escada de eps precisa de pelo menos 4 valores, recebido {len(eps_ladder)}")
    cfg.check_admissible(basis.domain)
    b = dims.N - 2 * dims.s
    lam = np.asarray(cfg.lambdas)

    energies, residuals = [], []
    self_first, cross_scaled = [], []
    cross_pairs = []
    for eps in eps_ladder:
        ansatz = build_ansatz(basis, dims, eps, cfg.signs, cfg.lambdas, cfg.sigmas, cfg.eta)
        e = ansatz_energy(ansatz)
        energies.append(e)
        residuals.append(e - predicted_energy(ev, dims, cfg, eps))
        matrix = interaction_matrix(ansatz)
        self_first.append((matrix[0, 0] - dims.c0) / eps)
        if cfg.k > 1:
            cross_scaled.append(matrix[0, 1] / eps)
            cross_pairs.append((matrix[0, 1], matrix[1, 0]))
        log.info(f"eps={eps:.3e}: energia {e:.12g}, resíduo {residuals[-1]:.3e}")

    report = RateReport(title='energy')
    report.add(make_case('energy', 'residual', 'little_o', 1.0, eps_ladder, residuals, slope_slack))
    leading = cfg.k * dims.s * dims.c0 / dims.N
    report.add(make_case('energy', 'leading_constant', 'check', 0.01, [eps_ladder[-1]],
                         [abs(energies[-1] - leading) / leading], expected=leading, energy=energies[-1]))

    expected_self = -dims.c1 ** 2 * lam[0] ** b * ev.robin(cfg.sigma(0))
    report.add(make_case('energy', 'self_term_first_order', 'check', 0.05, [eps_ladder[-1]],
                         [abs(self_first[-1] - expected_self) / abs(expected_self)],
                         observed_coefficient=self_first[-1], expected=expected_self))
    if cfg.k > 1:
        expected_cross = dims.c1 ** 2 * (lam[0] * lam[1]) ** (b / 2) * ev.green(cfg.sigma(0), cfg.sigma(1))
        report.add(make_case('energy', 'cross_term_first_order', 'check', 0.05, [eps_ladder[-1]],
                             [abs(cross_scaled[-1] - expected_cross) / abs(expected_cross)],
                             observed_coefficient=cross_scaled[-1], expected=expected_cross))
        ih, hi = cross_pairs[-1]
        report.add(make_case('energy', 'cross_term_symmetry', 'check', 0.05, [eps_ladder[-1]],
                             [abs(ih - hi) / max(abs(ih), abs(hi))]))

    report.metadata.update({'energies': energies, 'residuals': residuals,
                            'upsilon': upsilon_k(ev, dims, cfg), 'k': cfg.k})
    return report
