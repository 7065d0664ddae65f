"""
Redução de Lyapunov-Schmidt discreta no espaço truncado de coeficientes.

Tudo é feito no domínio fixo Omega. Com U = sum a_i P w_i (bolhas estreitas de escala
mu lambda_i) a equação em Omega_eps equivale a (-Delta)^s v = kappa f_eps(v) em Omega, com
kappa = mu^{-eps (N-2s)/2}; as normas H^s e H^{-s} são invariantes pela dilatação.

A equação auxiliar para Phi no espaço K ortogonal (em H^s) às projeções P psi_i^j é

    L Phi = Pi S [kappa f_eps(U + Phi) - sum a_i w_i^p - f0'(U) Phi],

onde S = (-Delta)^{-s} e L Phi = Phi - Pi S [f0'(U) Phi].
"""
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Sequence
import numpy as np
from scipy import linalg
from .bubble import FracDims, f_eps, f_eps_prime, f_eps_second
from .energy import ReducedConfig
from .errors import ConfigurationError, SolverError, UsageError
from .log import log
from .projection import BubbleAnsatz, ProjectedBubble, build_ansatz, component_name, psi_family
from .report import RateReport, make_case
from .spectral import CompositeGrid, SpectralBasis, evaluate
from .types import FloatArray


GRAM_CONDITION_LIMIT = 1e8
COERCIVITY_FLOOR = 1e-6
ORTHOGONALITY_TOL = 1e-10
CONSTRAINED_RESIDUAL_TOL = 1e-8
MIN_DAMPING = 1.0 / 64


class GridOperator:
    """Tabelas de senos achatadas por folha da grade composta: coeficientes <-> valores nodais."""

    def __init__(self, basis: SpectralBasis, grid: CompositeGrid) -> None:
        self.basis = basis
        self.grid = grid
        self.tables = [reduce(np.kron, basis.tables(leaf.absolute())) for leaf in grid.leaves]
        self.weights = [leaf.grid.weight_tensor().reshape(-1) for leaf in grid.leaves]

    @property
    def size(self) -> int:
        return int(np.prod(self.basis.shape))

    def values(self, c: FloatArray) -> list[FloatArray]:
        c = np.asarray(c, dtype=float).reshape(-1)
        return [c @ t for t in self.tables]

    def moments(self, values: Sequence[FloatArray]) -> FloatArray:
        """<g, phi_k> para uma função dada nos nós."""
        return sum(t @ (w * np.asarray(g).reshape(-1)) for t, w, g in zip(self.tables, self.weights, values))

    def gram(self, potential: Sequence[FloatArray]) -> FloatArray:
        """A[k, m] = int V phi_k phi_m."""
        return sum((t * (w * np.asarray(v).reshape(-1))) @ t.T
                   for t, w, v in zip(self.tables, self.weights, potential))


@dataclass(eq=False)
class ConstraintSpace:
    """
    Complemento H^s-ortogonal das projeções P psi_i^j no espaço truncado.

    Attributes:
        vectors: Colunas Z com os coeficientes de P psi_i^j (n x k(N+1)).
        basis_q: Base D-ortonormal do mesmo espaço, D = diag(lambda_k^s).
        weights: Diagonal de D achatada.
        labels: Pares (i, j) de cada coluna.
        gram_condition: Número de condição da matriz de Gram normalizada.
    """

    vectors: FloatArray
    basis_q: FloatArray
    weights: FloatArray
    labels: list[tuple[int, int]]
    gram_condition: float

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def rank(self) -> int:
        return self.dim - self.basis_q.shape[1]

    def project(self, c: FloatArray) -> FloatArray:
        c = np.asarray(c, dtype=float).reshape(-1)
        return c - self.basis_q @ (self.basis_q.T @ (self.weights * c))

    def projector(self) -> FloatArray:
        return np.eye(self.dim) - self.basis_q @ (self.basis_q.T * self.weights)

    def inner(self, u: FloatArray, v: FloatArray) -> float:
        return float(np.sum(self.weights * np.reshape(u, -1) * np.reshape(v, -1)))

    def norm(self, u: FloatArray) -> float:
        return float(np.sqrt(max(self.inner(u, u), 0.0)))

    def orthogonality(self, c: FloatArray) -> float:
        """max_l |<c, Z_l>_{H^s}| / (||c|| ||Z_l||), zero para c nulo."""
        c = np.reshape(c, -1)
        nc = self.norm(c)
        if nc == 0:
            return 0.0
        out = 0.0
        for z in self.vectors.T:
            out = max(out, abs(self.inner(c, z)) / (nc * self.norm(z)))
        return out

    @cached_property
    def isometric_complement(self) -> FloatArray:
        """Base ortonormal de K nas coordenadas y = D^{1/2} c."""
        return linalg.null_space((np.sqrt(self.weights)[:, np.newaxis] * self.basis_q).T)


def _gram_schmidt(Z: FloatArray, weights: FloatArray) -> FloatArray:
    """Gram-Schmidt modificado no produto <u, v> = sum w u v, com reortogonalização."""
    Q = np.zeros_like(Z)
    for col in range(Z.shape[1]):
        v = Z[:, col].copy()
        for _ in range(2):
            for prev in range(col):
                v -= np.sum(weights * Q[:, prev] * v) * Q[:, prev]
        Q[:, col] = v / np.sqrt(np.sum(weights * v * v))
    return Q


def build_constraint_space(
    basis: SpectralBasis,
    dims: FracDims,
    eps: float,
    cfg: ReducedConfig,
) -> ConstraintSpace:
    """
    Espaço K a partir das k(N+1) projeções P_eps psi_i^j.

    Raises:
        ConfigurationError: Se a matriz de Gram normalizada tem condição > 1e8.
    """
    cfg.check_admissible(basis.domain)
    psis: list[ProjectedBubble] = []
    labels = []
    for i, (lam, sigma) in enumerate(zip(cfg.lambdas, cfg.sigmas)):
        family = psi_family(basis, dims, eps, lam, sigma, cfg.eta)
        psis.extend(family)
        labels.extend((i, j) for j in range(dims.N + 1))

    weights = (basis.eigenvalues ** dims.s).reshape(-1)
    Z = np.stack([psi.coeffs.reshape(-1) for psi in psis], axis=1)
    scale = np.sqrt(np.sum(weights[:, np.newaxis] * Z * Z, axis=0))
    if np.any(scale == 0):
        raise ConfigurationError("Vetor de restrição nulo: a base não resolve alguma derivada da bolha")
    Zn = Z / scale
    condition = float(np.linalg.cond(Zn.T @ (weights[:, np.newaxis] * Zn)))
    if condition > GRAM_CONDITION_LIMIT:
        raise ConfigurationError(
            f"Matriz de Gram das restrições quase degenerada (condição {condition:.3e}); "
            f"bolhas próximas demais para a discretização",
            diagnostics={'gram_condition': condition, 'labels': labels},
        )
    log.debug(f"Espaço de restrições: {len(labels)} vetores, condição de Gram {condition:.3e}")
    return ConstraintSpace(vectors=Z, basis_q=_gram_schmidt(Zn, weights), weights=weights,
                           labels=labels, gram_condition=condition)


@dataclass(eq=False)
class ReductionProblem:
    """Dados de uma redução em (eps, lambda, sigma): ansatz, restrições e operadores na grade."""

    basis: SpectralBasis
    dims: FracDims
    eps: float
    cfg: ReducedConfig
    ansatz: BubbleAnsatz
    space: ConstraintSpace
    operator: GridOperator
    u_values: list[FloatArray] = field(repr=False)
    source_values: list[FloatArray] = field(repr=False)
    potential_values: list[FloatArray] = field(repr=False)

    @property
    def kappa(self) -> float:
        return self.ansatz.mu ** (-self.dims.beta * self.eps)

    @property
    def inv_weights(self) -> FloatArray:
        return 1.0 / self.space.weights

    @cached_property
    def potential_matrix(self) -> FloatArray:
        return self.operator.gram(self.potential_values)

    @cached_property
    def linear_matrix(self) -> FloatArray:
        """Matriz de L = I - Pi D^{-1} A nos coeficientes."""
        n = self.space.dim
        return np.eye(n) - self.space.projector() @ (self.inv_weights[:, np.newaxis] * self.potential_matrix)

    @cached_property
    def linear_lu(self) -> tuple[FloatArray, FloatArray]:
        return linalg.lu_factor(self.linear_matrix)

    def nonlinear(self, phi: FloatArray) -> FloatArray:
        """Pi S [kappa f_eps(U + Phi) - sum a_i w_i^p - f0'(U) Phi]."""
        phi_values = self.operator.values(phi)
        g = [self.kappa * f_eps(self.dims, self.eps, u.reshape(-1) + ph) - src.reshape(-1) - pot.reshape(-1) * ph
             for u, src, pot, ph in zip(self.u_values, self.source_values, self.potential_values, phi_values)]
        return self.space.project(self.inv_weights * self.operator.moments(g))

    def fixed_point_map(self, phi: FloatArray) -> FloatArray:
        return self.space.project(linalg.lu_solve(self.linear_lu, self.nonlinear(phi)))

    def jacobian(self, phi: FloatArray) -> FloatArray:
        """
        I - Pi S kappa [f_eps'(U) + f_eps''(U) Phi]: a estrutura de L com o potencial no ponto U
        e o termo de segunda ordem em Phi. Difere da derivada exata por O(|Phi|^2).
        """
        phi_values = self.operator.values(phi)
        potential = [self.kappa * (f_eps_prime(self.dims, self.eps, u.reshape(-1))
                                   + f_eps_second(self.dims, self.eps, u.reshape(-1)) * ph)
                     for u, ph in zip(self.u_values, phi_values)]
        A = self.operator.gram(potential)
        return np.eye(self.space.dim) - self.space.projector() @ (self.inv_weights[:, np.newaxis] * A)

    def equation(self, phi: FloatArray) -> FloatArray:
        """Phi - Pi S [kappa f_eps(U + Phi) - sum a_i w_i^p]; nulo na solução."""
        return np.reshape(phi, -1) - self.space.project(self.inv_weights * self.operator.moments(
            [self.kappa * f_eps(self.dims, self.eps, u.reshape(-1) + ph) - src.reshape(-1)
             for u, src, ph in zip(self.u_values, self.source_values, self.operator.values(phi))]))


@log.step("Montando o problema reduzido")
def build_reduction(basis: SpectralBasis, dims: FracDims, eps: float, cfg: ReducedConfig) -> ReductionProblem:
    if not 0 < eps < dims.p - 1:
        raise ConfigurationError(f"epsilon deve estar em (0, p - 1), recebido {eps}")
    space = build_constraint_space(basis, dims, eps, cfg)
    ansatz = build_ansatz(basis, dims, eps, cfg.signs, cfg.lambdas, cfg.sigmas, cfg.eta)
    operator = GridOperator(basis, ansatz.grid)
    u_values = ansatz.values()
    profiles = ansatz.profiles()
    sources = [sum(a * prof[n] ** dims.p for a, prof in zip(ansatz.signs, profiles)) for n in range(len(u_values))]
    potential = [f_eps_prime(dims, 0.0, u) for u in u_values]
    tail = np.sqrt(np.sum(ansatz.coeffs[..., -1] ** 2) / max(np.sum(ansatz.coeffs ** 2), 1e-300))
    if tail > 1e-8:
        log.flag(f"Cauda de coeficientes do ansatz {tail:.2e} > 1e-8: base sub-resolvida para eps={eps}")
    return ReductionProblem(basis=basis, dims=dims, eps=eps, cfg=cfg, ansatz=ansatz, space=space,
                            operator=operator, u_values=u_values, source_values=sources, potential_values=potential)


def apply_L(problem: ReductionProblem, phi: FloatArray, scale: float = 1.0) -> FloatArray:
    """
    Phi - Pi S [scale f0'(U) Phi], nos coeficientes.

    Args:
        problem: Problema reduzido.
        phi: Coeficientes em K.
        scale: Fator do potencial; 0 reduz L à identidade em K.
    """
    phi = np.reshape(np.asarray(phi, dtype=float), -1)
    if phi.size != problem.space.dim:
        raise UsageError(f"Vetor de coeficientes de tamanho {phi.size}, esperado {problem.space.dim}")
    Aphi = problem.potential_matrix @ phi
    out = phi - scale * problem.space.project(problem.inv_weights * Aphi)
    return out.reshape(problem.basis.shape)


@dataclass(frozen=True)
class Coercivity:
    sigma_min: float
    iterative_min: float
    full_space_min: float
    iterations: int

    @property
    def flagged(self) -> bool:
        return self.sigma_min < COERCIVITY_FLOOR

    @property
    def agreement(self) -> float:
        return abs(self.iterative_min - self.sigma_min) / self.sigma_min

    def to_dict(self) -> dict:
        return {'sigma_min': self.sigma_min, 'iterative_min': self.iterative_min, 'full_space_min': self.full_space_min,
                'iterations': self.iterations, 'flagged': self.flagged, 'agreement': self.agreement}


def _inverse_iteration(matrix: FloatArray, seed: int = 0, max_iter: int = 500) -> tuple[float, int]:
    """Menor |autovalor| de uma matriz simétrica por iteração inversa com quociente de Rayleigh."""
    lu = linalg.lu_factor(matrix)
    x = np.random.default_rng(seed).standard_normal(matrix.shape[0])
    x /= np.linalg.norm(x)
    estimate = np.inf
    for it in range(1, max_iter + 1):
        y = linalg.lu_solve(lu, x)
        x = y / np.linalg.norm(y)
        new = abs(float(x @ matrix @ x))
        if abs(new - estimate) <= 1e-15 * max(new, 1e-300):
            return new, it
        estimate = new
    return estimate, max_iter


@log.step("Verificando a coercividade de L em K")
def coercivity_check(problem: ReductionProblem) -> Coercivity:
    """
    Menor valor singular de L restrito a K, em coordenadas onde a norma H^s é a euclidiana:
    L_K = I - K^T B K, B = D^{-1/2} A D^{-1/2}. No espaço todo, sem a projeção, I - B
    fica quase singular nas direções psi.
    """
    root = np.sqrt(problem.space.weights)
    B = problem.potential_matrix / np.outer(root, root)
    K = problem.space.isometric_complement
    LK = np.eye(K.shape[1]) - K.T @ B @ K
    sigma_min = float(linalg.svdvals(LK)[-1])
    iterative_min, iterations = _inverse_iteration(LK)
    full = float(linalg.svdvals(np.eye(B.shape[0]) - B)[-1])
    result = Coercivity(sigma_min, iterative_min, full, iterations)
    if result.flagged:
        log.flag(f"L quase degenerado em K: sigma_min = {sigma_min:.3e}")
    return result


@dataclass(frozen=True)
class PhiSolution:
    coeffs: FloatArray
    hs_norm: float
    iterations: int
    residual: float
    method: str = 'fixed_point'
    orthogonality: float = 0.0

    def to_dict(self) -> dict:
        return {'hs_norm': self.hs_norm, 'iterations': self.iterations, 'residual': self.residual,
                'method': self.method, 'orthogonality': self.orthogonality}


@log.step("Resolvendo a equação auxiliar para Phi")
def solve_phi(
    problem: ReductionProblem,
    tol: float = 1e-10,
    max_fixed_point_iter: int = 50,
    max_newton_iter: int = 20,
    damping: float = 1.0,
) -> PhiSolution:
    """
    Iteração Phi <- L^{-1} N(Phi) a partir de zero, com amortecimento quando o passo não
    diminui. Após max_fixed_point_iter sem convergir, passa ao método de Newton.

    Raises:
        SolverError: Se nenhum dos dois métodos converge.
    """
    space = problem.space
    phi = np.zeros(space.dim)
    theta = float(damping)
    if not 0 < theta <= 1:
        raise UsageError(f"Amortecimento deve estar em (0, 1], recebido {damping}")
    previous = np.inf
    step = np.inf

    for it in range(1, max_fixed_point_iter + 1):
        target = problem.fixed_point_map(phi)
        step = space.norm(target - phi)
        if step <= tol:
            return _solution(problem, target, it, 'fixed_point')
        if step >= previous:
            theta = max(theta / 2, MIN_DAMPING)
        phi = phi + theta * (target - phi)
        previous = step

    log.flag(f"Ponto fixo não convergiu em {max_fixed_point_iter} iterações (passo {step:.3e}); usando Newton")
    for it in range(1, max_newton_iter + 1):
        delta = np.linalg.solve(problem.jacobian(phi), -problem.equation(phi))
        phi = space.project(phi + delta)
        step = space.norm(delta)
        if step <= tol:
            return _solution(problem, phi, max_fixed_point_iter + it, 'newton')

    raise SolverError(
        f"Equação auxiliar não convergiu (último passo {step:.3e})",
        diagnostics={'last_step': step, 'eps': problem.eps},
    )


def _solution(problem: ReductionProblem, phi: FloatArray, iterations: int, method: str) -> PhiSolution:
    space = problem.space
    residual = space.norm(problem.fixed_point_map(phi) - phi)
    return PhiSolution(coeffs=phi.reshape(problem.basis.shape), hs_norm=space.norm(phi), iterations=iterations,
                       residual=residual, method=method, orthogonality=space.orthogonality(phi))


@dataclass(frozen=True)
class Assembly:
    dual_residual: float
    constrained_residual: float
    multipliers: dict[str, float]
    nodal_values: list[float]
    sign_violations: int

    def to_dict(self) -> dict:
        return {'dual_residual': self.dual_residual, 'constrained_residual': self.constrained_residual,
                'multipliers': self.multipliers, 'nodal_values': self.nodal_values,
                'sign_violations': self.sign_violations}


@log.step("Montando v = sum a_i P w_i + Phi e medindo o resíduo")
def assemble_and_residual(problem: ReductionProblem, phi: PhiSolution) -> Assembly:
    """
    Resíduo r_k = lambda_k^s v_k - kappa <f_eps(V), phi_k> em norma dual, multiplicadores
    c_hl pelo sistema de Gram sobre d = S r e sinal de V nos centros.
    """
    space, dims = problem.space, problem.dims
    c = np.reshape(phi.coeffs, -1)
    v = problem.ansatz.coeffs.reshape(-1) + c
    V = [u.reshape(-1) + ph for u, ph in zip(problem.u_values, problem.operator.values(c))]
    r = space.weights * v - problem.kappa * problem.operator.moments([f_eps(dims, problem.eps, x) for x in V])
    dual = float(np.sqrt(np.sum(problem.inv_weights * r * r)))

    d = problem.inv_weights * r
    constrained = space.norm(space.project(d))
    Z = space.vectors
    scale = np.sqrt(np.sum(space.weights[:, np.newaxis] * Z * Z, axis=0))
    Zn = Z / scale
    G = Zn.T @ (space.weights[:, np.newaxis] * Zn)
    multipliers = np.linalg.solve(G, Zn.T @ (space.weights * d)) / scale
    labels = {f'c_{i + 1}_{component_name(j)}': float(m) for (i, j), m in zip(space.labels, multipliers)}

    nodal = []
    for i, bubble in enumerate(problem.ansatz.bubbles):
        center = bubble.sigma[np.newaxis, :]
        value = sum(a * b.values(center)[0] for a, b in zip(problem.ansatz.signs, problem.ansatz.bubbles))
        nodal.append(float(value + evaluate(problem.basis, phi.coeffs, center)[0]))
    violations = sum(1 for a, value in zip(problem.ansatz.signs, nodal) if not a * value > 0)
    return Assembly(dual, constrained, labels, nodal, violations)


def predicted_phi_rate(dims: FracDims) -> float:
    """1 se N < 6s, (N+2s) alpha0 / 2 se N > 6s; em N = 6s usa 1 (regime com log)."""
    if np.isclose(dims.N, 6 * dims.s):
        log.flag("N = 6s: a taxa de Phi tem correção logarítmica; usando 1 como referência")
        return 1.0
    if dims.N < 6 * dims.s:
        return 1.0
    return (dims.N + 2 * dims.s) * dims.alpha0 / 2


@log.step("Verificando a taxa de ||Phi|| ao longo da escada de eps")
def phi_rate_report(
    basis: SpectralBasis,
    dims: FracDims,
    cfg: ReducedConfig,
    eps_ladder: Sequence[float],
    slope_slack: float = 0.15,
    tol: float = 1e-10,
    max_fixed_point_iter: int = 50,
    max_newton_iter: int = 20,
) -> RateReport:
    if len(eps_ladder) < 4:
        raise UsageError(f"A escada de eps precisa de pelo menos 4 valores, recebido {len(eps_ladder)}")
    eps_ladder = [float(e) for e in eps_ladder]
    norms, sigmas, residuals, multipliers, violations = [], [], [], [], 0
    for eps in eps_ladder:
        problem = build_reduction(basis, dims, eps, cfg)
        coercivity = coercivity_check(problem)
        phi = solve_phi(problem, tol, max_fixed_point_iter, max_newton_iter)
        assembly = assemble_and_residual(problem, phi)
        norms.append(phi.hs_norm)
        sigmas.append(coercivity.sigma_min)
        residuals.append(assembly.constrained_residual)
        multipliers.append(max((abs(m) for m in assembly.multipliers.values()), default=0.0))
        violations += assembly.sign_violations
        log.info(f"eps={eps:.3e}: ||Phi||={phi.hs_norm:.3e}, sigma_min={coercivity.sigma_min:.3e}, "
                 f"iterações={phi.iterations} ({phi.method})")

    report = RateReport(title='reduction', metadata={'lambdas': list(cfg.lambdas),
                                                     'sigmas': [list(p) for p in cfg.sigmas]})
    report.add(make_case('reduction', 'phi_norm', 'rate', predicted_phi_rate(dims), eps_ladder, norms, slope_slack))
    increases = sum(1 for a, b in zip(norms, norms[1:]) if b > a)
    report.add(make_case('reduction', 'phi_monotone', 'check', 0, eps_ladder, [increases], norms=norms))
    report.add(make_case('reduction', 'coercivity_floor', 'check', 1.0 / COERCIVITY_FLOOR, eps_ladder,
                         [1.0 / min(sigmas)], sigma_min=sigmas))
    report.add(make_case('reduction', 'coercivity_variation', 'check', 0.5, eps_ladder,
                         [max(sigmas) / min(sigmas) - 1]))
    report.add(make_case('reduction', 'constrained_residual', 'check', CONSTRAINED_RESIDUAL_TOL, eps_ladder,
                         [max(residuals)], residuals=residuals))
    report.add(make_case('reduction', 'multipliers', 'bounded', 0.0, eps_ladder, multipliers, slope_slack))
    report.add(make_case('reduction', 'nodal_signs', 'check', 0, eps_ladder, [violations]))
    return report
