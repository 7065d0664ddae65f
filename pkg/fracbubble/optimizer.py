"""
Localização da configuração de concentração: minimização de varphi em Omega x Omega e de
Upsilon_2 em (lambda, sigma), com multistart L-BFGS-B, detecção de órbitas de simetria e
verificação cruzada entre os dois problemas.
"""
import itertools
from dataclasses import dataclass, field, asdict
from typing import Callable, Sequence
import numpy as np
from scipy.optimize import brentq, fmin_l_bfgs_b
from .bubble import FracDims, stationary_lambda
from .energy import upsilon_2
from .errors import NumericError, UsageError
from .green import GreenEvaluator, finite_gradient
from .log import log
from .report import RateReport, make_case
from .types import FloatArray


PENALTY_REACH = 1.2
TIE_TOLERANCE = 1e-8


@dataclass
class CriticalPoint:
    """
    Ponto crítico encontrado pelo multistart.

    Attributes:
        objective: 'varphi' ou 'upsilon2'.
        location: Vetor de parâmetros (sigma_1, sigma_2) ou (lambda_1, lambda_2, sigma_1, sigma_2).
        value: Valor do objetivo (sem penalidade).
        gradient_norm: Norma do gradiente do objetivo no ponto.
        hessian_pd: Hessiana numérica positiva definida.
        multiplicity_note: Descrição da órbita de simetria detectada.
        orbit: Pontos da órbita com o mesmo valor.
        tied: Representantes de outras órbitas empatadas.
        boundary_hit: O ponto toca a fronteira das restrições.
        converged: gradient_norm <= tol_grad.
        starts: Número de pontos iniciais.
    """

    objective: str
    location: list[float]
    value: float
    gradient_norm: float
    hessian_pd: bool
    multiplicity_note: str = ''
    orbit: list[list[float]] = field(default_factory=list)
    tied: list[list[float]] = field(default_factory=list)
    boundary_hit: bool = False
    converged: bool = False
    starts: int = 0
    tol_grad: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def location_array(self) -> FloatArray:
        return np.asarray(self.location)


class _Problem:
    """Objetivo com penalidade de separação, limites e simetrias, para um dos dois funcionais."""

    def __init__(self, ev: GreenEvaluator, eta: float, n_lambda: int, objective: Callable[[FloatArray], float]) -> None:
        self.ev = ev
        self.N = ev.basis.N
        self.eta = eta
        self.n_lambda = n_lambda
        self.objective = objective
        lengths = ev.basis.domain.lengths
        self.bounds = [(eta, 1 / eta)] * n_lambda + [(eta, L - eta) for L in lengths] * 2
        self.scale = 1.0

    def split(self, z: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
        lam = z[:self.n_lambda]
        s1 = z[self.n_lambda:self.n_lambda + self.N]
        s2 = z[self.n_lambda + self.N:]
        return lam, s1, s2

    def penalty(self, z: FloatArray) -> tuple[float, FloatArray]:
        _, s1, s2 = self.split(z)
        d = float(np.linalg.norm(s1 - s2))
        reach = PENALTY_REACH * self.eta
        grad = np.zeros_like(z)
        if d >= reach:
            return 0.0, grad
        weight = 1e3 * self.scale / self.eta ** 3
        gap = reach - d
        direction = (s1 - s2) / max(d, 1e-300)
        g = -3 * weight * gap ** 2 * direction
        grad[self.n_lambda:self.n_lambda + self.N] = g
        grad[self.n_lambda + self.N:] = -g
        return weight * gap ** 3, grad

    def value(self, z: FloatArray) -> float:
        return self.objective(z) + self.penalty(z)[0]

    def gradient(self, z: FloatArray, order: int = 2) -> FloatArray:
        return finite_gradient(self.objective, z, self.ev.h_grad, order)

    def value_and_gradient(self, z: FloatArray) -> tuple[float, FloatArray]:
        pen, pen_grad = self.penalty(z)
        return self.objective(z) + pen, self.gradient(z) + pen_grad

    def on_boundary(self, z: FloatArray) -> bool:
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        _, s1, s2 = self.split(z)
        touching = np.any(np.isclose(z, lo, rtol=0, atol=1e-9) | np.isclose(z, hi, rtol=0, atol=1e-9))
        return bool(touching or np.linalg.norm(s1 - s2) <= PENALTY_REACH * self.eta)

    def symmetries(self) -> list[Callable[[FloatArray], FloatArray]]:
        """Grupo gerado pelas reflexões da caixa, permutações de lados iguais e troca das bolhas."""
        lengths = np.asarray(self.ev.basis.domain.lengths)
        N, k = self.N, self.n_lambda
        perms = [p for p in itertools.permutations(range(N)) if np.allclose(lengths[list(p)], lengths)]
        maps = []
        for flips in itertools.product((False, True), repeat=N):
            for perm in perms:
                for swap in (False, True):
                    def g(z: FloatArray, flips=flips, perm=perm, swap=swap) -> FloatArray:
                        lam, s1, s2 = self.split(np.asarray(z, dtype=float))
                        out = []
                        for s in (s1, s2):
                            t = s[list(perm)]
                            out.append(np.where(flips, lengths - t, t))
                        if swap:
                            lam, out = lam[::-1], out[::-1]
                        return np.concatenate([lam, *out])
                    maps.append(g)
        return maps

    def orbit(self, z: FloatArray) -> list[FloatArray]:
        members: list[FloatArray] = []
        for g in self.symmetries():
            image = g(z)
            if not any(np.allclose(image, m, rtol=0, atol=1e-8) for m in members):
                members.append(image)
        return sorted(members, key=tuple)

    def hessian(self, z: FloatArray) -> FloatArray:
        h = self.ev.h_grad * 10
        n = z.size
        hess = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            hess[:, i] = (self.gradient(z + e) - self.gradient(z - e)) / (2 * h)
        return 0.5 * (hess + hess.T)


def _multistart(problem: _Problem, seeds: Sequence[FloatArray], tol_grad: float, name: str) -> CriticalPoint:
    if len(seeds) < 1:
        raise UsageError("O multistart exige pelo menos um ponto inicial")
    problem.scale = max(abs(problem.objective(np.asarray(seeds[0], dtype=float))), 1e-12)
    tol = tol_grad * problem.scale

    results = []
    for x0 in seeds:
        x, _, info = fmin_l_bfgs_b(problem.value_and_gradient, np.asarray(x0, dtype=float),
                                   bounds=problem.bounds, pgtol=tol, factr=10.0, maxiter=500)
        value = problem.objective(x)
        results.append((value, tuple(float(v) for v in x), problem.on_boundary(x)))
        log.debug(f"{name}: início {np.round(x0, 4).tolist()} -> {value:.12g} ({info['task']})")

    interior = [r for r in results if not r[2]]
    if not interior:
        log.flag(f"{name}: todos os inícios terminaram na fronteira das restrições; "
                    f"eta grande demais ou série sub-resolvida")
        interior = results
    # Mínimo por valor e, entre empates, lexicográfico
    best_value = min(r[0] for r in interior)
    tie = TIE_TOLERANCE * max(abs(best_value), 1.0)
    tied_points = sorted({r[1] for r in interior if r[0] - best_value <= tie})

    orbits: list[list[FloatArray]] = []
    for point in tied_points:
        z = np.asarray(point)
        if not any(any(np.allclose(z, m, rtol=0, atol=1e-6) for m in orbit) for orbit in orbits):
            orbits.append(problem.orbit(z))
    representatives = [min((tuple(m) for m in orbit)) for orbit in orbits]
    location = np.asarray(min(representatives))
    primary_orbit = next(o for o in orbits if any(np.allclose(location, m, atol=1e-12) for m in o))

    grad_norm = float(np.linalg.norm(problem.gradient(location)))
    hess_pd = bool(np.all(np.linalg.eigvalsh(problem.hessian(location)) > 0))
    note = f"órbita de {len(primary_orbit)} ponto(s) sob as simetrias da caixa e a troca das bolhas"
    if len(orbits) > 1:
        note += f"; {len(orbits)} órbitas empatadas dentro de {tie:.1e}"
    converged = grad_norm <= tol
    if not converged:
        log.flag(f"{name}: norma do gradiente {grad_norm:.3e} acima da tolerância {tol:.3e}")

    return CriticalPoint(
        objective=name, location=location.tolist(), value=float(problem.objective(location)),
        gradient_norm=grad_norm, hessian_pd=hess_pd, multiplicity_note=note,
        orbit=[m.tolist() for m in primary_orbit], tied=[list(r) for r in representatives if r != tuple(location)],
        boundary_hit=problem.on_boundary(location), converged=converged, starts=len(seeds), tol_grad=tol,
    )


def sigma_seeds(ev: GreenEvaluator, eta: float, per_axis: int = 5) -> list[FloatArray]:
    """Grade tensorial de per_axis valores por coordenada livre, dentro do conjunto admissível."""
    axes = [np.linspace(eta, L - eta, per_axis) for L in ev.basis.domain.lengths] * 2
    N = ev.basis.N
    seeds = []
    for z in itertools.product(*axes):
        z = np.asarray(z)
        s1, s2 = z[:N], z[N:]
        # Só um representante por troca das bolhas
        if np.linalg.norm(s1 - s2) > eta and tuple(s1) < tuple(s2):
            seeds.append(z)
    return seeds


def _check_eta(ev: GreenEvaluator, eta: float) -> None:
    if not 0 < eta < 0.5 * ev.basis.domain.min_side:
        raise UsageError(f"eta deve estar em (0, {0.5 * ev.basis.domain.min_side}), recebido {eta}")


def _varphi_objective(ev: GreenEvaluator) -> Callable[[FloatArray], float]:
    N = ev.basis.N
    return lambda z: ev.varphi(z[:N], z[N:])


@log.step("Minimizando varphi em Omega x Omega")
def minimize_varphi(ev: GreenEvaluator, eta: float, seeds: Sequence[FloatArray] | None = None,
                    tol_grad: float = 1e-7, per_axis: int = 5) -> CriticalPoint:
    _check_eta(ev, eta)
    problem = _Problem(ev, eta, 0, _varphi_objective(ev))
    seeds = seeds if seeds is not None else sigma_seeds(ev, eta, per_axis)
    return _multistart(problem, seeds, tol_grad, 'varphi')


def _upsilon2_objective(ev: GreenEvaluator, dims: FracDims) -> Callable[[FloatArray], float]:
    N = ev.basis.N
    return lambda z: upsilon_2(ev, dims, z[:2], (z[2:2 + N], z[2 + N:]))


@log.step("Minimizando Upsilon_2 em (lambda, sigma)")
def minimize_upsilon2(ev: GreenEvaluator, dims: FracDims, eta: float, seeds: Sequence[FloatArray] | None = None,
                      tol_grad: float = 1e-7, per_axis: int = 5) -> CriticalPoint:
    """
    Minimiza Upsilon_2. Sem seeds explícitos, cada par de centros da grade recebe as escalas
    estacionárias de bolhas isoladas, limitadas a [eta, 1/eta].
    """
    _check_eta(ev, eta)
    problem = _Problem(ev, eta, 2, _upsilon2_objective(ev, dims))
    if seeds is None:
        N = ev.basis.N
        seeds = []
        for z in sigma_seeds(ev, eta, per_axis):
            lams = [np.clip(stationary_lambda(dims, ev.robin(s)), eta, 1 / eta) for s in (z[:N], z[N:])]
            seeds.append(np.concatenate([lams, z]))
    return _multistart(problem, seeds, tol_grad, 'upsilon2')


def lambda_partials(ev: GreenEvaluator, dims: FracDims, lambdas: Sequence[float], sigmas: Sequence[FloatArray]) -> FloatArray:
    """Derivadas analíticas de Upsilon_2 em lambda_1 e lambda_2 com sigma fixo."""
    b = dims.N - 2 * dims.s
    beta = b / 2
    l1, l2 = lambdas
    H1, H2 = ev.robin(sigmas[0]), ev.robin(sigmas[1])
    G = ev.green(sigmas[0], sigmas[1])
    log_coef = dims.c0 * b / (dims.p + 1)
    d1 = dims.c1 ** 2 * (b * l1 ** (b - 1) * H1 + 2 * G * beta * l1 ** (beta - 1) * l2 ** beta) - log_coef / l1
    d2 = dims.c1 ** 2 * (b * l2 ** (b - 1) * H2 + 2 * G * beta * l2 ** (beta - 1) * l1 ** beta) - log_coef / l2
    return np.array([d1, d2])


def lambda_stationary_root(ev: GreenEvaluator, dims: FracDims, sigmas: Sequence[FloatArray],
                           eta: float, tol: float = 1e-13, max_sweeps: int = 200) -> FloatArray:
    """
    Resolve as duas equações de estacionariedade em lambda por varreduras de Gauss-Seidel, cada
    uma com busca de raiz unidimensional (brentq) na outra escala fixa.
    """
    lams = np.array([stationary_lambda(dims, ev.robin(s)) for s in sigmas])
    for _ in range(max_sweeps):
        previous = lams.copy()
        for i in range(2):
            def partial(x: float, i: int = i) -> float:
                trial = lams.copy()
                trial[i] = x
                return lambda_partials(ev, dims, trial, sigmas)[i]
            lo, hi = eta / 100, 100 / eta
            if partial(lo) * partial(hi) > 0:
                raise NumericError(f"Sem mudança de sinal da derivada em lambda_{i + 1} no intervalo [{lo}, {hi}]")
            lams[i] = brentq(partial, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        if np.max(np.abs(lams - previous)) <= tol * np.max(lams):
            return lams
    raise NumericError("Varreduras de Gauss-Seidel em lambda não convergiram")


def minimize_lambdas(ev: GreenEvaluator, dims: FracDims, sigmas: Sequence[FloatArray], eta: float,
                     tol_grad: float = 1e-10) -> FloatArray:
    """Subproblema em lambda com sigma congelado (L-BFGS-B com gradiente analítico)."""
    s1, s2 = (np.asarray(s, dtype=float) for s in sigmas)

    def f(lams: FloatArray) -> tuple[float, FloatArray]:
        return upsilon_2(ev, dims, lams, (s1, s2)), lambda_partials(ev, dims, lams, (s1, s2))

    x0 = np.array([np.clip(stationary_lambda(dims, ev.robin(s)), eta, 1 / eta) for s in (s1, s2)])
    x, _, _ = fmin_l_bfgs_b(f, x0, bounds=[(eta, 1 / eta)] * 2, pgtol=tol_grad, factr=1.0, maxiter=1000)
    return x


@log.step("Verificando a criticidade de sigma* em varphi")
def verify_sigma_criticality(ev: GreenEvaluator, cp: CriticalPoint, varphi_min: CriticalPoint,
                             tol_grad: float = 1e-7) -> RateReport:
    """
    Confere que o sigma* de um minimizador de Upsilon_2 é crítico e minimizante para varphi,
    tomando o melhor membro da órbita de simetria.
    """
    if cp.objective != 'upsilon2':
        raise UsageError("A verificação exige um ponto crítico de Upsilon_2")
    N = ev.basis.N
    candidates = [np.asarray(m)[2:] for m in (cp.orbit or [cp.location])]
    best = None
    for sigma in candidates:
        s1, s2 = sigma[:N], sigma[N:]
        grad = float(np.linalg.norm(ev.grad_varphi(s1, s2)))
        gap = float(ev.varphi(s1, s2) - varphi_min.value)
        if best is None or (grad, gap) < best[:2]:
            best = (grad, gap, sigma)
    grad, gap, sigma = best
    scale = max(abs(varphi_min.value), 1e-12)

    report = RateReport(title='sigma_criticality')
    report.add(make_case('concentration', 'varphi_gradient', 'check', 10 * tol_grad * scale, [], [grad],
                         sigma=sigma.tolist()))
    report.add(make_case('concentration', 'varphi_gap', 'check', 1e-6 * scale, [], [abs(gap)],
                         signed_gap=gap))
    return report


def brute_force_varphi(ev: GreenEvaluator, eta: float, n: int = 200) -> tuple[FloatArray, float]:
    """Argmin de varphi numa grade n x n (N = 1), como oráculo exaustivo."""
    if ev.basis.N != 1:
        raise UsageError("A busca exaustiva de varphi está disponível apenas para N = 1")
    x, _, values = varphi_grid(ev, eta, n)
    i, j = np.unravel_index(np.nanargmin(values), values.shape)
    return np.array([x[i], x[j]]), float(values[i, j])


def varphi_grid(ev: GreenEvaluator, eta: float, n: int = 60) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Valores de varphi numa grade (sigma_1, sigma_2) em [eta, L - eta]^2 (N = 1); NaN fora de O_eta."""
    if ev.basis.N != 1:
        raise UsageError("O mapa de varphi está disponível apenas para N = 1")
    L = ev.basis.domain.lengths[0]
    x = np.linspace(eta, L - eta, n)
    robin = np.array([ev.robin([v]) for v in x])
    values = np.full((n, n), np.nan)
    points = x[:, np.newaxis]
    for j, y in enumerate(x):
        mask = np.abs(x - y) > eta
        if np.any(mask):
            values[mask, j] = np.sqrt(robin[mask] * robin[j]) + ev.green_many(points[mask], [y])
    return x, x, values
