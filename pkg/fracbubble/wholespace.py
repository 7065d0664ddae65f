"""
Oráculo em R^N: laplaciano fracionário pela integral de valor principal, independente da
base espectral. Serve para validar a amplitude a_{N,s}, a equação da bolha, o núcleo do
linearizado e a identidade de Sobolev.

Para N = 1 as funções recebem a coordenada real. Para N >= 2 só tratamos integrandos
axissimétricos em torno da reta que passa por 0 e por x: a função recebe (z, d), onde z é
a componente ao longo de x/|x| e d = |y|. Radiais ignoram z; psi^j usa x sobre o eixo e_j.
"""
import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable
import numpy as np
from scipy import integrate, special
from .bubble import FracDims, closed_form_amplitude, sphere_area, radial_integral
from .errors import CalibrationError, NumericError, UsageError
from .log import log
from .report import RateReport, make_case
from .spectral import gauss_legendre_panels, PANEL_ORDER
from .types import FloatArray
from .utils import check_order


BUBBLE_TOL = 1e-3
KERNEL_TOL = 1e-3
CALIBRATION_TOL = 1e-3
NORMALIZATION_TOL = 1e-4
REFINEMENT_TOL = 1e-4
LAPLACIAN_STEP = 1e-3

Profile = Callable[..., FloatArray]


def pv_constant(N: int, s: float) -> float:
    """C(N,s) = 4^s Gamma(N/2 + s) / (pi^{N/2} |Gamma(-s)|)."""
    return 4 ** s * special.gamma(N / 2 + s) / (np.pi ** (N / 2) * abs(special.gamma(-s)))


@dataclass(frozen=True)
class PVQuadrature:
    """
    Regra para C(N,s) |S^{N-1}| int_0^inf r^{-1-2s} [u(x) - media_esfera u(x + r theta)] dr.

    Em [0, r0] usa a correção de Taylor de segunda ordem, em [r0, R] painéis de
    Gauss-Legendre com espaçamento logarítmico e em [R, inf) a troca r = R/t com peso
    algébrico t^{2s-1}.

    Com os padrões, 250 nós por década nas 8 décadas de [r0, R] somam 2000 nós log-espaçados.
    """

    inner_cutoff: float = 1e-4
    outer_cutoff: float = 1e4
    nodes_per_decade: int = 250
    angular_nodes: int = 24

    def __post_init__(self) -> None:
        if not 0 < self.inner_cutoff < self.outer_cutoff:
            raise UsageError(f"Cortes inválidos: r0={self.inner_cutoff}, R={self.outer_cutoff}")
        if self.nodes_per_decade < PANEL_ORDER:
            raise UsageError(f"São necessários ao menos {PANEL_ORDER} nós por década")

    @classmethod
    def from_run_config(cls, cfg) -> 'PVQuadrature':
        return cls(cfg.pv_inner_cutoff, cfg.pv_outer_cutoff, cfg.pv_nodes_per_decade)

    def refined(self) -> 'PVQuadrature':
        return replace(self, inner_cutoff=self.inner_cutoff / 2, outer_cutoff=self.outer_cutoff * 2,
                       nodes_per_decade=2 * self.nodes_per_decade, angular_nodes=2 * self.angular_nodes)

    def radial_nodes(self) -> tuple[FloatArray, FloatArray]:
        lo, hi = math.log10(self.inner_cutoff), math.log10(self.outer_cutoff)
        panels = max(1, math.ceil((hi - lo) * self.nodes_per_decade / PANEL_ORDER))
        return gauss_legendre_panels(np.logspace(lo, hi, panels + 1))

    def angular_rule(self, N: int) -> tuple[FloatArray, FloatArray]:
        """Nós em t = cos(angulo) com densidade (1 - t^2)^{(N-3)/2}, pesos somando 1."""
        alpha = (N - 3) / 2
        t, w = special.roots_jacobi(self.angular_nodes, alpha, alpha)
        return t, w / w.sum()

    def to_dict(self) -> dict:
        return {'inner_cutoff': self.inner_cutoff, 'outer_cutoff': self.outer_cutoff,
                'nodes_per_decade': self.nodes_per_decade, 'angular_nodes': self.angular_nodes}


def radial(profile: Callable[[FloatArray], FloatArray]) -> Profile:
    """Adapta um perfil radial d -> U(d) à convenção (z, d)."""
    return lambda z, d: profile(d)


def axial(profile: Callable[[FloatArray], FloatArray]) -> Profile:
    """y -> y_j R(|y|), avaliada com x sobre o eixo e_j."""
    return lambda z, d: z * profile(d)


def _radius(x, N: int) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if N == 1:
        if x.size != 1:
            raise UsageError(f"Ponto de R^1 esperado, recebido {x.tolist()}")
        return float(x[0])
    if x.size == 1:
        return abs(float(x[0]))
    if x.size != N:
        raise UsageError(f"Ponto de R^{N} esperado, recebido {x.tolist()}")
    return float(np.linalg.norm(x))


def _center_value(u: Profile, x: float, N: int) -> float:
    if N == 1:
        return float(np.asarray(u(np.array([x])))[0])
    return float(np.asarray(u(np.array([x]), np.array([abs(x)])))[0])


def _sphere_average(q: PVQuadrature, u: Profile, x: float, r: FloatArray, N: int) -> FloatArray:
    r = np.asarray(r, dtype=float)
    if N == 1:
        return 0.5 * (u(x + r) + u(x - r))
    t, w = q.angular_rule(N)
    rr = r[:, np.newaxis]
    z = x + rr * t
    d = np.sqrt(np.maximum(x * x + rr * rr + 2 * x * rr * t, 0.0))
    return np.asarray(u(z, d)) @ w


def frac_lap_pv(q: PVQuadrature, u: Profile, x, dims: FracDims, check_refinement: bool = False) -> float:
    """
    Laplaciano fracionário de u em x pela integral de valor principal.

    Args:
        q: Regra de quadratura.
        u: Função vetorizada (ver convenção do módulo).
        x: Ponto de avaliação; para N >= 2 apenas |x| é usado.
        dims: Constantes de (N, s).
        check_refinement: Repete o cálculo com a regra refinada e exige concordância.
    """

    N, s = dims.N, dims.s
    check_order(s)
    rho = _radius(x, N)
    u0 = _center_value(u, rho, N)
    factor = pv_constant(N, s) * sphere_area(N)

    # perto de r = 0: u(x) - media ~ -lap u r^2 / (2N)
    h = LAPLACIAN_STEP
    lap = 2 * N * (float(_sphere_average(q, u, rho, np.array([h]), N)[0]) - u0) / h ** 2
    r0, R = q.inner_cutoff, q.outer_cutoff
    near = -lap / (2 * N) * r0 ** (2 - 2 * s) / (2 - 2 * s)

    nodes, weights = q.radial_nodes()
    middle = float(np.sum(weights * nodes ** (-1 - 2 * s) * (u0 - _sphere_average(q, u, rho, nodes, N))))

    def tail_integrand(t: float) -> float:
        if t <= 0.0:
            return u0
        return u0 - float(_sphere_average(q, u, rho, np.array([R / t]), N)[0])

    with warnings.catch_warnings():
        warnings.simplefilter('error', integrate.IntegrationWarning)
        try:
            tail, _ = integrate.quad(tail_integrand, 0.0, 1.0, weight='alg', wvar=(2 * s - 1, 0.0), limit=200)
        except integrate.IntegrationWarning as e:
            raise NumericError(f"Cauda da integral de valor principal não convergiu em x={rho}: {e}") from e
    tail *= R ** (-2 * s)

    value = factor * (near + middle + tail)
    if not np.isfinite(value):
        raise NumericError(f"Valor principal não finito em x={rho}", diagnostics={'near': near, 'middle': middle})

    if check_refinement:
        fine = frac_lap_pv(q.refined(), u, x, dims)
        change = abs(fine - value) / max(abs(fine), 1e-300)
        if change > REFINEMENT_TOL:
            raise NumericError(
                f"Refinamento da quadratura alterou o valor principal em {change:.3e} (relativo) em x={rho}",
                diagnostics={'coarse': value, 'fine': fine},
            )
    return value


def gaussian_frac_lap(N: int, s: float, x) -> float:
    """(-Delta)^s exp(-|x|^2) = 4^s Gamma(N/2+s)/Gamma(N/2) 1F1(N/2+s; N/2; -|x|^2)."""
    r = abs(_radius(x, N))
    return float(4 ** s * special.gamma(N / 2 + s) / special.gamma(N / 2) * special.hyp1f1(N / 2 + s, N / 2, -r * r))


def gaussian_frac_lap_fourier(s: float, x: float) -> float:
    """Mesmo valor em N = 1 pelo lado de Fourier: (1/pi) int_0^inf xi^{2s} sqrt(pi) e^{-xi^2/4} cos(xi x) dxi."""

    def symbol(xi: float) -> float:
        return xi ** (2 * s) * math.sqrt(math.pi) * math.exp(-xi * xi / 4)

    if x == 0:
        value, _ = integrate.quad(symbol, 0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    else:
        value, _ = integrate.quad(symbol, 0.0, np.inf, weight='cos', wvar=abs(x), limlst=200)
    return value / math.pi


def _gaussian(N: int) -> Profile:
    if N == 1:
        return lambda y: np.exp(-y * y)
    return radial(lambda d: np.exp(-d * d))


def _unit_profile(dims: FracDims, lam: float = 1.0) -> Callable[[FloatArray], FloatArray]:
    return lambda d: (lam / (lam * lam + d * d)) ** dims.beta


def _as_profile(dims: FracDims, radial_func: Callable[[FloatArray], FloatArray]) -> Profile:
    if dims.N == 1:
        return lambda y: radial_func(np.abs(y))
    return radial(radial_func)


@log.step("Validando a normalização C(N,s) com a gaussiana")
def validate_normalization(q: PVQuadrature, dims: FracDims, points=(0.0, 1.0)) -> RateReport:
    report = RateReport(title='pv_normalization')
    g = _gaussian(dims.N)
    values = [frac_lap_pv(q, g, x, dims) for x in points]
    errors = []
    for x, value in zip(points, values):
        reference = gaussian_frac_lap(dims.N, dims.s, x)
        errors.append(abs(value - reference) / abs(reference))
    report.add(make_case('wholespace', 'pv_normalization', 'check', NORMALIZATION_TOL, [], [max(errors)],
                         points=list(points), relative_errors=errors))
    if dims.N == 1:
        fourier = [gaussian_frac_lap_fourier(dims.s, x) for x in points]
        fourier_errors = [abs(v - f) / abs(f) for v, f in zip(values, fourier)]
        report.add(make_case('wholespace', 'pv_normalization_fourier', 'check', NORMALIZATION_TOL, [],
                             [max(fourier_errors)], points=list(points), fourier=fourier,
                             relative_errors=fourier_errors))
    return report


def bubble_residuals(q: PVQuadrature, dims: FracDims, points, lam: float = 1.0) -> list[float]:
    """|PV(w_lambda)(x) - w_lambda(x)^p| / w_lambda(x)^p em cada ponto."""
    shape = _unit_profile(dims, lam)
    w = _as_profile(dims, lambda d: dims.a_Ns * shape(d))
    out = []
    for x in points:
        target = (dims.a_Ns * shape(np.array([abs(_radius(x, dims.N))]))[0]) ** dims.p
        out.append(abs(frac_lap_pv(q, w, x, dims) - target) / target)
    return out


@log.step("Verificando a equação da bolha em R^N")
def verify_bubble(q: PVQuadrature, dims: FracDims, points=(0.0, 0.5, 1.0, 2.0, 5.0),
                  strict: bool = False, refine: bool = False) -> RateReport:
    """
    Resíduo relativo de (-Delta)^s w = w^p para w = w_{1,0}.

    Raises:
        CalibrationError: Se strict e o resíduo máximo excede a tolerância.
    """

    report = RateReport(title='wholespace_bubble')
    residuals = bubble_residuals(q, dims, points)
    scaled = bubble_residuals(q, dims, [2.0 * _radius(x, dims.N) for x in points], lam=2.0)
    report.add(make_case('wholespace', 'bubble_residual', 'check', BUBBLE_TOL, [], [max(residuals)],
                         points=list(points), residuals=residuals, amplitude=dims.a_Ns))
    report.add(make_case('wholespace', 'bubble_residual_rescaled', 'check', BUBBLE_TOL, [], [max(scaled)],
                         lam=2.0, residuals=scaled))
    if refine:
        fine = bubble_residuals(q.refined(), dims, points)
        ratio = max(residuals) / max(max(fine), 1e-300)
        report.add(make_case('wholespace', 'bubble_refinement_ratio', 'check', 2.0, [], [max(ratio, 1.0 / ratio)],
                             fine=fine))

    if strict and not report.passed:
        raise CalibrationError(
            f"Equação da bolha não satisfeita: resíduo relativo {max(residuals):.3e} > {BUBBLE_TOL}",
            diagnostics={'residuals': residuals, 'amplitude': dims.a_Ns},
        )
    return report


@dataclass(frozen=True)
class AmplitudeCalibration:
    amplitude: float
    closed_form: float
    relative_difference: float
    by_lambda: dict[float, float]

    @property
    def flagged(self) -> bool:
        return self.relative_difference > CALIBRATION_TOL

    def to_dict(self) -> dict:
        return {'amplitude': self.amplitude, 'closed_form': self.closed_form,
                'relative_difference': self.relative_difference, 'flagged': self.flagged,
                'by_lambda': {str(k): v for k, v in self.by_lambda.items()}}


@log.step("Calibrando a amplitude a_{N,s} pelo valor principal")
def calibrate_amplitude(q: PVQuadrature, dims: FracDims, lambdas=(1.0, 2.0)) -> AmplitudeCalibration:
    """a^{p-1} = PV(perfil)(0) / perfil(0)^p no perfil de amplitude unitária."""
    by_lambda = {}
    for lam in lambdas:
        shape = _unit_profile(dims, lam)
        value = frac_lap_pv(q, _as_profile(dims, shape), 0.0, dims)
        at_zero = float(shape(np.array([0.0]))[0])
        if value <= 0:
            raise CalibrationError(f"Valor principal não positivo na origem ({value}) para lambda={lam}")
        by_lambda[float(lam)] = (value / at_zero ** dims.p) ** (1 / (dims.p - 1))

    amplitude = by_lambda[float(lambdas[0])]
    closed = closed_form_amplitude(dims.N, dims.s)
    result = AmplitudeCalibration(amplitude, closed, abs(amplitude - closed) / closed, by_lambda)
    if result.flagged:
        log.flag(f"Amplitude calibrada {amplitude:.10g} difere da forma fechada {closed:.10g} "
                    f"(relativo {result.relative_difference:.3e})")
    return result


def calibrate_amplitude_local(N: int, h: float = 1e-3) -> float:
    """Caso s = 1 pelo laplaciano local: a^{p-1} = -Delta U(0) com U = (1 + r^2)^{-(N-2)/2}."""
    if N < 3:
        raise UsageError(f"O caso local s = 1 exige N >= 3, recebido N={N}")
    beta = (N - 2) / 2

    def U(r: float) -> float:
        return (1 + r * r) ** (-beta)

    # perfil par: U''(0) ~ 2 (U(h) - U(0)) / h^2, com correção de Richardson
    second = (4 * (2 * (U(h / 2) - U(0)) / (h / 2) ** 2) - 2 * (U(h) - U(0)) / h ** 2) / 3
    lap = N * second
    return (-lap) ** ((N - 2) / 4)


@log.step("Verificando o núcleo do linearizado")
def verify_kernel(q: PVQuadrature, dims: FracDims, points=(0.3, 1.0, 2.0)) -> RateReport:
    """
    Resíduo de (-Delta)^s phi = p w^{p-1} phi para phi em {psi0, psi^1}, normalizado pelo
    máximo de |p w^{p-1} phi| nos pontos. A própria bolha serve de controle negativo.
    """

    N, a, b, p = dims.N, dims.a_Ns, dims.beta, dims.p

    def w_of(d):
        return a / (1 + d * d) ** b

    def psi0_of(d):
        return a * b * (d * d - 1) / (1 + d * d) ** (b + 1)

    def psij_of(d):
        return a * (N - 2 * dims.s) / (1 + d * d) ** (b + 1)

    if N == 1:
        candidates = {
            'psi0': (lambda y: psi0_of(np.abs(y)), lambda x: psi0_of(abs(x))),
            'psiJ': (lambda y: y * psij_of(np.abs(y)), lambda x: x * psij_of(abs(x))),
            'bubble': (lambda y: w_of(np.abs(y)), lambda x: w_of(abs(x))),
        }
    else:
        candidates = {
            'psi0': (radial(psi0_of), lambda x: psi0_of(x)),
            'psiJ': (axial(psij_of), lambda x: x * psij_of(x)),
            'bubble': (radial(w_of), lambda x: w_of(x)),
        }

    report = RateReport(title='wholespace_kernel')
    for name, (func, pointwise) in candidates.items():
        lhs, rhs = [], []
        for x in points:
            lhs.append(frac_lap_pv(q, func, x, dims))
            rhs.append(p * w_of(abs(x)) ** (p - 1) * pointwise(x))
        scale = max(abs(v) for v in rhs)
        residual = max(abs(l - r) for l, r in zip(lhs, rhs)) / scale
        if name == 'bubble':
            report.add(make_case('wholespace', 'kernel_negative_control', 'check', 10.0, [], [1.0 / residual],
                                 residual=residual))
        else:
            report.add(make_case('wholespace', f'kernel_{name}', 'check', KERNEL_TOL, [], [residual],
                                 points=list(points), lhs=lhs, rhs=rhs))
    return report


def _sobolev_ratio(quadratic: float, power: float, p: float) -> float:
    """||u||_{H^s} / ||u||_{L^{p+1}}."""
    return math.sqrt(quadratic) / power ** (1 / (p + 1))


@log.step("Verificando a identidade de Sobolev")
def verify_sobolev(dims: FracDims) -> RateReport:
    """
    Na bolha, int w (-Delta)^s w = int w^{p+1} = c0 e a razão de normas vale c0^{s/N}. A
    razão é invariante por escala e a gaussiana exp(-|x|^2) tem razão estritamente maior.
    """

    N, s, p, a, b = dims.N, dims.s, dims.p, dims.a_Ns, dims.beta
    report = RateReport(title='wholespace_sobolev')

    ratios = {}
    for lam in (1.0, 2.0):
        power = radial_integral(N, lambda r: (a * (lam / (lam * lam + r * r)) ** b) ** (p + 1))
        ratios[lam] = _sobolev_ratio(power, power, p)
    derived = dims.c0 ** (-s / N)
    report.add(make_case('wholespace', 'sobolev_derived_constant', 'check', 1e-8, [],
                         [abs(1.0 / ratios[1.0] - derived) / derived], derived=derived, gamma_formula=dims.S_gamma,
                         gamma_mismatch=dims.sobolev_mismatch))
    report.add(make_case('wholespace', 'sobolev_scale_invariance', 'check', 1e-8, [],
                         [abs(ratios[2.0] - ratios[1.0]) / ratios[1.0]], ratios=list(ratios.values())))

    quadratic = (np.pi / (2 * np.pi)) ** N * sphere_area(N) * 2 ** (s + N / 2 - 1) * special.gamma(s + N / 2)
    power = (np.pi / (p + 1)) ** (N / 2)
    gaussian = _sobolev_ratio(quadratic, power, p)
    report.add(make_case('wholespace', 'sobolev_gaussian_excess', 'check', 0.0, [], [ratios[1.0] - gaussian],
                         bubble_ratio=ratios[1.0], gaussian_ratio=gaussian))
    report.metadata['sobolev_flagged'] = dims.sobolev_flagged
    return report


@log.step("Executando o oráculo em R^N")
def wholespace_report(q: PVQuadrature, dims: FracDims) -> RateReport:
    """Normalização, equação da bolha, calibração, núcleo e Sobolev num único relatório."""
    report = RateReport(title='wholespace', metadata={'quadrature': q.to_dict()})
    report.extend(validate_normalization(q, dims))
    report.extend(verify_bubble(q, dims))

    calibration = calibrate_amplitude(q, dims)
    report.add(make_case('wholespace', 'amplitude_calibration', 'check', CALIBRATION_TOL, [],
                         [calibration.relative_difference], **calibration.to_dict()))
    report.add(make_case('wholespace', 'amplitude_lambda_independence', 'check', CALIBRATION_TOL, [],
                         [abs(calibration.by_lambda[2.0] - calibration.amplitude) / calibration.amplitude]))

    report.extend(verify_kernel(q, dims))
    report.extend(verify_sobolev(dims))
    return report
