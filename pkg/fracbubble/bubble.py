"""
Família de bolhas w_{lambda,xi}, suas derivadas em lambda e xi, a não linearidade f_eps
e as constantes que dependem apenas de (N, s).
"""
from dataclasses import dataclass, field
import numpy as np
from scipy import integrate, special
from .errors import ConfigurationError, NumericError
from .log import log
from .types import FloatArray, Point
from .utils import check_order


SOBOLEV_MISMATCH_TOL = 1e-6


@dataclass(frozen=True)
class FracDims:
    N: int
    s: float
    p: float
    alpha0: float
    a_Ns: float
    c_Ns: float
    c0: float
    c1: float
    c_log: float
    S_Ns: float
    S_gamma: float
    amplitude_source: str = 'closed-form'

    @property
    def beta(self) -> float:
        """Expoente de decaimento (N - 2s)/2 da bolha."""
        return (self.N - 2 * self.s) / 2

    @property
    def sobolev_mismatch(self) -> float:
        return abs(self.S_gamma - self.S_Ns) / abs(self.S_Ns)

    @property
    def sobolev_flagged(self) -> bool:
        return self.sobolev_mismatch > SOBOLEV_MISMATCH_TOL

    def to_dict(self) -> dict:
        return {
            'N': self.N, 's': self.s, 'p': self.p, 'alpha0': self.alpha0,
            'a_Ns': self.a_Ns, 'c_Ns': self.c_Ns, 'c0': self.c0, 'c1': self.c1,
            'c_log': self.c_log, 'S_Ns': self.S_Ns, 'S_gamma': self.S_gamma,
            'sobolev_mismatch': self.sobolev_mismatch, 'sobolev_flagged': self.sobolev_flagged,
            'amplitude_source': self.amplitude_source,
        }


@dataclass(frozen=True)
class BubbleParams:
    lam: float
    xi: FloatArray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ConfigurationError(f"A escala de concentração lambda deve ser positiva, recebido {self.lam}")
        object.__setattr__(self, 'xi', np.atleast_1d(np.asarray(self.xi, dtype=float)))


def critical_exponent(N: int, s: float) -> float:
    return (N + 2 * s) / (N - 2 * s)


def closed_form_amplitude(N: int, s: float) -> float:
    """a_{N,s} = 2^{(N-2s)/2} [Gamma((N+2s)/2) / Gamma((N-2s)/2)]^{(N-2s)/(4s)}."""
    ratio = special.gamma((N + 2 * s) / 2) / special.gamma((N - 2 * s) / 2)
    return 2 ** ((N - 2 * s) / 2) * ratio ** ((N - 2 * s) / (4 * s))


def free_kernel_constant(N: int, s: float) -> float:
    """c_{N,s} = 2^{1-2s} Gamma((N-2s)/2) / (2 pi^{N/2} Gamma(s))."""
    return 2 ** (1 - 2 * s) * special.gamma((N - 2 * s) / 2) / (2 * np.pi ** (N / 2) * special.gamma(s))


def sobolev_gamma_formula(N: int, s: float) -> float:
    """Constante de Sobolev pela fórmula com funções Gamma."""
    return (2 ** (-s) * np.pi ** (-s / 2)
            * np.sqrt(special.gamma((N - 2 * s) / 2) / special.gamma((N + 2 * s) / 2))
            * (special.gamma(N) / special.gamma(N / 2)) ** (s / N))


def sphere_area(N: int) -> float:
    """Área de S^{N-1}; vale 2 para N = 1."""
    return 2 * np.pi ** (N / 2) / special.gamma(N / 2)


def radial_integral(N: int, profile, rtol: float = 1e-12) -> float:
    """
    Integra uma função radial em R^N com a troca r = t/(1-t) e quadratura adaptativa.

    Args:
        N: Dimensão.
        profile: Função de r >= 0 (vetorizada ou escalar).
        rtol: Tolerância relativa.
    """

    def integrand(t: float) -> float:
        if t >= 1.0:
            return 0.0
        r = t / (1 - t)
        return float(profile(r)) * r ** (N - 1) / (1 - t) ** 2

    pieces = []
    for a, b in ((0.0, 0.5), (0.5, 0.9), (0.9, 1.0)):
        value, err = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=rtol, limit=500)
        pieces.append((value, err))

    value = sum(v for v, _ in pieces)
    err = sum(e for _, e in pieces)
    if not np.isfinite(value) or err > 1e3 * rtol * max(abs(value), 1e-300):
        raise NumericError(
            f"Quadratura radial não convergiu (valor={value}, erro estimado={err})",
            diagnostics={'value': value, 'error': err, 'rtol': rtol},
        )
    return sphere_area(N) * value


@log.step("Calculando constantes de (N, s)")
def compute_constants(N: int, s: float, amplitude: float | None = None) -> FracDims:
    """
    Calcula todas as constantes dependentes de (N, s).

    Args:
        N: Dimensão, N >= 1.
        s: Ordem em (0, 1), com N > 2s.
        amplitude: Sobrescreve a_{N,s} (controle negativo da calibração).
    """

    check_order(s)
    if N < 1 or not N > 2 * s:
        raise ConfigurationError(f"N > 2s violated: N={N}, s={s}")

    p = critical_exponent(N, s)
    beta = (N - 2 * s) / 2
    a = closed_form_amplitude(N, s) if amplitude is None else float(amplitude)

    def w(r):
        return a * (1.0 / (1.0 + r * r)) ** beta

    c0 = radial_integral(N, lambda r: w(r) ** (p + 1))
    c1 = radial_integral(N, lambda r: w(r) ** p)
    c_log = radial_integral(N, lambda r: w(r) ** (p + 1) * np.log(w(r)))

    S_derived = c0 ** (-s / N)
    S_gamma = sobolev_gamma_formula(N, s)

    dims = FracDims(
        N=N, s=s, p=p, alpha0=1.0 / (N - 2 * s), a_Ns=a, c_Ns=free_kernel_constant(N, s),
        c0=c0, c1=c1, c_log=c_log, S_Ns=S_derived, S_gamma=S_gamma,
        amplitude_source='closed-form' if amplitude is None else 'override',
    )
    if dims.sobolev_flagged:
        log.flag(
            f"Constante de Sobolev: fórmula Gamma {S_gamma:.12g} difere de c0^(-s/N) {S_derived:.12g} "
            f"(relativo {dims.sobolev_mismatch:.3e}); usando c0^(-s/N)"
        )
    return dims


def _offsets(x: Point, xi: FloatArray) -> FloatArray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or (xi.size == 1 and x.shape[-1:] != (1,)):
        x = x[..., np.newaxis]
    return x - xi


def bubble_value(dims: FracDims, params: BubbleParams, x: Point) -> FloatArray | float:
    """w_{lambda,xi}(x) = a_{N,s} (lambda / (lambda^2 + |x - xi|^2))^{(N-2s)/2}."""
    d = _offsets(x, params.xi)
    r2 = np.sum(d * d, axis=-1)
    return dims.a_Ns * (params.lam / (params.lam ** 2 + r2)) ** dims.beta


def bubble_gradients(dims: FracDims, params: BubbleParams, x: Point) -> tuple[FloatArray, FloatArray]:
    """
    Derivadas da bolha em lambda (psi0) e em xi_j (psi[..., j]).

    Returns:
        (psi0, psi) com psi no último eixo indexado por j = 1..N.
    """
    d = _offsets(x, params.xi)
    r2 = np.sum(d * d, axis=-1)
    lam = params.lam
    b = dims.beta
    denom = (lam ** 2 + r2) ** (b + 1)
    psi0 = dims.a_Ns * b * lam ** (b - 1) * (r2 - lam ** 2) / denom
    psi = dims.a_Ns * (dims.N - 2 * dims.s) * lam ** b * d / denom[..., np.newaxis]
    return psi0, psi


def bubble_component(dims: FracDims, params: BubbleParams, x: Point, j: int) -> FloatArray:
    """w (j = -1), psi0 (j = 0) ou psi^j (j = 1..N) em x."""
    if j < 0:
        return bubble_value(dims, params, x)
    psi0, psi = bubble_gradients(dims, params, x)
    return psi0 if j == 0 else psi[..., j - 1]


def _check_eps(dims: FracDims, eps: float) -> None:
    if eps < 0 or not eps < dims.p - 1:
        raise ConfigurationError(f"epsilon deve estar em [0, p - 1) = [0, {dims.p - 1}), recebido {eps}")


def f_eps(dims: FracDims, eps: float, t):
    """f_eps(t) = |t|^{p-1-eps} t."""
    _check_eps(dims, eps)
    t = np.asarray(t, dtype=float)
    return np.abs(t) ** (dims.p - 1 - eps) * t


def f_eps_prime(dims: FracDims, eps: float, t):
    """f_eps'(t) = (p - eps) |t|^{p-1-eps}; vale 0 em t = 0."""
    _check_eps(dims, eps)
    t = np.asarray(t, dtype=float)
    return (dims.p - eps) * np.abs(t) ** (dims.p - 1 - eps)


def f_eps_second(dims: FracDims, eps: float, t):
    _check_eps(dims, eps)
    t = np.asarray(t, dtype=float)
    q = dims.p - 1 - eps
    with np.errstate(divide='ignore', invalid='ignore'):
        out = (dims.p - eps) * q * np.sign(t) * np.abs(t) ** (q - 1)
    return np.where(t == 0, 0.0, out)


def stationary_lambda(dims: FracDims, robin: float) -> float:
    """Escala estacionária de uma bolha isolada: lambda^{N-2s} = c0 / ((p+1) c1^2 H(sigma, sigma))."""
    if robin <= 0:
        raise NumericError(f"Função de Robin não positiva ({robin}); série sub-resolvida")
    return (dims.c0 / ((dims.p + 1) * dims.c1 ** 2 * robin)) ** dims.alpha0
