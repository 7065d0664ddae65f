import os
import json
import logging
from datetime import datetime
from typing import Any
import numpy as np
from .bubble import FracDims, compute_constants, stationary_lambda
from .cache import DiskCache
from .config import RunConfig
from .controller import Controller
from .energy import ReducedConfig, energy_expansion_report
from .errors import CalibrationError, ConfigurationError, VerificationError
from .expansions import SUITES, expansion_report
from .green import GreenEvaluator
from .log import LogManager, log
from .optimizer import CriticalPoint, minimize_upsilon2, minimize_varphi, varphi_grid, verify_sigma_criticality
from .reduction import assemble_and_residual, build_reduction, coercivity_check, solve_phi, phi_rate_report
from .report import (RateReport, write_heatmap_svg, write_json, write_profile_svg, write_report_csv,
                     write_report_json, write_report_svg, write_rows_csv)
from .spectral import BoxDomain, SpectralBasis, build_basis, evaluate
from .wholespace import CALIBRATION_TOL, PVQuadrature, calibrate_amplitude, verify_sobolev, wholespace_report

controller = Controller()

VERIFY_SUITES = ('wholespace', 'expansions', 'energy', 'reduction')
PROFILE_POINTS = 1001


class Pipeline:

    def __init__(
        self,
        config: RunConfig | None = None,
        save_diagnostics_on_error: bool = True,
        logger: logging.Logger | None = None,
        log_level: int | None = None,
        log_file_path: str | None = None,
        log_indent: int | None = None
    ) -> None:
        """
        Orquestra as etapas: constantes, base espectral, Green, otimização, suítes e solução.

        Args:
            config: Configuração da execução. Se não for passada, usa os valores padrão.
            save_diagnostics_on_error: Se deve gravar um JSON de diagnóstico quando uma etapa falha.
            logger: Logger para registrar eventos. Se não for passado um, usa o logger do pacote.
            log_level: Nível de log do logger criado.
            log_file_path: Arquivo de log do logger criado.
            log_indent: Espaços de indentação por nível de etapa.
        """

        self.config = config if config is not None else RunConfig()
        if logger is None and log_level is None and log_file_path is None and log_indent is None:
            self.log = log
        else:
            self.log = LogManager(logger=logger, log_level=log_level, file_path=log_file_path, indent=log_indent)

        self._dims = None
        self._basis = None
        self._green = None
        self._cache = None
        self._concentration = None

        controller.exception_handler = Pipeline.save_diagnostics if save_diagnostics_on_error else None

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()

    @property
    def dims(self) -> FracDims:
        if self._dims is None:
            self._dims = compute_constants(self.config.N, self.config.s, self.config.amplitude)
        return self._dims

    @property
    def domain(self) -> BoxDomain:
        return BoxDomain(tuple(self.config.lengths))

    @property
    def basis(self) -> SpectralBasis:
        if self._basis is None:
            self._basis = build_basis(self.domain, self.config.cutoff, self.config.grid_resolution, cache=self.cache)
        return self._basis

    @property
    def cache(self) -> DiskCache:
        if self._cache is None:
            self._cache = DiskCache(self.config.cache_dir)
        return self._cache

    @property
    def green(self) -> GreenEvaluator:
        if self._green is None:
            cfg = self.config
            self._green = GreenEvaluator(
                self.basis, self.dims,
                guard_fraction=cfg.guard_fraction,
                y_grid_points=cfg.y_grid_points,
                interpolation_order=cfg.interpolation_order,
                h_grad_fraction=cfg.h_grad_fraction,
                cache=self.cache,
            )
        return self._green

    @property
    def quadrature(self) -> PVQuadrature:
        return PVQuadrature.from_run_config(self.config)

    def output_path(self, name: str) -> str:
        return os.path.join(self.config.output_dir, name)

    def save_diagnostics(self, exception: Exception) -> None:
        """
        Grava a mensagem e os diagnósticos da exceção num JSON e a relança.

        Args:
            exception: A exceção que interrompeu a etapa.
        """
        timestamp = datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
        path = self.output_path(f"{timestamp}_{exception.__class__.__name__}.json")
        payload = {
            'error': exception.__class__.__name__,
            'message': str(exception),
            'diagnostics': getattr(exception, 'diagnostics', {}),
            'config_hash': self.config_hash,
        }
        try:
            write_json(path, payload)
            self.log.info(f"Diagnóstico salvo em: {path}")
        except (OSError, TypeError, ValueError) as e:
            self.log.error(f"Erro ao salvar diagnóstico: {e}")
        raise exception

    # ------------------------------------------------------------------ configuração reduzida

    def reduced_config(self, eps: float | None = None) -> ReducedConfig:
        """
        (lambda, sigma) da execução: os valores informados na configuração ou, na falta deles,
        o minimizador de Upsilon_2 (k = 2) e o centro da caixa (k = 1).
        """
        cfg = self.config
        if cfg.lambdas is not None and cfg.sigmas is not None:
            return ReducedConfig(cfg.signs, cfg.lambdas, cfg.sigmas, eps, cfg.eta)

        if cfg.k == 1:
            center = self.domain.center
            lam = stationary_lambda(self.dims, self.green.robin(center)) if cfg.lambdas is None else cfg.lambdas[0]
            sigmas = (tuple(center),) if cfg.sigmas is None else cfg.sigmas
            return ReducedConfig(cfg.signs, (lam,), sigmas, eps, cfg.eta)
        if cfg.k == 2:
            cp = self.concentration()['upsilon2']
            z = cp.location_array
            N = cfg.N
            return ReducedConfig(cfg.signs, tuple(z[:2]), (tuple(z[2:2 + N]), tuple(z[2 + N:])), eps, cfg.eta)
        raise ConfigurationError(f"Para k = {cfg.k} informe 'lambdas' e 'sigmas' na configuração")

    def concentration(self) -> dict[str, CriticalPoint]:
        """Minimizadores de varphi e de Upsilon_2, com cache em disco."""
        if self._concentration is not None:
            return self._concentration
        cfg = self.config
        params = {'config': cfg.hashed_subset('N', 's', 'lengths', 'cutoff', 'grid_resolution', 'eta',
                                              'seeds_per_axis', 'tol_grad', 'amplitude', 'guard_fraction',
                                              'y_grid_points', 'interpolation_order', 'h_grad_fraction')}

        def compute() -> dict[str, np.ndarray]:
            varphi = minimize_varphi(self.green, cfg.eta, tol_grad=cfg.tol_grad, per_axis=cfg.seeds_per_axis)
            upsilon = minimize_upsilon2(self.green, self.dims, cfg.eta, tol_grad=cfg.tol_grad,
                                        per_axis=cfg.seeds_per_axis)
            return {'varphi': np.array(json.dumps(varphi.to_dict())),
                    'upsilon2': np.array(json.dumps(upsilon.to_dict()))}

        arrays = self.cache.load_or_compute('concentration', params, compute)
        self._concentration = {name: CriticalPoint(**json.loads(str(arrays[name]))) for name in ('varphi', 'upsilon2')}
        return self._concentration

    # ------------------------------------------------------------------ comandos

    @controller.on_error
    @log.step("Calculando constantes e verificações de calibração")
    def constants(self) -> dict[str, Any]:
        """
        Constantes de (N, s), calibração da amplitude pelo oráculo em R^N e identidade de Sobolev.

        Raises:
            CalibrationError: Se a amplitude usada difere da calibrada em mais de 1e-3.
        """
        with log.collect_flags() as flags:
            dims = self.dims
            calibration = calibrate_amplitude(self.quadrature, dims)
            sobolev = verify_sobolev(dims)
        used = abs(dims.a_Ns - calibration.amplitude) / calibration.amplitude
        payload = {
            'config_hash': self.config_hash,
            'constants': dims.to_dict(),
            'calibration': {**calibration.to_dict(), 'used_amplitude_difference': used},
            'sobolev': sobolev.to_dict(),
            'flags': flags,
        }
        write_json(self.output_path('constants.json'), payload)
        if calibration.flagged or used > CALIBRATION_TOL:
            raise CalibrationError(
                f"Amplitude a_(N,s) = {dims.a_Ns:.10g} não confere com a calibração {calibration.amplitude:.10g}",
                diagnostics=payload['calibration'],
            )
        return payload

    @controller.on_error
    @log.step("Tabelando G, H e Robin")
    def green_table(self) -> str:
        """
        CSV com G(x, y), H(x, y) e H(x, x) numa grade de pontos interiores. Em N = 1 cobre
        todos os pares; em N >= 2 fixa y no centro da caixa.
        """
        ev, cfg = self.green, self.config
        n = cfg.green_grid_points
        axes = [np.linspace(ev.guard, L - ev.guard, n) for L in cfg.lengths]
        points = np.stack([m.reshape(-1) for m in np.meshgrid(*axes, indexing='ij')], axis=-1)
        targets = points if cfg.N == 1 else [self.domain.center]
        header = ([f'x{j + 1}' for j in range(cfg.N)] + [f'y{j + 1}' for j in range(cfg.N)]
                  + ['G', 'H', 'robin_x', 'config_hash'])
        robin = [ev.robin(x) for x in points]
        rows = []
        for x, rx in zip(points, robin):
            for y in targets:
                same = np.allclose(x, y)
                H = ev.regular_part(x, y)
                G = None if same else ev.green(x, y)
                rows.append([*x.tolist(), *np.asarray(y).tolist(), G, H, rx, self.config_hash])
        return write_rows_csv(self.output_path('green.csv'), header, rows)

    @controller.on_error
    @log.step("Procurando os pontos de concentração")
    def find_concentration(self) -> dict[str, Any]:
        cfg = self.config
        with log.collect_flags() as flags:
            points = self.concentration()
            criticality = verify_sigma_criticality(self.green, points['upsilon2'], points['varphi'], cfg.tol_grad)
        payload = {
            'config_hash': self.config_hash,
            'varphi': points['varphi'].to_dict(),
            'upsilon2': points['upsilon2'].to_dict(),
            'criticality': criticality.to_dict(),
            'flags': flags,
        }
        if cfg.heatmap and cfg.N == 1:
            x, y, values = varphi_grid(self.green, cfg.eta)
            write_heatmap_svg(self.output_path('varphi_heatmap.svg'), x, y, values, 'varphi(sigma_1, sigma_2)')
            payload['heatmap'] = {'x': x, 'values': values}
        write_json(self.output_path('concentration.json'), payload)
        return payload

    @controller.on_error
    @log.step("Executando as suítes de verificação")
    def verify(self, suite: str = 'all') -> RateReport:
        """
        Executa as suítes de verificação e grava JSON, CSV e SVG.

        Raises:
            VerificationError: Se algum caso falha.
        """
        if suite not in (*VERIFY_SUITES, 'all'):
            raise ConfigurationError(f"Suíte desconhecida '{suite}'; use {', '.join(VERIFY_SUITES)} ou all")
        names = VERIFY_SUITES if suite == 'all' else (suite,)
        report = RateReport(title=f'verify_{suite}', config_hash=self.config_hash)
        for name in names:
            with log.collect_flags() as flags:
                part = getattr(self, f'_verify_{name}')()
            part.metadata['flags'] = flags
            part.config_hash = self.config_hash
            report.extend(part)
            self._write_report(f'verify_{name}', part)
        if suite == 'all':
            self._write_report('verify_all', report)

        self.log.info(report.summary())
        if not report.passed:
            raise VerificationError(
                f"{len(report.failures)} caso(s) reprovado(s) na verificação '{suite}'",
                diagnostics={'failures': [f"{c.suite}/{c.name}" for c in report.failures]},
            )
        return report

    def _write_report(self, stem: str, report: RateReport) -> None:
        write_report_json(self.output_path(f'{stem}.json'), report)
        write_report_csv(self.output_path(f'{stem}.csv'), report)
        write_report_svg(self.output_path(f'{stem}.svg'), report)

    def _verify_wholespace(self) -> RateReport:
        return wholespace_report(self.quadrature, self.dims)

    def _verify_expansions(self) -> RateReport:
        cfg = self.config
        report = expansion_report('all', self.basis, self.dims, self.green, self.reduced_config(),
                                  cfg.eps_ladder, cfg.slope_slack)
        report.config_hash = self.config_hash
        for name in SUITES:
            part = RateReport(title=f'expansions_{name}', cases=report.suite(name), config_hash=self.config_hash)
            write_report_csv(self.output_path(f'verify_expansions_{name}.csv'), part)
        return report

    def _verify_energy(self) -> RateReport:
        cfg = self.config
        return energy_expansion_report(self.basis, self.green, self.dims, self.reduced_config(),
                                       cfg.eps_ladder, cfg.slope_slack)

    def _verify_reduction(self) -> RateReport:
        cfg = self.config
        return phi_rate_report(self.basis, self.dims, self.reduced_config(), cfg.eps_ladder, cfg.slope_slack,
                               cfg.solver_tol, cfg.max_fixed_point_iter, cfg.max_newton_iter)

    @controller.on_error
    @log.step("Resolvendo o problema reduzido e montando a solução")
    def solve(self) -> dict[str, Any]:
        """
        Otimização, equação auxiliar e montagem de v = sum a_i P w_i + Phi. Grava o perfil em
        CSV (ao longo do primeiro eixo pela linha central em N >= 2), o diagnóstico em JSON e
        o gráfico SVG.
        """
        cfg = self.config
        eps = cfg.eps if cfg.eps is not None else cfg.eps_ladder[-1]
        with log.collect_flags() as flags:
            if eps > max(cfg.eps_ladder):
                log.flag(f"eps = {eps} acima da escada {list(cfg.eps_ladder)}: fora do regime de eps pequeno")
            reduced = self.reduced_config(eps)
            problem = build_reduction(self.basis, self.dims, eps, reduced)
            coercivity = coercivity_check(problem)
            phi = solve_phi(problem, cfg.solver_tol, cfg.max_fixed_point_iter, cfg.max_newton_iter)
            assembly = assemble_and_residual(problem, phi)

        x, v = self._profile(problem, phi)
        exponent = 1.0 / (self.dims.p - 1 - eps)
        u = problem.kappa ** exponent * v
        write_rows_csv(self.output_path('solution_profile.csv'), ['x', 'v', 'u', 'config_hash'],
                       [[xi, vi, ui, self.config_hash] for xi, vi, ui in zip(x, v, u)])
        write_profile_svg(self.output_path('solution_profile.svg'), x, v, f'v (eps = {eps:g})')

        payload = {
            'config_hash': self.config_hash,
            'eps': eps,
            'kappa': problem.kappa,
            'signs': list(reduced.signs),
            'lambdas': list(reduced.lambdas),
            'sigmas': [list(p) for p in reduced.sigmas],
            'coercivity': coercivity.to_dict(),
            'phi': phi.to_dict(),
            'assembly': assembly.to_dict(),
            'gram_condition': problem.space.gram_condition,
            'flags': flags,
        }
        write_json(self.output_path('solve.json'), payload)
        return payload

    def _profile(self, problem, phi) -> tuple[np.ndarray, np.ndarray]:
        cfg = self.config
        L = cfg.lengths[0]
        x = np.linspace(0.0, L, PROFILE_POINTS)
        points = np.tile(self.domain.center, (PROFILE_POINTS, 1))
        points[:, 0] = x
        values = sum(a * b.values(points) for a, b in zip(problem.ansatz.signs, problem.ansatz.bubbles))
        values = values + evaluate(self.basis, phi.coeffs, points)
        return x, values
