"""
Relatórios de taxas: ajuste de inclinação log-log, critérios de aprovação e escrita em
JSON, CSV e SVG.
"""
import os
import csv
import io
import json
import math
import tempfile
from dataclasses import dataclass, field, asdict
from typing import Any, Sequence
import numpy as np
import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
from .errors import UsageError


KINDS = ('rate', 'upper', 'little_o', 'bounded', 'inequality', 'check')
LITTLE_O_MARGIN = 0.05

plt.rcParams['svg.hashsalt'] = 'fracbubble'


def fit_slope(eps: Sequence[float], values: Sequence[float]) -> float | None:
    """Inclinação do ajuste linear de log|values| contra log eps (None se algum valor é nulo)."""
    eps = np.asarray(eps, dtype=float)
    values = np.abs(np.asarray(values, dtype=float))
    if len(eps) < 2 or np.any(values <= 0) or not np.all(np.isfinite(values)):
        return None
    slope, _ = np.polyfit(np.log(eps), np.log(values), 1)
    return float(slope)


@dataclass
class RateCase:
    suite: str
    name: str
    kind: str
    predicted: float | None
    eps: list[float]
    values: list[float]
    reference: list[float] | None = None
    slack: float = 0.15
    observed: float | None = None
    passed: bool = False
    notes: dict[str, Any] = field(default_factory=dict)

    def judge(self) -> 'RateCase':
        """Calcula a inclinação observada e o veredito segundo o tipo do caso."""
        if self.kind not in KINDS:
            raise UsageError(f"Tipo de caso desconhecido '{self.kind}'")
        if self.kind == 'inequality':
            ref = self.reference or []
            self.passed = len(ref) == len(self.values) and all(
                v <= r * (1 + 1e-10) for v, r in zip(self.values, ref))
            return self
        if self.kind == 'check':
            self.observed = float(self.values[-1]) if self.values else None
            self.passed = self.observed is not None and math.isfinite(self.observed) \
                and self.observed <= self.predicted
            return self

        self.observed = fit_slope(self.eps, self.values)
        if self.observed is None:
            self.passed = False
            self.notes.setdefault('reason', 'valores nulos ou não finitos no ajuste')
            return self
        pred = self.predicted or 0.0
        if self.kind == 'rate':
            self.passed = abs(self.observed - pred) <= self.slack
        elif self.kind == 'upper':
            self.passed = self.observed >= pred - self.slack
        elif self.kind == 'little_o':
            self.passed = self.observed >= pred + LITTLE_O_MARGIN
        else:
            self.passed = self.observed >= -self.slack
        return self

    def to_dict(self) -> dict[str, Any]:
        return _finite(asdict(self))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'RateCase':
        return cls(**data)


def make_case(
    suite: str,
    name: str,
    kind: str,
    predicted: float | None,
    eps: Sequence[float],
    values: Sequence[float],
    slack: float = 0.15,
    reference: Sequence[float] | None = None,
    **notes: Any,
) -> RateCase:
    case = RateCase(
        suite=suite, name=name, kind=kind, predicted=predicted,
        eps=[float(e) for e in eps], values=[float(v) for v in values],
        reference=None if reference is None else [float(r) for r in reference],
        slack=slack, notes=dict(notes),
    )
    return case.judge()


@dataclass
class RateReport:
    title: str
    cases: list[RateCase] = field(default_factory=list)
    config_hash: str = ''
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(case.passed for case in self.cases)

    @property
    def failures(self) -> list[RateCase]:
        return [case for case in self.cases if not case.passed]

    def add(self, case: RateCase) -> RateCase:
        self.cases.append(case)
        return case

    def extend(self, other: 'RateReport') -> 'RateReport':
        self.cases.extend(other.cases)
        self.metadata.setdefault('parts', {})[other.title] = other.metadata
        return self

    def suite(self, name: str) -> list[RateCase]:
        return [case for case in self.cases if case.suite == name]

    def to_dict(self) -> dict[str, Any]:
        return {
            'title': self.title,
            'config_hash': self.config_hash,
            'passed': self.passed,
            'metadata': _finite(self.metadata),
            'cases': [case.to_dict() for case in self.cases],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'RateReport':
        return cls(
            title=data['title'],
            cases=[RateCase.from_dict(c) for c in data.get('cases', [])],
            config_hash=data.get('config_hash', ''),
            metadata=data.get('metadata', {}),
        )

    def summary(self) -> str:
        lines = [f"{self.title}: {'APROVADO' if self.passed else 'REPROVADO'}"]
        for case in self.cases:
            observed = 'n/a' if case.observed is None else f"{case.observed:.4f}"
            predicted = 'n/a' if case.predicted is None else f"{case.predicted:.4f}"
            lines.append(f"  [{'ok' if case.passed else 'FALHA'}] {case.suite}/{case.name} "
                         f"({case.kind}): observado {observed}, previsto {predicted}")
        return '\n'.join(lines)


def write_json(path: str, payload: dict[str, Any]) -> str:
    """JSON com floats em repr de ida e volta (no máximo 17 dígitos significativos)."""
    text = json.dumps(_finite(payload), indent=2, sort_keys=True, ensure_ascii=False)
    return atomic_write(path, text + '\n')


def write_report_json(path: str, report: RateReport) -> str:
    return write_json(path, report.to_dict())


def write_report_csv(path: str, report: RateReport) -> str:
    """Uma linha por (caso, eps) com o valor do lado esquerdo e a referência, se houver."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['suite', 'case', 'kind', 'eps', 'value', 'reference', 'config_hash'])
    for case in report.cases:
        refs = case.reference or [None] * len(case.values)
        eps = case.eps or [None] * len(case.values)
        for e, v, r in zip(eps, case.values, refs):
            writer.writerow([case.suite, case.name, case.kind, _g(e), _g(v), _g(r), report.config_hash])
    return atomic_write(path, buffer.getvalue())


def write_rows_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_g(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return atomic_write(path, buffer.getvalue())


def write_report_svg(path: str, report: RateReport) -> str | None:
    """Gráfico log-log dos casos com escada de eps; None se não há casos plotáveis."""
    cases = [c for c in report.cases if c.kind not in ('check', 'inequality') and len(c.eps) >= 2
             and all(v > 0 for v in np.abs(c.values))]
    if not cases:
        return None
    fig, ax = plt.subplots(figsize=(7, 5))
    for case in cases:
        eps = np.asarray(case.eps)
        values = np.abs(np.asarray(case.values))
        label = f"{case.suite}/{case.name}"
        if case.observed is not None:
            label += f" ({case.observed:.2f})"
        ax.loglog(eps, values, marker='+', label=label)
    ax.set_xlabel('eps')
    ax.set_ylabel('lado esquerdo')
    ax.grid(True)
    ax.legend(fontsize=6)
    buffer = io.StringIO()
    fig.savefig(buffer, format='svg', metadata={'Date': None})
    plt.close(fig)
    return atomic_write(path, buffer.getvalue())


def write_heatmap_svg(path: str, x: np.ndarray, y: np.ndarray, values: np.ndarray, title: str) -> str:
    fig, ax = plt.subplots(figsize=(6, 5))
    mesh = ax.pcolormesh(x, y, values, shading='auto')
    fig.colorbar(mesh, ax=ax)
    ax.set_title(title)
    buffer = io.StringIO()
    fig.savefig(buffer, format='svg', metadata={'Date': None})
    plt.close(fig)
    return atomic_write(path, buffer.getvalue())


def write_profile_svg(path: str, x: np.ndarray, values: np.ndarray, title: str) -> str:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(x, values, linewidth=1)
    ax.axhline(0.0, color='gray', linewidth=0.5)
    ax.set_title(title)
    ax.grid(True)
    buffer = io.StringIO()
    fig.savefig(buffer, format='svg', metadata={'Date': None})
    plt.close(fig)
    return atomic_write(path, buffer.getvalue())


def atomic_write(path: str, text: str) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def _g(value: Any) -> str:
    if value is None:
        return ''
    return format(float(value), '.17g')


def _finite(value: Any) -> Any:
    """Converte numpy para tipos nativos e NaN/inf para None (JSON estrito)."""
    if isinstance(value, dict):
        return {str(k): _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    if isinstance(value, np.ndarray):
        return _finite(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value
