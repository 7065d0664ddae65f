from .pipeline import Pipeline
from .controller import Controller
from .config import Config, RunConfig
from .bubble import FracDims, compute_constants
from .report import RateReport


__all__ = [
    'Pipeline',
    'Controller',
    'Config',
    'RunConfig',
    'FracDims',
    'compute_constants',
    'RateReport',
]
