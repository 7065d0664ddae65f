from typing import ParamSpec, TypeVar
import numpy as np
from numpy.typing import NDArray


P = ParamSpec('P')
T = TypeVar('T')

FloatArray = NDArray[np.float64]
Point = FloatArray | tuple[float, ...] | list[float] | float
