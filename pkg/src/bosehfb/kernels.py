"""Hot-loop kernels: the compiled extension when it was built, NumPy otherwise.

Set ``BOSEHFB_PURE_PYTHON=1`` to force the fallback. ``BACKEND`` names the
implementation in use.
"""
import math
import os
from dataclasses import dataclass

import numpy as np

from . import _kernels_py

_compiled = None
if not os.environ.get("BOSEHFB_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py


@dataclass(frozen=True)
class BoseWeights:
    """``q_k = exp(-beta |k|^2)`` and ``a_k = 1 - q_k``, reusable for every shift."""

    beta: float
    q: np.ndarray
    a: np.ndarray

    @classmethod
    def build(cls, k2, beta: float) -> "BoseWeights":
        x = -beta * np.asarray(k2, dtype=float)
        return cls(float(beta), np.ascontiguousarray(np.exp(x)),
                   np.ascontiguousarray(-np.expm1(x)))

    def _e(self, shift: float) -> float:
        x = self.beta * shift
        return math.expm1(x) if x < 700.0 else math.inf

    def sum(self, shift: float) -> float:
        """``sum_k 1 / (exp(beta (|k|^2 + shift)) - 1)``."""
        return _impl.bose_sum(self.q, self.a, self._e(shift))

    def derivative(self, shift: float) -> float:
        """Derivative of :meth:`sum` with respect to ``mu = -shift``."""
        e = self._e(shift)
        if math.isinf(e):
            return 0.0
        return self.beta * _impl.bose_sum_derivative(self.q, self.a, e)


def bose_sum(k2, beta: float, shift: float) -> float:
    """One-off Bose sum; requires ``beta (|k|^2 + shift) > 0`` for every mode."""
    return BoseWeights.build(k2, beta).sum(shift)


def hadamard_displacement(vdisp, alpha, disp_index):
    if _compiled is not None:
        return _compiled.hadamard_displacement(
            np.ascontiguousarray(vdisp, dtype=complex),
            np.ascontiguousarray(alpha, dtype=complex),
            np.ascontiguousarray(disp_index, dtype=np.intp))
    return _kernels_py.hadamard_displacement(vdisp, alpha, disp_index)
