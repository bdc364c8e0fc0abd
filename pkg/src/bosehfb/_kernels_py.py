"""Pure-NumPy fallback for the compiled kernels in ``_kernels.pyx``.

Signatures and results match the compiled module; see ``kernels`` for the
import-time selection.
"""
import numpy as np


def bose_sum(q, a, e):
    """``sum_k q_k / (e + a_k)``, the Bose sum in precomputed form."""
    return float(np.sum(np.asarray(q) / (e + np.asarray(a))))


def bose_sum_derivative(q, a, e):
    return float((1.0 + e) * np.sum(np.asarray(q) / (e + np.asarray(a)) ** 2))


def hadamard_displacement(vdisp, alpha, disp_index):
    """``out[i, j] = vdisp[disp_index[i, j]] * alpha[i, j]``."""
    return np.asarray(vdisp)[disp_index] * alpha
