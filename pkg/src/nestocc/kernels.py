"""Poisson kernels of the quenched occupancy moments.

For a box receiving a Poisson(x) number of balls:

    - phi_k(x) = P(at least k balls) = e^{-x} sum_{i>=k} x^i / i!
    - m(x) = x - 1 + e^{-x}, the mean excess of balls over one occupied box
    - w(x) = 1 - e^{-2x} - 2x e^{-x}
    - v(x) = m(x) + w(x), the variance of that excess
    - psi_{l,k}(x) = phi_k(x) (1 - phi_l(x))

All kernels accept scalars or arrays and switch to Taylor series below the
configured small-argument threshold to avoid cancellation.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammainc

from .config import get_config
from .exceptions import DomainError
from .types import KernelName

FloatArray = NDArray[np.float64]


def _as_array(x: ArrayLike) -> FloatArray:
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0):
        raise DomainError("Poisson kernels are defined for x >= 0")
    return arr


def _small(arr: FloatArray) -> NDArray[np.bool_]:
    return arr < get_config().small_x_switch


def phi(x: ArrayLike, k: int = 1) -> FloatArray:
    """phi_k(x), the Poisson(x) probability of at least k balls.

    Uses the regularized lower incomplete gamma function P(k, x), which is
    accurate for small x; phi_1 uses -expm1(-x).
    """
    if k < 1:
        raise DomainError(f"phi_k needs k >= 1, got k={k}")
    arr = _as_array(x)
    if k == 1:
        return -np.expm1(-arr)
    return np.asarray(gammainc(k, arr), dtype=np.float64)


def m_kernel(x: ArrayLike) -> FloatArray:
    """m(x) = x - 1 + e^{-x}."""
    arr = _as_array(x)
    series = arr**2 / 2 - arr**3 / 6 + arr**4 / 24
    direct = arr + np.expm1(-arr)
    return np.where(_small(arr), series, direct)


def w_kernel(x: ArrayLike) -> FloatArray:
    """w(x) = 1 - e^{-2x} - 2x e^{-x}."""
    arr = _as_array(x)
    series = arr**3 / 3 - arr**4 / 3 + 11 * arr**5 / 60
    direct = -np.expm1(-2 * arr) - 2 * arr * np.exp(-arr)
    return np.where(_small(arr), series, direct)


def v_kernel(x: ArrayLike) -> FloatArray:
    """v(x) = x + e^{-x} - e^{-2x} - 2x e^{-x} = m(x) + w(x)."""
    return m_kernel(x) + w_kernel(x)


def psi(x: ArrayLike, l: int, k: int) -> FloatArray:  # noqa: E741
    """psi_{l,k}(x) = phi_k(x) (1 - phi_l(x)); psi_{k,k} is the variance of 1{>= k balls}."""
    if l < 1:
        raise DomainError(f"psi_{{l,k}} needs l >= 1, got l={l}")
    return phi(x, k) * (1.0 - phi(x, l))


def poisson_kernel(name: KernelName, x: ArrayLike, k: int = 1, l: int = 1) -> FloatArray:  # noqa: E741
    """Evaluate a Poisson kernel by name.

    Args:
        name: One of "phi", "m", "v", "w", "psi".
        x: Nonnegative argument(s).
        k: Ball threshold for phi and psi.
        l: Second threshold for psi.

    Returns:
        Kernel values with the shape of ``x``.
    """
    if name == "phi":
        return phi(x, k)
    if name == "m":
        return m_kernel(x)
    if name == "v":
        return v_kernel(x)
    if name == "w":
        return w_kernel(x)
    if name == "psi":
        return psi(x, l, k)
    raise DomainError(f"Unknown Poisson kernel: {name!r}")
