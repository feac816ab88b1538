"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .network import InvalidNetworkError, Network, validate_network

__all__ = ["check_cost_array", "check_network"]


def check_network(network) -> Network:
    """Return ``network`` if it passes :func:`validate_network`, else raise."""
    if not isinstance(network, Network):
        raise TypeError(f"expected a Network, got {type(network).__name__}")
    report = validate_network(network)
    if not report.ok:
        raise InvalidNetworkError(str(report))
    return network


def check_cost_array(X, n_buses: int, generator_buses) -> np.ndarray:
    """Validate cost coefficients of shape ``(T, n_buses, 3)`` or ``(n_buses, 3)``."""
    arr = check_array(X, ensure_2d=False, allow_nd=True, dtype=np.float64, ensure_min_samples=1)
    if arr.ndim not in (2, 3) or arr.shape[-2:] != (n_buses, 3):
        raise ValueError(
            f"cost array must have shape (T, {n_buses}, 3) or ({n_buses}, 3), got {arr.shape}"
        )
    gens = list(generator_buses)
    if np.any(arr[..., gens, 0] <= 0):
        raise ValueError("quadratic cost coefficients must be positive on generator buses")
    return arr
