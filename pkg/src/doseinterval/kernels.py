"""Kernel evaluation, Gram matrices, and the median-heuristic bandwidth."""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .types import GAUSSIAN, LINEAR, KernelSpec, ValidationError


def gram(spec: KernelSpec, x: np.ndarray, x2: Optional[np.ndarray] = None) -> np.ndarray:
    """Kernel matrix K[i, j] = k(x[i], x2[j]); x2 defaults to x.

    Linear: inner products. Gaussian: exp(-gamma**2 * ||xi - xj||**2) with
    the squared Euclidean norm. When x2 is omitted the result is exactly
    symmetric with unit diagonal for the Gaussian kernel.
    """
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim != 2:
        raise ValidationError(f"covariates must be 2-d, got shape {x.shape}")
    symmetric = x2 is None
    x2 = x if symmetric else np.ascontiguousarray(x2, dtype=float)
    if x2.ndim != 2 or x2.shape[1] != x.shape[1]:
        raise ValidationError(
            f"column mismatch: {x.shape[1]} vs {x2.shape[1] if x2.ndim == 2 else '?'}"
        )
    if spec.kind == LINEAR:
        k = x @ x2.T
        if symmetric:
            k = 0.5 * (k + k.T)
        return k
    if spec.gamma is None:
        raise ValidationError("Gaussian kernel requires gamma; use median_heuristic")
    d2 = cdist(x, x2, "sqeuclidean")
    if symmetric:
        d2 = 0.5 * (d2 + d2.T)
        np.fill_diagonal(d2, 0.0)
    k = np.exp(-(spec.gamma**2) * d2)
    return k


def median_heuristic(x: np.ndarray) -> float:
    """Bandwidth gamma = 1/sqrt(median pairwise squared distance).

    With this choice gamma**2 times the median squared distance is one.
    Raises when all points coincide (zero median).
    """
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValidationError("median heuristic needs at least two rows")
    med = float(np.median(pdist(x, "sqeuclidean")))
    if med <= 0.0:
        raise ValidationError("median pairwise distance is zero; all points identical")
    return 1.0 / np.sqrt(med)
