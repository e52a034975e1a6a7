"""Central finite-difference oracle shared by the nn test modules."""

import numpy as np


def numeric_grad(f, x, eps=1e-5):
    """d f / d x by central differences, mutating x in place coordinate-wise."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + eps
        fp = f()
        x[idx] = orig - eps
        fm = f()
        x[idx] = orig
        grad[idx] = (fp - fm) / (2.0 * eps)
    return grad


def rel_error(analytic, numeric):
    """Max elementwise relative error with an absolute guard near zero."""
    num = np.abs(analytic - numeric)
    den = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float((num / den).max())
