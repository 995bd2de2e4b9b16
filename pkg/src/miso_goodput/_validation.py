"""Small input-checking helpers shared by the numerical modules."""
import numpy as np

from .exceptions import InvalidInputError


def as_square(M, name, dtype=float):
    M = np.asarray(M, dtype=dtype)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"{name} must be a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return M


def as_vector(v, name, dtype=float, size=None):
    v = np.atleast_1d(np.asarray(v, dtype=dtype))
    if v.ndim != 1:
        raise InvalidInputError(f"{name} must be a vector, got shape {v.shape}")
    if size is not None and v.shape[0] != size:
        raise InvalidInputError(f"{name} has length {v.shape[0]}, expected {size}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return v


def check_hermitian(M, name, rtol=1e-12):
    scale = max(np.abs(M).max(initial=0.0), np.finfo(float).tiny)
    if np.abs(M - M.conj().T).max(initial=0.0) > rtol * scale:
        raise InvalidInputError(f"{name} is not symmetric/Hermitian")


def check_psd(M, name, rtol=1e-10):
    w = np.linalg.eigvalsh(M)
    if w.size and w.min() < -rtol * max(np.abs(w).max(), np.finfo(float).tiny):
        raise InvalidInputError(f"{name} is not positive semidefinite (min eigenvalue {w.min():.3g})")


def check_probability(p, name):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
        raise InvalidInputError(f"{name} must lie in [0, 1]")
    return p
