"""Outage probability of an indefinite complex Gaussian quadratic form.

The outage event for user ``k`` is ``h^H Q h < sigma^2`` with ``h = h_e + e``
and ``e ~ CN(mu, C)``. Whitening the error and diagonalising
``C^{1/2} Q C^{1/2}`` splits the form into the difference of two independent
positive forms ``X1 - X2`` (positive and negative eigenvalues). Each side is
embedded in real coordinates, fitted with the Laguerre density, and the outage
is ``P[X1 - X2 < sigma^2] = E[F1(sigma^2 + X2)]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import as_square, as_vector, check_hermitian, check_psd
from .beamform import BeamformDesign
from .exceptions import InvalidInputError, SingularCovarianceError
from .quadform import DEFAULT_DEGREE, PointMass, RealQuadraticForm, fit_form

EIG_RTOL = 1e-10
COV_RTOL = 1e-12
GRID_POINTS = 2048
TAIL_MASS = 1e-8


@dataclass(frozen=True)
class ComplexQuadraticProblem:
    """Outage problem ``P[(h_e + e)^H Q (h_e + e) < sigma2]``, ``e ~ CN(mu, Cerr)``."""

    Q: np.ndarray
    h_e: np.ndarray
    mu: np.ndarray
    Cerr: np.ndarray
    sigma2: float

    def __post_init__(self):
        Q = as_square(self.Q, "Q", dtype=complex)
        n = Q.shape[0]
        C = as_square(self.Cerr, "Cerr", dtype=complex)
        if C.shape != Q.shape:
            raise InvalidInputError(f"Cerr has shape {C.shape}, expected {Q.shape}")
        check_hermitian(Q, "Q")
        check_hermitian(C, "Cerr")
        check_psd(C, "Cerr")
        if not self.sigma2 > 0:
            raise InvalidInputError("sigma2 must be positive")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "Cerr", C)
        object.__setattr__(self, "h_e", as_vector(self.h_e, "h_e", dtype=complex, size=n))
        object.__setattr__(self, "mu", as_vector(self.mu, "mu", dtype=complex, size=n))
        object.__setattr__(self, "sigma2", float(self.sigma2))

    def value(self, e):
        """``h^H Q h`` for error draws ``e`` (one per row)."""
        h = self.h_e + np.atleast_2d(e)
        return np.real(np.einsum("ni,ij,nj->n", h.conj(), self.Q, h))


@dataclass(frozen=True)
class SplitSide:
    """One definite side ``sum_i delta_i |b_i + y_i|^2`` with ``y = W (e - mu)``."""

    b: np.ndarray
    delta: np.ndarray
    transform: np.ndarray

    def value(self, e_centered):
        y = self.b + np.atleast_2d(e_centered) @ self.transform.T
        return np.abs(y) ** 2 @ self.delta


@dataclass(frozen=True)
class IndefiniteSplit:
    """``h^H Q h = pos - neg + offset``; either side may be absent."""

    pos: Optional[SplitSide]
    neg: Optional[SplitSide]
    offset: float = 0.0

    def value(self, e, mu):
        ec = np.atleast_2d(e) - mu
        out = np.full(ec.shape[0], self.offset)
        if self.pos is not None:
            out += self.pos.value(ec)
        if self.neg is not None:
            out -= self.neg.value(ec)
        return out


def build_Q(design: BeamformDesign, user: int, gamma: float) -> np.ndarray:
    """``beta_k u_k u_k^H / gamma - sum_{j != k} beta_j u_j u_j^H``."""
    if gamma <= 0:
        raise InvalidInputError("gamma must be positive")
    w = design.beamformers[user]
    return np.outer(w, w.conj()) / gamma - design.interference_matrix(user)


def decompose(prob: ComplexQuadraticProblem, eig_rtol=EIG_RTOL, cov_rtol=COV_RTOL) -> IndefiniteSplit:
    """Split the indefinite form into two independent definite forms.

    Directions where the error covariance vanishes are handled by projecting
    onto its range; the deterministic remainder goes into ``offset``.
    """
    Q = prob.Q
    v = prob.h_e + prob.mu
    w, V = np.linalg.eigh(prob.Cerr)
    wmax = max(w.max(), 0.0)
    if wmax == 0.0:
        return IndefiniteSplit(None, None, float(np.real(v.conj() @ Q @ v)))

    keep = w > cov_rtol * wmax
    R = V[:, keep]
    s = np.sqrt(w[keep])
    v_r = R @ (R.conj().T @ v)
    v_n = v - v_r
    c = (R.conj().T @ v) / s
    M = s[:, None] * (R.conj().T @ Q @ R) * s[None, :]
    M = 0.5 * (M + M.conj().T)
    t = s * (R.conj().T @ (Q @ v_n))

    lam, P = np.linalg.eigh(M)
    scale = np.abs(lam).max()
    nz = np.abs(lam) > eig_rtol * scale if scale > 0 else np.zeros(lam.shape, bool)
    pt = P.conj().T @ t
    resid = np.abs(pt[~nz])
    if resid.size and resid.max() > 1e-8 * (scale * np.linalg.norm(c) + np.linalg.norm(t)):
        raise SingularCovarianceError("form has a linear term outside the error covariance range")

    b = P.conj().T @ c
    b[nz] += pt[nz] / lam[nz]
    offset = float(np.real(v_n.conj() @ Q @ v_n) - np.sum(np.abs(pt[nz]) ** 2 / lam[nz]))
    W = P.conj().T @ ((R.conj().T) / s[:, None])

    def side(mask, sign):
        if not mask.any():
            return None
        return SplitSide(b[mask].copy(), sign * lam[mask], W[mask].copy())

    return IndefiniteSplit(side(nz & (lam > 0), 1.0), side(nz & (lam < 0), -1.0), offset)


def embed_real(b, Delta) -> RealQuadraticForm:
    """Real form of ``sum_i Delta_i |b_i + z_i|^2`` with ``z ~ CN(0, I)``."""
    b = as_vector(b, "b", dtype=complex)
    Delta = as_vector(Delta, "Delta", size=b.shape[0])
    if np.any(Delta <= 0):
        raise InvalidInputError("Delta entries must be positive")
    n = b.shape[0]
    A = np.diag(np.concatenate([Delta, Delta]))
    mu = np.concatenate([b.real, b.imag])
    return RealQuadraticForm(A, mu, 0.5 * np.eye(2 * n))


def _fit_side(side, d):
    if side is None:
        return None
    return fit_form(embed_real(side.b, side.delta), d)


def difference_cdf(X1, X2, threshold, grid=GRID_POINTS, tail=TAIL_MASS) -> float:
    """``P[X1 - X2 < threshold]`` for independent positive ``X1``, ``X2``.

    ``X1``/``X2`` are fitted densities, point masses, or ``None`` (absent side).
    The expectation is a Stieltjes sum on a uniform grid between the tail
    quantiles of the narrower side, so the other side's CDF is smooth on
    the grid scale: ``E[F1(threshold + X2)]`` or ``E[S2(X1 - threshold)]``.
    """
    if X2 is None:
        return float(threshold > 0) if X1 is None else float(X1.cdf(threshold))
    if X1 is None:
        return float(X2.sf(-threshold))
    if isinstance(X2, PointMass):
        return float(X1.cdf(threshold + X2.value))
    if isinstance(X1, PointMass):
        return float(X2.sf(X1.value - threshold))

    if X2.var <= X1.var:
        outer, inner = X2, lambda t: X1.cdf(threshold + t)
    else:
        outer, inner = X1, lambda t: X2.sf(t - threshold)
    lo = outer.ppf(tail * 1e-2)
    hi = outer.ppf(1 - tail)
    edges = np.linspace(lo, hi, grid + 1)
    F = outer.cdf(edges)
    mids = 0.5 * (edges[1:] + edges[:-1])
    prob = np.sum(inner(mids) * np.diff(F))
    prob += F[0] * inner(lo)
    prob += (1 - F[-1]) * inner(hi)
    return float(np.clip(prob, 0.0, 1.0))


def outage_probability(prob: ComplexQuadraticProblem, d: int = DEFAULT_DEGREE, eig_rtol=EIG_RTOL) -> float:
    """Approximate ``P[h^H Q h < sigma^2]``."""
    split = decompose(prob, eig_rtol=eig_rtol)
    threshold = prob.sigma2 - split.offset
    if split.pos is None and split.neg is None:
        return float(threshold > 0)
    X1 = _fit_side(split.pos, d)
    X2 = _fit_side(split.neg, d)
    return difference_cdf(X1, X2, threshold)


def user_problem(design: BeamformDesign, user, gamma, h_est, err_mean, err_cov, noise) -> ComplexQuadraticProblem:
    return ComplexQuadraticProblem(build_Q(design, user, gamma), h_est, err_mean, err_cov, noise)
