"""Zero-forcing directions and robust max-min power loading.

The robust constraint for user ``k`` scales the expected leakage power of the
estimation error by a factor ``a``::

    g_k beta_k / gamma - a * sigma_ek^2 * sum_{j != k} beta_j - sigma_k^2 >= 0

with ``g_k = |h_ek^H u_k|^2``. Written as ``A beta >= sigma^2`` the matrix is a
diagonal plus a rank-one term, so the power budget check collapses to a scalar
condition and the max-min target is found by bisection on ``gamma``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_vector
from .exceptions import IllConditionedChannelError, InfeasibleTargetError, InvalidInputError

UNIT_NORM_TOL = 1e-9
MAX_CONDITION = 1e8


@dataclass(frozen=True)
class BeamformDesign:
    """Unit-norm directions (rows), power loads, common SINR target and scale ``a``."""

    directions: np.ndarray
    powers: np.ndarray
    gamma: float
    a: float = 0.0

    def __post_init__(self):
        U = np.atleast_2d(np.asarray(self.directions, dtype=complex))
        p = as_vector(self.powers, "powers", size=U.shape[0])
        norms = np.linalg.norm(U, axis=1)
        if np.any(np.abs(norms - 1) > UNIT_NORM_TOL):
            raise InvalidInputError("beamforming directions must have unit norm")
        if np.any(p < 0):
            raise InvalidInputError("power loads must be nonnegative")
        if self.a < 0:
            raise InvalidInputError("scale factor a must be >= 0")
        U.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "directions", U)
        object.__setattr__(self, "powers", p)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "a", float(self.a))

    @property
    def n_users(self) -> int:
        return self.directions.shape[0]

    @property
    def beamformers(self) -> np.ndarray:
        """``w_k = sqrt(beta_k) u_k`` as rows."""
        return np.sqrt(self.powers)[:, None] * self.directions

    @property
    def rate(self) -> float:
        """Rate in bits/s/Hz supported by the design's target."""
        return float(np.log2(1 + self.gamma))

    def interference_matrix(self, user: int) -> np.ndarray:
        """``sum_{j != k} beta_j u_j u_j^H``."""
        W = np.delete(self.beamformers, user, axis=0)
        return W.T @ W.conj()

    def check_zf(self, h_est, rtol=1e-8) -> bool:
        h_est = np.atleast_2d(h_est)
        cross = np.abs(h_est.conj() @ self.directions.T)
        np.fill_diagonal(cross, 0.0)
        return bool(np.all(cross <= rtol * np.linalg.norm(h_est, axis=1)[:, None]))


def zf_directions(h_est) -> np.ndarray:
    """Normalised columns of the right pseudo-inverse of the stacked estimates.

    ``h_est`` has one user channel per row; the result has one unit-norm
    direction per row with ``h_ej^H u_k = 0`` for ``j != k``.
    """
    H = np.atleast_2d(np.asarray(h_est, dtype=complex)).conj()  # rows h_k^H
    K, n = H.shape
    if K > n:
        raise IllConditionedChannelError(f"{K} users exceed {n} antennas")
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise IllConditionedChannelError(f"channel estimates are rank deficient (cond={cond:.3g})")
    W = H.conj().T @ np.linalg.inv(H @ H.conj().T)
    W = W / np.linalg.norm(W, axis=0)
    return W.T.copy()


def signal_gains(h_est, directions) -> np.ndarray:
    """``|h_ek^H u_k|^2`` for every user."""
    h_est = np.atleast_2d(h_est)
    return np.abs(np.einsum("ki,ki->k", h_est.conj(), np.atleast_2d(directions))) ** 2


def effective_noise(design: BeamformDesign, user: int, err_mean, err_cov) -> float:
    """Expected leakage power ``E[e^H (sum_{j != k} w_j w_j^H) e]`` for ``e ~ CN(mu, C)``."""
    mu = np.asarray(err_mean, dtype=complex)
    C = np.asarray(err_cov, dtype=complex)
    M = design.interference_matrix(user)
    return float(np.real(mu.conj() @ M @ mu + np.trace(M @ C)))


def _check_instance(gamma, gains, noise, err_power, a):
    gains = as_vector(gains, "gains")
    K = gains.shape[0]
    noise = np.broadcast_to(as_vector(noise, "noise"), (K,)).astype(float)
    err_power = np.broadcast_to(as_vector(err_power, "err_power"), (K,)).astype(float)
    if np.any(gains <= 0):
        raise InvalidInputError("signal gains must be positive")
    if gamma <= 0:
        raise InvalidInputError("gamma must be positive")
    if a < 0:
        raise InvalidInputError("a must be >= 0")
    return gains, noise, err_power


def eq17_lhs(gamma, gains, noise, err_power, a, total_power) -> float:
    """``sum_k gamma (sigma_k^2 + P_t a s_k) / (g_k + a s_k gamma)``."""
    gains, noise, err_power = _check_instance(gamma, gains, noise, err_power, a)
    leak = a * err_power
    return float(np.sum(gamma * (noise + total_power * leak) / (gains + leak * gamma)))


def maxmin_power_condition(gamma, gains, noise, err_power, a, total_power):
    """Feasibility of a common target under the power budget.

    Returns ``(feasible, power)`` where ``power = 1^T A^{-1} sigma^2`` is the
    total load meeting every robust constraint with equality (Sherman-Morrison
    form), or ``inf`` when no positive loading exists. Feasibility is the scalar
    test ``eq17_lhs <= P_t``; the two agree on the decision and coincide in value
    on the boundary.
    """
    gains, noise, err_power = _check_instance(gamma, gains, noise, err_power, a)
    leak = a * err_power
    b = gamma / (gains + leak * gamma)  # diagonal of B^{-1}
    denom = 1.0 - np.sum(b * leak)
    lhs = np.sum(b * (noise + total_power * leak))
    feasible = bool(lhs <= total_power and denom > 0)
    power = float(np.sum(b * noise) / denom) if denom > 0 else np.inf
    return feasible, power


def power_matrix(gamma, gains, err_power, a) -> np.ndarray:
    gains = np.asarray(gains, dtype=float)
    err_power = np.broadcast_to(np.asarray(err_power, dtype=float), gains.shape)
    A = -a * np.repeat(err_power[:, None], gains.shape[0], axis=1)
    np.fill_diagonal(A, gains / gamma)
    return A


def solve_power_loading(gamma, gains, noise, err_power, a, total_power=np.inf) -> np.ndarray:
    """Loads meeting every robust constraint with equality (``A beta = sigma^2``)."""
    gains, noise, err_power = _check_instance(gamma, gains, noise, err_power, a)
    A = power_matrix(gamma, gains, err_power, a)
    try:
        beta = np.linalg.solve(A, noise)
    except np.linalg.LinAlgError as exc:
        raise InfeasibleTargetError(f"power matrix is singular at gamma={gamma:.6g}") from exc
    if np.any(beta <= 0):
        raise InfeasibleTargetError(f"target gamma={gamma:.6g} needs nonpositive loads")
    if beta.sum() > total_power * (1 + 1e-9):
        raise InfeasibleTargetError(f"target gamma={gamma:.6g} exceeds the power budget")
    return beta


def maxmin_gamma(gains, noise, err_power, a, total_power, tol=1e-8, max_iter=500):
    """Largest common target satisfying the scalar budget condition.

    Returns ``(gamma_star, powers)``.
    """
    gains = as_vector(gains, "gains")
    noise = np.broadcast_to(np.asarray(noise, dtype=float), gains.shape)
    if tol <= 0:
        raise InvalidInputError("tol must be positive")

    def feasible(g):
        return maxmin_power_condition(g, gains, noise, err_power, a, total_power)[0]

    lo, hi = 0.0, total_power * np.max(gains / noise)
    while feasible(hi):
        lo, hi = hi, 2 * hi
    for _ in range(max_iter):
        if hi - lo <= tol * hi:
            break
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    if lo <= 0:
        raise InfeasibleTargetError("no positive SINR target is feasible")
    return lo, solve_power_loading(lo, gains, noise, err_power, a, total_power)


def maxmin_design(h_est, noise, err_power, a, total_power, tol=1e-8) -> BeamformDesign:
    """ZF directions plus robust max-min loading for the given estimates."""
    U = zf_directions(h_est)
    gains = signal_gains(h_est, U)
    gamma, beta = maxmin_gamma(gains, noise, err_power, a, total_power, tol=tol)
    return BeamformDesign(U, beta, gamma, a)
