"""Density approximation for positive (semi)definite Gaussian quadratic forms.

A form ``x^T A x`` with ``x ~ N(mu, C)`` is summarised by its cumulants, the
cumulants are turned into raw moments, and the moments are matched by a
gamma-weighted generalized Laguerre series::

    f(y) = y^nu exp(-y/beta) / (beta^nu Gamma(nu+1)) * sum_k xi_k y^k / beta^(k+1)

The gamma family is the fixed point of the construction: for gamma moments all
correction weights vanish.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
from scipy.optimize import brentq
from scipy.special import eval_genlaguerre, gammainc, gammaln

from ._validation import as_square, as_vector, check_hermitian, check_psd
from .exceptions import DegenerateDistributionError, InvalidInputError

DEFAULT_DEGREE = 6
# relative variance below which a form is treated as a point mass
DEGENERATE_RTOL = 1e-14


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RealQuadraticForm:
    """``x^T A x`` for ``x ~ N(mu, C)`` with real ``A`` PSD and ``C`` PSD."""

    A: np.ndarray
    mu: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = as_square(self.A, "A")
        n = A.shape[0]
        mu = as_vector(self.mu, "mu", size=n)
        C = as_square(self.C, "C")
        if C.shape != A.shape:
            raise InvalidInputError(f"C has shape {C.shape}, expected {A.shape}")
        check_hermitian(A, "A")
        check_hermitian(C, "C")
        check_psd(A, "A")
        check_psd(C, "C")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "mu", _frozen(mu))
        object.__setattr__(self, "C", _frozen(C))

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def evaluate(self, x):
        """Value of the form at each row of ``x``."""
        x = np.atleast_2d(x)
        return np.einsum("ni,ij,nj->n", x, self.A, x)

    def sample(self, size, rng=None):
        """Draw ``size`` realisations of the form (Monte Carlo helper)."""
        rng = np.random.default_rng(rng)
        x = rng.multivariate_normal(self.mu, self.C, size=size, method="eigh")
        return self.evaluate(x)


def cumulants(form: RealQuadraticForm, count: int) -> np.ndarray:
    """First ``count`` cumulants of ``x^T A x``.

    ``c_i = 2^(i-1) i! (tr((AC)^i)/i + mu^T (AC)^(i-1) A mu)``
    """
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    AC = form.A @ form.C
    Amu = form.A @ form.mu
    power = np.eye(form.dim)  # (AC)^(i-1)
    out = np.empty(count)
    for i in range(1, count + 1):
        trace_term = np.trace(power @ AC) / i
        mean_term = form.mu @ (power @ Amu)
        out[i - 1] = 2.0 ** (i - 1) * factorial(i) * (trace_term + mean_term)
        power = power @ AC
    return out


def moments_from_cumulants(c, d: int | None = None) -> np.ndarray:
    """Raw moments ``chi_0..chi_d`` from cumulants ``c_1..c_d``.

    ``chi_i = sum_{k<i} binom(i-1, k) c_{i-k} chi_k``
    """
    c = np.asarray(c, dtype=float)
    if d is None:
        d = c.shape[0]
    if c.shape[0] < d:
        raise InvalidInputError(f"need at least {d} cumulants, got {c.shape[0]}")
    chi = np.zeros(d + 1)
    chi[0] = 1.0
    for i in range(1, d + 1):
        chi[i] = sum(comb(i - 1, k) * c[i - k - 1] * chi[k] for k in range(i))
    return chi


def _central_moments(chi_scaled, mean_scaled):
    """Central moments from raw moments (binomial transform)."""
    d = len(chi_scaled) - 1
    out = np.zeros(d + 1)
    for j in range(d + 1):
        out[j] = sum(
            comb(j, r) * chi_scaled[r] * (-mean_scaled) ** (j - r) for r in range(j + 1)
        )
    out[0], out[1] = 1.0, 0.0
    return out


def _laguerre_coefficients(nu, d):
    """``d_{i,k}``: monomial coefficients of L_i^(nu), computed in log space."""
    coef = np.zeros((d + 1, d + 1))
    for i in range(d + 1):
        for k in range(i + 1):
            logmag = gammaln(i + nu + 1) - gammaln(i - k + 1) - gammaln(k + 1) - gammaln(nu + k + 1)
            coef[i, k] = (-1) ** k * np.exp(logmag)
    return coef


@dataclass(frozen=True)
class LaguerrePdf:
    """Fitted gamma-Laguerre density of a positive quadratic form.

    ``eta`` holds the Laguerre-basis weights; ``xi`` the same density in the
    monomial basis. Evaluation goes through ``eta`` because the monomial sum
    cancels catastrophically when ``nu`` is large (strongly non-central forms).
    """

    nu: float
    beta: float
    xi: np.ndarray
    degree: int
    moments: np.ndarray
    eta: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidInputError("beta must be positive")
        if not self.nu > -1:
            raise InvalidInputError("nu must exceed -1")
        if self.degree < 1:
            raise InvalidInputError("degree must be >= 1")
        for name in ("xi", "moments", "eta"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=float)))

    @property
    def mean(self) -> float:
        return float(self.moments[1])

    @property
    def var(self) -> float:
        return float(self.beta * self.moments[1])

    def _series(self, z, alpha, shift):
        out = np.zeros_like(z)
        for i in range(shift, self.degree + 1):
            w = self.eta[i] / i if shift else self.eta[i]
            if w != 0.0:
                out += w * eval_genlaguerre(i - shift, alpha, z)
        return out

    def pdf(self, y, clip=True):
        y = np.asarray(y, dtype=float)
        if np.any(y < 0):
            raise InvalidInputError("density is only defined for y >= 0")
        z = y / self.beta
        with np.errstate(divide="ignore", invalid="ignore"):
            logw = np.where(z > 0, self.nu * np.log(np.where(z > 0, z, 1.0)), 0.0) - z
            logw = logw - gammaln(self.nu + 1)
            base = np.exp(logw) / self.beta
            if self.nu < 0:
                base = np.where(z > 0, base, np.inf)
            elif self.nu > 0:
                base = np.where(z > 0, base, 0.0)
            val = base * self._series(z, self.nu, 0)
        val = np.where(np.isnan(val), 0.0, val)
        if clip:
            val = np.maximum(val, 0.0)
        return val[()] if val.ndim == 0 else val

    def ringing(self, y):
        """Mask of points where the raw series is negative (clamped by ``pdf``)."""
        return np.asarray(self.pdf(y, clip=False)) < 0

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        z = np.maximum(y, 0.0) / self.beta
        a = self.nu + 1
        with np.errstate(divide="ignore", invalid="ignore"):
            head = gammainc(a, z)
            logp = np.where(z > 0, a * np.log(np.where(z > 0, z, 1.0)) - z - gammaln(a), -np.inf)
            tail = np.exp(logp) * self._series(z, a, 1)
        out = np.clip(np.where(y > 0, head + tail, 0.0), 0.0, 1.0)
        return out[()] if out.ndim == 0 else out

    def sf(self, y):
        return 1.0 - self.cdf(y)

    def ppf(self, p):
        """Quantile by root bracketing on the (approximate) CDF."""
        if p <= 0:
            return 0.0
        sd = np.sqrt(max(self.var, 0.0))
        hi = self.mean + 10 * sd
        for _ in range(200):
            if self.cdf(hi) >= p:
                break
            hi = hi * 2 + sd
        else:
            return float(hi)
        return float(brentq(lambda t: self.cdf(t) - p, 0.0, hi, xtol=1e-12 * hi, rtol=1e-10))


@dataclass(frozen=True)
class PointMass:
    """Stand-in for forms whose variance is numerically zero."""

    value: float

    @property
    def mean(self) -> float:
        return self.value

    @property
    def var(self) -> float:
        return 0.0

    def cdf(self, y):
        out = (np.asarray(y, dtype=float) >= self.value).astype(float)
        return out[()] if out.ndim == 0 else out

    def sf(self, y):
        return 1.0 - self.cdf(y)

    def ppf(self, p):
        return self.value


def fit_laguerre(chi, d: int = DEFAULT_DEGREE, cumulants=None) -> LaguerrePdf:
    """Fit the degree-``d`` Laguerre density to raw moments ``chi_0..chi_d``.

    When the cumulants are available, pass them: central moments are then
    built without subtracting large raw moments.
    """
    chi = np.asarray(chi, dtype=float)
    if d < 1:
        raise InvalidInputError("degree must be >= 1")
    if chi.shape[0] < d + 1:
        raise InvalidInputError(f"need moments chi_0..chi_{d}, got {chi.shape[0]} values")
    chi = chi[: d + 1]
    mean = chi[1]
    if cumulants is not None:
        cumulants = np.asarray(cumulants, dtype=float)
        var = cumulants[1]
    else:
        var = chi[2] - mean**2
    if not mean > 0:
        raise DegenerateDistributionError("mean of a positive form must be > 0")
    if not var > DEGENERATE_RTOL * mean**2:
        raise DegenerateDistributionError(f"variance {var:.3g} is numerically zero")

    beta = var / mean
    nu = mean**2 / var - 1.0
    m = mean / beta  # equals nu + 1

    if cumulants is not None:
        scaled = cumulants[:d] / beta ** np.arange(1, d + 1)
        scaled[0] = 0.0
        central = moments_from_cumulants(scaled, d)
    else:
        central = _central_moments(chi / beta ** np.arange(d + 1), m)

    # E[L_i(Z)] through a Taylor expansion of L_i about the mean of Z
    eta = np.zeros(d + 1)
    for i in range(d + 1):
        expect = sum(
            (-1) ** j * eval_genlaguerre(i - j, nu + j, m) * central[j] / factorial(j)
            for j in range(i + 1)
        )
        eta[i] = np.exp(gammaln(nu + 1) + gammaln(i + 1) - gammaln(nu + i + 1)) * expect
    eta[0] = 1.0
    coef = _laguerre_coefficients(nu, d)
    xi = coef.T @ eta  # xi_k = sum_{i>=k} eta_i d_{i,k}
    return LaguerrePdf(nu=nu, beta=beta, xi=xi, degree=d, moments=chi, eta=eta)


def fit_form(form: RealQuadraticForm, d: int = DEFAULT_DEGREE):
    """Cumulants -> moments -> Laguerre density; point mass if degenerate."""
    c = cumulants(form, max(d, 2))
    chi = moments_from_cumulants(c, d)
    if c[0] <= 0 or c[1] <= DEGENERATE_RTOL * c[0] ** 2:
        return PointMass(float(max(c[0], 0.0)))
    return fit_laguerre(chi, d, cumulants=c)


def density(pdf: LaguerrePdf, y, clip=True):
    return pdf.pdf(y, clip=clip)


def cdf(pdf, y):
    return pdf.cdf(y)
