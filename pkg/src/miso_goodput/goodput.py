"""Goodput evaluation: analytic (Laguerre) and Monte Carlo outage, rate sweeps,
cheap outage proxies and the choice of the interference scale ``a``."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .beamform import BeamformDesign, maxmin_design, maxmin_gamma, signal_gains, zf_directions
from .channel import Scenario, sample_errors
from .exceptions import GoodputError, InvalidInputError
from .indefinite import ComplexQuadraticProblem, build_Q, decompose, embed_real, outage_probability
from .quadform import DEFAULT_DEGREE, fit_form

log = logging.getLogger(__name__)

DEFAULT_ETA = 0.3
GOLDEN = (np.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class GoodputPoint:
    rate: float
    outage: np.ndarray
    goodput_per_user: float
    method: str
    a: Optional[float] = None
    failed: bool = False
    info: dict = field(default_factory=dict, compare=False)

    @property
    def gamma(self) -> float:
        return 2.0**self.rate - 1.0


def goodput(R, delta, eta=DEFAULT_ETA) -> float:
    """Per-user goodput ``mean_k[(1 - delta_k) R + eta delta_k R]``."""
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    if not 0 <= eta <= 1:
        raise InvalidInputError("eta must lie in [0, 1]")
    if R < 0:
        raise InvalidInputError("rate must be nonnegative")
    if np.any((delta < 0) | (delta > 1)):
        raise InvalidInputError("outage probabilities must lie in [0, 1]")
    return float(np.mean((1 - delta) * R + eta * delta * R))


def rate_to_gamma(R):
    return 2.0 ** np.asarray(R, dtype=float) - 1.0


def rate_grid(gamma_ref, n=64, lo=0.1, hi=4.0) -> np.ndarray:
    """Rates for targets spaced geometrically in ``[lo, hi] * gamma_ref``."""
    return np.log2(1 + gamma_ref * np.geomspace(lo, hi, n))


def analytic_outages(scenario: Scenario, design: BeamformDesign, gamma, d=DEFAULT_DEGREE) -> np.ndarray:
    """Laguerre-approximated outage for every user at target ``gamma``."""
    out = np.empty(design.n_users)
    for k in range(design.n_users):
        prob = ComplexQuadraticProblem(
            build_Q(design, k, gamma),
            scenario.h_est[k],
            scenario.err_mean[k],
            scenario.err_cov[k],
            scenario.noise[k],
        )
        out[k] = outage_probability(prob, d)
    return out


def true_sinr(design: BeamformDesign, user, h, noise) -> np.ndarray:
    """SINR of ``user`` for channel realisations ``h`` (one per row)."""
    gains = np.abs(np.atleast_2d(h).conj() @ design.beamformers.T) ** 2
    signal = gains[:, user]
    return signal / (gains.sum(axis=1) - signal + noise)


def _sinr_samples(scenario, design, user, errors):
    h = scenario.h_est[user] + errors
    return true_sinr(design, user, h, scenario.noise[user])


def sweep_rate(scenario: Scenario, design: BeamformDesign, R_grid, eta=DEFAULT_ETA, d=DEFAULT_DEGREE):
    """Goodput of a frozen design across transmission rates (analytic outage)."""
    points = []
    for R in np.asarray(R_grid, dtype=float):
        try:
            if R <= 0:
                delta = np.zeros(design.n_users)
            else:
                delta = analytic_outages(scenario, design, float(rate_to_gamma(R)), d)
            points.append(GoodputPoint(float(R), delta, goodput(R, delta, eta), "analytic", design.a))
        except (GoodputError, np.linalg.LinAlgError, ValueError) as exc:
            log.warning("rate %.4f failed: %s", R, exc)
            nan = np.full(design.n_users, np.nan)
            points.append(GoodputPoint(float(R), nan, np.nan, "analytic", design.a, failed=True))
    return points


def mc_outages(scenario, design, gamma, n_samples, seed, scenario_index=0, rate_index=0) -> np.ndarray:
    out = np.empty(design.n_users)
    for k in range(design.n_users):
        ss = np.random.SeedSequence([seed, scenario_index, k, rate_index])
        e = sample_errors(scenario, k, n_samples, np.random.default_rng(ss))
        out[k] = np.mean(_sinr_samples(scenario, design, k, e) < gamma)
    return out


def mc_goodput(scenario, design, R_grid, eta=DEFAULT_ETA, n_samples=2000, seed=0, scenario_index=0):
    """Monte Carlo goodput; draws are keyed by (seed, scenario, user, rate index)."""
    if n_samples < 1:
        raise InvalidInputError("n_samples must be >= 1")
    points = []
    for i, R in enumerate(np.asarray(R_grid, dtype=float)):
        delta = mc_outages(scenario, design, float(rate_to_gamma(R)), n_samples, seed, scenario_index, i)
        points.append(GoodputPoint(float(R), delta, goodput(R, delta, eta), "mc", design.a))
    return points


def exp_a_outage(a) -> float:
    """Outage proxy ``exp(-a)`` (exact for a single white-error interferer)."""
    if a < 0:
        raise InvalidInputError("a must be >= 0")
    return float(np.exp(-a))


def interference_only_outage(scenario: Scenario, design: BeamformDesign, user, gamma, d=DEFAULT_DEGREE) -> float:
    """Outage from the error leakage alone: ``P[I > beta_k g_k / gamma - sigma_k^2]``.

    ``I = e^H (sum_{j != k} w_j w_j^H) e`` is a definite form, so a single
    density fit suffices.
    """
    g = signal_gains(scenario.h_est[user], design.directions[user])[0]
    threshold = design.powers[user] * g / gamma - scenario.noise[user]
    if threshold <= 0:
        return 1.0
    M = design.interference_matrix(user)
    prob = ComplexQuadraticProblem(
        M, np.zeros(scenario.n_antennas), scenario.err_mean[user], scenario.err_cov[user], 1.0
    )
    split = decompose(prob)
    if split.pos is None:
        return float(split.offset > threshold)
    dist = fit_form(embed_real(split.pos.b, split.pos.delta), d)
    return float(dist.sf(threshold - split.offset))


def _scenario_gains(scenario):
    U = zf_directions(scenario.h_est)
    return U, signal_gains(scenario.h_est, U)


def golden_section_max(f, lo, hi, tol=1e-3, max_iter=200):
    """Maximise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x), at_boundary)``."""
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)) / 2:
            break
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
    x, fx = (x1, f1) if f1 >= f2 else (x2, f2)
    for edge in (lo, hi):
        fe = f(edge)
        if fe > fx:
            x, fx = edge, fe
    at_boundary = min(abs(x - lo), abs(x - hi)) <= tol * max(1.0, hi - lo)
    return x, fx, at_boundary


def expected_goodput_exp_a(rate, a, eta=DEFAULT_ETA) -> float:
    delta = exp_a_outage(a)
    return (1 - delta) * rate + eta * delta * rate


def choose_a(scenario: Scenario, eta=DEFAULT_ETA, a_range=(0.0, 50.0), tol=1e-3):
    """Scale factor maximising the ``exp(-a)``-modelled goodput.

    Returns ``(a_star, gamma_star, goodput, at_boundary)``.
    """
    U, gains = _scenario_gains(scenario)
    P_t = scenario.total_power

    def gamma_of(a):
        return maxmin_gamma(gains, scenario.noise, scenario.err_power, a, P_t)[0]

    def objective(a):
        return expected_goodput_exp_a(np.log2(1 + gamma_of(a)), a, eta)

    a_star, value, edge = golden_section_max(objective, a_range[0], a_range[1], tol)
    return a_star, gamma_of(a_star), value, edge


def evaluate_design_goodput(scenario: Scenario, a, eta=DEFAULT_ETA, d=DEFAULT_DEGREE) -> GoodputPoint:
    """ZF + robust max-min at scale ``a``, transmitted at the claimed rate,
    scored with the analytic outage."""
    if a < 0:
        raise InvalidInputError("a must be >= 0")
    design = maxmin_design(scenario.h_est, scenario.noise, scenario.err_power, a, scenario.total_power)
    R = design.rate
    delta = analytic_outages(scenario, design, design.gamma, d)
    return GoodputPoint(
        R,
        delta,
        goodput(R, delta, eta),
        "analytic",
        a,
        info={"gamma": design.gamma, "goodput_exp_a": expected_goodput_exp_a(R, a, eta)},
    )
