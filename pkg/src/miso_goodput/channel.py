"""Scenario generation: user drops, path loss, shadowing, Rayleigh fading and
imperfect channel estimates, plus the optional six-cell interference ring."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .exceptions import ConfigError

N_INTERFERERS = 6


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    n_antennas: int = 8
    n_users: int = 3
    cell_radius: float = 1000.0
    pathloss_exponent: float = 3.52
    shadow_std_db: float = 8.0
    noise_power: float = 1e-12
    error_power: float = 1e-13
    total_power: float = 40.0
    multicell: bool = False
    interferer_distance: float = 2000.0
    n_interferers: int = N_INTERFERERS
    min_distance: float = 10.0
    reference_gain: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (self.n_antennas >= self.n_users >= 1):
            raise ConfigError("need n_antennas >= n_users >= 1")
        for name in ("noise_power", "error_power", "total_power", "cell_radius", "reference_gain"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.shadow_std_db < 0:
            raise ConfigError("shadow_std_db must be >= 0")
        if self.min_distance < 0 or self.interferer_distance <= 0 or self.n_interferers < 0:
            raise ConfigError("distances and interferer count must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown scenario key(s): {', '.join(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "ScenarioConfig":
        return type(self)(**{**self.to_dict(), **changes})


@dataclass(frozen=True)
class Scenario:
    """One channel set. Arrays are indexed by user first."""

    h_true: np.ndarray
    h_est: np.ndarray
    err_mean: np.ndarray
    err_cov: np.ndarray
    noise: np.ndarray
    total_power: float
    positions: np.ndarray
    large_scale_gain: np.ndarray

    @property
    def n_users(self) -> int:
        return self.h_est.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.h_est.shape[1]

    @property
    def err_power(self) -> np.ndarray:
        """Per-user error power ``tr(C_k)/N_t`` (exact for white errors)."""
        return np.real(np.trace(self.err_cov, axis1=1, axis2=2)) / self.n_antennas

    def to_records(self) -> list:
        """Flat per-user records for reproducibility audits."""
        rows = []
        for k in range(self.n_users):
            row = {
                "user": k,
                "x": float(self.positions[k, 0]),
                "y": float(self.positions[k, 1]),
                "large_scale_gain": float(self.large_scale_gain[k]),
                "noise": float(self.noise[k]),
                "err_power": float(self.err_power[k]),
            }
            for i in range(self.n_antennas):
                row[f"h_est_re{i}"] = float(self.h_est[k, i].real)
                row[f"h_est_im{i}"] = float(self.h_est[k, i].imag)
            rows.append(row)
        return rows


def crandn(rng, shape):
    """Standard circular complex Gaussian draws (unit variance)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def pathloss(config: ScenarioConfig, distance):
    d = np.maximum(np.asarray(distance, dtype=float), config.min_distance)
    return config.reference_gain * d ** (-config.pathloss_exponent)


def drop_users(config: ScenarioConfig, rng) -> np.ndarray:
    """Uniform positions over the cell disc (by area)."""
    r = config.cell_radius * np.sqrt(rng.uniform(size=config.n_users))
    theta = rng.uniform(0, 2 * np.pi, size=config.n_users)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def interferer_positions(config: ScenarioConfig) -> np.ndarray:
    angles = 2 * np.pi * np.arange(config.n_interferers) / max(config.n_interferers, 1)
    return config.interferer_distance * np.column_stack([np.cos(angles), np.sin(angles)])


def intercell_noise(config: ScenarioConfig, position, rng=None) -> float:
    """User noise plus mean received power from the surrounding base stations."""
    if not config.multicell:
        return config.noise_power
    rng = np.random.default_rng(rng)
    dist = np.linalg.norm(interferer_positions(config) - np.asarray(position)[None, :], axis=1)
    shadow = 10.0 ** (config.shadow_std_db * rng.standard_normal(dist.shape) / 10.0)
    return float(config.noise_power + np.sum(config.total_power * pathloss(config, dist) * shadow))


def generate(config: ScenarioConfig, seed=None) -> Scenario:
    """Draw one scenario; deterministic for a given seed (defaults to ``config.seed``)."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    K, N = config.n_users, config.n_antennas
    pos = drop_users(config, rng)
    dist = np.linalg.norm(pos, axis=1)
    shadow = 10.0 ** (config.shadow_std_db * rng.standard_normal(K) / 10.0)
    gain = pathloss(config, dist) * shadow
    h_true = np.sqrt(gain)[:, None] * crandn(rng, (K, N))
    err = np.sqrt(config.error_power) * crandn(rng, (K, N))
    h_est = h_true - err
    noise = np.array([intercell_noise(config, pos[k], rng) for k in range(K)])
    err_cov = np.broadcast_to(config.error_power * np.eye(N, dtype=complex), (K, N, N)).copy()
    return Scenario(
        h_true=h_true,
        h_est=h_est,
        err_mean=np.zeros((K, N), dtype=complex),
        err_cov=err_cov,
        noise=noise,
        total_power=config.total_power,
        positions=pos,
        large_scale_gain=gain,
    )


def sample_errors(scenario: Scenario, user: int, count: int, seed=None) -> np.ndarray:
    """``count`` i.i.d. draws of ``e_k ~ CN(mu_k, C_k)``, one per row."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    C = scenario.err_cov[user]
    w, V = np.linalg.eigh(C)
    root = V * np.sqrt(np.clip(w, 0, None))
    z = crandn(rng, (count, scenario.n_antennas))
    return scenario.err_mean[user] + z @ root.T
