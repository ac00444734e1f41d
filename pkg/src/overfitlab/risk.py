"""Population 0-1 risk of a linear rule on the mixture, exact and sampled."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .gmm import MAX_RHO, GmmConfig, corrupt_labels, sample_noiseless
from .rng import Rng

_MC_BLOCK = 8192


class UndefinedClassifier(ValueError):
    pass


def normal_cdf(z: float) -> float:
    """Standard normal CDF through erfc, accurate in both tails."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _nonzero(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    norm = np.linalg.norm(w)
    if norm == 0 or not np.isfinite(norm):
        raise UndefinedClassifier("risk is undefined for the zero classifier")
    return w


def closed_form_risk(w, mu, sigma: float) -> float:
    """P(y x^T w < 0) under Gaussian noise: Phi(-mu^T w / (sigma ||w||))."""
    w = _nonzero(w)
    mu = np.asarray(mu, dtype=np.float64)
    return normal_cdf(-float(mu @ w) / (sigma * float(np.linalg.norm(w))))


def bayes_risk(config: GmmConfig) -> float:
    return normal_cdf(-config.snr)


def noisy_risk(clean: float, rho: float) -> float:
    """Risk against flipped test labels given the clean-label risk."""
    if not 0.0 <= clean <= 1.0:
        raise ValueError(f"clean risk must lie in [0, 1], got {clean!r}")
    if not 0.0 <= rho <= MAX_RHO:
        raise ValueError(f"rho must lie in [0, {MAX_RHO}], got {rho!r}")
    return rho + (1.0 - 2.0 * rho) * clean


def excess_risk(w, config: GmmConfig) -> float:
    """Clean-label risk above the signal-direction rule."""
    if config.noise_family != "gaussian":
        raise ValueError("closed-form risk needs gaussian noise; use mc_risk instead")
    return closed_form_risk(w, config.mu, config.sigma) - bayes_risk(config)


def mc_risk(w, config: GmmConfig, rho: float, m: int, rng: Rng) -> tuple[float, float]:
    """Error frequency on ``m`` fresh samples with labels flipped at ``rho``.

    A zero score counts as an error. Returns (estimate, binomial std error).
    """
    w = _nonzero(w)
    if m < 100:
        raise ValueError(f"need at least 100 Monte Carlo samples, got {m}")
    errors = 0
    left = m
    while left:
        k = min(_MC_BLOCK, left)
        block = corrupt_labels(sample_noiseless(config, k, rng), rho, rng)
        errors += int(np.count_nonzero(block.y_obs * (block.X @ w) <= 0))
        left -= k
    est = errors / m
    return est, math.sqrt(est * (1.0 - est) / m)


@dataclass
class RiskReport:
    clean_risk: float
    noisy_risk: float
    excess_risk: float
    method: str  # "closed_form" | "monte_carlo"
    m: int | None = None
    std_err: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def risk_report(w, config: GmmConfig, rho: float) -> RiskReport:
    clean = closed_form_risk(w, config.mu, config.sigma)
    return RiskReport(clean, noisy_risk(clean, rho), clean - bayes_risk(config), "closed_form")


def holdout_evaluator(config: GmmConfig, m: int, rng: Rng):
    """Clean-label error rate on one fixed test sample, as a callable of w.

    Works for any noise family; use it for early stopping when the closed
    form does not apply.
    """
    if m < 1:
        raise ValueError("holdout set needs at least one point")
    test = sample_noiseless(config, m, rng)
    Z = test.y_clean[:, None] * test.X

    def evaluate(w) -> float:
        return float(np.count_nonzero(Z @ _nonzero(w) <= 0)) / m

    return evaluate
