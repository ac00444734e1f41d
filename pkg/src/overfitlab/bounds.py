"""Risk bounds as plain formulas, and Monte Carlo checks of the concentration
facts they rest on.

The absolute constants are not pinned down by the theory; they live in
:class:`BoundConstants` and default to 1 (``c5`` to 2, the smallest value for
which the one-pass learning-rate argument goes through).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .risk import normal_cdf
from .rng import Rng


@dataclass(frozen=True)
class BoundConstants:
    c2: float = 1.0
    c3: float = 1.0
    c4: float = 1.0
    c5: float = 2.0
    c14: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"constant {name} must be positive, got {value!r}")
        if self.c5 < 2:
            raise ValueError(f"c5 must be at least 2, got {self.c5!r}")


DEFAULT_CONSTANTS = BoundConstants()


def lower_bound_noisy(rho: float, r: float, consts: BoundConstants = DEFAULT_CONSTANTS) -> float:
    """min{Phi(-2), rho / (c3 r) * exp(-c3 r / rho)}: interpolator risk floor."""
    if not 0 < rho <= 0.5:
        raise ValueError(f"the noisy bound needs 0 < rho <= 0.5, got {rho!r}")
    if not r > 0:
        raise ValueError(f"overparameterisation ratio must be positive, got {r!r}")
    k = consts.c3 * r
    return min(normal_cdf(-2.0), rho / k * math.exp(-k / rho))


def upper_bound_earlystop(mu_norm: float, sigma: float, p: int, n: int,
                          consts: BoundConstants = DEFAULT_CONSTANTS) -> float:
    if min(mu_norm, sigma, p, n) <= 0:
        raise ValueError("mu_norm, sigma, p and n must be positive")
    m2 = mu_norm * mu_norm
    s2 = sigma * sigma
    expo = consts.c14 * m2 * m2 / (m2 * s2 + s2 * s2 * p / n)
    return min(1.0, max(0.0, math.exp(-expo)))


def upper_bound_noiseless(n: int, consts: BoundConstants = DEFAULT_CONSTANTS) -> float:
    if n < 1:
        raise ValueError("n must be at least 1")
    return min(1.0, float(n) ** (-consts.c2))


def monte_carlo_slack(delta: float, trials: int) -> float:
    """Three binomial standard errors at the nominal failure rate."""
    return 3.0 * math.sqrt(delta * (1.0 - delta) / trials)


def max_abs_threshold(n: int, sigma: float, delta: float) -> float:
    return math.sqrt(2.0) * sigma * (math.sqrt(math.log(n)) + math.sqrt(math.log(1.0 / delta)))


def noise_mean_threshold(n: int, p: int, sigma: float, delta: float) -> float:
    return 4.0 * sigma * math.sqrt(p / n) + 2.0 * sigma * math.sqrt(math.log(1.0 / delta) / n)


def _check_args(delta, trials):
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    if trials < 1:
        raise ValueError("trials must be at least 1")


def check_max_subgaussian(n: int, sigma: float, delta: float, trials: int, rng: Rng) -> float:
    """Fraction of trials where max_i |X_i| over n Gaussians beats the claimed bound."""
    _check_args(delta, trials)
    thresh = max_abs_threshold(n, sigma, delta)
    hits = 0
    for child in rng.spawn(trials):
        hits += bool(np.max(np.abs(sigma * child.normals(n))) > thresh)
    return hits / trials


def check_noise_sum_norm(n: int, p: int, sigma: float, delta: float, trials: int,
                         rng: Rng) -> float:
    """Fraction of trials where ||mean of n noise vectors|| beats the claimed bound."""
    _check_args(delta, trials)
    thresh = noise_mean_threshold(n, p, sigma, delta)
    hits = 0
    for child in rng.spawn(trials):
        eps = sigma * child.normals(n * p).reshape(n, p)
        hits += bool(np.linalg.norm(eps.mean(axis=0)) > thresh)
    return hits / trials


def check_noisy_count(n: int, rho: float, delta: float, trials: int, rng: Rng) -> float:
    """Fraction of trials where the flip count leaves [rho n / 2, 3 rho n / 2]."""
    _check_args(delta, trials)
    lo, hi = rho * n / 2.0, 1.5 * rho * n
    hits = 0
    for child in rng.spawn(trials):
        k = int(np.count_nonzero(child.uniforms(n) < rho))
        hits += not (lo <= k <= hi)
    return hits / trials


def monotonicity_checks(consts: BoundConstants = DEFAULT_CONSTANTS) -> dict[str, bool]:
    """Shape checks of the bound formulas on fixed grids."""
    rs = np.geomspace(0.1, 64.0, 200)
    lower = {rho: [lower_bound_noisy(rho, r, consts) for r in rs] for rho in (0.05, 0.2, 0.4, 0.5)}
    mus = np.linspace(0.1, 40.0, 200)
    early_mu = [upper_bound_earlystop(m, 1.0, 128, 64, consts) for m in mus]
    ratios = np.geomspace(0.25, 64.0, 200)
    early_r = [upper_bound_earlystop(2.0, 1.0, max(1, int(round(q * 64))), 64, consts) for q in ratios]
    ns = range(1, 2001)
    noiseless = [upper_bound_noiseless(n, consts) for n in ns]

    def nonincreasing(v):
        return all(b <= a for a, b in zip(v, v[1:]))

    return {
        "lower_noisy_nonincreasing_in_r": all(nonincreasing(v) for v in lower.values()),
        "lower_noisy_at_most_phi_minus_2": all(max(v) <= normal_cdf(-2.0) for v in lower.values()),
        "earlystop_nonincreasing_in_mu": nonincreasing(early_mu),
        "earlystop_nondecreasing_in_p_over_n": nonincreasing(early_r[::-1]),
        "noiseless_nonincreasing_in_n": nonincreasing(noiseless),
        "all_in_unit_interval": all(0.0 <= x <= 1.0 for x in early_mu + early_r + noiseless),
    }
