"""Verification batteries: concentration claims, the noisy-label risk
transform, and cross-checks of the max-margin solver against SGD and against
brute-force active-set enumeration."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bounds
from .gmm import Dataset, GmmConfig, corrupt_labels, make_signal, sample_noiseless
from .max_margin import direction_gap, lp_separable, solve_max_margin_rows
from .risk import mc_risk, noisy_risk
from .rng import Rng, cell_seed
from .trainer import TrainParams, multipass_sgd

SGD_INSTANCES = 50
SGD_UPDATES = 100_000_000
SGD_GAP_TOL = 0.005
SGD_MIN_PASS = 48
SGD_ETA_SCALE = 10.0


@dataclass
class CheckOutcome:
    claim: str
    params: dict
    bound: float
    frequency: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def enumerate_max_margin(Z: np.ndarray, feas_tol: float = 1e-9) -> np.ndarray:
    """Minimum-norm w with Z w >= 1 by trying every active set.

    For each subset S of at most min(n, p) rows with independent rows, the
    least-norm solution of Z_S w = 1 is a candidate; the shortest feasible
    candidate is the optimum. Exponential in n: meant for n <= 12 or so.
    """
    Z = np.asarray(Z, dtype=np.float64)
    n, p = Z.shape
    best = None
    for k in range(1, min(n, p) + 1):
        for S in itertools.combinations(range(n), k):
            ZS = Z[list(S)]
            gram = ZS @ ZS.T
            if np.linalg.matrix_rank(gram) < k:
                continue
            w = ZS.T @ np.linalg.solve(gram, np.ones(k))
            if np.all(Z @ w >= 1.0 - feas_tol):
                if best is None or w @ w < best @ best:
                    best = w
    if best is None:
        raise ValueError("no feasible active set: rows are not separable")
    return best


def random_instance(rng: Rng, n_max: int = 16, p_max: int = 32, n_min: int = 2,
                    mu_norm: float = 2.0, rho: float = 0.0) -> np.ndarray:
    """Signed rows y_i x_i of a small separable mixture sample."""
    while True:
        n = n_min + int(rng.uniform() * (n_max - n_min + 1))
        p = n + int(rng.uniform() * (p_max - n + 1))
        gmm = GmmConfig(make_signal(p, mu_norm), 1.0)
        data = corrupt_labels(sample_noiseless(gmm, n, rng), rho, rng)
        Z = data.y_obs[:, None] * data.X
        if lp_separable(Z):
            return Z


def claims_battery(trials: int = 2000, delta: float = 0.05, seed: int = 0) -> list[CheckOutcome]:
    """Monte Carlo frequency of each concentration claim failing, against
    delta plus three binomial standard errors."""
    slack = bounds.monte_carlo_slack(delta, trials)
    limit = delta + slack
    out = []
    rng = Rng(cell_seed(seed, 1, 0, 0, 0))
    params = {"n": 100, "sigma": 1.0, "delta": delta, "trials": trials}
    f = bounds.check_max_subgaussian(100, 1.0, delta, trials, rng)
    out.append(CheckOutcome("max_subgaussian", params, limit, f, f <= limit,
                            {"threshold": bounds.max_abs_threshold(100, 1.0, delta)}))

    rng = Rng(cell_seed(seed, 2, 0, 0, 0))
    params = {"n": 100, "p": 200, "sigma": 1.0, "delta": delta, "trials": trials}
    f = bounds.check_noise_sum_norm(100, 200, 1.0, delta, trials, rng)
    out.append(CheckOutcome("noise_sum_norm", params, limit, f, f <= limit,
                            {"threshold": bounds.noise_mean_threshold(100, 200, 1.0, delta)}))

    rng = Rng(cell_seed(seed, 3, 0, 0, 0))
    params = {"n": 1000, "rho": 0.4, "delta": delta, "trials": trials}
    f = bounds.check_noisy_count(1000, 0.4, delta, trials, rng)
    out.append(CheckOutcome("noisy_count", params, limit, f, f <= limit))
    return out


def transform_check(m: int = 100_000, rho: float = 0.4, seed: int = 0, p: int = 8,
                    mu_norm: float = 1.0) -> CheckOutcome:
    """Sampled risk on flipped labels against rho + (1 - 2 rho) * sampled clean risk."""
    gmm = GmmConfig(make_signal(p, mu_norm), 1.0)
    w = Rng(cell_seed(seed, 4, 0, 0, 0)).normals(p)
    clean, se_clean = mc_risk(w, gmm, 0.0, m, Rng(cell_seed(seed, 4, 1, 0, 0)))
    noisy, se_noisy = mc_risk(w, gmm, rho, m, Rng(cell_seed(seed, 4, 2, 0, 0)))
    predicted = noisy_risk(clean, rho)
    combined = math.hypot(se_noisy, (1.0 - 2.0 * rho) * se_clean)
    diff = abs(noisy - predicted)
    return CheckOutcome("noisy_risk_transform",
                        {"m": m, "rho": rho, "p": p, "mu_norm": mu_norm},
                        3.0 * combined, diff, diff <= 3.0 * combined,
                        {"clean": clean, "noisy": noisy, "predicted": predicted})


def qp_vs_enumeration(instances: int = 20, n_max: int = 10, p_max: int = 20,
                      seed: int = 0, gap_tol: float = 1e-6) -> CheckOutcome:
    rng = Rng(cell_seed(seed, 5, 0, 0, 0))
    gaps = []
    for _ in range(instances):
        Z = random_instance(rng, n_max=n_max, p_max=p_max, rho=0.2)
        sol = solve_max_margin_rows(Z)
        gaps.append(direction_gap(sol.w, enumerate_max_margin(Z)))
    worst = max(gaps)
    return CheckOutcome("qp_vs_enumeration",
                        {"instances": instances, "n_max": n_max, "p_max": p_max},
                        gap_tol, worst, worst <= gap_tol, {"gaps": gaps})


def isotropic_instance(rng: Rng, n_min: int = 4, n_max: int = 16, p_max: int = 32):
    """n in [n_min, n_max], p in [n, p_max], standard normal features and fair
    coin labels. With p >= n the rows are independent, so the set is separable."""
    n = n_min + int(rng.uniform() * (n_max - n_min + 1))
    p = n + int(rng.uniform() * (p_max - n + 1))
    X = rng.normals(n * p).reshape(n, p)
    y = np.where(rng.uniforms(n) < 0.5, 1, -1)
    return X, y


def _sgd_gap(X, y, updates, eta_scale, seed):
    n, p = X.shape
    data = Dataset(X, y, y, GmmConfig(np.eye(p)[0], 1.0))
    eta = eta_scale / float(np.max(np.einsum("ij,ij->i", X, X)))
    epochs = max(1, -(-updates // n))
    params = TrainParams(eta=eta, max_epochs=epochs, loss_threshold=1e-300,
                         record_every=epochs * n, keep_iterates=False)
    w = multipass_sgd(data, params, Rng(seed)).final.w
    return direction_gap(w, solve_max_margin_rows(y[:, None] * X).w)


def sgd_vs_qp(instances: int = SGD_INSTANCES, updates: int = SGD_UPDATES,
              eta_scale: float = SGD_ETA_SCALE, seed: int = 0, gap_tol: float = SGD_GAP_TOL,
              min_pass: int | None = None, threads: int = 1) -> CheckOutcome:
    """Long constant-step SGD from zero against the exact max-margin direction.

    The step is ``eta_scale / max_i ||x_i||^2``. Passes when at least
    ``min_pass`` instances (default: 96%) end within ``gap_tol``.
    """
    if instances < 1 or updates < 1:
        raise ValueError("instances and updates must be positive")
    if min_pass is None:
        min_pass = math.ceil(SGD_MIN_PASS / SGD_INSTANCES * instances)
    rng = Rng(cell_seed(seed, 6, 0, 0, 0))
    jobs = [(*isotropic_instance(rng), updates, eta_scale, cell_seed(seed, 6, 1, 0, k))
            for k in range(instances)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            gaps = list(pool.map(lambda j: _sgd_gap(*j), jobs))
    else:
        gaps = [_sgd_gap(*j) for j in jobs]
    passed = sum(g <= gap_tol for g in gaps)
    return CheckOutcome("sgd_vs_qp",
                        {"instances": instances, "updates": updates, "eta_scale": eta_scale,
                         "gap_tol": gap_tol},
                        float(min_pass), float(passed), passed >= min_pass,
                        {"gaps": gaps, "sizes": [list(j[0].shape) for j in jobs]})


def run_all(trials: int = 2000, delta: float = 0.05, seed: int = 0, m: int = 100_000,
            instances: int = SGD_INSTANCES, updates: int = SGD_UPDATES,
            enum_instances: int = 20, threads: int = 1,
            eta_scale: float = SGD_ETA_SCALE) -> list[CheckOutcome]:
    out = claims_battery(trials, delta, seed)
    out.append(transform_check(m=m, seed=seed))
    if instances > 0:
        out.append(sgd_vs_qp(instances, updates, eta_scale, seed=seed, threads=threads))
    if enum_instances > 0:
        out.append(qp_vs_enumeration(enum_instances, seed=seed))
    return out
