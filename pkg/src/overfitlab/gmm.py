"""Two-class Gaussian mixture data: x = y * mu + eps, with optional label flips."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal, NamedTuple

import numpy as np

from .rng import Rng, box_muller

NoiseFamily = Literal["gaussian", "rademacher_scaled"]
NOISE_FAMILIES = ("gaussian", "rademacher_scaled")
MAX_RHO = 0.5


def _frozen(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class GmmConfig:
    mu: np.ndarray
    sigma: float
    noise_family: NoiseFamily = "gaussian"

    def __post_init__(self):
        mu = _frozen(self.mu, np.float64).reshape(-1)
        object.__setattr__(self, "mu", mu)
        if mu.size < 1:
            raise ValueError("dimension p must be at least 1")
        if not np.all(np.isfinite(mu)) or not np.linalg.norm(mu) > 0:
            raise ValueError("signal vector must be finite with positive norm")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        if self.noise_family not in NOISE_FAMILIES:
            raise ValueError(f"unknown noise family {self.noise_family!r}")

    @property
    def p(self) -> int:
        return self.mu.size

    @property
    def mu_norm(self) -> float:
        return float(np.linalg.norm(self.mu))

    @property
    def snr(self) -> float:
        return self.mu_norm / self.sigma


class Sample(NamedTuple):
    x: np.ndarray
    y_clean: int
    y_obs: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """n labelled points stored row-wise; ``flip_mask`` marks corrupted labels."""

    X: np.ndarray
    y_clean: np.ndarray
    y_obs: np.ndarray
    config: GmmConfig
    rho: float = 0.0
    flip_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        X = _frozen(self.X, np.float64)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError("X must be a non-empty (n, p) array")
        y_clean = _frozen(self.y_clean, np.int8)
        y_obs = _frozen(self.y_obs, np.int8)
        if y_clean.shape != (X.shape[0],) or y_obs.shape != y_clean.shape:
            raise ValueError("label vectors must have length n")
        if not (np.all(np.abs(y_clean) == 1) and np.all(np.abs(y_obs) == 1)):
            raise ValueError("labels must be +1 or -1")
        mask = y_obs != y_clean
        if self.flip_mask is not None and not np.array_equal(self.flip_mask, mask):
            raise ValueError("flip_mask disagrees with the labels")
        if not 0.0 <= self.rho <= MAX_RHO:
            raise ValueError(f"rho must lie in [0, {MAX_RHO}], got {self.rho!r}")
        if self.rho == 0.0 and mask.any():
            raise ValueError("rho = 0 dataset cannot carry flipped labels")
        for name, value in (("X", X), ("y_clean", y_clean), ("y_obs", y_obs),
                            ("flip_mask", _frozen(mask, bool))):
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def flipped(self) -> np.ndarray:
        """Indices of corrupted samples."""
        return np.flatnonzero(self.flip_mask)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.X[i], int(self.y_clean[i]), int(self.y_obs[i]))

    @property
    def samples(self) -> list[Sample]:
        return [self[i] for i in range(self.n)]

    def labels(self, mode: Literal["clean", "observed"] = "observed") -> np.ndarray:
        if mode == "observed":
            return self.y_obs
        if mode == "clean":
            return self.y_clean
        raise ValueError(f"unknown label mode {mode!r}")


def make_signal(p: int, mu_norm: float, mode: str = "axis", seed: int | None = None) -> np.ndarray:
    """Signal vector of norm ``mu_norm``: ``mu_norm * e_1`` or a random direction."""
    if p < 1:
        raise ValueError(f"p must be at least 1, got {p}")
    if not mu_norm > 0:
        raise ValueError(f"mu_norm must be positive, got {mu_norm}")
    if mode == "axis":
        mu = np.zeros(p)
        mu[0] = mu_norm
        return mu
    if mode == "random":
        if seed is None:
            raise ValueError("random mode needs a seed")
        g = Rng(seed).normals(p)
        while not np.any(g):
            g = Rng(seed + 1).normals(p)
        return mu_norm * (g / np.linalg.norm(g))
    raise ValueError(f"unknown signal mode {mode!r}")


def _noise_stride(p: int, family: str) -> int:
    return p if family == "rademacher_scaled" else 2 * ((p + 1) // 2)


def sample_noiseless(config: GmmConfig, n: int, rng: Rng) -> Dataset:
    """Draw ``n`` clean samples.

    Each sample consumes one uniform for its label, then its noise block
    (two uniforms per Box-Muller pair, or one per Rademacher coordinate).
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    p = config.p
    stride = 1 + _noise_stride(p, config.noise_family)
    u = rng.uniforms(n * stride).reshape(n, stride)
    y = np.where(u[:, 0] < 0.5, 1, -1).astype(np.int8)
    if config.noise_family == "gaussian":
        pairs = u[:, 1:].reshape(n, -1, 2)
        eps = box_muller(pairs[..., 0], pairs[..., 1]).reshape(n, -1)[:, :p]
    else:
        eps = np.where(u[:, 1:] < 0.5, 1.0, -1.0)
    X = y[:, None] * config.mu + config.sigma * eps
    return Dataset(X=X, y_clean=y, y_obs=y, config=config, rho=0.0)


def corrupt_labels(dataset: Dataset, rho: float, rng: Rng) -> Dataset:
    """Flip each label independently with probability ``rho``."""
    if not 0.0 <= rho <= MAX_RHO:
        raise ValueError(f"rho must lie in [0, {MAX_RHO}], got {rho!r}")
    if dataset.flip_mask.any():
        raise ValueError("dataset is already corrupted")
    flips = rng.uniforms(dataset.n) < rho
    y_obs = np.where(flips, -dataset.y_clean, dataset.y_clean)
    return replace(dataset, y_obs=y_obs, rho=float(rho), flip_mask=None)


def sample_dataset(config: GmmConfig, n: int, rho: float, rng: Rng) -> Dataset:
    return corrupt_labels(sample_noiseless(config, n, rng), rho, rng)


def write_dataset_csv(dataset: Dataset, path) -> None:
    path = Path(path)
    header = ["index", "y_clean", "y_obs", "flipped"] + [f"x_{j}" for j in range(dataset.p)]
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in range(dataset.n):
                w.writerow([i, int(dataset.y_clean[i]), int(dataset.y_obs[i]),
                            "true" if dataset.flip_mask[i] else "false",
                            *(repr(float(v)) for v in dataset.X[i])])
    except OSError as exc:
        raise OSError(f"cannot write dataset to {path}: {exc}") from exc


def read_dataset_csv(path, config: GmmConfig | None = None, rho: float | None = None) -> Dataset:
    """Load a dataset CSV.

    Without ``config`` the signal is unknown; a placeholder axis signal of unit
    norm and unit sigma is attached so the result is still a valid Dataset.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read dataset from {path}: {exc}") from exc
    if len(rows) < 2 or rows[0][:4] != ["index", "y_clean", "y_obs", "flipped"]:
        raise ValueError(f"{path}: not a dataset CSV")
    body = rows[1:]
    y_clean = np.array([int(r[1]) for r in body])
    y_obs = np.array([int(r[2]) for r in body])
    X = np.array([[float(v) for v in r[4:]] for r in body])
    if config is None:
        config = GmmConfig(mu=make_signal(X.shape[1], 1.0), sigma=1.0)
    if rho is None:
        rho = min(MAX_RHO, float(np.mean(y_obs != y_clean)))
    return Dataset(X=X, y_clean=y_clean, y_obs=y_obs, config=config, rho=rho)
