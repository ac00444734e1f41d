"""SGD on the logistic loss: multi-pass without replacement, one-pass from zero,
plus early-stopping selection and the prefix-sum surrogate used to track
one-pass SGD at small learning rates."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .gmm import Dataset
from .rng import Rng

# Updates handed to the compiled loop per call; bounds the pre-drawn uniforms.
_BLOCK_UPDATES = 1 << 16


class Iterate(NamedTuple):
    t: int
    w: np.ndarray
    train_loss: float


@dataclass(frozen=True)
class TrainParams:
    eta: float
    max_epochs: int = 1000
    loss_threshold: float = 0.05
    record_every: int | None = None  # iterations; None means one record per epoch
    init: np.ndarray | None = None  # None means zero initialisation
    keep_iterates: bool = True
    keep_orders: bool = False

    def __post_init__(self):
        if not self.eta >= 0 or not math.isfinite(self.eta):
            raise ValueError(f"eta must be finite and non-negative, got {self.eta!r}")
        if not self.loss_threshold > 0:
            raise ValueError("loss_threshold must be positive")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be non-negative")
        if self.record_every is not None and self.record_every < 1:
            raise ValueError("record_every must be at least 1")


@dataclass
class Trajectory:
    iterates: list[Iterate]
    epochs_completed: int
    terminated_by: str  # "threshold" | "max_epochs"
    orders: list[np.ndarray] = field(default_factory=list)

    @property
    def final(self) -> Iterate:
        return self.iterates[-1]

    @property
    def ts(self) -> list[int]:
        return [it.t for it in self.iterates]


Observer = Callable[[int, np.ndarray, float], None]


def _initial_weights(params: TrainParams, p: int) -> np.ndarray:
    if params.init is None:
        return np.zeros(p)
    w = np.array(params.init, dtype=np.float64).reshape(-1)
    if w.shape != (p,) or not np.all(np.isfinite(w)):
        raise ValueError(f"initial weights must be finite with length {p}")
    return w


def multipass_sgd(dataset: Dataset, params: TrainParams, rng: Rng,
                  observer: Observer | None = None) -> Trajectory:
    """Plain SGD, one fresh uniform permutation per epoch.

    The stopping rule is checked on the mean training loss at each epoch end.
    ``observer`` sees every recorded iterate, which lets callers score long
    runs without keeping them (``keep_iterates=False`` keeps only the first
    and last iterate).
    """
    X = np.ascontiguousarray(dataset.X)
    y = dataset.y_obs.astype(np.float64)
    n, p = X.shape
    every = params.record_every or n
    w = _initial_weights(params, p)

    iterates: list[Iterate] = []
    orders: list[np.ndarray] = []

    last_seen = [-1]

    def emit(t, wt, loss):
        last_seen[0] = t
        if observer is not None:
            observer(t, wt, loss)
        if params.keep_iterates or not iterates:
            iterates.append(Iterate(t, wt.copy(), loss))

    emit(0, w, float(_kernels.mean_loss(X, y, w)))

    t = 0
    epochs = 0
    stopped = False
    block = max(1, _BLOCK_UPDATES // n)
    while epochs < params.max_epochs and not stopped:
        k = min(block, params.max_epochs - epochs)
        U = rng.peek_uniforms(k * (n - 1)).reshape(k, n - 1)
        cap = (k * n) // every + 1
        rec_w = np.empty((cap, p))
        rec_t = np.empty(cap, dtype=np.int64)
        rec_loss = np.empty(cap)
        perms = np.empty((k, n), dtype=np.int64)
        ran, nrec, stopped, _ = _kernels.run_epochs(
            X, y, w, params.eta, U, t, every, params.loss_threshold,
            rec_w, rec_t, rec_loss, perms)
        rng.advance(ran * (n - 1))
        for r in range(nrec):
            emit(int(rec_t[r]), rec_w[r], float(rec_loss[r]))
        if params.keep_orders:
            orders.extend(perms[:ran].copy())
        epochs += ran
        t += ran * n

    if last_seen[0] != t:
        emit(t, w, float(_kernels.mean_loss(X, y, w)))
    if iterates[-1].t != t:
        iterates.append(Iterate(t, w.copy(), float(_kernels.mean_loss(X, y, w))))
    return Trajectory(iterates, epochs, "threshold" if stopped else "max_epochs", orders)


def onepass_sgd(dataset: Dataset, eta: float, rng: Rng) -> Trajectory:
    """A single shuffled pass from zero, recording all n + 1 iterates."""
    params = TrainParams(eta=eta, max_epochs=1, loss_threshold=1e-300,
                         record_every=1, keep_orders=True)
    traj = multipass_sgd(dataset, params, rng)
    traj.terminated_by = "max_epochs"
    return traj


def safe_lr(dataset: Dataset, c5: float = 2.0) -> float:
    """1 / (c5 * n * max_i ||x_i||^2)."""
    if not c5 >= 2:
        raise ValueError(f"c5 must be at least 2, got {c5}")
    max_sq = float(np.max(np.einsum("ij,ij->i", dataset.X, dataset.X)))
    if max_sq == 0.0:
        raise ZeroDivisionError("all feature vectors are zero")
    return 1.0 / (c5 * dataset.n * max_sq)


class NoValidIterate(ValueError):
    pass


class EarlyStopTracker:
    """Running minimum of an evaluator over non-zero iterates; first t wins ties."""

    def __init__(self, evaluator: Callable[[np.ndarray], float]):
        self.evaluator = evaluator
        self.t_best: int | None = None
        self.risk_best = math.inf

    def __call__(self, t: int, w: np.ndarray, loss: float | None = None) -> None:
        if not np.any(w):
            return
        risk = self.evaluator(w)
        if self.t_best is None or risk < self.risk_best:
            self.t_best, self.risk_best = t, risk

    def result(self) -> tuple[int, float]:
        if self.t_best is None:
            raise NoValidIterate("every recorded iterate is zero")
        return self.t_best, self.risk_best


def early_stop_select(trajectory: Trajectory, evaluator) -> tuple[int, float]:
    tracker = EarlyStopTracker(evaluator)
    for it in trajectory.iterates:
        tracker(it.t, it.w)
    return tracker.result()


def surrogate_trajectory(dataset: Dataset, eta: float, order) -> list[np.ndarray]:
    """Prefix sums eta/2 * sum_{s<=t} y_s x_s along ``order``, t = 0..n."""
    order = np.asarray(order)
    if order.shape != (dataset.n,) or not np.array_equal(np.sort(order), np.arange(dataset.n)):
        raise ValueError("order must be a permutation of the dataset indices")
    steps = 0.5 * eta * dataset.y_obs[order, None] * dataset.X[order]
    sums = np.vstack([np.zeros((1, dataset.p)), np.cumsum(steps, axis=0)])
    return list(sums)


def write_trajectory_csv(trajectory: Trajectory, path, evaluator=None,
                         weights_path=None) -> None:
    """Columns ``t,train_loss,risk,norm_w``; risk is blank without an evaluator
    or for the zero iterate."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["t", "train_loss", "risk", "norm_w"])
            for it in trajectory.iterates:
                risk = ""
                if evaluator is not None and np.any(it.w):
                    risk = repr(float(evaluator(it.w)))
                out.writerow([it.t, repr(it.train_loss), risk, repr(float(np.linalg.norm(it.w)))])
        if weights_path is not None:
            with Path(weights_path).open("w", newline="") as fh:
                out = csv.writer(fh, lineterminator="\n")
                for it in trajectory.iterates:
                    out.writerow([it.t, *(repr(float(v)) for v in it.w)])
    except OSError as exc:
        raise OSError(f"cannot write trajectory to {path}: {exc}") from exc
