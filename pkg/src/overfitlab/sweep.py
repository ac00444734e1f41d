"""Phase-diagram sweeps over (n, p, rho): train per cell, score the last and the
best iterate, and write the grid out as CSV and grayscale heatmaps."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .gmm import GmmConfig, corrupt_labels, make_signal, sample_noiseless
from .linear import dataset_margin
from .max_margin import InfeasibleError, lp_separable, signed_rows, solve_max_margin
from .risk import excess_risk
from .rng import Rng, cell_seed
from .trainer import EarlyStopTracker, TrainParams, multipass_sgd

CSV_FIELDS = ("n", "p", "rho", "rep", "r", "separable", "epochs", "last_excess",
              "best_excess", "best_t", "final_margin", "seed")
HEAT_FIELDS = ("last_excess", "best_excess")
SCALE_MAX = 0.5
COLORMAP = "255 - round_half_away_from_zero(255 * clamp(value / 0.5, 0, 1))"
INTERPOLATOR_T = -1  # best_t when the interpolator itself is the best classifier


@dataclass(frozen=True)
class SweepConfig:
    n_grid: tuple[int, ...] = (16, 32, 64, 128, 256, 512)
    p_grid: tuple[int, ...] = (16, 32, 64, 128, 256, 512)
    rho_list: tuple[float, ...] = (0.0, 0.4)
    mu_norm: float = 40.0
    sigma: float = 1.0
    eta: float = 1e-5
    loss_threshold: float = 0.05
    max_epochs: int = 100_000
    reps: int = 3
    base_seed: int = 0
    interpolator_mode: Literal["sgd_long", "exact_qp"] = "sgd_long"
    noise_family: str = "gaussian"

    def __post_init__(self):
        for name in ("n_grid", "p_grid", "rho_list"):
            values = tuple(getattr(self, name))
            object.__setattr__(self, name, values)
            if not values:
                raise ValueError(f"{name} must be non-empty")
            if list(values) != sorted(values) or len(set(values)) != len(values):
                raise ValueError(f"{name} must be strictly ascending")
        if min(self.n_grid) < 1 or min(self.p_grid) < 1:
            raise ValueError("grid sizes must be positive")
        if not all(0.0 <= r <= 0.5 for r in self.rho_list):
            raise ValueError("flip rates must lie in [0, 0.5]")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.interpolator_mode not in ("sgd_long", "exact_qp"):
            raise ValueError(f"unknown interpolator_mode {self.interpolator_mode!r}")
        if not (self.mu_norm > 0 and self.sigma > 0):
            raise ValueError("mu_norm and sigma must be positive")
        if self.noise_family != "gaussian":
            raise ValueError("sweeps score cells in closed form and need gaussian noise")

    def cells(self) -> list[tuple[int, int, int, int]]:
        """Grid positions (i_n, i_p, i_rho, rep) with n <= p, in canonical order."""
        return [(a, b, c, k)
                for a, n in enumerate(self.n_grid)
                for b, p in enumerate(self.p_grid) if n <= p
                for c in range(len(self.rho_list))
                for k in range(self.reps)]

    def to_dict(self) -> dict:
        d = asdict(self)
        for name in ("n_grid", "p_grid", "rho_list"):
            d[name] = list(d[name])
        return d


@dataclass
class CellResult:
    n: int
    p: int
    rho: float
    rep: int
    r: float
    separable: bool
    epochs: int
    last_excess: float
    best_excess: float
    best_t: int
    final_margin: float
    seed: int
    error: str | None = field(default=None, compare=False)


@dataclass
class SweepResult:
    config: SweepConfig
    cells: list[CellResult]

    def select(self, rho: float) -> list[CellResult]:
        return [c for c in self.cells if c.rho == rho]


def run_cell(config: SweepConfig, i_n: int, i_p: int, i_rho: int, rep: int) -> CellResult:
    n, p, rho = config.n_grid[i_n], config.p_grid[i_p], config.rho_list[i_rho]
    seed = cell_seed(config.base_seed, i_n, i_p, i_rho, rep)
    rng = Rng(seed)
    gmm = GmmConfig(make_signal(p, config.mu_norm), config.sigma, config.noise_family)
    data = corrupt_labels(sample_noiseless(gmm, n, rng), rho, rng)

    def score(w):
        return excess_risk(w, gmm)

    tracker = EarlyStopTracker(score)
    params = TrainParams(eta=config.eta, max_epochs=config.max_epochs,
                         loss_threshold=config.loss_threshold, keep_iterates=False)
    traj = multipass_sgd(data, params, rng, observer=tracker)

    error = None
    last_w = traj.final.w
    if config.interpolator_mode == "exact_qp":
        try:
            sol = solve_max_margin(data)
            separable = True
            if sol.converged:
                last_w = sol.w
            else:
                last_w, error = None, f"max-margin solve did not converge (kkt {sol.kkt_residual:.3g})"
        except InfeasibleError as exc:
            separable, last_w, error = False, None, str(exc)
    else:
        separable = lp_separable(signed_rows(data))

    nan = float("nan")
    if last_w is None or not np.any(last_w):
        last_excess, final_margin = nan, nan
        error = error or "last iterate is zero"
    else:
        last_excess = score(last_w)
        final_margin = dataset_margin(last_w, data)

    if tracker.t_best is None:
        best_t, best_excess = 0, nan
    else:
        best_t, best_excess = tracker.result()
    if config.interpolator_mode == "exact_qp" and not math.isnan(last_excess):
        if math.isnan(best_excess) or last_excess < best_excess:
            best_t, best_excess = INTERPOLATOR_T, last_excess

    return CellResult(n=n, p=p, rho=rho, rep=rep, r=p / n, separable=separable,
                      epochs=traj.epochs_completed, last_excess=last_excess,
                      best_excess=best_excess, best_t=best_t,
                      final_margin=final_margin, seed=seed, error=error)


def run_sweep(config: SweepConfig, threads: int = 1) -> SweepResult:
    """Run every n <= p cell. Output order is canonical whatever ``threads`` is."""
    positions = config.cells()
    if threads <= 1 or len(positions) <= 1:
        cells = [run_cell(config, *pos) for pos in positions]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(lambda pos: run_cell(config, *pos), positions))
    return SweepResult(config, cells)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_csv(result: SweepResult, path) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(CSV_FIELDS)
            for c in result.cells:
                out.writerow([_fmt(getattr(c, f)) for f in CSV_FIELDS])
    except OSError as exc:
        raise OSError(f"cannot write sweep CSV to {path}: {exc}") from exc


def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def pixel_value(value: float) -> int:
    """Gray level for an excess risk: small risk renders bright."""
    if math.isnan(value):
        return 0
    frac = min(1.0, max(0.0, value / SCALE_MAX))
    return 255 - _round_half_away(255.0 * frac)


def _find_rho(config: SweepConfig, rho: float) -> float:
    for r in config.rho_list:
        if math.isclose(r, rho, rel_tol=0, abs_tol=1e-12):
            return r
    raise ValueError(f"rho={rho!r} is not in the sweep's rho_list {list(config.rho_list)}")


def median_grid(result: SweepResult, field_name: str, rho: float) -> np.ndarray:
    """Median over reps per (p, n); NaN where n > p or nothing was scored."""
    if field_name not in HEAT_FIELDS:
        raise ValueError(f"unknown heatmap field {field_name!r}")
    cfg = result.config
    rho = _find_rho(cfg, rho)
    grid = np.full((len(cfg.p_grid), len(cfg.n_grid)), np.nan)
    for b, p in enumerate(cfg.p_grid):
        for a, n in enumerate(cfg.n_grid):
            vals = [getattr(c, field_name) for c in result.cells
                    if c.n == n and c.p == p and c.rho == rho]
            vals = [v for v in vals if not math.isnan(v)]
            if n <= p and vals:
                grid[b, a] = float(np.median(vals))
    return grid


def emit_heatmap(result: SweepResult, field_name: str, rho: float, path) -> Path:
    """Binary PGM: rows are p ascending top to bottom, columns n ascending.

    Writes a JSON sidecar next to the image and returns its path.
    """
    cfg = result.config
    grid = median_grid(result, field_name, rho)
    pixels = bytes(pixel_value(v) for v in grid.reshape(-1))
    path = Path(path)
    sidecar = path.with_suffix(".json")
    try:
        with path.open("wb") as fh:
            fh.write(f"P5\n{grid.shape[1]} {grid.shape[0]}\n255\n".encode("ascii"))
            fh.write(pixels)
        sidecar.write_text(json.dumps({
            "field": field_name,
            "rho": _find_rho(cfg, rho),
            "grid": {"n": list(cfg.n_grid), "p": list(cfg.p_grid)},
            "scale_max": SCALE_MAX,
            "colormap_formula": COLORMAP,
        }, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write heatmap to {path}: {exc}") from exc
    return sidecar


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    width, height = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(height, width)


@dataclass
class TrendReport:
    rho: float
    r: float
    ns: list[int]
    medians: list[float]

    @property
    def ratio(self) -> float:
        first, last = self.medians[0], self.medians[-1]
        if first > 0:
            return last / first
        return 1.0 if last == 0 else math.inf


def slope_test(result: SweepResult, rho: float, r: float, ns=None) -> TrendReport:
    """Median last-iterate excess risk along the diagonal p = r n."""
    rho = _find_rho(result.config, rho)
    by_n: dict[int, list[float]] = {}
    for c in result.cells:
        if c.rho == rho and math.isclose(c.p / c.n, r) and (ns is None or c.n in ns):
            if not math.isnan(c.last_excess):
                by_n.setdefault(c.n, []).append(c.last_excess)
    if len(by_n) < 3:
        raise ValueError(f"need at least 3 grid points on the p/n={r} diagonal, found {len(by_n)}")
    ns_sorted = sorted(by_n)
    return TrendReport(rho, r, ns_sorted, [float(np.median(by_n[n])) for n in ns_sorted])
