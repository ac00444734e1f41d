"""overfitlab command line: sample, train, sweep, verify, bounds.

Settings resolve as flag > JSON config file > built-in default. Exit codes:
0 success, 1 I/O failure, 2 invalid input, 3 a verification check failed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path

from . import bounds, verify
from .gmm import GmmConfig, make_signal, read_dataset_csv, sample_dataset, write_dataset_csv
from .risk import excess_risk
from .rng import Rng
from .sweep import HEAT_FIELDS, SweepConfig, emit_csv, emit_heatmap, run_sweep
from .trainer import EarlyStopTracker, TrainParams, multipass_sgd, write_trajectory_csv

EXIT_IO, EXIT_INVALID, EXIT_VERIFY = 1, 2, 3
SEED_ENV = "OVERFITLAB_SEED"


class UsageError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


# name -> (type, default, help). ``None`` defaults mean "not set".
SPECS: dict[str, dict[str, tuple]] = {
    "sample": {
        "n": (int, 64, "number of samples"),
        "p": (int, 128, "dimension"),
        "mu_norm": (float, 40.0, "norm of the class mean"),
        "sigma": (float, 1.0, "noise scale"),
        "rho": (float, 0.0, "label flip rate, 0 <= rho <= 0.5"),
        "noise_family": (str, "gaussian", "gaussian or rademacher_scaled"),
        "seed": (int, None, f"seed; falls back to ${SEED_ENV}, then 0"),
        "out": (str, "dataset.csv", "output CSV path"),
    },
    "train": {
        "dataset": (str, None, "dataset CSV to train on instead of sampling one"),
        "n": (int, 64, "number of samples when generating"),
        "p": (int, 128, "dimension"),
        "mu_norm": (float, 40.0, "norm of the class mean"),
        "sigma": (float, 1.0, "noise scale"),
        "rho": (float, 0.0, "label flip rate when generating"),
        "eta": (float, 1e-5, "learning rate"),
        "threshold": (float, 0.05, "stop once the mean training loss falls below this"),
        "max_epochs": (int, 1000, "epoch budget"),
        "seed": (int, None, f"seed; falls back to ${SEED_ENV}, then 0"),
        "out": (str, "train_out", "output directory"),
    },
    "sweep": {
        "n_grid": (_ints, [16, 32, 64, 128, 256, 512], "comma-separated sample sizes"),
        "p_grid": (_ints, [16, 32, 64, 128, 256, 512], "comma-separated dimensions"),
        "rho_list": (_floats, [0.0, 0.4], "comma-separated flip rates"),
        "mu_norm": (float, 40.0, "norm of the class mean"),
        "sigma": (float, 1.0, "noise scale"),
        "eta": (float, 1e-5, "learning rate"),
        "loss_threshold": (float, 0.05, "training-loss stopping threshold"),
        "max_epochs": (int, 100_000, "epoch budget per cell"),
        "reps": (int, 3, "repetitions per cell"),
        "seed": (int, None, f"base seed; falls back to ${SEED_ENV}, then 0"),
        "interpolator_mode": (str, "sgd_long", "sgd_long or exact_qp"),
        "threads": (int, 1, "worker threads; output does not depend on it"),
        "out_dir": (str, "sweep_out", "output directory"),
    },
    "verify": {
        "trials": (int, 2000, "Monte Carlo trials per claim"),
        "delta": (float, 0.05, "nominal failure probability"),
        "m": (int, 100_000, "test points for the flip-transform check"),
        "instances": (int, verify.SGD_INSTANCES, "random instances for the SGD-vs-QP battery"),
        "updates": (int, verify.SGD_UPDATES, "SGD updates per instance"),
        "eta_scale": (float, verify.SGD_ETA_SCALE, "SGD step times the largest squared row norm"),
        "enum_instances": (int, 20, "instances for the QP-vs-enumeration battery"),
        "seed": (int, None, f"seed; falls back to ${SEED_ENV}, then 0"),
        "threads": (int, 1, "worker threads for the SGD battery"),
        "out": (str, "verify.json", "output JSON path"),
    },
    "bounds": {
        "rho": (float, 0.4, "label flip rate, 0 < rho <= 0.5"),
        "r": (float, 2.0, "overparameterisation ratio p / n"),
        "mu_norm": (float, 40.0, "norm of the class mean"),
        "sigma": (float, 1.0, "noise scale"),
        "p": (int, 128, "dimension"),
        "n": (int, 64, "number of samples"),
        "c2": (float, 1.0, "noiseless decay exponent"),
        "c3": (float, 1.0, "lower-bound constant"),
        "c4": (float, 1.0, "constant"),
        "c5": (float, 2.0, "learning-rate constant, at least 2"),
        "c14": (float, 1.0, "early-stopping exponent constant"),
        "c": (float, 1.0, "constant"),
    },
}

HELP = {
    "sample": "sample a mixture dataset and write it as CSV",
    "train": "run multipass SGD and report last and best excess risk",
    "sweep": "run an (n, p, rho) sweep and write CSV plus heatmaps",
    "verify": "run the concentration, transform and solver check batteries",
    "bounds": "evaluate the risk bound formulas",
}


def _default_text(value) -> str:
    if value is None:
        return "unset"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return str(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overfitlab",
        description="Benign and non-benign overfitting of linear classifiers on mixture data.",
    )
    subs = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, spec in SPECS.items():
        sp = subs.add_parser(name, help=HELP[name], description=HELP[name])
        sp.add_argument("--config", default=None,
                        help="JSON file of settings; flags override it (default: none)")
        for key, (typ, default, text) in spec.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=typ,
                            default=argparse.SUPPRESS,
                            help=f"{text} (default: {_default_text(default)})")
    return parser


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return data


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags; reject unknown config keys."""
    spec = SPECS[command]
    file_values = _load_config(getattr(args, "config", None))
    unknown = sorted(set(file_values) - set(spec))
    if unknown:
        raise UsageError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    merged = {k: v[1] for k, v in spec.items()}
    merged.update(file_values)
    merged.update({k: v for k, v in vars(args).items() if k in spec})
    if "seed" in spec and merged["seed"] is None:
        env = os.environ.get(SEED_ENV)
        try:
            merged["seed"] = int(env) if env not in (None, "") else 0
        except ValueError as exc:
            raise UsageError(f"${SEED_ENV} must be an integer, got {env!r}") from exc
    return merged


def _fmt(v):
    return v if not isinstance(v, float) or math.isfinite(v) else None


def _write_json(path: Path, payload: dict) -> None:
    try:
        path.write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _mkdir(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {path}: {exc}") from exc
    return path


def cmd_sample(cfg: dict) -> int:
    gmm = GmmConfig(make_signal(cfg["p"], cfg["mu_norm"]), cfg["sigma"], cfg["noise_family"])
    data = sample_dataset(gmm, cfg["n"], cfg["rho"], Rng(cfg["seed"]))
    write_dataset_csv(data, cfg["out"])
    print(f"n={data.n} p={data.p} flips={data.flipped.size}")
    return 0


def cmd_train(cfg: dict) -> int:
    gmm = GmmConfig(make_signal(cfg["p"], cfg["mu_norm"]), cfg["sigma"])
    rng = Rng(cfg["seed"])
    if cfg["dataset"] is not None:
        data = read_dataset_csv(cfg["dataset"], gmm)
    else:
        data = sample_dataset(gmm, cfg["n"], cfg["rho"], rng)
    params = TrainParams(eta=cfg["eta"], max_epochs=cfg["max_epochs"],
                         loss_threshold=cfg["threshold"])

    def score(w):
        return excess_risk(w, gmm) if w.any() else math.nan

    tracker = EarlyStopTracker(score)
    traj = multipass_sgd(data, params, rng, observer=tracker)
    out = _mkdir(cfg["out"])
    write_trajectory_csv(traj, out / "trajectory.csv", evaluator=score)
    best_t, best = tracker.result() if tracker.t_best is not None else (None, math.nan)
    summary = {
        "terminated_by": traj.terminated_by,
        "epochs": traj.epochs_completed,
        "final_train_loss": traj.final.train_loss,
        "last_excess": _fmt(score(traj.final.w)),
        "best_excess": _fmt(best),
        "best_t": best_t,
    }
    _write_json(out / "risk.json", summary)
    print(json.dumps(summary))
    return 0


def cmd_sweep(cfg: dict) -> int:
    config = SweepConfig(
        n_grid=tuple(cfg["n_grid"]), p_grid=tuple(cfg["p_grid"]),
        rho_list=tuple(cfg["rho_list"]), mu_norm=cfg["mu_norm"], sigma=cfg["sigma"],
        eta=cfg["eta"], loss_threshold=cfg["loss_threshold"], max_epochs=cfg["max_epochs"],
        reps=cfg["reps"], base_seed=cfg["seed"], interpolator_mode=cfg["interpolator_mode"])
    if cfg["threads"] < 1:
        raise UsageError("threads must be at least 1")
    result = run_sweep(config, threads=cfg["threads"])
    out = _mkdir(cfg["out_dir"])
    emit_csv(result, out / "sweep.csv")
    if result.cells:
        for rho in config.rho_list:
            for field_name in HEAT_FIELDS:
                emit_heatmap(result, field_name, rho, out / f"{field_name}_rho{rho!r}.pgm")
    _write_json(out / "config.json", config.to_dict())
    failed = sum(c.error is not None for c in result.cells)
    print(f"{len(result.cells)} cells written to {out}" + (f", {failed} with errors" if failed else ""))
    return 0


def cmd_verify(cfg: dict) -> int:
    trials, delta = cfg["trials"], cfg["delta"]
    if trials < 1 or not 0 < delta < 1:
        raise UsageError("need trials >= 1 and 0 < delta < 1")
    slack = bounds.monte_carlo_slack(delta, trials)
    if trials < 1000:
        warnings.warn(f"trials={trials} is small: the 3-sigma slack {slack:.3g} dominates", stacklevel=1)
    if slack >= delta:
        warnings.warn(f"slack {slack:.3g} is at least delta={delta:g}; the claim checks are not meaningful",
                      stacklevel=1)
    report = verify.run_all(trials=trials, delta=delta, seed=cfg["seed"], m=cfg["m"],
                            instances=cfg["instances"], updates=cfg["updates"],
                            enum_instances=cfg["enum_instances"], threads=cfg["threads"],
                            eta_scale=cfg["eta_scale"])
    for o in report:
        print(f"{'PASS' if o.passed else 'FAIL'}  {o.claim:<22} value={o.frequency:.6g} bound={o.bound:.6g}")
    _write_json(Path(cfg["out"]), {"checks": [o.as_dict() for o in report],
                                   "all_pass": all(o.passed for o in report)})
    return 0 if all(o.passed for o in report) else EXIT_VERIFY


def cmd_bounds(cfg: dict) -> int:
    consts = bounds.BoundConstants(**{k: cfg[k] for k in ("c2", "c3", "c4", "c5", "c14", "c")})
    payload = {
        "lower_bound_noisy": bounds.lower_bound_noisy(cfg["rho"], cfg["r"], consts),
        "upper_bound_earlystop": bounds.upper_bound_earlystop(
            cfg["mu_norm"], cfg["sigma"], cfg["p"], cfg["n"], consts),
        "upper_bound_noiseless": bounds.upper_bound_noiseless(cfg["n"], consts),
        "params": {k: cfg[k] for k in ("rho", "r", "mu_norm", "sigma", "p", "n")},
        "constants": {k: cfg[k] for k in ("c2", "c3", "c4", "c5", "c14", "c")},
    }
    print(json.dumps(payload, indent=2))
    return 0


COMMANDS = {"sample": cmd_sample, "train": cmd_train, "sweep": cmd_sweep,
            "verify": cmd_verify, "bounds": cmd_bounds}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # argparse exits with 2 on bad flags
    try:
        cfg = resolve(args.command, args)
        return COMMANDS[args.command](cfg)
    except OSError as exc:
        print(f"overfitlab: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError) as exc:
        print(f"overfitlab: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
