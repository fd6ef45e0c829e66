"""Command-line interface: data generation, screening runs, paths, compression.

Subcommands: gen-data, solve, screen, path, compress, interval-demo.  Every
run writes a versioned JSON summary plus CSV artifacts into --out, with
atomic writes and fixed float formatting so reruns with the same config and
seed are byte-identical.

Exit codes: 0 ok, 2 configuration error, 3 screening audit failure,
4 solver non-convergence.
"""

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import __version__
from ._kernels import backend_name
from .compression import compression_curve
from .datasets import (gen_synthetic_classification, gen_synthetic_regression,
                       load_dataset, save_libsvm)
from .erm import ErmProblem
from .kernels import GramProblem, cached_gram
from .losses import LOSS_IDS, PENALTY_IDS, make_loss, make_penalty
from .region import BallRegion, build_region, init_ball, region_to_json
from .screening import screen
from .solver import lambda_grid, regularization_path, solve, solve_screened

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSAFE = 3
EXIT_NOCONV = 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Flat run configuration; CLI flags map onto these names one-to-one."""

    task: str = "regression"
    loss: str = "sqdist"
    penalty: str = "l1"
    lam: float = 1e-3
    mu: float = 0.1
    k: int = 20
    init: str = "explicit"
    r0: float = 10.0
    tol: float = 1e-8
    max_epochs: float = 20000
    warm_epochs: float = 2
    data: str | None = None
    format: str = "libsvm"
    n: int = 100
    p: int = 10
    sparsity: int = 3
    sigma: float = 0.01
    kernel: str | None = None
    gamma: float = 1.0
    out: str = "runs"
    seed: int = 0

    def validate(self):
        if self.task not in ("regression", "classification"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.loss not in LOSS_IDS:
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.penalty not in PENALTY_IDS:
            raise ConfigError(f"unknown penalty {self.penalty!r}")
        if self.lam <= 0:
            raise ConfigError("lam must be positive")
        if self.mu < 0:
            raise ConfigError("mu must be nonnegative")
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.init not in ("explicit", "strong_convexity", "gap"):
            raise ConfigError(f"unknown init strategy {self.init!r}")
        if self.r0 <= 0:
            raise ConfigError("r0 must be positive")
        if self.tol < 0:
            raise ConfigError("tol must be nonnegative")
        return self


def _read_config_file(path):
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value")
                key, val = (part.strip() for part in line.split("=", 1))
                values[key.replace("-", "_")] = val
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    return values


def _fmt(x):
    if isinstance(x, float):
        return format(x, ".17g")
    return x


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    return obj


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit_json(path, payload):
    _atomic_write(path, json.dumps(_jsonify(payload), indent=2,
                                   sort_keys=True) + "\n")


def _emit_csv(path, writer_fn):
    import io
    buf = io.StringIO()
    writer_fn(buf)
    _atomic_write(path, buf.getvalue())


def _build_problem(cfg):
    if cfg.data is not None:
        ds = load_dataset(cfg.data, fmt=cfg.format, task=cfg.task)
        truth = None
    elif cfg.task == "regression":
        ds, truth = gen_synthetic_regression(cfg.n, cfg.p, cfg.sparsity,
                                             cfg.sigma, cfg.seed)
    else:
        ds, truth = gen_synthetic_classification(cfg.n, cfg.p, cfg.sparsity,
                                                 cfg.sigma, cfg.seed)
    try:
        loss = make_loss(cfg.loss, mu=cfg.mu)
    except ValueError as exc:
        raise ConfigError(str(exc))
    if loss.task != ds.task:
        raise ConfigError(
            f"loss {cfg.loss!r} is a {loss.task} loss but the task is {ds.task}")
    prob = ErmProblem(ds, loss, make_penalty(cfg.penalty), cfg.lam)
    return prob, truth


def _initial_region(cfg, prob, x0):
    if cfg.init == "explicit":
        return init_ball(x0, "explicit", radius=cfg.r0)
    if cfg.init == "strong_convexity":
        return init_ball(x0, "strong_convexity", bound=prob.primal(x0),
                         kappa=prob.kappa)
    gap = prob.duality_gap(x0)
    if not math.isfinite(gap):
        raise ConfigError("gap init strategy needs a finite duality gap")
    return init_ball(x0, "gap", gap=gap, kappa=prob.kappa)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_gen_data(cfg, args):
    if cfg.task == "regression":
        ds, truth = gen_synthetic_regression(cfg.n, cfg.p, cfg.sparsity,
                                             cfg.sigma, cfg.seed)
    else:
        ds, truth = gen_synthetic_classification(cfg.n, cfg.p, cfg.sparsity,
                                                 cfg.sigma, cfg.seed)
    os.makedirs(cfg.out, exist_ok=True)
    data_path = os.path.join(cfg.out, "data.libsvm")
    save_libsvm(ds, data_path)
    _emit_json(os.path.join(cfg.out, "gen_data.json"), {
        "schema": 1, "command": "gen-data", "config": asdict(cfg),
        "path": data_path, "n": ds.n, "p": ds.p,
        "ground_truth": truth,
    })
    print(f"wrote {data_path} ({ds.n} samples, {ds.p} features)")
    return EXIT_OK


def _cmd_solve(cfg, args):
    prob, _ = _build_problem(cfg)
    res = solve(prob, tol=cfg.tol, max_epochs=cfg.max_epochs)
    payload = {
        "schema": 1, "command": "solve", "config": asdict(cfg),
        "backend": backend_name(), "version": __version__,
        "primal": res.primal, "gap": res.gap, "iterations": res.iterations,
        "epochs_equivalent": res.epochs_equivalent,
        "converged": res.converged, "message": res.message,
        "x": res.x,
    }
    _emit_json(os.path.join(cfg.out, "solve.json"), payload)
    print(f"primal {_fmt(res.primal)} gap {_fmt(res.gap)} "
          f"epochs {_fmt(res.epochs_equivalent)}")
    return EXIT_OK if res.converged or cfg.tol == 0 else EXIT_NOCONV


def _screen_once(cfg, prob):
    warm = solve(prob, tol=0.0, max_epochs=cfg.warm_epochs)
    ball = _initial_region(cfg, prob, warm.x)
    if ball.radius > 0:
        region = build_region(prob, warm.x, ball.radius, cfg.k)
    else:
        region = BallRegion(warm.x, 0.0)
    x_full = solve(prob, x0=warm.x, tol=min(cfg.tol, 1e-9),
                   max_epochs=cfg.max_epochs).x
    report = screen(prob, region, audit=True, x_full=x_full)
    return warm, region, report, x_full


def _cmd_screen(cfg, args):
    prob, _ = _build_problem(cfg)
    warm, region, report, _ = _screen_once(cfg, prob)
    os.makedirs(cfg.out, exist_ok=True)
    _emit_csv(os.path.join(cfg.out, "scores.csv"), report.to_csv)
    _atomic_write(os.path.join(cfg.out, "region.json"),
                  region_to_json(region))
    payload = {
        "schema": 1, "command": "screen", "config": asdict(cfg),
        "backend": backend_name(), "version": __version__,
        "warm_primal": warm.primal,
    }
    payload.update(report.summary())
    _emit_json(os.path.join(cfg.out, "screen.json"), payload)
    verdict = "pass" if report.audit.passed else "FAIL"
    print(f"screened {report.n_screened}/{report.n} "
          f"({100 * report.fraction_screened:.1f}%), audit {verdict}")
    return EXIT_OK if report.audit.passed else EXIT_UNSAFE


def _cmd_path(cfg, args):
    prob, _ = _build_problem(cfg)
    lambdas = lambda_grid(args.lam_max, args.lam_min, args.per_decade)
    results = {}
    for flag in ((True, False) if args.compare else (args.screening,)):
        results[flag] = regularization_path(
            prob, lambdas, screening=flag, steps=cfg.k, tol=cfg.tol,
            max_epochs=cfg.max_epochs, init_radius=cfg.r0)
    os.makedirs(cfg.out, exist_ok=True)
    for flag, path_res in results.items():
        name = "path_screened.csv" if flag else "path_plain.csv"
        _emit_csv(os.path.join(cfg.out, name), path_res.to_csv)
    payload = {
        "schema": 1, "command": "path", "config": asdict(cfg),
        "lambda_max": args.lam_max, "lambda_min": args.lam_min,
        "points": int(lambdas.size),
        "cumulative_epochs": {
            ("screened" if flag else "plain"):
                float(res.cumulative_epochs[-1])
            for flag, res in results.items()},
    }
    _emit_json(os.path.join(cfg.out, "path.json"), payload)
    for flag, res in results.items():
        tag = "screened" if flag else "plain"
        print(f"{tag}: {_fmt(float(res.cumulative_epochs[-1]))} "
              "cumulative epochs")
    return EXIT_OK


def _cmd_compress(cfg, args):
    prob, _ = _build_problem(cfg)
    fractions = np.asarray([float(tok) for tok in args.fractions.split(",")])
    curve = compression_curve(
        prob, fractions, seeds=args.seeds, steps=cfg.k, init_radius=cfg.r0,
        early_epochs=cfg.warm_epochs, tol=cfg.tol, max_epochs=cfg.max_epochs,
        seed0=cfg.seed)
    os.makedirs(cfg.out, exist_ok=True)
    _emit_csv(os.path.join(cfg.out, "compression.csv"), curve.to_csv)
    _emit_json(os.path.join(cfg.out, "compression.json"), {
        "schema": 1, "command": "compress", "config": asdict(cfg),
        "metric": curve.metric, "seeds": curve.seeds,
        "fractions": curve.fractions, "warnings": curve.warnings,
        "means": curve.means, "stds": curve.stds,
    })
    print(f"compression curve over {len(curve.fractions)} fractions "
          f"({curve.metric}, {curve.seeds} seeds)")
    return EXIT_OK


def _cmd_interval_demo(cfg, args):
    """Equal-width interval fitting: predict inside [b - mu, b + mu].

    Equal-width intervals around centers b are exactly the flat-zone squared
    loss at threshold mu, so the screening pipeline applies as-is: most
    intervals are certified as automatically satisfied and dropped, and the
    refit on the survivors matches the full fit.
    """
    cfg = replace(cfg, task="regression", loss="sqdist")
    ds, truth = gen_synthetic_regression(cfg.n, cfg.p, sparsity=1,
                                         sigma=cfg.sigma, seed=cfg.seed)
    prob = ErmProblem(ds, make_loss("sqdist", mu=cfg.mu),
                      make_penalty(cfg.penalty), cfg.lam)
    warm, region, report, x_full = _screen_once(cfg, prob)
    res_scr, _ = solve_screened(prob, region, x0=warm.x, tol=cfg.tol,
                                max_epochs=cfg.max_epochs)
    os.makedirs(cfg.out, exist_ok=True)
    _emit_csv(os.path.join(cfg.out, "intervals.csv"), lambda fh: _write_intervals(
        fh, ds, cfg.mu, report))
    full_prob_primal = prob.primal(res_scr.x)
    payload = {
        "schema": 1, "command": "interval-demo", "config": asdict(cfg),
        "ground_truth": truth,
        "refit_primal_on_full_data": full_prob_primal,
        "full_primal": prob.primal(x_full),
    }
    payload.update(report.summary())
    _emit_json(os.path.join(cfg.out, "interval_demo.json"), payload)
    verdict = "pass" if report.audit.passed else "FAIL"
    print(f"{report.n_screened}/{report.n} intervals ruled out, "
          f"audit {verdict}")
    return EXIT_OK if report.audit.passed else EXIT_UNSAFE


def _write_intervals(fh, ds, mu, report):
    import csv
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["index", "center", "lower", "upper", "score", "screened"])
    for i in range(ds.n):
        b = float(ds.b[i])
        w.writerow([i, format(b, ".17g"), format(b - mu, ".17g"),
                    format(b + mu, ".17g"),
                    format(float(report.scores[i]), ".17g"),
                    int(report.screened[i])])


# ---------------------------------------------------------------------------
# argument parsing


def _add_config_flags(parser):
    parser.add_argument("--config", help="key=value file supplying any flag")
    for f_ in RunConfig.__dataclass_fields__.values():
        flag = "--" + f_.name.replace("_", "-")
        if f_.name in ("data", "kernel"):
            parser.add_argument(flag, type=str, default=None)
        elif f_.type in ("str", "str | None"):
            parser.add_argument(flag, type=str, default=None)
        else:
            parser.add_argument(flag, type=str, default=None,
                                metavar=f_.name.upper())


def _collect_config(args):
    values = {}
    if getattr(args, "config", None):
        values.update(_read_config_file(args.config))
    for name in RunConfig.__dataclass_fields__:
        flag_val = getattr(args, name, None)
        if flag_val is not None:
            values[name] = flag_val
    cfg = RunConfig()
    casts = {int: int, float: float, str: str}
    for name, field_ in RunConfig.__dataclass_fields__.items():
        if name not in values:
            continue
        raw = values[name]
        default = getattr(cfg, name)
        try:
            if isinstance(default, bool):
                val = raw in ("1", "true", "True")
            elif isinstance(default, int) and not isinstance(default, bool):
                val = int(raw)
            elif isinstance(default, float):
                val = float(raw)
            else:
                val = raw
        except ValueError:
            raise ConfigError(f"bad value for {name}: {raw!r}")
        setattr(cfg, name, val)
    return cfg.validate()


def build_parser():
    parser = argparse.ArgumentParser(
        prog="safescreen",
        description="Safe screening of training samples: certify and drop "
                    "samples that provably do not affect the optimum.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in [
            ("gen-data", "generate a synthetic dataset and save it"),
            ("solve", "fit a model and report primal/gap"),
            ("screen", "build a region, screen, audit, emit reports"),
            ("interval-demo", "equal-width interval regression demo")]:
        p = sub.add_parser(name, help=help_)
        _add_config_flags(p)

    p = sub.add_parser("path", help="regularization path with warm starts")
    _add_config_flags(p)
    p.add_argument("--lam-max", type=float, default=1.0)
    p.add_argument("--lam-min", type=float, default=1e-3)
    p.add_argument("--per-decade", type=int, default=10)
    p.add_argument("--screening", action="store_true")
    p.add_argument("--compare", action="store_true",
                   help="run both screened and plain paths")

    p = sub.add_parser("compress", help="score-ranked dataset compression")
    _add_config_flags(p)
    p.add_argument("--fractions", type=str,
                   default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8")
    p.add_argument("--seeds", type=int, default=5)
    return parser


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "solve": _cmd_solve,
    "screen": _cmd_screen,
    "path": _cmd_path,
    "compress": _cmd_compress,
    "interval-demo": _cmd_interval_demo,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _collect_config(args)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
