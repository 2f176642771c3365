"""Command-line front end.

Commands
--------
analyze   fit the projection for two CSV sample files
permtest  permutation test of equal distributions
cv        cross-validated choice of the sparsity penalty
synth     write a synthetic scenario as two CSV files
oracle    brute-force reference values for cross-checking
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .inference import (PipelineConfig, cross_validate_lambda, permutation_test,
                        run_pipeline)
from .relax import RelaxConfig, SolverError, transport_value
from .rng import GENERATOR
from .synth import KINDS, ScenarioSpec, scenario, wishart_blocks_dataset
from .tighten import TightenConfig
from .wasserstein import as_samples, gradient, objective, wasserstein1d

logger = logging.getLogger("sparda")


class InputError(ValueError):
    pass


def _parse_cell(text: str, where: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise InputError(f"{where}: non-numeric value {text.strip()!r}") from None
    if not math.isfinite(val):
        raise InputError(f"{where}: non-finite value {text.strip()!r}")
    return val


def _is_numeric(cells) -> bool:
    try:
        [float(c) for c in cells]
    except ValueError:
        return False
    return True


def load_samples(path) -> tuple[np.ndarray, list[str]]:
    """Read a comma-separated sample file.

    A first line containing any non-numeric cell is taken as a header.
    Returns the ``(n, d)`` data matrix and the column names (``x0, x1, ...``
    when there is no header).
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: empty file")
    names = None
    if not _is_numeric(rows[0]):
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise InputError(f"{path}: no data rows")
    d = len(names) if names is not None else len(rows[0])
    data = np.empty((len(rows), d))
    for i, row in enumerate(rows):
        line = i + (2 if names is not None else 1)
        if len(row) != d:
            raise InputError(f"{path}:{line}: ragged row ({len(row)} fields, "
                             f"expected {d})")
        data[i] = [_parse_cell(c, f"{path}:{line}") for c in row]
    if names is None:
        names = [f"x{j}" for j in range(d)]
    return data, names


def write_samples(path, data: np.ndarray, names=None) -> None:
    data = np.asarray(data, dtype=float)
    names = names or [f"x{j}" for j in range(data.shape[1])]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in data:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, "
                                         f"got {text!r}") from None


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="l1 penalty on the relaxed matrix (default 0)")
    g.add_argument("--grid", type=_floats, default=None,
                   help="comma-separated penalty grid; enables cross-validation")
    g.add_argument("--folds", type=int, default=None, help="cross-validation folds")
    g.add_argument("--gamma", type=float, default=None, help="matrix step length")
    g.add_argument("--eta", type=float, default=None,
                   help="dual step scale (default: mean pair cost)")
    g.add_argument("--patience", type=int, default=None,
                   help="iterations without improvement before stopping")
    g.add_argument("--max-iter", type=int, default=None, help="relaxation iteration cap")
    g.add_argument("--k", type=int, default=None, help="sparsity level for tightening")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--config", default=None,
                   help="JSON file of option values; command-line flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparda",
        description="Divergence-maximizing projections between two samples.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (("analyze", "fit the projection"),
                       ("permtest", "permutation test"),
                       ("cv", "cross-validate the penalty")):
        p = sub.add_parser(name, help=text)
        p.add_argument("x", help="CSV file of the first sample")
        p.add_argument("y", help="CSV file of the second sample")
        _add_solver_flags(p)
        _add_common(p)
        if name == "permtest":
            p.add_argument("--perms", type=int, default=None,
                           help="number of permutations (default 99)")
            p.add_argument("--jobs", type=int, default=None, help="worker processes")
            p.add_argument("--fixed-lambda-null", action="store_true", default=None,
                           help="reuse the observed penalty in every permutation")

    p = sub.add_parser("synth", help="write a synthetic scenario")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--ell", type=int, default=None, help="Wishart block count")
    p.add_argument("--shift", type=_floats, default=None, help="mean of Y")
    p.add_argument("--factor", type=float, default=None,
                   help="variance factor of Y's first feature")
    p.add_argument("--noise", type=float, default=None)
    _add_common(p)

    p = sub.add_parser("oracle", help="brute-force reference values")
    p.add_argument("what", choices=("transport", "gradient"))
    p.add_argument("x")
    p.add_argument("y")
    p.add_argument("--beta", type=_floats, required=False, default=None,
                   help="direction (default: uniform)")
    p.add_argument("--step", type=float, default=1e-6,
                   help="finite-difference step for the gradient oracle")
    _add_common(p)
    return parser


DEFAULTS = {"seed": 0, "format": "json", "out": None, "perms": 99, "jobs": 1,
            "folds": 5, "fixed_lambda_null": False, "n": 100, "m": 100, "d": 5,
            "ell": 1, "shift": [2.0], "factor": 4.0, "noise": 1.0}


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from ``--config`` and then from defaults."""
    file_opts = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_opts = json.load(fh)
        if not isinstance(file_opts, dict):
            raise InputError(f"{args.config}: expected a JSON object")
    for key, val in file_opts.items():
        key = key.replace("-", "_")
        if key == "lambda":
            key = "lam"
        if not hasattr(args, key):
            raise InputError(f"{args.config}: unknown option {key!r}")
        if getattr(args, key) is None:
            setattr(args, key, val)
    for key, val in DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, val)
    return args


def _pipeline_config(args) -> PipelineConfig:
    relax_kw = {"lam": args.lam, "gamma": args.gamma, "eta": args.eta,
                "patience": args.patience, "max_iter": args.max_iter,
                "seed": args.seed}
    relax = RelaxConfig(**{k: v for k, v in relax_kw.items() if v is not None})
    tighten = TightenConfig(k=args.k, seed=args.seed)
    fixed = bool(getattr(args, "fixed_lambda_null", False))
    return PipelineConfig(relax=relax, tighten=tighten, grid=args.grid,
                          folds=args.folds, cv_in_permutations=not fixed)


def _config_echo(args) -> dict:
    skip = {"config", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _features(beta, names) -> list[dict]:
    order = np.argsort(-np.abs(beta), kind="stable")
    return [{"index": int(i), "name": names[i], "weight": float(beta[i])}
            for i in order]


def _analysis_payload(res, names) -> dict:
    return {"beta": [float(b) for b in res.beta],
            "divergence": float(res.divergence),
            "k_effective": int(res.k_effective),
            "lambda": float(res.lambda_used),
            "features": _features(res.beta, names)}


def _load_pair(args):
    X, xn = load_samples(args.x)
    Y, yn = load_samples(args.y)
    if X.shape[1] != Y.shape[1]:
        raise InputError(f"sample files have different column counts: "
                         f"{X.shape[1]} vs {Y.shape[1]}")
    return X, Y, xn


def cmd_analyze(args):
    X, Y, names = _load_pair(args)
    res = run_pipeline(X, Y, _pipeline_config(args))
    payload = _analysis_payload(res, names)
    table = [("feature", "index", "weight")] + [
        (f["name"], f["index"], f["weight"]) for f in payload["features"]]
    return payload, table


def cmd_permtest(args):
    X, Y, names = _load_pair(args)
    cfg = _pipeline_config(args)
    observed = run_pipeline(X, Y, cfg)
    rep = permutation_test(X, Y, cfg, n_perm=args.perms, seed=args.seed,
                           n_jobs=args.jobs, observed=observed)
    payload = _analysis_payload(observed, names)
    payload.update({"p_value": rep.p_value, "null_stats": rep.null_stats,
                    "observed_stat": rep.observed_stat,
                    "n_permutations": rep.n_permutations, "null_kind": rep.null_kind})
    table = [("permutation", "null_stat")] + list(enumerate(rep.null_stats))
    return payload, table


def cmd_cv(args):
    X, Y, _ = _load_pair(args)
    cfg = _pipeline_config(args)
    cv = cross_validate_lambda(X, Y, args.grid, args.folds, args.seed, cfg.relax,
                               cfg.tighten)
    payload = {"lambda": cv.lambda_star, "grid": cv.grid,
               "mean_heldout": cv.mean_heldout, "fold_heldout": cv.fold_heldout}
    header = ("lambda", "mean_heldout") + tuple(
        f"fold{f}" for f in range(len(cv.fold_heldout[0])))
    table = [header] + [(g, mh, *fh) for g, mh, fh in
                        zip(cv.grid, cv.mean_heldout, cv.fold_heldout)]
    return payload, table


def cmd_synth(args):
    if args.out is None:
        raise InputError("synth needs --out PREFIX (writes PREFIX_X.csv, PREFIX_Y.csv)")
    spec = ScenarioSpec(args.kind, n=args.n, m=args.m, d=args.d, ell=args.ell,
                        shift=list(args.shift), factor=args.factor, noise=args.noise,
                        seed=args.seed)
    if spec.kind == "wishart_blocks":
        X, Y, support = wishart_blocks_dataset(spec.ell, spec.n, spec.m, spec.seed)
    else:
        X, Y = scenario(spec)
        support = None
    px, py = f"{args.out}_X.csv", f"{args.out}_Y.csv"
    write_samples(px, X)
    write_samples(py, Y)
    payload = {"scenario": asdict(spec), "files": [px, py],
               "shape_x": list(X.shape), "shape_y": list(Y.shape)}
    if support is not None:
        payload["true_support"] = list(support)
    return payload, None


def cmd_oracle(args):
    X, Y, _ = _load_pair(args)
    X, Y = as_samples(X), as_samples(Y)
    d = X.shape[1]
    beta = np.asarray(args.beta if args.beta is not None else np.full(d, d ** -0.5))
    if beta.size != d:
        raise InputError(f"--beta has {beta.size} entries, expected {d}")
    if args.what == "transport":
        px, py = X @ beta, Y @ beta
        lp = transport_value((px[:, None] - py[None, :]) ** 2)
        fast = wasserstein1d(px, py)
        payload = {"beta": beta.tolist(), "transport_lp": lp, "quantile": fast,
                   "abs_diff": abs(lp - fast)}
        table = [("method", "value"), ("transport_lp", lp), ("quantile", fast)]
    else:
        h = args.step
        fd = np.array([(objective(X, Y, beta + h * e) - objective(X, Y, beta - h * e))
                       / (2 * h) for e in np.eye(d)])
        g = gradient(X, Y, beta)
        rel = float(np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-300))
        payload = {"beta": beta.tolist(), "gradient": g.tolist(),
                   "finite_difference": fd.tolist(), "relative_error": rel}
        table = [("coordinate", "gradient", "finite_difference")] + [
            (j, g[j], fd[j]) for j in range(d)]
    return payload, table


COMMANDS = {"analyze": cmd_analyze, "permtest": cmd_permtest, "cv": cmd_cv,
            "synth": cmd_synth, "oracle": cmd_oracle}


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _resolve(args)
        start = time.perf_counter()
        payload, table = COMMANDS[args.command](args)
        elapsed = time.perf_counter() - start
    except (InputError, ValueError, SolverError, OSError) as exc:
        print(f"sparda {args.command}: error: {exc}", file=sys.stderr)
        return 1

    if args.format == "csv" and table is not None:
        text = "".join(",".join(_cell(c) for c in row) + "\n" for row in table)
        _emit(text, None if args.command == "synth" else args.out)
        return 0
    payload["meta"] = {"command": args.command, "config": _config_echo(args),
                       "seed": args.seed, "version": __version__,
                       "generator": GENERATOR, "wall_clock_seconds": elapsed}
    text = json.dumps(payload, indent=2) + "\n"
    _emit(text, None if args.command == "synth" else args.out)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
