"""Command-line front end.

Exit codes: 0 success, 2 invalid input (bad flags, config or parameter
chain), 3 numerical failure.  Outputs are CSV/JSON with 17-digit floats and
are byte-identical for identical inputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from fracsrc import __version__, io, synthetic
from fracsrc.config import ExperimentConfig, load_config
from fracsrc.errors import FracSrcError, NumericalFailure
from fracsrc.forward_solver import solve_singular, solve_timestep_oracle
from fracsrc.fractional_calculus import GridFunction, regularize_source
from fracsrc.inverse_solver import (
    RegularizationSpec,
    build_forward_map_f,
    build_point_kernel,
    injectivity_report,
    recover_delta_train,
    recover_f,
    recover_mu_l2,
)
from fracsrc.mittag_leffler import mittag_leffler
from fracsrc.spectral_operator import Subdomain, assemble, eigendecompose

log = logging.getLogger("fracsrc")


def _write(path: Path, text: str) -> None:
    io.write_text(path, text)
    log.info("wrote %s", path)


def _decomposition(cfg: ExperimentConfig):
    A = assemble(cfg.operator)
    return A, eigendecompose(A, n_modes=cfg.n_modes)


def _absolute_regularization(reg: RegularizationSpec, d: np.ndarray) -> RegularizationSpec:
    """Config noise levels are fractions of the data RMS; the solver wants a standard deviation."""
    if reg.selection != "discrepancy":
        return reg
    rms = float(np.sqrt(np.mean(np.square(d))))
    return dataclasses.replace(reg, noise_level=reg.noise_level * rms)


def _refinable(cfg: ExperimentConfig) -> bool:
    """Whether ``f`` and the coefficients can be resampled on a finer spatial grid."""
    op = cfg.operator
    coeffs = [op.a, op.c] + ([] if op.b is None else [op.b])
    return isinstance(cfg.f_source, str) and all(isinstance(c, (str, int, float)) for c in coeffs)


# {{{ subcommands


def cmd_ml(args) -> int:
    x = np.linspace(args.xmin, args.xmax, args.n)
    vals = mittag_leffler(args.alpha, args.beta, -x)
    text = io.csv_text(
        ["x", "alpha", "beta", "value"],
        [x, np.full_like(x, args.alpha), np.full_like(x, args.beta), vals],
    )
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_transform(args) -> int:
    cfg = load_config(args.config)
    g = regularize_source(cfg.frac.beta, cfg.temporal_source(), cfg.grid)
    _write(Path(args.out) if args.out else cfg.output_dir / "transform.csv", io.grid_function_csv(g))
    return 0


def cmd_forward(args) -> int:
    cfg = load_config(args.config)
    A, e = _decomposition(cfg)
    f = cfg.f_values
    mu = cfg.temporal_source()
    sol = solve_singular(e, f, mu, cfg.frac, cfg.grid, check=not args.no_check)
    out = cfg.output_dir
    _write(out / "field.csv", sol.v.to_csv())
    (out / "field.fstf").write_bytes(sol.v.to_bytes())
    _write(out / "transform.csv", io.grid_function_csv(sol.g))
    summary = {
        "kind": mu.kind,
        "alpha": cfg.frac.alpha,
        "beta": cfg.frac.beta,
        "n_steps": cfg.grid.n_steps,
        "n_interior": cfg.operator.n_interior,
        "n_modes": e.n_modes,
        "tail": sol.v.meta["tail"],
        "norm": sol.v.norm(),
        "transform_gap": sol.transform_gap,
    }
    if sol.u is not None:
        _write(out / "u_field.csv", sol.u.to_csv())
    if args.oracle:
        vo = solve_timestep_oracle(A, f, sol.g, cfg.frac.alpha, cfg.grid)
        _write(out / "oracle_field.csv", vo.to_csv())
        diff = float(np.linalg.norm(vo.values - sol.v.values))
        summary["oracle_relative_gap"] = diff / max(float(np.linalg.norm(vo.values)), 1e-300)
        summary["oracle_condition"] = vo.meta["condition"]
    _write(out / "forward.json", io.dumps(summary))
    return 0


def _subdomain_data(cfg: ExperimentConfig, obs: Subdomain) -> tuple[np.ndarray, np.ndarray | None]:
    """(data vector, true f or None)."""
    if cfg.data is not None:
        try:
            cols = io.read_csv(cfg.data.read_text(encoding="utf-8"))
        except OSError as exc:
            raise FracSrcError(f"cannot read data file {cfg.data}: {exc.strerror}") from None
        n_t, n_x = cfg.grid.n_steps, cfg.operator.n_interior
        if cols.get("value") is None or cols["value"].size != n_t * n_x:
            raise FracSrcError(f"data file must hold a t,x,value field of {n_t}x{n_x} samples")
        field = cols["value"].reshape(n_t, n_x)
        return field[1:, obs.indices].ravel(), None
    d = synthetic.subdomain_data(
        cfg.operator, cfg.f_function, cfg.regular_function(), cfg.frac.alpha, cfg.grid, obs,
        factor=cfg.oracle_factor, atoms=cfg.atoms, order=cfg.frac.beta,
        refine_space=_refinable(cfg),
    )
    return synthetic.add_noise(d, cfg.noise, cfg.seed), cfg.f_values


def cmd_invert_f(args) -> int:
    cfg = load_config(args.config)
    if cfg.observation.kind != "subdomain":
        raise FracSrcError("invert-f needs a subdomain observation")
    A, e = _decomposition(cfg)
    obs = cfg.observation.build(cfg.operator.n_interior)
    g = regularize_source(cfg.frac.beta, cfg.temporal_source(), cfg.grid)
    fmap = build_forward_map_f(e, g, cfg.frac.alpha, obs, cfg.grid)
    d, truth = _subdomain_data(cfg, obs)
    est = recover_f(d, fmap, _absolute_regularization(cfg.regularization, d))
    rep = injectivity_report(fmap)
    x = cfg.operator.nodes
    out = cfg.output_dir
    cols, header = [x, est.values], ["x", "value"]
    if truth is not None:
        cols.append(truth)
        header.append("truth")
    _write(out / "f_estimate.csv", io.csv_text(header, cols))
    sv = rep.singular_values
    _write(out / "singular_values.csv", io.csv_text(["index", "sigma"], [np.arange(sv.size), sv]))
    diag = {
        "residual": est.residual,
        "relative_residual": est.relative_residual,
        "weight": est.weight,
        "sigma_min": rep.sigma_min,
        "sigma_max": rep.sigma_max,
        "condition": rep.condition,
        "numerical_rank": rep.rank,
        "numerically_unique": rep.unique,
        "n_observations": int(d.size),
    }
    if truth is not None:
        diag["relative_error"] = float(np.linalg.norm(est.values - truth) / np.linalg.norm(truth))
    _write(out / "diagnostics.json", io.dumps(diag))
    return 0


def _point_data(cfg: ExperimentConfig, x0: int, order: float) -> GridFunction:
    if cfg.data is not None:
        try:
            text = cfg.data.read_text(encoding="utf-8")
        except OSError as exc:
            raise FracSrcError(f"cannot read data file {cfg.data}: {exc.strerror}") from None
        return io.grid_function_from_csv(text, cfg.grid)
    d = synthetic.point_data(
        cfg.operator, cfg.f_function, cfg.regular_function(), cfg.atoms, order,
        cfg.frac.alpha, cfg.grid, x0, factor=cfg.oracle_factor,
        refine_space=cfg.atoms is None and _refinable(cfg),
    )
    return GridFunction(cfg.grid, synthetic.add_noise(d.values, cfg.noise, cfg.seed))


def cmd_invert_mu(args) -> int:
    cfg = load_config(args.config)
    if cfg.observation.kind != "point":
        raise FracSrcError("invert-mu needs a point observation")
    A, e = _decomposition(cfg)
    x0 = int(cfg.observation.index)
    f = cfg.f_values
    atomic = cfg.atoms is not None
    # atoms are recovered from transformed data J_beta u, square-integrable sources from u itself
    order = cfg.frac.beta if atomic else 0.0
    K = build_point_kernel(e, f, cfg.frac.alpha, x0, cfg.grid, order=order)
    data = _point_data(cfg, x0, order)
    t = cfg.grid.nodes
    out = cfg.output_dir
    diag: dict = {"x0": float(cfg.operator.nodes[x0]), "kernel_order": order}
    if atomic:
        est = recover_delta_train(data, K, max_atoms=cfg.max_atoms, tol=cfg.tol)
        model = sum((r * K.shifted(a) for a, r in est.train.atoms), np.zeros_like(t))
        diag.update({
            "atoms": io.train_table(est.train),
            "residual": est.residual,
            "relative_residual": est.relative_residual,
            "converged": est.converged,
            "iterations": est.iterations,
            "true_atoms": io.train_table(cfg.atoms),
        })
    else:
        est = recover_mu_l2(data, K, _absolute_regularization(cfg.regularization, data.values[1:]))
        model = K.matrix @ est.mu.values
        cols, header = [t, est.mu.values], ["t", "value"]
        fn = cfg.regular_function()
        if fn is not None and cfg.data is None:
            truth = fn(t)
            cols.append(truth)
            header.append("truth")
            # early nodes are dominated by the kernel singularity; measure on t >= 2h
            keep = t >= 2.0 * cfg.grid.h
            diag["relative_error_trimmed"] = float(
                np.linalg.norm((est.mu.values - truth)[keep]) / np.linalg.norm(truth[keep])
            )
        _write(out / "mu_estimate.csv", io.csv_text(header, cols))
        diag.update({
            "residual": est.residual,
            "weight": est.weight,
            "condition": est.condition,
        })
    _write(out / "point_series.csv", io.csv_text(["t", "data", "model"], [t, data.values, model]))
    _write(out / "diagnostics.json", io.dumps(diag))
    return 0


def cmd_report(args) -> int:
    from fracsrc.acceptance import report, run_all

    numbers = None
    if args.criteria:
        try:
            numbers = sorted({int(s) for s in args.criteria.split(",")})
        except ValueError:
            raise FracSrcError(f"--criteria expects comma-separated integers, got {args.criteria!r}") from None
        from fracsrc.acceptance import CRITERIA

        bad = [k for k in numbers if k not in CRITERIA]
        if bad:
            raise FracSrcError(f"unknown criteria {bad}")
    results = run_all(numbers)
    for r in results:
        print(r.line(), file=sys.stderr)
    text = io.dumps(report(results))
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    if args.strict and not all(r.passed for r in results):
        return 1
    return 0


def cmd_selftest(args) -> int:
    from fracsrc.selftest import run_selftest

    results = run_selftest(seed=args.seed)
    for name, ok, detail in results:
        print(f"{'ok  ' if ok else 'FAIL'} {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


# }}}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracsrc", description="Time-fractional diffusion with singular sources.")
    p.add_argument("--version", action="version", version=f"fracsrc {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log written files")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    q = sub.add_parser("ml", help="tabulate E_{alpha,beta}(-x) as CSV")
    q.add_argument("--alpha", type=float, required=True)
    q.add_argument("--beta", type=float, required=True)
    q.add_argument("--xmin", type=float, default=0.0)
    q.add_argument("--xmax", type=float, required=True)
    q.add_argument("--n", type=int, default=101)
    q.add_argument("--out", help="output CSV (default: standard output)")
    q.set_defaults(func=cmd_ml)

    q = sub.add_parser("forward", help="solve the transformed forward problem")
    q.add_argument("--config", required=True)
    q.add_argument("--oracle", action="store_true", help="also run L1 time stepping")
    q.add_argument("--no-check", action="store_true", help="skip the J_beta u = v check for delta trains")
    q.set_defaults(func=cmd_forward)

    q = sub.add_parser("transform", help="write g = J_beta mu")
    q.add_argument("--config", required=True)
    q.add_argument("--out")
    q.set_defaults(func=cmd_transform)

    q = sub.add_parser("invert-f", help="recover f from subdomain data")
    q.add_argument("--config", required=True)
    q.set_defaults(func=cmd_invert_f)

    q = sub.add_parser("invert-mu", help="recover mu (or a delta train) from point data")
    q.add_argument("--config", required=True)
    q.set_defaults(func=cmd_invert_mu)

    q = sub.add_parser("report", help="run the acceptance criteria and write a JSON report")
    q.add_argument("--out")
    q.add_argument("--criteria", help="comma-separated subset, e.g. 1,2,5")
    q.add_argument("--strict", action="store_true", help="exit 1 if any criterion fails")
    q.set_defaults(func=cmd_report)

    q = sub.add_parser("selftest", help="run the invariant checks")
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "ml" and args.n < 1:
        print("fracsrc: error: --n must be positive", file=sys.stderr)
        return 2
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return args.func(args)
    except NumericalFailure as exc:
        print(f"fracsrc: numerical failure: {exc}", file=sys.stderr)
        return 3
    except FracSrcError as exc:
        print(f"fracsrc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
