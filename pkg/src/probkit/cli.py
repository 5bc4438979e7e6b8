"""Command-line front end: simulate datasets, fit models, diagnose draws.

Three fixed model families are exposed (a Gaussian linear model, its
Poisson variant, a three-component Gaussian mixture, and a random
effects model built by reusing the linear-model fragment per class).
Everything is CSV in, CSV out: headers on the first line, floats
serialized with shortest round-trip formatting, deterministic given the
seed. Exit codes: 0 success, 1 inference failure, 2 usage or I/O.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import distributions as dists
from . import rng
from .diagnostics import DegenerateSeriesError, histogram, summarize
from .hmc import HmcConfig, InitializationError, sample
from .hmc import _validate as _validate_config
from .model import compile_model, dirichlet_via_gammas, predictor, traverse

MODELS = ("lm", "lm_poisson", "mixture", "randeffects")


class CliError(Exception):
    exit_code = 1


class UsageError(CliError):
    exit_code = 2


class InferenceError(CliError):
    exit_code = 1


# --- model builders -----------------------------------------------------


def linear_model(pa, pas, pb, pbs, sigma, data):
    """Intercept-and-slope regression fragment, reusable per class."""
    return dists.Normal(pa, pas).param("alpha").flat_map(
        lambda alpha: dists.Normal(pb, pbs).param("beta").flat_map(
            lambda beta: predictor(lambda x: dists.Normal(alpha + beta * x, sigma))
            .fit(data)
            .map(lambda _: (alpha, beta, sigma))
        )
    )


def lm_model(rows, prior_sd):
    data = [(x, y) for x, y in rows]
    return dists.Exponential(3.0).param("sigma").flat_map(
        lambda sigma: linear_model(0.0, prior_sd, 0.0, prior_sd, sigma, data)
    )


def lm_poisson_model(rows, prior_sd):
    data = [(x, y) for x, y in rows]
    return dists.Normal(0.0, prior_sd).param("alpha").flat_map(
        lambda alpha: dists.Normal(0.0, prior_sd).param("beta").flat_map(
            lambda beta: predictor(lambda x: dists.Poisson((alpha + beta * x).exp()))
            .fit(data)
            .map(lambda _: (alpha, beta))
        )
    )


def mixture_model(rows, prior_sd=None):
    ys = [y for (y,) in rows]
    return dirichlet_via_gammas(3, 3.0).flat_map(
        lambda thetas: traverse(
            dists.Normal(0.0, 1.0).param(f"mu_{i}") for i in range(3)
        ).flat_map(
            lambda mus: dists.Exponential(3.0).param("sigma").flat_map(
                lambda sigma: dists.Mixture(
                    [(dists.Normal(mu, sigma), th) for mu, th in zip(mus, thetas)]
                )
                .fit(ys)
                .map(lambda _: (thetas, mus, sigma))
            )
        )
    )


def randeffects_model(rows, prior_sd=None):
    groups: dict[int, list[tuple[float, float]]] = {}
    for cid, x, y in rows:
        groups.setdefault(cid, []).append((x, y))
    datasets = [groups[k] for k in sorted(groups)]

    def with_population(ac, sa, bc, sb, sigma):
        per_class = traverse(
            linear_model(ac, sa, bc, sb, sigma, data) for data in datasets
        )
        return per_class.map(lambda _: (ac, sa, bc, sb, sigma))

    return dists.Normal(0.0, 1000.0).param("alpha_c").flat_map(
        lambda ac: dists.Gamma(0.001, 1000.0).param("sigma_a").flat_map(
            lambda sa: dists.Normal(0.0, 1000.0).param("beta_c").flat_map(
                lambda bc: dists.Gamma(0.001, 1000.0).param("sigma_b").flat_map(
                    lambda sb: dists.Exponential(3.0).param("sigma").flat_map(
                        lambda sigma: with_population(ac, sa, bc, sb, sigma)
                    )
                )
            )
        )
    )


_BUILDERS = {
    "lm": lm_model,
    "lm_poisson": lm_poisson_model,
    "mixture": mixture_model,
    "randeffects": randeffects_model,
}


def build_model(name, rows, prior_sd):
    return _BUILDERS[name](rows, prior_sd)


# --- data files ---------------------------------------------------------


def _parse_float(text: str) -> float:
    return float(text)


def _parse_count(text: str) -> int:
    k = int(text)
    if k < 0:
        raise ValueError(f"count must be nonnegative, got {k}")
    return k


def _parse_id(text: str) -> int:
    cid = int(text)
    if cid < 0:
        raise ValueError(f"id must be nonnegative, got {cid}")
    return cid


_DATA_COLUMNS = {
    "lm": (["x", "y"], [_parse_float, _parse_float]),
    "lm_poisson": (["x", "y"], [_parse_float, _parse_count]),
    "mixture": (["y"], [_parse_float]),
    "randeffects": (["id", "x", "y"], [_parse_id, _parse_float, _parse_float]),
}


def _read_table(path, columns, parsers):
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err}")
    reader = csv.reader(text.splitlines())
    header = next(reader, None)
    if header != columns:
        raise UsageError(
            f"{path} line 1: expected header {','.join(columns)}, got "
            f"{','.join(header) if header else 'nothing'}"
        )
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(columns):
            raise UsageError(f"{path} line {lineno}: expected {len(columns)} fields, got {len(row)}")
        try:
            rows.append(tuple(parse(v) for parse, v in zip(parsers, row)))
        except ValueError as err:
            raise UsageError(f"{path} line {lineno}: {err}")
    if not rows:
        raise UsageError(f"{path}: no data rows")
    return rows


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


# --- simulate -----------------------------------------------------------


def simulate_lm(n, seed, beta0, beta1, sigma):
    state = int(seed)
    rows = []
    for _ in range(n):
        state, x = rng.std_normal.run(state)
        state, e = rng.std_normal.run(state)
        rows.append((x, beta0 + beta1 * x + sigma * e))
    return ["x", "y"], rows


def simulate_lm_poisson(n, seed, beta0, beta1):
    state = int(seed)
    rows = []
    for _ in range(n):
        state, x = rng.std_normal.run(state)
        lam = math.exp(beta0 + beta1 * x)
        state, y = dists.Poisson(lam).sample.run(state)
        rows.append((x, int(y)))
    return ["x", "y"], rows


def simulate_mixture(n, seed, mus, thetas, sigma):
    state = int(seed)
    rows = []
    for _ in range(n):
        state, u = rng.rand_double.run(state)
        k = len(thetas) - 1
        acc = 0.0
        for i, th in enumerate(thetas):
            acc += th
            if u < acc:
                k = i
                break
        state, z = rng.std_normal.run(state)
        rows.append((mus[k] + sigma * z,))
    return ["y"], rows


def simulate_randeffects(n, seed, classes, alpha, sigma_alpha, beta, sigma_beta, sigma):
    state = int(seed)
    rows = []
    for cid in range(classes):
        state, za = rng.std_normal.run(state)
        state, zb = rng.std_normal.run(state)
        a_i = alpha + sigma_alpha * za
        b_i = beta + sigma_beta * zb
        for _ in range(n):
            state, x = rng.std_normal.run(state)
            state, e = rng.std_normal.run(state)
            rows.append((cid, x, a_i + b_i * x + sigma * e))
    return ["id", "x", "y"], rows


def _require(condition, message):
    if not condition:
        raise UsageError(message)


def _run_simulate(args) -> None:
    _require(args.n >= 1, f"--n must be at least 1, got {args.n}")
    model = args.model
    if model == "lm":
        beta0 = 4.0 if args.beta0 is None else args.beta0
        beta1 = -1.5 if args.beta1 is None else args.beta1
        sigma = 0.5 if args.sigma is None else args.sigma
        _require(sigma > 0, "--sigma must be positive")
        header, rows = simulate_lm(args.n, args.seed, beta0, beta1, sigma)
    elif model == "lm_poisson":
        beta0 = 1.0 if args.beta0 is None else args.beta0
        beta1 = -0.5 if args.beta1 is None else args.beta1
        header, rows = simulate_lm_poisson(args.n, args.seed, beta0, beta1)
    elif model == "mixture":
        mus = [-2.0, 1.0, 3.0] if args.mu is None else args.mu
        thetas = [0.3, 0.2, 0.5] if args.theta is None else args.theta
        sigma = 0.5 if args.sigma is None else args.sigma
        _require(len(mus) == len(thetas), "--mu and --theta must have equal lengths")
        _require(len(mus) >= 2, "need at least two mixture components")
        _require(all(t > 0 for t in thetas), "--theta entries must be positive")
        _require(abs(sum(thetas) - 1.0) <= 1e-6, "--theta must sum to 1")
        _require(sigma > 0, "--sigma must be positive")
        header, rows = simulate_mixture(args.n, args.seed, mus, thetas, sigma)
    else:
        _require(args.classes >= 1, f"--classes must be at least 1, got {args.classes}")
        sigma = 0.5 if args.sigma is None else args.sigma
        _require(sigma > 0, "--sigma must be positive")
        _require(args.sigma_alpha > 0, "--sigma-alpha must be positive")
        _require(args.sigma_beta > 0, "--sigma-beta must be positive")
        header, rows = simulate_randeffects(
            args.n, args.seed, args.classes,
            args.alpha, args.sigma_alpha, args.beta, args.sigma_beta, sigma,
        )
    _write_csv(args.out, header, rows)


# --- fit ----------------------------------------------------------------


def _summary_rows(summary):
    lags = len(summary.params[0].acf) - 1
    header = ["param", "mean", "sd", "q2_5", "q25", "q50", "q75", "q97_5", "ess"]
    header += [f"acf_{k}" for k in range(1, lags + 1)]
    rows = []
    for p in summary.params:
        rows.append(
            [p.name, p.mean, p.sd, p.q2_5, p.q25, p.q50, p.q75, p.q97_5, p.ess]
            + list(p.acf[1:])
        )
    return header, rows


def _write_chain(out_dir: Path, suffix: str, names, draws) -> None:
    _write_csv(out_dir / f"draws{suffix}.csv", names, [[float(v) for v in row] for row in draws])
    try:
        summary = summarize(draws, list(names), max_lag=10)
    except DegenerateSeriesError as err:
        raise InferenceError(f"chain is degenerate: {err}")
    header, rows = _summary_rows(summary)
    _write_csv(out_dir / f"summary{suffix}.csv", header, rows)


def _chain_task(task):
    model_name, rows, prior_sd, cfg_kwargs = task
    model = compile_model(build_model(model_name, rows, prior_sd))
    chain = sample(model, HmcConfig(**cfg_kwargs))
    return chain.names, chain.draws


def _run_fit(args) -> None:
    _require(args.chains >= 1, f"--chains must be at least 1, got {args.chains}")
    _require(args.prior_sd > 0, "--prior-sd must be positive")
    columns, parsers = _DATA_COLUMNS[args.model]
    rows = _read_table(args.data, columns, parsers)
    cfg = dict(
        warmup_iters=args.warmup,
        sample_iters=args.iters,
        leapfrog_steps=args.leapfrog_steps,
        thin=args.thin,
    )
    base_config = HmcConfig(seed=args.seed, **cfg)
    try:
        _validate_config(base_config)
    except ValueError as err:
        raise UsageError(str(err))
    out_dir = Path(args.out)
    try:
        if args.chains == 1:
            model = compile_model(build_model(args.model, rows, args.prior_sd))
            chain = sample(model, base_config)
            results = [(chain.names, chain.draws)]
        else:
            tasks = [
                (args.model, rows, args.prior_sd, dict(seed=rng.chain_seed(args.seed, i), **cfg))
                for i in range(args.chains)
            ]
            with ProcessPoolExecutor(max_workers=args.chains) as pool:
                results = list(pool.map(_chain_task, tasks))
    except (InitializationError, ValueError, RuntimeError) as err:
        raise InferenceError(str(err))
    out_dir.mkdir(parents=True, exist_ok=True)
    if len(results) == 1:
        _write_chain(out_dir, "", *results[0])
    else:
        for i, (names, draws) in enumerate(results):
            _write_chain(out_dir, f"_chain{i}", names, draws)


# --- diagnose -----------------------------------------------------------


def _run_diagnose(args) -> None:
    try:
        text = Path(args.draws).read_text()
    except OSError as err:
        raise UsageError(f"cannot read {args.draws}: {err}")
    reader = csv.reader(text.splitlines())
    names = next(reader, None)
    if not names:
        raise UsageError(f"{args.draws} line 1: expected a header row")
    matrix = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(names):
            raise UsageError(f"{args.draws} line {lineno}: expected {len(names)} fields, got {len(row)}")
        try:
            matrix.append([float(v) for v in row])
        except ValueError as err:
            raise UsageError(f"{args.draws} line {lineno}: {err}")
    if not matrix:
        raise UsageError(f"{args.draws}: no draws to diagnose")
    try:
        summary = summarize(matrix, names, max_lag=10)
    except DegenerateSeriesError as err:
        raise InferenceError(str(err))
    header, rows = _summary_rows(summary)
    out = Path(args.out)
    _write_csv(out, header, rows)

    hist_path = out.with_name(out.stem + "_hist" + out.suffix)
    hist_rows = []
    columns = list(zip(*matrix))
    for name, col in zip(names, columns):
        counts, edges = histogram(list(col))
        for count, lo, hi in zip(counts, edges, edges[1:]):
            hist_rows.append([name, float(lo), float(hi), int(count)])
    _write_csv(hist_path, ["param", "bin_low", "bin_high", "count"], hist_rows)


# --- entry point --------------------------------------------------------


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part != ""]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probkit",
        description="Simulate, fit, and diagnose the example Bayesian models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write a simulated dataset as CSV")
    sim.add_argument("model", choices=MODELS)
    sim.add_argument("--n", type=int, default=100, help="rows (per class for randeffects)")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.add_argument("--beta0", type=float, default=None)
    sim.add_argument("--beta1", type=float, default=None)
    sim.add_argument("--sigma", type=float, default=None)
    sim.add_argument("--mu", type=_float_list, default=None, help="comma-separated component means")
    sim.add_argument("--theta", type=_float_list, default=None, help="comma-separated component weights")
    sim.add_argument("--classes", type=int, default=8)
    sim.add_argument("--alpha", type=float, default=2.0)
    sim.add_argument("--sigma-alpha", type=float, default=0.5)
    sim.add_argument("--beta", type=float, default=-1.0)
    sim.add_argument("--sigma-beta", type=float, default=0.3)

    fit = sub.add_parser("fit", help="sample a model's posterior from a CSV dataset")
    fit.add_argument("model", choices=MODELS)
    fit.add_argument("--data", required=True)
    fit.add_argument("--warmup", type=int, default=10000)
    fit.add_argument("--iters", type=int, default=50000)
    fit.add_argument("--thin", type=int, default=5)
    fit.add_argument("--leapfrog-steps", type=int, default=5)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--chains", type=int, default=1)
    fit.add_argument("--prior-sd", type=float, default=10.0)
    fit.add_argument("--out", required=True, help="output directory")

    diag = sub.add_parser("diagnose", help="summarize a draws file")
    diag.add_argument("--draws", required=True)
    diag.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            _run_simulate(args)
        elif args.command == "fit":
            _run_fit(args)
        else:
            _run_diagnose(args)
    except CliError as err:
        print(f"probkit: {err}", file=sys.stderr)
        return err.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
