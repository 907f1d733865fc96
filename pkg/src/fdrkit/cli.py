"""Batch command-line interface.

Subcommands: ``simulate`` (draw a synthetic table), ``fit`` (train a
model), ``discover`` (produce a rejection set and run report),
``benchmark`` (grid of methods x seeds with aggregate statistics) and
``report`` (render an aggregate as a table). Machine-readable JSON goes
to stdout or ``--out``; human logs go to stderr. Every command is
deterministic given its flags.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os
import time

import click
import numpy as np

from . import __version__
from .baselines import bh, storey_bh, z_to_pvalue
from .data_model import load_table, write_table
from .errors import FdrkitError
from .prior_net import NetworkConfig
from .synthetic import SCENARIOS, generate, scenario_config
from .two_groups import (
    FittedModel,
    TrainingConfig,
    fdp_power,
    posteriors,
    select_discoveries,
    train,
)

_BASELINES = ("bh", "sbh")
_NEURT_METHODS = ("neurt_a", "neurt_b")


def _hash_config(d: dict) -> str:
    payload = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def _emit(payload: dict, out_path=None):
    text = json.dumps(payload, sort_keys=True, indent=1)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    click.echo(text)


def _log(msg: str):
    click.echo(msg, err=True)


def _config_file_option(f):
    def callback(ctx, param, value):
        if value:
            with open(value, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
            ctx.default_map = {**(ctx.default_map or {}), **loaded}
        return value

    return click.option(
        "--config", type=click.Path(exists=True, dir_okay=False),
        is_eager=True, expose_value=False, callback=callback,
        help="JSON file of flag defaults; explicit flags take precedence.",
    )(f)


def _training_options(f):
    for opt in reversed([
        click.option("--lr", default=1e-3, show_default=True, type=float),
        click.option("--epochs", default=100, show_default=True, type=int),
        click.option("--batch-size", default=128, show_default=True, type=int),
        click.option("--weight-decay", default=1e-4, show_default=True, type=float),
        click.option("--momentum", default=0.9, show_default=True, type=float),
        click.option("--val-fraction", default=0.2, show_default=True, type=float),
        click.option("--patience", default=10, show_default=True, type=int),
        click.option("--grid-size", default=1000, show_default=True, type=int,
                     help="Cells in the mixing-weight quadrature."),
        click.option("--hidden", default="200,200", show_default=True,
                     help="Comma-separated hidden layer sizes."),
        click.option("--standardize/--no-standardize", default=True,
                     show_default=True),
        click.option("--stage2/--no-stage2", default=True, show_default=True,
                     help="Apply the auxiliary-covariate adjustment."),
        click.option("--adjust-mode", default="mean", show_default=True,
                     type=click.Choice(["mean", "sample"])),
        click.option("--f1-sweeps", default=10, show_default=True, type=int,
                     help="Averaging passes of the alternative estimator."),
    ]):
        f = opt(f)
    return f


def _training_config(seed, lr, epochs, batch_size, weight_decay, momentum,
                     val_fraction, patience, grid_size, standardize, stage2,
                     adjust_mode, f1_sweeps) -> TrainingConfig:
    return TrainingConfig(
        lr=lr, epochs=epochs, batch_size=batch_size,
        weight_decay=weight_decay, momentum=momentum,
        val_fraction=val_fraction, patience=patience,
        lambda_grid_size=grid_size, seed=seed,
        standardize=standardize, apply_stage2=stage2,
        adjust_mode=adjust_mode, f1_sweeps=f1_sweeps,
    )


@click.group()
@click.version_option(version=__version__, prog_name="fdrkit")
def main():
    """Covariate-adaptive FDR control toolkit."""


@main.command()
@click.option("--scenario", default="A", show_default=True,
              help=f"Preset name; one of {sorted(SCENARIOS)}.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--n", "n_override", default=None, type=int,
              help="Override the preset row count.")
@click.option("--out", required=True, type=click.Path(writable=True))
@_config_file_option
def simulate(scenario, seed, n_override, out):
    """Draw a synthetic hypothesis table with ground-truth labels."""
    overrides = {"n": n_override} if n_override else {}
    try:
        cfg = scenario_config(scenario, seed=seed, **overrides)
    except FdrkitError as e:
        raise click.UsageError(str(e))
    table = generate(cfg)
    write_table(table, out)
    payload = {
        "command": "simulate",
        "scenario": scenario.upper(),
        "n": table.n,
        "seed": seed,
        "config_hash": _hash_config(cfg.to_dict()),
        "out": str(out),
    }
    _log(f"wrote {table.n} rows to {out}")
    _emit(payload)


@main.command()
@click.option("--in", "in_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--variant", default="a", show_default=True,
              type=click.Choice(["a", "b"]))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(writable=True))
@_training_options
@_config_file_option
def fit(in_path, variant, seed, out, **train_kwargs):
    """Fit the covariate-adaptive model and write it as JSON."""
    hidden = tuple(int(h) for h in train_kwargs.pop("hidden").split(","))
    try:
        table = load_table(in_path)
        config = _training_config(seed, **train_kwargs)
        if table.q == 0:
            _log("warning: table has no auxiliary columns; "
                 "the Stage II adjustment will be skipped")
        d_in = table.k if variant == "a" else table.k + table.q
        seeds = np.random.SeedSequence(seed).generate_state(5)
        net_config = NetworkConfig(input_dim=d_in, hidden_sizes=hidden,
                                   init_seed=int(seeds[2]))
        t0 = time.perf_counter()
        model = train(table, config, variant=f"neurt_{variant}",
                      net_config=net_config)
        seconds = time.perf_counter() - t0
        model.save(out)
    except FdrkitError as e:
        raise click.ClickException(str(e))
    payload = {
        "command": "fit",
        "variant": model.variant,
        "n": table.n, "k": table.k, "q": table.q,
        "best_epoch": model.train_log["best_epoch"],
        "best_val_nll": model.train_log["best_val_nll"],
        "epochs_run": len(model.train_log["epochs"]) - 1,
        "pi1_hat": model.pi1_hat,
        "seconds": round(seconds, 3),
        "config_hash": _hash_config({**config.to_dict(),
                                     "hidden": list(hidden),
                                     "variant": variant}),
        "out": str(out),
    }
    _log(f"fitted {model.variant} in {seconds:.1f}s "
         f"(best val NLL {model.train_log['best_val_nll']:.5f})")
    _emit(payload)


def _run_baseline(method, table, alpha, sidedness, lambda0):
    p = z_to_pvalue(table.z, sidedness=sidedness)
    if method == "bh":
        return bh(p, alpha)
    return storey_bh(p, alpha, lambda0=lambda0)


@main.command()
@click.option("--in", "in_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--method", default="neurt", show_default=True,
              type=click.Choice(["neurt", "bh", "sbh"]))
@click.option("--model", "model_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Fitted model JSON; required for --method neurt.")
@click.option("--alpha", default=0.1, show_default=True,
              type=click.FloatRange(0.0, 1.0, min_open=True, max_open=True))
@click.option("--sidedness", default="two_sided", show_default=True,
              type=click.Choice(["two_sided", "left", "right"]),
              help="z to p-value conversion for the baselines.")
@click.option("--lambda0", default=0.5, show_default=True,
              type=click.FloatRange(0.0, 1.0, min_open=True, max_open=True))
@click.option("--out", required=True, type=click.Path(writable=True),
              help="Discovery CSV path.")
@click.option("--report", "report_path", default=None,
              type=click.Path(writable=True),
              help="Run report JSON path (also echoed to stdout).")
@_config_file_option
def discover(in_path, method, model_path, alpha, sidedness, lambda0, out,
             report_path):
    """Apply a rejection procedure and write discoveries plus a report."""
    t0 = time.perf_counter()
    try:
        table = load_table(in_path)
        seed = None
        if method == "neurt":
            if model_path is None:
                raise click.UsageError("--method neurt requires --model")
            model = FittedModel.load(model_path)
            w = posteriors(model, table)
            ds = select_discoveries(w, alpha)
            seed = model.train_config.get("seed")
        else:
            ds = _run_baseline(method, table, alpha, sidedness, lambda0)
        ds.write_csv(out, ids=table.ids)
    except FdrkitError as e:
        raise click.ClickException(str(e))
    seconds = time.perf_counter() - t0
    payload = {
        "command": "discover",
        "method": method,
        "alpha": alpha,
        "n": table.n,
        "discoveries": ds.n_rejected,
        "seconds": round(seconds, 3),
        "seed": seed,
        "config_hash": _hash_config({
            "method": method, "alpha": alpha, "sidedness": sidedness,
            "lambda0": lambda0,
        }),
        "out": str(out),
    }
    if table.h_truth is not None:
        fdp, power, counts = fdp_power(ds, table.h_truth)
        payload.update({"fdp": fdp, "power": power, "counts": counts})
    _log(f"{method}: {ds.n_rejected} discoveries at alpha={alpha}")
    _emit(payload, report_path)


def _benchmark_cell(method, seed, scenario, n_override, alpha, hidden,
                    config_kwargs):
    overrides = {"n": n_override} if n_override else {}
    table = generate(scenario_config(scenario, seed=seed, **overrides))
    t0 = time.perf_counter()
    if method in _NEURT_METHODS:
        config = _training_config(seed, **config_kwargs)
        d_in = table.k if method == "neurt_a" else table.k + table.q
        net_config = NetworkConfig(
            input_dim=d_in, hidden_sizes=hidden,
            init_seed=int(np.random.SeedSequence(seed).generate_state(5)[2]),
        )
        model = train(table, config, variant=method, net_config=net_config)
        ds = select_discoveries(posteriors(model, table), alpha)
    elif method == "bh":
        ds = bh(z_to_pvalue(table.z), alpha)
    elif method == "sbh":
        ds = storey_bh(z_to_pvalue(table.z), alpha)
    else:
        raise click.UsageError(
            f"unknown method {method!r}; available: "
            f"{list(_BASELINES) + list(_NEURT_METHODS)}"
        )
    seconds = time.perf_counter() - t0
    fdp, power, _ = fdp_power(ds, table.h_truth)
    return {
        "method": method, "seed": seed, "n": table.n,
        "discoveries": ds.n_rejected, "fdp": fdp, "power": power,
        "seconds": seconds,
        "z": table.z, "rejected_mask": ds.rejected_mask(),
        "h": table.h_truth,
    }


def _parse_seeds(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi)))
    return [int(s) for s in text.split(",")]


def _write_histogram(path, cells, bins):
    """Pooled z-histogram split by rejection status and truth."""
    edges = bins
    cols = {name: np.zeros(len(edges) - 1, dtype=np.int64)
            for name in ("rejected_null", "rejected_alt",
                         "accepted_null", "accepted_alt")}
    for cell in cells:
        z, rej, h = cell["z"], cell["rejected_mask"], cell["h"]
        for name, mask in (
            ("rejected_null", rej & (h == 0)),
            ("rejected_alt", rej & (h == 1)),
            ("accepted_null", ~rej & (h == 0)),
            ("accepted_alt", ~rej & (h == 1)),
        ):
            cols[name] += np.histogram(z[mask], bins=edges)[0]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_left,bin_right,rejected_null,rejected_alt,"
                 "accepted_null,accepted_alt\n")
        for i in range(len(edges) - 1):
            fh.write(f"{float(edges[i])!r},{float(edges[i + 1])!r},"
                     f"{cols['rejected_null'][i]},{cols['rejected_alt'][i]},"
                     f"{cols['accepted_null'][i]},{cols['accepted_alt'][i]}\n")


@main.command()
@click.option("--scenario", default="A", show_default=True)
@click.option("--methods", default="bh,sbh,neurt_a,neurt_b", show_default=True,
              help="Comma-separated list.")
@click.option("--seeds", default="0:20", show_default=True,
              help="Either lo:hi (half-open) or a comma-separated list.")
@click.option("--alpha", default=0.1, show_default=True,
              type=click.FloatRange(0.0, 1.0, min_open=True, max_open=True))
@click.option("--n", "n_override", default=None, type=int)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@_training_options
@_config_file_option
def benchmark(scenario, methods, seeds, alpha, n_override, out_dir,
              **train_kwargs):
    """Run every (method, seed) cell and aggregate discoveries/FDP/power."""
    hidden = tuple(int(h) for h in train_kwargs.pop("hidden").split(","))
    method_list = [m for m in (s.strip() for s in methods.split(",")) if m]
    seed_list = _parse_seeds(seeds)
    if not method_list:
        raise click.UsageError("methods list must not be empty")
    if not seed_list:
        raise click.UsageError("seeds list must not be empty")
    for m in method_list:
        if m not in _BASELINES + _NEURT_METHODS:
            raise click.UsageError(
                f"unknown method {m!r}; available: "
                f"{list(_BASELINES) + list(_NEURT_METHODS)}"
            )
    try:
        scenario_config(scenario)
    except FdrkitError as e:
        raise click.UsageError(str(e))

    os.makedirs(out_dir, exist_ok=True)
    cells = [(m, s) for m in method_list for s in seed_list]
    workers = int(os.environ.get("FDRKIT_THREADS", "1"))

    def run(cell):
        m, s = cell
        _log(f"running {m} seed={s}")
        return _benchmark_cell(m, s, scenario, n_override, alpha, hidden,
                               train_kwargs)

    results = {}
    try:
        if workers > 1:
            with concurrent.futures.ThreadPoolExecutor(workers) as pool:
                for cell, res in zip(cells, pool.map(run, cells)):
                    results[cell] = res
        else:
            for cell in cells:
                results[cell] = run(cell)
    except FdrkitError as e:
        raise click.ClickException(str(e))

    per_seed_path = os.path.join(out_dir, "per_seed.csv")
    with open(per_seed_path, "w", encoding="utf-8") as fh:
        fh.write("method,seed,n,discoveries,fdp,power,seconds\n")
        for (m, s) in sorted(results):
            r = results[(m, s)]
            fh.write(f"{m},{s},{r['n']},{r['discoveries']},"
                     f"{r['fdp']!r},{r['power']!r},{r['seconds']:.3f}\n")

    bins = np.linspace(-10.0, 10.0, 81)
    aggregate = {}
    for m in method_list:
        rows = [results[(m, s)] for s in sorted(seed_list)]
        aggregate[m] = {
            "mean_discoveries": float(np.mean([r["discoveries"] for r in rows])),
            "sd_discoveries": float(np.std([r["discoveries"] for r in rows], ddof=1))
            if len(rows) > 1 else 0.0,
            "mean_fdp": float(np.mean([r["fdp"] for r in rows])),
            "sd_fdp": float(np.std([r["fdp"] for r in rows], ddof=1))
            if len(rows) > 1 else 0.0,
            "mean_power": float(np.mean([r["power"] for r in rows])),
            "sd_power": float(np.std([r["power"] for r in rows], ddof=1))
            if len(rows) > 1 else 0.0,
            "mean_seconds": float(np.mean([r["seconds"] for r in rows])),
        }
        _write_histogram(os.path.join(out_dir, f"hist_{m}.csv"), rows, bins)

    payload = {
        "command": "benchmark",
        "scenario": scenario.upper(),
        "alpha": alpha,
        "seeds": sorted(seed_list),
        "methods": aggregate,
        "config_hash": _hash_config({
            "scenario": scenario.upper(), "alpha": alpha,
            "seeds": sorted(seed_list), "methods": sorted(method_list),
            "n": n_override, "hidden": list(hidden), **train_kwargs,
        }),
        "out_dir": str(out_dir),
    }
    with open(os.path.join(out_dir, "aggregate.json"), "w",
              encoding="utf-8") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    _emit(payload)


@main.command()
@click.option("--in", "in_path", required=True,
              type=click.Path(exists=True),
              help="aggregate.json or a benchmark output directory.")
@click.option("--out", default=None, type=click.Path(writable=True),
              help="Also write the rendered table to this path.")
def report(in_path, out):
    """Render a benchmark aggregate as an aligned text table."""
    path = in_path
    if os.path.isdir(path):
        path = os.path.join(path, "aggregate.json")
        if not os.path.exists(path):
            raise click.UsageError(f"no aggregate.json under {in_path}")
    with open(path, "r", encoding="utf-8") as fh:
        agg = json.load(fh)
    methods = agg.get("methods", {})
    if not methods:
        raise click.ClickException("aggregate contains no methods")
    lines = [
        f"scenario {agg.get('scenario')} | alpha {agg.get('alpha')} | "
        f"seeds {len(agg.get('seeds', []))}",
        f"{'method':<10}{'discoveries':>14}{'fdp':>12}{'power':>12}",
    ]
    for name in sorted(methods):
        s = methods[name]
        lines.append(
            f"{name:<10}"
            f"{s['mean_discoveries']:>9.1f} ±{s['sd_discoveries']:<4.1f}"
            f"{s['mean_fdp']:>8.3f}"
            f"{s['mean_power']:>12.3f}"
        )
    text = "\n".join(lines)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    click.echo(text)


if __name__ == "__main__":
    main()
