"""Command-line front end.

Subcommands cover the full pipeline: ``build`` a model file, ``fit`` it
with either sampler, ``eval`` held-out data against a finished run, ``tune``
subsampling ratios, ``bench`` the two samplers against each other, ``ess``
a stored chain, and ``split``/``filter`` for dataset preparation.

Exit codes: 0 success, 1 usage error, 2 data or file error, 3 numeric
failure.  All diagnostics go to standard error; results go to standard
output as JSON (or aligned text for ``bench`` and ``tune`` logs).  The
``fit`` command reads defaults from a JSON config file named by
``--config`` or the ``SPNGIBBS_CONFIG`` environment variable; explicit
flags always win.
"""

from __future__ import annotations

import argparse
import functools
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bottomup as bottomupmod
from . import topdown as topdownmod
from . import chain as chainmod
from . import dataio, diagnostics, inference, leaves, synth, tuning
from .errors import (
    DataFormatError,
    GraphFormatError,
    NumericError,
    SupportError,
)
from .graph import build_balanced, deserialize, serialize
from .state import init_random

CONFIG_ENV = "SPNGIBBS_CONFIG"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    """argparse with the documented usage exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _print(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _ints(text: str) -> list[int]:
    return [int(p) for p in text.split(",") if p]


def _floats(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p]


# -- shared loading helpers ------------------------------------------------------


def _load_dataset(path, schema_path):
    schema = dataio.load_schema(schema_path) if schema_path else None
    return dataio.load_delimited(path, schema)


def _load_model(path):
    return deserialize(Path(path).read_bytes())


def _check_support(graph, X, names) -> None:
    """Fail fast when a column violates its leaf families' support."""
    for d in range(graph.dims):
        col = X[:, d]
        name = names[d] if d < len(names) else f"column {d}"
        tags = {
            graph.leaf_families[s]
            for s in range(graph.num_leaves)
            if graph.leaf_dims[s] == d
        }
        for tag in tags:
            if tag in ("poisson",) and (
                np.any(col < 0) or np.any(col != np.floor(col))
            ):
                raise SupportError(
                    f"{name}: count leaves need non-negative integers"
                )
            if tag == "exponential" and np.any(col < 0):
                raise SupportError(f"{name}: positive leaves need values >= 0")
            if tag.startswith("categorical:"):
                k = int(tag.split(":", 1)[1])
                if np.any(col < 0) or np.any(col >= k) or np.any(col != np.floor(col)):
                    raise SupportError(
                        f"{name}: categorical leaves need codes in 0..{k - 1}"
                    )


def _save_hypers(path, graph, hypers) -> None:
    rows = []
    for tag, hyper in zip(graph.leaf_families, hypers):
        fam = leaves.get_family(tag)
        rows.append({"family": tag, "values": fam.hyper_to_jsonable(hyper)})
    payload = {"format": "spngibbs-hypers", "version": 1, "hypers": rows}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_hypers(path, graph):
    obj = json.loads(Path(path).read_text())
    if obj.get("format") != "spngibbs-hypers" or obj.get("version") != 1:
        raise DataFormatError(f"{path}: not a hyperparameter file")
    rows = obj["hypers"]
    if len(rows) != graph.num_leaves:
        raise DataFormatError(
            f"{path}: {len(rows)} entries for {graph.num_leaves} leaves"
        )
    out = []
    for slot, row in enumerate(rows):
        tag = row["family"]
        if tag != graph.leaf_families[slot]:
            raise DataFormatError(
                f"{path}: slot {slot} family {tag!r} does not match model "
                f"{graph.leaf_families[slot]!r}"
            )
        out.append(leaves.get_family(tag).hyper_from_jsonable(row["values"]))
    return out


def _eval_rng(seed: int):
    """Evaluation stream independent of the chain streams spawned in a run."""
    return np.random.default_rng(np.random.SeedSequence(seed).spawn(4)[3])


# -- build -----------------------------------------------------------------------


def _cmd_build(args) -> int:
    if args.data:
        ds = _load_dataset(args.data, args.schema)
        dims, spec = ds.num_dims, ds.leaf_spec()
        if args.dims is not None and args.dims != dims:
            raise ValueError(f"--dims {args.dims} but data has {dims} columns")
    elif args.schema:
        kinds = json.loads(Path(args.schema).read_text())
        if not isinstance(kinds, list) or not all(isinstance(k, str) for k in kinds):
            raise DataFormatError(
                "without --data, the schema must be a JSON list of column kinds"
            )
        dims = len(kinds)
        if args.dims is not None and args.dims != dims:
            raise ValueError(f"--dims {args.dims} but schema lists {dims} kinds")
        spec = [leaves.families_for_column(k) for k in kinds]
    else:
        if args.dims is None:
            raise ValueError("--dims is required without --data or --schema")
        dims, spec = args.dims, None
    g = build_balanced(dims, args.cs, args.cp, leaf_spec=spec)
    Path(args.out).write_bytes(serialize(g))
    report = g.size_report()
    _print(
        {
            "dims": dims,
            "sum_outdegree": args.cs,
            "product_outdegree": args.cp,
            "num_sums": report.num_sums,
            "num_products": report.num_products,
            "num_leaves": report.num_leaves,
            "num_nodes": report.num_nodes,
            "height": report.height,
            "breadth": report.breadth,
            "induced_trees": report.induced_trees,
            "model": str(args.out),
        }
    )
    return EXIT_OK


# -- fit -------------------------------------------------------------------------

_FIT_DEFAULTS = {
    "sampler": "topdown",
    "iters": 100,
    "burnin": 10,
    "thin": 1,
    "alpha": 1.0,
    "seed": 0,
    "ratios": "1.0",
    "eb": True,
    "skip_same_leaf": True,
    "heldout_every": 0,
    "max_seconds": 0.0,
}


def _fit_setting(args, config: dict, key: str):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return _FIT_DEFAULTS[key]


def _cmd_fit(args) -> int:
    config_path = args.config or os.environ.get(CONFIG_ENV)
    file_config: dict = {}
    if config_path:
        file_config = json.loads(Path(config_path).read_text())
        unknown = set(file_config) - set(_FIT_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config file keys: {sorted(unknown)}")
    get = functools.partial(_fit_setting, args, file_config)

    ds = _load_dataset(args.data, args.schema)
    g = _load_model(args.model)
    if g.dims != ds.num_dims:
        raise DataFormatError(
            f"model covers {g.dims} dimensions but data has {ds.num_dims}"
        )
    _check_support(g, ds.X, ds.names)

    seed = int(get("seed"))
    ratios = _floats(str(get("ratios")))
    ratios_arr = ratios[0] if len(ratios) == 1 else np.asarray(ratios)
    if get("eb"):
        fit_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(5)[4])
        hypers = tuning.assign_leaf_hyperparams(g, ds.X, ratios_arr, rng=fit_rng)
    else:
        hypers = leaves.default_hypers(g)

    heldout = None
    if args.heldout:
        heldout = _load_dataset(args.heldout, args.schema).X

    run_config = chainmod.RunConfig(
        sampler=str(get("sampler")),
        iterations=int(get("iters")),
        burn_in=int(get("burnin")),
        thin=int(get("thin")),
        seed=seed,
        concentration=float(get("alpha")),
        skip_same_leaf=bool(get("skip_same_leaf")),
        heldout_every=int(get("heldout_every")),
        max_seconds=float(get("max_seconds")),
    )
    result = chainmod.run(g, ds.X, hypers, run_config, heldout=heldout)

    run_dir = Path(args.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    chainmod.save_config(run_dir / "config.json", run_config)
    (run_dir / "model.json").write_bytes(serialize(g))
    _save_hypers(run_dir / "hypers.json", g, hypers)
    np.savez_compressed(run_dir / "train.npz", X=ds.X)
    chainmod.save_samples(run_dir / "samples.npz", result)
    chainmod.save_trace(run_dir / "trace.csv", result.trace)
    (run_dir / "fit.json").write_text(
        json.dumps(
            {
                "data": str(args.data),
                "model": str(args.model),
                "dropped_rows": ds.dropped_rows,
                "empirical_bayes": bool(get("eb")),
                "ratios": ratios,
                "sweeps_done": len(result.trace),
                "stored_samples": len(result.samples),
                "seconds": result.seconds,
                "mean_acceptance": result.acceptance_rate,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    _print(
        {
            "run": str(run_dir),
            "sweeps_done": len(result.trace),
            "stored_samples": len(result.samples),
            "seconds": round(result.seconds, 3),
            "mean_acceptance": round(result.acceptance_rate, 4),
            "final_joint_log_lik": result.trace[-1].joint_log_lik,
        }
    )
    return EXIT_OK


# -- eval ------------------------------------------------------------------------


def _load_run(run_dir):
    run_dir = Path(run_dir)
    config = chainmod.load_config(run_dir / "config.json")
    g = _load_model(run_dir / "model.json")
    hypers = _load_hypers(run_dir / "hypers.json", g)
    with np.load(run_dir / "train.npz") as z:
        train = z["X"]
    samples, sample_iters = chainmod.load_samples(run_dir / "samples.npz")
    return config, g, hypers, train, samples, sample_iters


def _cmd_eval(args) -> int:
    config, g, hypers, train, samples, _ = _load_run(args.run)
    ds = _load_dataset(args.data, args.schema)
    if ds.num_dims != g.dims:
        raise DataFormatError(
            f"model covers {g.dims} dimensions but data has {ds.num_dims}"
        )
    seed = config.seed if args.seed is None else args.seed
    report = inference.test_log_likelihood(
        samples, g, hypers, config.concentration, train, ds.X, _eval_rng(seed)
    )
    payload = {
        "run": str(args.run),
        "data": str(args.data),
        "num_samples": len(samples),
        "num_test_rows": int(ds.num_rows),
        "posterior_avg_log_lik": report.posterior_avg,
        "per_sample_mean_log_lik": [float(v) for v in report.per_sample],
    }
    (Path(args.run) / "report.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )
    _print(payload)
    return EXIT_OK


# -- tune ------------------------------------------------------------------------


def _cmd_tune(args) -> int:
    train = _load_dataset(args.data, args.schema)
    valid = _load_dataset(args.val, args.schema)
    if valid.num_dims != train.num_dims:
        raise DataFormatError("training and validation column counts differ")
    if args.model:
        g = _load_model(args.model)
    else:
        g = build_balanced(
            train.num_dims, args.cs, args.cp, leaf_spec=train.leaf_spec()
        )
    _check_support(g, train.X, train.names)
    _check_support(g, valid.X, valid.names)
    sampler_config = tuning.default_search_config()
    if args.iters or args.burnin or args.thin or args.alpha:
        base = sampler_config
        sampler_config = chainmod.RunConfig(
            sampler=base.sampler,
            iterations=args.iters or base.iterations,
            burn_in=args.burnin if args.burnin is not None else base.burn_in,
            thin=args.thin or base.thin,
            concentration=args.alpha or base.concentration,
        )
    result = tuning.search_ratios(
        g,
        train.X,
        valid.X,
        budget=args.trials,
        sampler_config=sampler_config,
        seed=args.seed,
    )
    for i, trial in enumerate(result.trials):
        marker = "*" if i == result.best_trial else " "
        ratios = ",".join(f"{r:.4g}" for r in trial.ratios)
        sys.stdout.write(
            f"trial {i:3d}{marker} score={trial.validation_log_lik:+.6f} "
            f"seconds={trial.seconds:.2f} seed={trial.seed} r=[{ratios}]\n"
        )
    sys.stdout.write(
        f"best trial {result.best_trial} "
        f"score={result.best_score:+.6f}\n"
    )
    if args.out:
        Path(args.out).write_text(
            json.dumps(
                {
                    "best_trial": result.best_trial,
                    "best_score": result.best_score,
                    "best_ratios": [float(r) for r in result.best_ratios],
                    "trials": [
                        {
                            "ratios": list(t.ratios),
                            "validation_log_lik": t.validation_log_lik,
                            "seed": t.seed,
                            "seconds": t.seconds,
                        }
                        for t in result.trials
                    ],
                },
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )
    return EXIT_OK


# -- bench -----------------------------------------------------------------------


def _bench_rows(X, kinds, cs_list, cp, samplers, iters, warmup, alpha, seed):
    rows = []
    spec = [leaves.families_for_column(k) for k in kinds]
    for cs in cs_list:
        g = build_balanced(X.shape[1], cs, cp, leaf_spec=spec)
        fit_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[0])
        hypers = tuning.assign_leaf_hyperparams(g, X, 1.0, rng=fit_rng)
        per_sampler = {}
        for sampler in samplers:
            rng = np.random.default_rng(
                np.random.SeedSequence((seed, cs, samplers.index(sampler)))
            )
            state = init_random(g, X, hypers, rng)
            if sampler == "topdown":
                sweep = functools.partial(
                    topdownmod.gibbs_sweep, concentration=alpha, rng=rng
                )
            else:
                sweep = functools.partial(
                    bottomupmod.gibbs_sweep_bottom_up, concentration=alpha, rng=rng
                )
            for _ in range(warmup):
                sweep(state)
            report = diagnostics.timing_harness(sweep, state, iters)
            per_sampler[sampler] = report
            rows.append(
                {
                    "cs": cs,
                    "sampler": sampler,
                    "num_nodes": g.num_nodes,
                    "mean_seconds": report.mean_seconds,
                    "std_seconds": report.std_seconds,
                    "mean_touches": report.mean_touches,
                    "speedup": None,
                }
            )
        if "topdown" in per_sampler and "bottomup" in per_sampler:
            ratio = diagnostics.speedup(
                per_sampler["bottomup"], per_sampler["topdown"]
            )
            for row in rows:
                if row["cs"] == cs and row["sampler"] == "topdown":
                    row["speedup"] = ratio
    return rows


def _cmd_bench(args) -> int:
    if bool(args.data) == bool(args.synthetic):
        raise ValueError("give exactly one of --data or --synthetic N,D")
    if args.data:
        ds = _load_dataset(args.data, args.schema)
        X, kinds = ds.X, ds.kinds
    else:
        n, dims = _ints(args.synthetic)
        X, kinds = synth.mixed_mixture(
            n, dims, np.random.default_rng(args.seed)
        )
    samplers = (
        ["topdown", "bottomup"] if args.samplers == "both" else [args.samplers]
    )
    rows = _bench_rows(
        X,
        kinds,
        _ints(args.cs_list),
        args.cp,
        samplers,
        args.iters,
        args.warmup,
        args.alpha,
        args.seed,
    )
    sys.stdout.write(
        f"{'cs':>4} {'sampler':>9} {'nodes':>7} {'sec/sweep':>12} "
        f"{'+/-':>10} {'touches':>12} {'speedup':>8}\n"
    )
    for row in rows:
        speed = f"{row['speedup']:.1f}x" if row["speedup"] else ""
        sys.stdout.write(
            f"{row['cs']:>4} {row['sampler']:>9} {row['num_nodes']:>7} "
            f"{row['mean_seconds']:>12.5f} {row['std_seconds']:>10.5f} "
            f"{row['mean_touches']:>12.0f} {speed:>8}\n"
        )
    if args.out:
        Path(args.out).write_text(
            json.dumps(rows, indent=2, sort_keys=True) + "\n"
        )
    return EXIT_OK


# -- ess -------------------------------------------------------------------------


def _cmd_ess(args) -> int:
    config, g, hypers, train, samples, _ = _load_run(args.run)
    kind = {"heldout": "heldout", "train": "train_joint"}[args.statistic]
    heldout = None
    if kind == "heldout":
        if not args.data:
            raise ValueError("--statistic heldout requires --data")
        heldout = _load_dataset(args.data, args.schema).X
    seed = config.seed if args.seed is None else args.seed
    trace = diagnostics.trace_statistic(
        samples,
        g,
        hypers,
        config.concentration,
        train,
        kind,
        heldout=heldout,
        rng=_eval_rng(seed),
    )
    report = diagnostics.effective_sample_size(trace)
    _print(
        {
            "run": str(args.run),
            "statistic": args.statistic,
            "num_samples": report.n,
            "ess": report.ess,
            "integrated_autocorr": report.integrated_autocorr,
            "degenerate": report.degenerate,
            "negative_correlation": report.negative_correlation,
        }
    )
    return EXIT_OK


# -- split / filter --------------------------------------------------------------


def _cmd_split(args) -> int:
    ds = _load_dataset(args.data, args.schema)
    ratios = tuple(_floats(args.ratios)) if args.ratios else (8, 1, 1)
    parts = dataio.split(ds, ratios=ratios, seed=args.seed)
    prefix = args.out_prefix or str(Path(args.data).with_suffix(""))
    sizes = {}
    for part in parts:
        path = f"{prefix}.{part.split_tag}.csv"
        dataio.save_delimited(path, part)
        sizes[part.split_tag] = {"rows": part.num_rows, "path": path}
    _print({"source": str(args.data), "dropped_rows": ds.dropped_rows, **sizes})
    return EXIT_OK


def _cmd_filter(args) -> int:
    ds = _load_dataset(args.data, args.schema)
    filtered, report = dataio.knn_outlier_filter(ds, k=args.k, quantile=args.q)
    out = args.out or str(Path(args.data).with_suffix("")) + ".filtered.csv"
    dataio.save_delimited(out, filtered)
    _print(
        {
            "source": str(args.data),
            "kept": filtered.num_rows,
            "removed": report.removed,
            "threshold": report.threshold,
            "out": out,
        }
    )
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="spngibbs",
        description="Sum-product network Gibbs sampling toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build an untrained model file")
    p.add_argument("--dims", type=int, default=None)
    p.add_argument("--cs", type=int, required=True, help="sum-node out-degree")
    p.add_argument("--cp", type=int, default=2, help="product-node out-degree")
    p.add_argument("--schema", default=None)
    p.add_argument("--data", default=None, help="infer dims and kinds from a file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("fit", help="run a sampler, store samples and traces")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--sampler", choices=chainmod.SAMPLERS, default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--burnin", type=int, default=None)
    p.add_argument("--thin", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ratios", default=None, help="per-dimension list or one value")
    p.add_argument(
        "--no-eb", dest="eb", action="store_false", default=None,
        help="skip moment fits; use default hyperparameters",
    )
    p.add_argument(
        "--no-skip-same-leaf", dest="skip_same_leaf",
        action="store_false", default=None,
    )
    p.add_argument("--heldout", default=None)
    p.add_argument("--heldout-every", type=int, default=None)
    p.add_argument("--max-seconds", type=float, default=None)
    p.add_argument("--schema", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="run directory")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("eval", help="score held-out data against a run")
    p.add_argument("--run", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("tune", help="random-search subsampling ratios")
    p.add_argument("--data", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", default=None)
    p.add_argument("--cs", type=int, default=2)
    p.add_argument("--cp", type=int, default=2)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--burnin", type=int, default=None)
    p.add_argument("--thin", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--schema", default=None)
    p.add_argument("--out", default=None, help="write the trial log as JSON")
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("bench", help="time both samplers across widths")
    p.add_argument("--data", default=None)
    p.add_argument("--synthetic", default=None, metavar="N,D")
    p.add_argument("--cs-list", default="2,4")
    p.add_argument("--cp", type=int, default=2)
    p.add_argument(
        "--samplers", choices=["both", "topdown", "bottomup"], default="both"
    )
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--warmup", type=int, default=2)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--schema", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("ess", help="effective sample size of a stored chain")
    p.add_argument("--run", required=True)
    p.add_argument(
        "--statistic", choices=["heldout", "train"], default="heldout"
    )
    p.add_argument("--data", default=None, help="held-out file for --statistic heldout")
    p.add_argument("--schema", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_ess)

    p = sub.add_parser("split", help="seeded train/validation/test split")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratios", default=None, help="three comma-separated weights")
    p.add_argument("--out-prefix", default=None)
    p.add_argument("--schema", default=None)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("filter", help="nearest-neighbor outlier removal")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--q", type=float, default=0.99)
    p.add_argument("--out", default=None)
    p.add_argument("--schema", default=None)
    p.set_defaults(func=_cmd_filter)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataFormatError, SupportError, GraphFormatError) as exc:
        sys.stderr.write(f"spngibbs: data error: {exc}\n")
        return EXIT_DATA
    except OSError as exc:
        sys.stderr.write(f"spngibbs: {exc}\n")
        return EXIT_DATA
    except json.JSONDecodeError as exc:
        sys.stderr.write(f"spngibbs: data error: {exc}\n")
        return EXIT_DATA
    except (NumericError, ArithmeticError) as exc:
        sys.stderr.write(f"spngibbs: numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except ValueError as exc:
        sys.stderr.write(f"spngibbs: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
