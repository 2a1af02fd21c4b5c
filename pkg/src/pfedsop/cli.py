"""Command-line entry point: ``pfedsop run | sweep | verify``."""

from __future__ import annotations

import argparse
import math
import os
import sys

from . import data as data_mod
from . import metrics, verify
from .config import ExperimentConfig, parse_config, serialize_config
from .errors import ConfigError, DivergenceError, PFedSOPError
from .fedcore import ClientState, ServerState, run_experiment
from .models import ModelSpec
from .numkit import rng_stream

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3, 4

OUTPUT_FILES = ("metrics.csv", "summary.csv", "best.csv", "config.resolved.txt")


def load_dataset(cfg: ExperimentConfig) -> data_mod.LabeledDataset:
    if cfg.dataset == "csv":
        return data_mod.load_csv(cfg.dataset_path)
    return data_mod.synthesize_classification(
        cfg.dataset_num_classes, cfg.dataset_input_dim, cfg.dataset_samples_per_class,
        cfg.dataset_class_separation, rng_stream(cfg.seed, "data"),
    )


def partition_dataset(cfg: ExperimentConfig, ds) -> data_mod.PartitionPlan:
    rng = rng_stream(cfg.seed, "partition")
    if cfg.partition == "dirichlet":
        return data_mod.dirichlet_partition(ds, cfg.clients, cfg.partition_alpha, rng)
    b = cfg.partition_shards_per_client
    z = cfg.partition_shard_size or len(ds) // (cfg.clients * b)
    if z < 1:
        raise ConfigError("partition.shard_size", f"{len(ds)} samples are too few for {cfg.clients} x {b} shards")
    return data_mod.pathological_partition(ds, cfg.clients, z, b, rng)


def build_experiment(cfg: ExperimentConfig):
    """Dataset, partition, model and fresh federated state for ``cfg``."""
    ds = load_dataset(cfg)
    split = data_mod.split_train_test(partition_dataset(cfg, ds), 0.8, rng_stream(cfg.seed, "split"))
    hidden = cfg.model_hidden_dim if cfg.model == "mlp" else 0
    spec = ModelSpec(cfg.model, ds.input_dim, ds.class_count, hidden)
    clients = [
        ClientState(i, *ds.subset(tr), *ds.subset(te))
        for i, (tr, te) in enumerate(zip(split.train, split.test))
    ]
    server = ServerState(spec.init_params(rng_stream(cfg.seed, "init")))
    return spec, clients, server


def run_config(cfg: ExperimentConfig, threads: int = 1):
    spec, clients, server = build_experiment(cfg)
    return run_experiment(spec, clients, server, cfg.hyperparams(), threads=threads)


def render_outputs(cfg: ExperimentConfig, result) -> dict:
    return {
        "metrics.csv": metrics.metrics_csv(result.history),
        "summary.csv": metrics.summary_csv(result.history),
        "best.csv": metrics.best_csv(result.best),
        "config.resolved.txt": serialize_config(cfg),
    }


def execute(cfg: ExperimentConfig, threads: int = 1, out=sys.stdout):
    """Run ``cfg`` and write its output files; returns the ExperimentResult."""
    result = run_config(cfg, threads)
    metrics.write_files_atomically(cfg.output_dir, render_outputs(cfg, result))
    last = result.history[-1]
    print(
        f"{cfg.method}: {len(result.history)} rounds, final avg train loss {last.avg_train_loss:.4f}, "
        f"final avg test acc {last.avg_test_accuracy:.4f}, best-acc mean {result.best.overall:.4f} "
        f"-> {cfg.output_dir}",
        file=out,
    )
    return result


SWEEPABLE = {"rho": "rho", "lambda": "lam", "eta1": "eta1", "eta2": "eta2", "mu": "mu"}


def sweep(cfg: ExperimentConfig, param: str, values, threads: int = 1, out=sys.stdout):
    """One run per value of ``param``, each under ``output_dir/<param>=<value>``.

    Also writes ``sweep.csv`` with one comparable summary row per run.
    """
    if param not in SWEEPABLE:
        raise ConfigError(param, f"not sweepable; choose from {', '.join(SWEEPABLE)}")
    rows = []
    for v in values:
        sub = cfg.replace(**{SWEEPABLE[param]: float(v),
                             "output_dir": os.path.join(cfg.output_dir, f"{param}={float(v)!r}")})
        res = execute(sub, threads, out)
        last = res.history[-1]
        rows.append((repr(float(v)), metrics.fmt(res.best.overall),
                     metrics.fmt(last.avg_train_loss), metrics.fmt(last.avg_test_accuracy)))
    text = metrics.render_csv((param, "best_accuracy_mean", "final_avg_train_loss", "final_avg_test_accuracy"), rows)
    metrics.write_files_atomically(cfg.output_dir, {"sweep.csv": text})
    return rows


def _threads(text):
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("--threads must be >= 0")
    return n


def build_parser():
    parser = argparse.ArgumentParser(prog="pfedsop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--threads", type=_threads, default=1,
                       help="clients run concurrently per round (0 = auto); results are unaffected")

    p_sweep = sub.add_parser("sweep", help="rerun a config over values of one hyperparameter")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True, choices=sorted(SWEEPABLE))
    p_sweep.add_argument("--values", required=True, help="comma-separated, e.g. 1,0.1,0.01")
    p_sweep.add_argument("--threads", type=_threads, default=1)

    sub.add_parser("verify", help="run the numerical oracle suites")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        results = verify.run_all()
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<18} {r.detail}")
        return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY

    try:
        cfg = parse_config(args.config)
        if args.command == "run":
            execute(cfg, args.threads)
        else:
            values = [float(v) for v in args.values.split(",") if v.strip()]
            if not values or not all(math.isfinite(v) for v in values):
                raise ConfigError("--values", "need one or more finite numbers")
            sweep(cfg, args.param, values, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PFedSOPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
