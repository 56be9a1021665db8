"""Command-line entry point: ``gcgq {train,sweep-k,ablate,eval,gen-synthetic}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import experiments
from .clustering import LAPLACIAN_MODES, NumericalError
from .config import INTERNAL_REPRESENTATIONS, ExperimentConfig, load_config
from .graph import DataError, generate_planted_partition, load_graph, save_graph
from .model import VARIANTS, CheckpointError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _k_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None


def _experiment_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file or preset name (cornell, cora, synthetic, ...)")
    p.add_argument("--data", help="dataset directory (overrides the config path)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--runs", type=int)
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--degree-mode", choices=("selfloop", "raw"),
                   help="degree matrix used to normalize the adjacency")
    p.add_argument("--laplacian-mode", choices=LAPLACIAN_MODES)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gcgq", description="Quaternion graph-autoencoder clustering")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="seeded multi-run training")
    _experiment_options(p)

    p = sub.add_parser("sweep-k", help="train once, cluster at several k")
    _experiment_options(p)
    p.add_argument("--k-list", type=_k_list)
    p.add_argument("--internal-on", choices=INTERNAL_REPRESENTATIONS)

    p = sub.add_parser("ablate", help="compare baseline, no_fvp, no_qge and full")
    _experiment_options(p)

    p = sub.add_parser("eval", help="cluster a dataset with a saved checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--internal-on", choices=INTERNAL_REPRESENTATIONS, default="spectral")
    p.add_argument("--out")

    p = sub.add_parser("gen-synthetic", help="write a planted-partition dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--nodes-per-cluster", type=int, default=50)
    p.add_argument("--p-in", type=float, default=0.3)
    p.add_argument("--p-out", type=float, default=0.01)
    p.add_argument("--attr-dim", type=int, default=16)
    p.add_argument("--attr-shift", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--binary", action="store_true", help="write features.bin instead of CSV")
    return parser


def config_from_args(args) -> ExperimentConfig:
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    top = {}
    train = {}
    for name in ("seed", "runs", "out"):
        if getattr(args, name, None) is not None:
            top[name] = getattr(args, name)
    if args.data is not None:
        top["dataset"] = args.data
    if getattr(args, "k_list", None):
        top["k_list"] = args.k_list
    if getattr(args, "internal_on", None):
        top["internal_on"] = args.internal_on
    for name in ("degree_mode", "laplacian_mode", "epochs"):
        if getattr(args, name, None) is not None:
            train[name] = getattr(args, name)
    if train:
        top["train"] = dataclasses.replace(cfg.train, **train)
    if args.variant is not None:
        top["arch"] = dataclasses.replace(cfg.arch, variant=args.variant)
    return dataclasses.replace(cfg, **top)


def _run(args) -> None:
    if args.command == "gen-synthetic":
        g = generate_planted_partition(args.k, args.nodes_per_cluster, args.p_in, args.p_out,
                                       attr_dim=args.attr_dim, attr_shift=args.attr_shift,
                                       rng_seed=args.seed)
        save_graph(g, args.out, binary=args.binary)
        print(f"wrote {g.n} nodes, {g.n_edges} edges to {args.out}")
        return
    if args.command == "eval":
        g = load_graph(experiments.resolve_dataset(args.data))
        doc = experiments.evaluate_checkpoint(args.checkpoint, g, args.k, args.internal_on,
                                              args.out)
        print(json.dumps(doc, sort_keys=True))
        return
    cfg = config_from_args(args)
    if args.command == "train":
        summary = experiments.run_training(cfg)
        for key in experiments.EXTERNAL:
            if key in summary:
                print(f"{key}: {summary[key]['mean']:.4f} +/- {summary[key]['std']:.4f}")
    elif args.command == "sweep-k":
        for row in experiments.sweep_k(cfg):
            print(f"k={row['k']} sc={row['sc']} dbi={row['dbi']} chi={row['chi']}")
    elif args.command == "ablate":
        for variant, stats in experiments.ablate(cfg).items():
            parts = [f"{m}={s['mean']:.4f}" for m, s in stats.items() if s]
            print(f"{variant}: {' '.join(parts)}")
    print(f"artifacts in {cfg.out}")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        _run(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, CheckpointError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
