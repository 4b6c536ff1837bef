"""Command-line surface: verification, feature export, training, synthesis.

Commands
--------
check      frame-bound, telescoping, and permutation suites on one graph
features   export scattering features of a dataset directory to CSV
train      cross-validated training; writes a machine-readable run report
gradcheck  finite-difference validation of the reverse-mode gradients
synth      write the synthetic scale-separation dataset in ingestion format

All configuration is by flags; every command takes ``--seed`` and identical
invocations produce identical outputs except wall-clock fields.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import asdict
from .checks import (
    frame_check,
    gradcheck_pipeline,
    gradcheck_primitives,
    permutation_check,
    telescoping_check,
)
from .data import (
    default_channels,
    export_features,
    load_edgelist,
    parse_tudataset,
    random_graph,
    synth_scales_dataset,
    write_tudataset,
)
from .filterbank import ScaleSequence
from .learnable import FIXED_SHARPNESS, LEARN_SHARPNESS, SelectionParams, selection_logits
from .report import RunReport, write_report
from .scattering import ScatterConfig
from .train import TrainConfig, crossval

GRAD_GATE = 1e-4


def _parse_int_list(text: str):
    return tuple(int(part) for part in text.split(",") if part.strip())


def _load_graph(spec: str, seed: int):
    if spec.startswith("random:"):
        opts = dict(part.split("=") for part in spec[len("random:"):].split(",") if part)
        n = int(opts.get("n", 30))
        return random_graph(n, seed=seed, edge_prob=float(opts.get("p", 0.3)))
    return load_edgelist(spec)


def cmd_check(args) -> int:
    g = _load_graph(args.graph, args.seed)
    scales = ScaleSequence(_parse_int_list(args.scales))
    results = [
        frame_check(g, scales, trials=args.trials, seed=args.seed),
        telescoping_check(g, scales, trials=args.trials, seed=args.seed + 1),
        permutation_check(g, trials=min(args.trials, 30), seed=args.seed + 2),
    ]
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def _ladder(n_bands: int, m_steps: int):
    ladder = tuple(2**j for j in range(n_bands))
    if ladder[-1] > m_steps:
        raise SystemExit(f"dyadic ladder {ladder} needs m >= {ladder[-1]}, got {m_steps}")
    return ladder


def cmd_features(args) -> int:
    bundle = parse_tudataset(args.data)
    sharp = FIXED_SHARPNESS if args.fixed else LEARN_SHARPNESS
    selection = SelectionParams(selection_logits(_ladder(args.J, args.m), args.m, sharp))
    cfg = ScatterConfig(J=args.J, max_order=args.max_order, q_list=_parse_int_list(args.q))
    channels = default_channels(bundle, use_node_labels=args.use_node_labels)
    out = export_features(bundle, selection, cfg, args.out, channels=channels)
    print(f"wrote {len(bundle)} rows to {out}")
    return 0


def cmd_train(args) -> int:
    bundle = parse_tudataset(args.data)
    cfg = TrainConfig(
        lr=args.lr,
        epochs=args.epochs,
        seed=args.seed,
        head=args.head,
        folds=args.folds,
        mode=args.mode,
    )
    channels = default_channels(bundle, use_node_labels=args.use_node_labels)
    start = time.perf_counter()
    result = crossval(bundle, cfg, channels=channels)
    elapsed = time.perf_counter() - start
    config_echo = {
        "dataset": bundle.name,
        "data_dir": str(args.data),
        "head": args.head,
        "mode": args.mode,
        "folds": args.folds,
        "lr": args.lr,
        "epochs": args.epochs,
        "use_node_labels": args.use_node_labels,
        "scatter": asdict(cfg.scatter),
        "m_steps": cfg.m_steps,
    }
    report = RunReport(
        config=config_echo,
        metric=result.metric,
        per_fold=result.per_fold,
        mean=result.mean,
        std=result.std,
        seed=args.seed,
        wallclock_s=elapsed,
    )
    write_report(report, args.report)
    for entry in result.per_fold:
        print(f"fold {entry['fold']}: {result.metric} = {entry['metric']:.4f} "
              f"(n = {entry['size']})")
    print(f"{result.metric}: {result.mean:.4f} +/- {result.std:.4f}  "
          f"[{elapsed:.1f}s, report -> {args.report}]")
    return 0


def cmd_gradcheck(args) -> int:
    prim = gradcheck_primitives(seed=args.seed)
    pipe = gradcheck_pipeline(seed=args.seed)
    print(prim.line())
    print(pipe.line())
    worst = max(prim.worst, pipe.worst)
    print(f"max relative error: {worst:.3e}")
    return 0 if worst < GRAD_GATE else 1


def cmd_synth(args) -> int:
    if args.n % 2 != 0:
        raise SystemExit(f"--n must be even, got {args.n}")
    bundle = synth_scales_dataset(args.n, seed=args.seed)
    out = write_tudataset(bundle, args.out)
    print(f"wrote {len(bundle)} graphs to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="legs", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run frame, telescoping, and permutation suites")
    p.add_argument("--graph", default="random:n=30",
                   help="edge-list file or random:n=30[,p=0.3] (default random:n=30)")
    p.add_argument("--scales", default="1,2,4,8,16", help="comma-separated diffusion scales")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("features", help="export scattering features to CSV")
    p.add_argument("--data", required=True, help="dataset directory (multi-file text format)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--J", type=int, default=5, help="number of wavelet bands")
    p.add_argument("--m", type=int, default=16, help="max diffusion step")
    p.add_argument("--max-order", type=int, default=2, dest="max_order")
    p.add_argument("--q", default="1,2,3,4", help="comma-separated moment orders")
    p.add_argument("--fixed", action="store_true",
                   help="hard one-hot dyadic selection (default: soft learnable init)")
    p.add_argument("--use-node-labels", action="store_true", dest="use_node_labels")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="cross-validated training with a run report")
    p.add_argument("--data", required=True, help="dataset directory (multi-file text format)")
    p.add_argument("--head", choices=("fcn", "rbf"), required=True)
    p.add_argument("--mode", choices=("fixed", "learn"), required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--use-node-labels", action="store_true", dest="use_node_labels")
    p.add_argument("--report", required=True, help="run-report output path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gradcheck", help="finite-difference gradient validation")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="write the synthetic scale-separation dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--n", type=int, default=100, help="number of graphs (even)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
