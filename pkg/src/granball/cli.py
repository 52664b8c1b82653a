"""Command-line surface: coarsen, train, ablate, sweep-k, bench-scaling,
quality-modes, gen.

Heavy imports happen inside the command functions so a ``--threads`` flag
can pin BLAS/numba thread counts before numpy loads. Every command is
deterministic under a fixed ``--seed``; ``--no-timings`` writes zeros for
all wall-time fields so artifacts replay byte-identically.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "NUMBA_NUM_THREADS")


def _pin_threads(argv: list[str]) -> None:
    val = None
    for i, tok in enumerate(argv):
        if tok == "--threads" and i + 1 < len(argv):
            val = argv[i + 1]
        elif tok.startswith("--threads="):
            val = tok.split("=", 1)[1]
    if val is not None and val.isdigit():
        for var in _THREAD_VARS:
            os.environ[var] = val


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _validate_report(report: dict) -> None:
    import jsonschema
    schema = json.loads(
        (Path(__file__).parent / "report_schema.json").read_text(encoding="utf-8"))
    jsonschema.validate(report, schema)


def _write_report(args, report: dict) -> Path:
    _validate_report(report)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(_json_text(report), encoding="utf-8")
    return path


def _base_report(args, command: str) -> dict:
    from granball import __version__
    return {
        "command": command,
        "seed": args.seed,
        "threads": args.threads,
        "version": __version__,
        "timings_recorded": not args.no_timings,
    }


def _ms(args, value: float) -> float:
    return 0.0 if args.no_timings else value


def _load_graph(args):
    from granball.datasets import load_edge_list
    if not args.edges:
        raise ValueError("--edges is required")
    return load_edge_list(args.edges)


def _load_optional_labels(args, g):
    from granball.datasets import load_labels
    return load_labels(args.labels, g.num_nodes) if args.labels else None


def _load_optional_roles(args, g):
    from granball.datasets import load_roles
    return load_roles(args.roles, g.num_nodes) if args.roles else None


def _coarsen_config(args, seed=None):
    from granball.balls import CoarsenConfig
    initial_k = None if args.initial_k in (None, "auto") else int(args.initial_k)
    return CoarsenConfig(
        mode=args.mode,
        initial_k=initial_k,
        purity_threshold=args.purity_threshold,
        skip_init=args.skip_init,
        skip_split=args.skip_split,
        epsilon=args.epsilon,
        seed=args.seed if seed is None else seed,
        global_degree_centers=args.global_degree_centers,
        purity_all_labels=args.purity_all_labels,
    )


def _train_config(args):
    from granball.gcn import TrainConfig
    return TrainConfig(
        num_layers=args.layers,
        hidden_dim=args.hidden,
        dropout=args.dropout,
        balls_per_batch=args.balls_per_batch,
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        max_epochs=args.max_epochs,
        patience=args.patience,
        strict_block_diagonal=args.strict_block_diagonal,
        loss_mode=args.loss,
        float32=args.float32,
        seed=args.seed,
    )


def _coarsen_once(g, cfg, labels, roles):
    """Run the pipeline and validate its invariants; returns CoarsenResult."""
    from granball.balls import coarsen
    label_arr = labels.labels if labels is not None else None
    res = coarsen(g, cfg, labels=label_arr, mask=roles)
    res.partition.validate(g)
    return res


def _timed_coarsen(g, cfg, labels, roles, repeats: int):
    """Median-of-``repeats`` coarsening; returns (result, median stats ms)."""
    import numpy as np
    results, totals, inits, splits = [], [], [], []
    for _ in range(max(1, repeats)):
        res = _coarsen_once(g, cfg, labels, roles)
        results.append(res)
        totals.append(res.total_ms)
        inits.append(res.init_ms)
        splits.append(res.split_ms)
    med = float(np.median(totals))
    return results[-1], {
        "total": med,
        "init": float(np.median(inits)),
        "split": float(np.median(splits)),
    }


def _train_and_test(args, g, features, labels, roles, partition):
    from granball.datasets import TEST
    from granball.gcn import evaluate, train
    cfg = _train_config(args)
    params, history = train(g, features, labels.labels, roles, partition, cfg)
    test_f1 = evaluate(params, g, features, labels.labels, roles, TEST)
    return params, history, test_f1


# -- commands ------------------------------------------------------------

def cmd_coarsen(args) -> dict:
    import numpy as np
    from granball.balls import save_ball_partition
    from granball.supergraph import build_supergraph, rayleigh_report, write_supergraph

    g = _load_graph(args)
    labels = _load_optional_labels(args, g)
    roles = _load_optional_roles(args, g)
    cfg = _coarsen_config(args)
    res = _coarsen_once(g, cfg, labels, roles)
    p = res.partition
    cg = build_supergraph(g, p)
    rep = rayleigh_report(g, p, cg, args.rayleigh_trials,
                          np.random.default_rng(args.seed + 1))

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_ball_partition(out / "partition.txt", p)
    write_supergraph(out / "supergraph.txt", cg)
    rayleigh = {k: rep[k] for k in ("trials", "numerator_ratio_max_dev",
                                    "denominator_ratio_min", "denominator_ratio_max",
                                    "denominator_ratio_mean")}
    (out / "rayleigh.json").write_text(_json_text(rayleigh), encoding="utf-8")

    sizes = p.sizes()
    qualities = np.array([b.quality for b in p.balls])
    hist_counts = np.bincount(sizes)
    report = _base_report(args, "coarsen")
    report.update({
        "t": p.t,
        "mode": cfg.mode,
        "initial_k": 0 if cfg.skip_init else cfg.resolved_k(g),
        "epsilon": cfg.epsilon,
        "size_histogram": {str(s): int(c) for s, c in enumerate(hist_counts) if c},
        "quality_min": float(qualities.min()),
        "quality_mean": float(qualities.mean()),
        "quality_max": float(qualities.max()),
        "coarsen_wall_time_ms": _ms(args, res.total_ms),
        "init_wall_time_ms": _ms(args, res.init_ms),
        "split_wall_time_ms": _ms(args, res.split_ms),
        "split_trace_counts": {
            "tried": len(res.trace),
            "accepted": sum(r.accepted for r in res.trace),
            "rejected": sum(not r.accepted for r in res.trace),
        },
        "num_supernodes": cg.num_supernodes,
        "num_superedges": cg.num_superedges,
        "rayleigh": rayleigh,
        # artifact names are relative to the report's directory so a
        # replay into another directory produces byte-identical reports
        "artifacts": {
            "partition": "partition.txt",
            "supergraph": "supergraph.txt",
            "rayleigh": "rayleigh.json",
        },
    })
    return report


def cmd_train(args) -> dict:
    from granball.balls import load_ball_partition
    from granball.datasets import load_features
    from granball.gcn import save_checkpoint

    g = _load_graph(args)
    if not (args.features and args.labels and args.roles and args.partition):
        raise ValueError("train needs --features, --labels, --roles, and --partition")
    features = load_features(args.features, g.num_nodes)
    labels = _load_optional_labels(args, g)
    roles = _load_optional_roles(args, g)
    partition = load_ball_partition(args.partition, g)

    params, history, test_f1 = _train_and_test(args, g, features, labels, roles, partition)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "checkpoint.gbwt", params)
    with (out / "history.jsonl").open("w", encoding="utf-8") as fh:
        for row in history:
            row = dict(row)
            row["ms"] = _ms(args, row["ms"])
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    from dataclasses import asdict
    report = _base_report(args, "train")
    report.update({
        "t": partition.t,
        "config": asdict(_train_config(args)),
        "epochs_run": len(history),
        "best_val_f1": max((row["val_f1"] for row in history), default=0.0),
        "test_micro_f1": test_f1,
        "train_loss_last": history[-1]["train_loss"] if history else None,
        "artifacts": {
            "checkpoint": "checkpoint.gbwt",
            "history": "history.jsonl",
        },
        "dataset": {
            "edges": str(args.edges),
            "features": str(args.features),
            "labels": str(args.labels),
            "roles": str(args.roles),
            "partition": str(args.partition),
        },
    })
    return report


def _ablate_variants(args):
    import copy
    variants = []
    for name, skip_init, skip_split in (("full", False, False),
                                        ("wo_split", False, True),
                                        ("wo_init", True, False)):
        v = copy.copy(args)
        v.skip_init = skip_init
        v.skip_split = skip_split
        variants.append((name, v))
    return variants


def cmd_ablate(args) -> dict:
    from granball.datasets import load_features

    g = _load_graph(args)
    if not (args.features and args.labels and args.roles):
        raise ValueError("ablate needs --features, --labels, and --roles")
    features = load_features(args.features, g.num_nodes)
    labels = _load_optional_labels(args, g)
    roles = _load_optional_roles(args, g)

    rows = []
    for name, v in _ablate_variants(args):
        cfg = _coarsen_config(v)
        res, stats = _timed_coarsen(g, cfg, labels, roles, args.repeats)
        _, _, test_f1 = _train_and_test(args, g, features, labels, roles, res.partition)
        rows.append({
            "name": name,
            "t": res.partition.t,
            "coarsen_ms": _ms(args, stats["total"]),
            "init_ms": _ms(args, stats["init"]),
            "split_ms": _ms(args, stats["split"]),
            "test_micro_f1": test_f1,
        })
    report = _base_report(args, "ablate")
    report["variants"] = rows
    return report


SWEEP_MULTIPLIERS = (0.25, 1 / 3, 0.5, 1.0, 2.0, 3.0, 4.0)


def cmd_sweep_k(args) -> dict:
    from granball.datasets import load_features

    g = _load_graph(args)
    if not (args.features and args.labels and args.roles):
        raise ValueError("sweep-k needs --features, --labels, and --roles")
    features = load_features(args.features, g.num_nodes)
    labels = _load_optional_labels(args, g)
    roles = _load_optional_roles(args, g)

    sqrt_n = math.sqrt(g.num_nodes)
    entries = []
    for mult in SWEEP_MULTIPLIERS:
        k = max(1, min(g.num_nodes, int(round(mult * sqrt_n))))
        import copy
        v = copy.copy(args)
        v.initial_k = str(k)
        cfg = _coarsen_config(v)
        res, stats = _timed_coarsen(g, cfg, labels, roles, args.repeats)
        _, _, test_f1 = _train_and_test(args, g, features, labels, roles, res.partition)
        entries.append({
            "multiplier": mult,
            "k": k,
            "t": res.partition.t,
            "coarsen_ms": _ms(args, stats["total"]),
            "test_micro_f1": test_f1,
        })
    report = _base_report(args, "sweep-k")
    report["entries"] = entries
    return report


def cmd_bench_scaling(args) -> dict:
    import numpy as np
    from granball import _kernels
    from granball.synth import er_graph

    _kernels.warmup()
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(args.seed)
    totals, inits, splits = [], [], []
    for n in sizes:
        g = er_graph(n, args.avg_degree / (n - 1), rng)
        cfg = _coarsen_config(args)
        _, stats = _timed_coarsen(g, cfg, None, None, args.repeats)
        totals.append(stats["total"])
        inits.append(stats["init"])
        splits.append(stats["split"])
        print(f"bench N={n}: {stats['total']:.1f} ms "
              f"(init {stats['init']:.1f}, split {stats['split']:.1f})")
    slope = float(np.polyfit(np.log(sizes), np.log(totals), 1)[0])
    report = _base_report(args, "bench-scaling")
    report.update({
        "sizes": sizes,
        "avg_degree": args.avg_degree,
        "repeats": args.repeats,
        "coarsen_ms": [_ms(args, t) for t in totals],
        "init_ms": [_ms(args, t) for t in inits],
        "split_ms": [_ms(args, t) for t in splits],
        "slope": slope,
    })
    return report


def cmd_quality_modes(args) -> dict:
    from granball.datasets import load_features

    g = _load_graph(args)
    if not (args.features and args.labels and args.roles):
        raise ValueError("quality-modes needs --features, --labels, and --roles")
    features = load_features(args.features, g.num_nodes)
    labels = _load_optional_labels(args, g)
    roles = _load_optional_roles(args, g)

    rows = []
    for mode in ("adaptive-ad", "purity", "purity-ad"):
        import copy
        v = copy.copy(args)
        v.mode = mode
        cfg = _coarsen_config(v)
        res, stats = _timed_coarsen(g, cfg, labels, roles, args.repeats)
        _, _, test_f1 = _train_and_test(args, g, features, labels, roles, res.partition)
        rows.append({
            "mode": mode,
            "t": res.partition.t,
            "coarsen_ms": _ms(args, stats["total"]),
            "test_micro_f1": test_f1,
        })
    report = _base_report(args, "quality-modes")
    report["modes"] = rows
    return report


def cmd_gen(args) -> dict:
    import numpy as np
    from granball.datasets import (random_roles, write_edge_list, write_features,
                                   write_labels, write_roles)
    from granball.synth import cycle_graph, er_graph, path_graph, sbm_features, sbm_graph

    rng = np.random.default_rng(args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    labels = None
    if args.kind == "er":
        g = er_graph(args.n, args.p, rng)
    elif args.kind == "cycle":
        g = cycle_graph(args.n)
    elif args.kind == "path":
        g = path_graph(args.n)
    else:
        g, labels = sbm_graph([args.block_size] * args.blocks,
                              args.p_in, args.p_out, rng)
    write_edge_list(out / "edges.txt", g)
    files["edges"] = "edges.txt"
    if labels is not None:
        write_labels(out / "labels.txt", labels)
        files["labels"] = "labels.txt"
        feats = sbm_features(labels, args.blocks, args.noise, rng)
        fname = "features.gbfm" if args.binary_features else "features.csv"
        write_features(out / fname, feats, binary=args.binary_features)
        files["features"] = fname
    if args.split:
        fracs = tuple(float(t) for t in args.split.split(","))
        roles = random_roles(g.num_nodes, rng, fracs)
        write_roles(out / "roles.txt", roles)
        files["roles"] = "roles.txt"
    report = _base_report(args, "gen")
    report.update({
        "kind": args.kind,
        "num_nodes": g.num_nodes,
        "num_edges": g.num_edges,
        "files": files,
    })
    return report


# -- argument plumbing ---------------------------------------------------

def _add_shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--edges", help="edge-list file")
    p.add_argument("--features", help="feature matrix (CSV or GBFM binary)")
    p.add_argument("--labels", help="label file (one integer per line)")
    p.add_argument("--roles", help="role mask file (0|1|2 per line)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="pin BLAS/numba threads (default: library defaults)")
    p.add_argument("--out-dir", default="out")
    p.add_argument("--config", help="JSON file of flag defaults (flags override)")
    p.add_argument("--no-timings", action="store_true",
                   help="write zeros for wall-time fields (byte-stable artifacts)")


def _add_coarsen_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["adaptive-ad", "purity", "purity-ad"],
                   default="adaptive-ad")
    p.add_argument("--initial-k", default="auto",
                   help="initial ball count (integer or 'auto' = floor(sqrt(N)))")
    p.add_argument("--purity-threshold", type=float, default=1.0)
    p.add_argument("--skip-init", action="store_true",
                   help="drop the k-way initialization (one root ball)")
    p.add_argument("--skip-split", action="store_true",
                   help="drop the binary-splitting stage")
    p.add_argument("--epsilon", type=float, default=0.1,
                   help="balance tolerance of the initial partition")
    p.add_argument("--global-degree-centers", action="store_true",
                   help="pick split centers by whole-graph degree")
    p.add_argument("--purity-all-labels", action="store_true",
                   help="count every node for purity even when roles are given")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--balls-per-batch", type=int, default=1)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--max-epochs", type=int, default=400)
    p.add_argument("--patience", type=int, default=50)
    p.add_argument("--strict-block-diagonal", action="store_true",
                   help="drop edges between different balls inside a batch")
    p.add_argument("--loss", choices=["node-mean", "block-mean"], default="node-mean")
    p.add_argument("--float32", action="store_true")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="granball",
        description="Granular-ball graph coarsening and minibatch GCN training")
    subs = parser.add_subparsers(dest="cmd", required=True)
    m = {}

    p = subs.add_parser("coarsen", help="coarsen a graph into granular balls")
    _add_shared(p)
    _add_coarsen_flags(p)
    p.add_argument("--rayleigh-trials", type=int, default=32)
    p.set_defaults(func=cmd_coarsen)
    m["coarsen"] = p

    p = subs.add_parser("train", help="train a GCN over an existing partition")
    _add_shared(p)
    _add_train_flags(p)
    p.add_argument("--partition", help="ball-id-per-line file from coarsen")
    p.set_defaults(func=cmd_train)
    m["train"] = p

    p = subs.add_parser("ablate", help="full vs -w/o split vs -w/o init")
    _add_shared(p)
    _add_coarsen_flags(p)
    _add_train_flags(p)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_ablate)
    m["ablate"] = p

    p = subs.add_parser("sweep-k", help="k sensitivity at 7 sqrt(N) multipliers")
    _add_shared(p)
    _add_coarsen_flags(p)
    _add_train_flags(p)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_sweep_k)
    m["sweep-k"] = p

    p = subs.add_parser("bench-scaling", help="coarsening-time scaling on ER graphs")
    _add_shared(p)
    _add_coarsen_flags(p)
    p.add_argument("--sizes", default="10000,30000,100000,300000,1000000")
    p.add_argument("--avg-degree", type=float, default=8.0)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_bench_scaling)
    m["bench-scaling"] = p

    p = subs.add_parser("quality-modes", help="compare ball-quality measures")
    _add_shared(p)
    _add_coarsen_flags(p)
    _add_train_flags(p)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_quality_modes)
    m["quality-modes"] = p

    p = subs.add_parser("gen", help="generate synthetic fixtures")
    _add_shared(p)
    p.add_argument("--kind", choices=["er", "sbm", "cycle", "path"], required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--block-size", type=int, default=50)
    p.add_argument("--p-in", type=float, default=0.25)
    p.add_argument("--p-out", type=float, default=0.01)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--split", help="train,val,test fractions, e.g. 0.6,0.2,0.2")
    p.add_argument("--binary-features", action="store_true")
    p.set_defaults(func=cmd_gen)
    m["gen"] = p
    return parser, m


def _apply_config_file(argv: list[str], parser_map: dict) -> None:
    if not argv or argv[0] not in parser_map:
        return
    cfg_path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            cfg_path = argv[i + 1]
        elif tok.startswith("--config="):
            cfg_path = tok.split("=", 1)[1]
    if cfg_path is None:
        return
    overrides = json.loads(Path(cfg_path).read_text(encoding="utf-8"))
    if not isinstance(overrides, dict):
        raise ValueError(f"{cfg_path}: config must be a JSON object")
    sub = parser_map[argv[0]]
    known = {a.dest for a in sub._actions}
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"{cfg_path}: unknown config keys {sorted(unknown)}")
    sub.set_defaults(**overrides)


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    _pin_threads(argv)
    parser, parser_map = build_parser()
    try:
        _apply_config_file(argv, parser_map)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            sys.stderr.write(_json_text({"error": "usage", "message": "bad arguments"}))
        return int(exc.code or 0)
    except Exception as exc:
        sys.stderr.write(_json_text({"error": type(exc).__name__, "message": str(exc)}))
        return 1
    try:
        t0 = time.perf_counter()
        report = args.func(args)
        report_path = _write_report(args, report)
        elapsed = (time.perf_counter() - t0) * 1000.0
        print(f"{args.cmd}: ok ({0.0 if args.no_timings else elapsed:.0f} ms) "
              f"-> {report_path}")
        return 0
    except Exception as exc:
        sys.stderr.write(_json_text({"error": type(exc).__name__, "message": str(exc)}))
        return 1


if __name__ == "__main__":
    sys.exit(main())
