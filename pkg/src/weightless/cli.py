"""Command-line entry point.

Exit codes: 0 success, 1 data error (bad or inconsistent files), 2 usage
error. Every artifact goes under ``--out``; every random draw comes from a
per-stage seed derived from ``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import WeightlessError
from .io import (
    load_annotation, load_motion, save_annotation, save_motion, stage_seed,
)

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2


class _Usage(Exception):
    pass


def _tree(args):
    from .kinematics import load_example_tree, load_tree
    if args.tree is None:
        return load_example_tree()
    if args.tree == "toy":
        from .toy import toy_tree
        return toy_tree()
    return load_tree(args.tree)


def _scene(args, required=True):
    from .geometry import TerrainScene, load_scene
    if args.scene is None:
        if required:
            raise _Usage("this command needs --scene")
        return TerrainScene()
    return load_scene(args.scene)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _dataset(args, tree):
    """(sequence, annotation) pairs from files or a generated toy corpus."""
    if args.toy_corpus:
        from .autolabel import annotate_sequence
        from .toy import sit_corpus, toy_tree
        tree = toy_tree()
        corpus = sit_corpus(args.toy_corpus, seed=stage_seed(args.seed, "toy-corpus") % 2**32)
        return [(s, annotate_sequence(s, tree, sc, delta_t=0)) for s, sc, _ in corpus]
    if not args.motions or len(args.motions) != len(args.annotations or []):
        raise _Usage("give --toy-corpus N, or matching --motions and --annotations lists")
    return [(load_motion(m, tree), load_annotation(a, tree)) for m, a in zip(args.motions, args.annotations)]


def _split(data, holdout):
    if holdout <= 0:
        return data, []
    if holdout >= len(data):
        raise _Usage(f"--holdout {holdout} leaves no training data out of {len(data)} sequences")
    return data[:-holdout], data[-holdout:]


# -- subcommands -----------------------------------------------------------------

def cmd_smooth(args):
    from .smoothing import SmoothingConfig, smooth_pipeline
    seq = load_motion(args.motion, _tree(args) if args.tree else None)
    cfg = SmoothingConfig(args.downsample, args.ma_window, args.median_window)
    out = smooth_pipeline(seq, cfg)
    save_motion(out, _out(args) / "smoothed.json")
    print(f"smoothed {len(seq)} frames at {seq.fps:g} fps -> {_out(args) / 'smoothed.json'}")


def cmd_label(args):
    from .autolabel import annotate_sequence
    tree = _tree(args)
    seq = load_motion(args.motion, tree)
    seed = stage_seed(args.seed, "label")
    ann = annotate_sequence(seq, tree, _scene(args), eps=args.eps, delta_t=args.delta_t,
                            include_feet=args.include_feet, seed=seed)
    path = _out(args) / "annotation.json"
    save_annotation(ann, path)
    print(f"{len(ann.intervals)} weightless interval(s): {list(ann.intervals)} -> {path}")


def cmd_train_wm(args):
    from .wm import save_checkpoint, train
    from .wm.train import TrainConfig, evaluate
    data = _dataset(args, _tree(args))
    train_set, test_set = _split(data, args.holdout)
    cfg = TrainConfig(lr=args.lr, batch_size=args.batch_size, lambda_smooth=args.lambda_smooth,
                      epochs=args.epochs, seed=stage_seed(args.seed, "train-wm") % 2**32,
                      hidden=tuple(args.hidden), time_budget_s=args.time_budget)
    out = _out(args)
    res = train(train_set, cfg)
    with open(out / "train_log.csv", "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["epoch", "loss", "bce"])
        for e, (l, b) in enumerate(zip(res.loss_history, res.bce_history)):
            wr.writerow([e, repr(l), repr(b)])
    net = res.net.astype(np.float64)
    save_checkpoint(net, out / "wm.ckpt", {"train_config": cfg.to_dict(), "epochs_run": len(res.loss_history),
                                           "steps": res.steps, "n_train": len(train_set)})
    summary = {"epochs_run": len(res.loss_history), "steps": res.steps,
               "final_loss": res.loss_history[-1] if res.loss_history else None}
    if test_set:
        rep, _ = evaluate(net, test_set)
        summary["holdout"] = rep.to_dict()
    _write_json(out / "train_summary.json", summary)
    print(json.dumps(summary))


def cmd_eval_wm(args):
    from .wm import load_checkpoint
    from .wm.train import evaluate, low_w_intervals
    net, _ = load_checkpoint(args.checkpoint)
    data = _dataset(args, _tree(args))
    _, data = _split(data, args.holdout) if args.holdout else (None, data)
    rep, preds = evaluate(net, data, args.threshold)
    out = _out(args)
    per_seq = []
    for i, ((seq, ann), w) in enumerate(zip(data, preds)):
        with open(out / f"w_trace_{i:03d}.csv", "w", newline="") as f:
            wr = csv.writer(f)
            K = w.shape[1]
            wr.writerow(["frame", "time"] + [f"w{k}" for k in range(K)] + [f"label{k}" for k in range(K)])
            for t in range(len(seq)):
                wr.writerow([t, repr(t / seq.fps)] + [repr(float(v)) for v in w[t]]
                            + [int(v) for v in ann.labels[t]])
        per_seq.append({"index": i, "predicted_low_w": low_w_intervals(w, args.threshold),
                        "annotated": [list(iv) for iv in ann.intervals]})
    _write_json(out / "eval.json", {**rep.to_dict(), "threshold": args.threshold, "sequences": per_seq})
    print(json.dumps(rep.to_dict()))


def cmd_reward(args):
    from .rewards import TERMS, sequence_rewards, write_breakdown_csv
    tree = _tree(args)
    rows = sequence_rewards(load_motion(args.result, tree), load_motion(args.reference, tree), tree)
    out = _out(args)
    write_breakdown_csv(rows, out / "reward.csv")
    totals = [t for t, _ in rows]
    summary = {"frames": len(rows), "mean_total": float(np.mean(totals)),
               "mean_terms": {n: float(np.mean([b[n] for _, b in rows])) for n in TERMS}}
    _write_json(out / "reward_summary.json", summary)
    print(f"mean total reward {summary['mean_total']!r} over {len(rows)} frames")


def cmd_randomize(args):
    from .control import RandRanges, load_ranges, sample_domain_rand
    if args.show_defaults:
        print(json.dumps(RandRanges().to_dict(), indent=2))
        return
    ranges = load_ranges(args.ranges) if args.ranges else RandRanges()
    rng = np.random.default_rng(stage_seed(args.seed, "randomize"))
    samples = [sample_domain_rand(ranges, rng, args.n_links, args.n_joints).to_dict() for _ in range(args.count)]
    _write_json(_out(args) / "randomization.json",
                {"format_version": 1, "ranges": ranges.to_dict(), "samples": samples})
    print(f"{args.count} sample(s) -> {_out(args) / 'randomization.json'}")


def cmd_simulate(args):
    from .sim.demo import chair_scenario, run_weightless_demo
    sc = chair_scenario(duration=args.duration)
    scene = _scene(args, required=False) if args.scene else sc.scene
    kw = {}
    if args.relax == "labels":
        kw["labels"] = sc.labels
    elif args.relax == "none":
        kw["w"] = 1.0
    elif args.relax == "all":
        kw["w"] = 0.0
    else:
        from .wm import OnlineWM, load_checkpoint
        if not args.checkpoint:
            raise _Usage("--relax net needs --checkpoint")
        net, _ = load_checkpoint(args.checkpoint)
        if net.K != sc.chain.n_joints:
            raise WeightlessError(f"checkpoint K={net.K} does not match the chain's {sc.chain.n_joints} joints")
        kw["net"] = OnlineWM(net)
    res = run_weightless_demo(sc.chain, scene, sc.reference, duration=args.duration, **kw)
    out = _out(args)
    res.write_csv(out / "trajectory.csv")
    res.write_report(out / "report.json")
    print(json.dumps(res.report.to_dict()))


def cmd_metrics(args):
    from .metrics import compute_metrics
    tree = _tree(args)
    m = compute_metrics(load_motion(args.result, tree), load_motion(args.reference, tree), tree)
    _write_json(_out(args) / "metrics.json", {"format_version": 1, **m.to_dict()})
    print(json.dumps(m.to_dict()))


# -- parser ------------------------------------------------------------------------

def _data_args(p):
    p.add_argument("--motions", nargs="*", help="motion JSON files")
    p.add_argument("--annotations", nargs="*", help="annotation JSON files, one per motion")
    p.add_argument("--toy-corpus", type=int, default=0, metavar="N",
                   help="generate N synthetic sit motions on the toy robot instead of reading files")
    p.add_argument("--holdout", type=int, default=0, metavar="N", help="last N sequences held out")


def build_parser() -> argparse.ArgumentParser:
    def globals_(suppress):
        # after the subcommand the flags must not reset values given before it
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--seed", type=int, default=d(0), help="global seed (default 0)")
        g.add_argument("--tree", default=d(None),
                       help="kinematic tree JSON, or 'toy' (default: bundled 23-joint tree)")
        g.add_argument("--scene", default=d(None), help="terrain scene JSON")
        g.add_argument("--out", default=d("out"), help="output directory (default ./out)")
        return g

    common = globals_(True)
    p = argparse.ArgumentParser(prog="weightless", parents=[globals_(False)],
                                description="Weightless-state labeling, relaxation prediction and evaluation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    s = sub.add_parser("smooth", parents=[common], help="smooth a retargeted motion")
    s.add_argument("motion")
    s.add_argument("--downsample", type=int, default=2)
    s.add_argument("--ma-window", type=int, default=5)
    s.add_argument("--median-window", type=int, default=5)
    s.set_defaults(func=cmd_smooth)

    s = sub.add_parser("label", parents=[common], help="annotate weightless intervals and joints")
    s.add_argument("motion")
    s.add_argument("--eps", type=float, default=0.02, help="contact distance threshold, m")
    s.add_argument("--delta-t", type=int, default=20, help="max interval boundary jitter, frames")
    s.add_argument("--include-feet", action="store_true")
    s.set_defaults(func=cmd_label)

    s = sub.add_parser("train-wm", parents=[common], help="train the relaxation predictor")
    _data_args(s)
    s.add_argument("--epochs", type=int, default=100)
    s.add_argument("--lr", type=float, default=1e-4)
    s.add_argument("--batch-size", type=int, default=64)
    s.add_argument("--lambda-smooth", type=float, default=0.1)
    s.add_argument("--hidden", type=int, nargs="+", default=[256, 256, 64])
    s.add_argument("--time-budget", type=float, default=None, metavar="SECONDS")
    s.set_defaults(func=cmd_train_wm)

    s = sub.add_parser("eval-wm", parents=[common], help="accuracy and per-frame relaxation traces")
    _data_args(s)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--threshold", type=float, default=0.5)
    s.set_defaults(func=cmd_eval_wm)

    s = sub.add_parser("reward", parents=[common], help="per-frame reward breakdown of a motion pair")
    s.add_argument("result")
    s.add_argument("reference")
    s.set_defaults(func=cmd_reward)

    s = sub.add_parser("randomize", parents=[common], help="sample domain-randomization parameters")
    s.add_argument("--show-defaults", action="store_true", help="print the default ranges and exit")
    s.add_argument("--ranges", help="ranges JSON (default: built-in)")
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--n-links", type=int, default=1)
    s.add_argument("--n-joints", type=int, default=1)
    s.set_defaults(func=cmd_randomize)

    s = sub.add_parser("simulate", parents=[common], help="run the planar chair demo")
    s.add_argument("--relax", choices=("labels", "none", "all", "net"), default="labels",
                   help="relaxation source: annotated labels, none (w=1), all (w=0) or a checkpoint")
    s.add_argument("--checkpoint")
    s.add_argument("--duration", type=float, default=5.0)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("metrics", parents=[common], help="tracking errors of a result against a reference")
    s.add_argument("result")
    s.add_argument("reference")
    s.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        args.func(args)
    except _Usage as e:
        parser.print_usage(sys.stderr)
        print(f"weightless: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (WeightlessError, OSError, ValueError, KeyError) as e:
        print(f"weightless: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
