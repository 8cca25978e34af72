"""Command-line entry point: ``hategraph {generate,train,evaluate,stream-report,grad-check}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .discussion import DiscussionGraph, load_thread
from .encoder import EncoderSpec
from .models import KINDS, default_config, load_checkpoint, save_checkpoint
from .streaming import evaluate_graphs, render_report, stream_predict
from .synthgen import GenSpec, generate, load_corpus, write_corpus
from .training import LOSSES, TrainConfig, load_train_config, self_check, train

log = logging.getLogger("hategraph")


class CliError(Exception):
    pass


def _slice(text: str | None) -> slice:
    if not text:
        return slice(None)
    try:
        start, sep, stop = text.partition(":")
        if not sep:
            raise ValueError(text)
        return slice(int(start) if start else None, int(stop) if stop else None)
    except ValueError:
        raise CliError(f"--graphs expects START:END, got {text!r}") from None


def _load_graphs(path: str, which: str | None) -> tuple[list[DiscussionGraph], dict]:
    """Graphs and per-graph manifest entries (empty for plain thread directories)."""
    root = Path(path)
    if not root.is_dir():
        raise CliError(f"corpus directory {path!r} does not exist")
    if (root / "manifest.json").exists():
        corpus = load_corpus(root)
        graphs, manifest = corpus.graphs, corpus.manifest
    else:
        files = sorted(root.glob("*.json"))
        if not files:
            raise CliError(f"no thread files in {path!r}")
        graphs, manifest = [load_thread(f) for f in files], {}
    graphs = graphs[_slice(which)]
    if not graphs:
        raise CliError("graph selection is empty")
    return graphs, manifest


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# -- subcommands -------------------------------------------------------------


def cmd_generate(args) -> int:
    base = GenSpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8"))) if args.spec else GenSpec()
    overrides = {"seed": args.seed}
    if args.num_graphs is not None:
        overrides["num_graphs"] = args.num_graphs
    if args.trigger_rate is not None:
        overrides["trigger_rate"] = args.trigger_rate
    if args.dependence_distance is not None:
        overrides["dependence_distance"] = args.dependence_distance
    spec = GenSpec.from_dict({**base.to_dict(), **overrides})
    corpus = generate(spec)
    write_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} graphs to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_train_config(args.config) if args.config else TrainConfig()
    overrides = {"seed": args.seed}
    for flag, key in (("loss", "loss"), ("epochs", "epochs"), ("lr", "learning_rate")):
        if getattr(args, flag) is not None:
            overrides[key] = getattr(args, flag)
    cfg = TrainConfig.from_dict({**cfg.to_dict(), **overrides})
    encoder = EncoderSpec(dim=args.dim)
    graphs, _ = _load_graphs(args.corpus, args.graphs)
    result = train(graphs, args.model, cfg, encoder, default_config(args.model, encoder.dim))
    save_checkpoint(result.model, args.out)
    if args.history:
        Path(args.history).write_text(json.dumps(result.history_dict(), indent=1) + "\n", encoding="utf-8")
    print(f"trained {args.model} on {len(graphs)} graphs; final loss {result.history[-1]:.6f}")
    return 0


def cmd_evaluate(args) -> int:
    model = load_checkpoint(args.ckpt)
    graphs, manifest = _load_graphs(args.corpus, args.graphs)
    focus = {gid: entry.get("triggers", []) for gid, entry in manifest.items()}
    report = evaluate_graphs(model, graphs, focus or None, workers=args.parallel)
    _write(args.out, json.dumps(report, indent=1) + "\n")
    if args.out not in (None, "-"):
        line = f"{model.kind}: accuracy {report['final']['accuracy']:.4f} mae {report['final']['mae']:.4f}"
        if "focus" in report:
            line += f" trigger accuracy {report['focus']['accuracy']:.4f}"
        print(line)
    return 0


def cmd_stream_report(args) -> int:
    g = load_thread(args.thread)
    models = {}
    for path in args.ckpt or []:
        model = load_checkpoint(path)
        name = model.kind
        k = 2
        while name in models:
            name, k = f"{model.kind}-{k}", k + 1
        models[name] = stream_predict(model, g)
    _write(args.out, render_report(g, models, args.format, args.width, args.at))
    return 0


def cmd_grad_check(args) -> int:
    kinds = sorted(KINDS) if args.model == "all" else [args.model]
    losses = LOSSES if args.loss == "all" else [args.loss]
    worst, failed = 0.0, False
    for kind in kinds:
        for loss_kind in losses:
            rep = self_check(args.seed, kind, loss_kind, l2=args.l2, tolerance=args.tolerance)
            status = "ok" if rep.passed else "FAIL"
            print(
                f"{kind:<13} {loss_kind:<17} max rel error {rep.max_rel_error:.3e} "
                f"({rep.worst_tensor}{list(rep.worst_index)}) {status}"
            )
            worst = max(worst, rep.max_rel_error)
            failed |= not rep.passed
    print(f"worst relative error {worst:.3e}; tolerance {args.tolerance:g}")
    return 1 if failed else 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hategraph", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic corpus")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--num-graphs", type=int)
    g.add_argument("--trigger-rate", type=float)
    g.add_argument("--dependence-distance", type=int)
    g.add_argument("--spec", help="JSON generator spec to start from")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train one model and write a checkpoint")
    t.add_argument("--corpus", required=True, help="corpus or thread directory")
    t.add_argument("--model", required=True, choices=sorted(KINDS))
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--config", help="JSON TrainConfig")
    t.add_argument("--history", help="where to write the loss history")
    t.add_argument("--loss", choices=LOSSES)
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--dim", type=int, default=EncoderSpec().dim, help="encoder width")
    t.add_argument("--graphs", help="START:END slice of the corpus, e.g. :1600")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="streaming evaluation over a corpus")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--corpus", required=True)
    e.add_argument("--out", help="metrics JSON path (default stdout)")
    e.add_argument("--graphs", help="START:END slice of the corpus, e.g. 1600:")
    e.add_argument(
        "--parallel", type=int, default=0, metavar="N",
        help="spread graphs over N processes (opt-in; not part of the determinism guarantee)",
    )
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("stream-report", help="render a per-comment prediction table")
    r.add_argument("--ckpt", action="append", help="checkpoint; repeat for several models")
    r.add_argument("--thread", required=True)
    r.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    r.add_argument("--out")
    r.add_argument("--width", type=int, default=80, help="text column width before truncation")
    r.add_argument("--at", default="final", help="final, appearance or a horizon number")
    r.set_defaults(func=cmd_stream_report)

    c = sub.add_parser("grad-check", help="finite-difference check of every model's gradients")
    c.add_argument("--seed", type=int, required=True)
    c.add_argument("--model", choices=["all", *sorted(KINDS)], default="all")
    c.add_argument("--loss", choices=["all", *LOSSES], default="all")
    c.add_argument("--l2", type=float, default=0.0)
    c.add_argument("--tolerance", type=float, default=1e-4)
    c.set_defaults(func=cmd_grad_check)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "at", None) not in (None, "final", "appearance"):
        try:
            args.at = int(args.at)
        except ValueError:
            parser.error(f"--at must be final, appearance or an integer, got {args.at!r}")
    try:
        return args.func(args)
    except (CliError, OSError, ValueError, KeyError, TypeError, FloatingPointError) as exc:
        print(f"hategraph {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
