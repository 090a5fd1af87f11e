"""Command-line entry point.

Subcommands: generate, train, eval, interpret, repl, serve.
Exit codes: 0 success, 1 usage error, 2 data/model error.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from importlib import resources

from . import corpus as corpus_mod
from . import simulator
from .errors import NlbeamError
from .interpreter import interpret
from .tagger import evaluate, format_metrics, load_model, save_model, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


def default_template_path() -> str:
    return str(resources.files("nlbeam").joinpath("data/templates.txt"))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlbeam",
        description="Natural-language control of a simulated beamline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a labeled corpus")
    p.add_argument("--templates", default=None, help="template pack path")
    p.add_argument("--n", type=int, required=True,
                   help="total paragraphs (80/20 train/test)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("train", help="train a tagger model")
    p.add_argument("--corpus", required=True, help="corpus directory")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model file path")

    p = sub.add_parser("eval", help="evaluate a model on a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", default="test", choices=["train", "test"])
    p.add_argument("--format", default="text", choices=["text", "records"])

    p = sub.add_parser("interpret", help="interpret one text")
    p.add_argument("--model", required=True)
    p.add_argument("text")

    p = sub.add_parser("repl", help="interactive interpret loop")
    p.add_argument("--model", required=True)
    p.add_argument("--execute", action="store_true",
                   help="run confirmed scripts on an in-process simulator")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--model", default=None)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--templates", default=None)
    p.add_argument("--expiry", type=float, default=600.0,
                   help="pending-interpretation expiry in seconds")
    return parser


def cmd_generate(args) -> int:
    if args.n <= 0:
        print("error: n must be positive", file=sys.stderr)
        return EXIT_USAGE
    templates = corpus_mod.load_templates(
        args.templates or default_template_path())
    start = time.perf_counter()
    split = corpus_mod.generate_corpus(templates, args.n, seed=args.seed)
    elapsed = time.perf_counter() - start
    corpus_mod.write_corpus(split, args.out)
    slots = [len(p.gold_bindings) for p in split.train_paragraphs + split.test_paragraphs]
    print(f"train {len(split.train_paragraphs)}  "
          f"test {len(split.test_paragraphs)}  "
          f"({elapsed:.1f}s)")
    print(f"slots/paragraph mean {statistics.mean(slots):.2f} "
          f"std {statistics.pstdev(slots):.2f}")
    return EXIT_OK


def cmd_train(args) -> int:
    split = corpus_mod.read_corpus(args.corpus)
    start = time.perf_counter()
    model = train(split, epochs=args.epochs, seed=args.seed)
    elapsed = time.perf_counter() - start
    save_model(model, args.out)
    print(f"trained on {len(split.train_paragraphs)} paragraphs in {elapsed:.1f}s; "
          f"model -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.model)
    split = corpus_mod.read_corpus(args.corpus)
    paragraphs = (split.test_paragraphs if args.split == "test"
                  else split.train_paragraphs)
    metrics = evaluate(model, paragraphs)
    if args.format == "records":
        print(json.dumps({
            "paragraph": metrics.paragraph_accuracy,
            "token_all": metrics.token_accuracy_all,
            "token_bi": metrics.token_accuracy_bi,
            "counts": {k: list(v) for k, v in metrics.counts.items()}}))
    else:
        print(format_metrics(metrics))
    return EXIT_OK


def _print_interpretation(result) -> None:
    for span in result.spans:
        print(f"  {span.entity:<26} {span.prefix}  {span.surface!r}"
              f" = {span.value}")
    for warning in result.warnings:
        print(f"  warning: {warning}")
    if result.rendered:
        print(result.rendered)


def cmd_interpret(args) -> int:
    model = load_model(args.model)
    result = interpret(args.text, model)
    _print_interpretation(result)
    return EXIT_OK


def cmd_repl(args) -> int:
    model = load_model(args.model)
    state = simulator.reset()
    print("enter a request (empty line or Ctrl-D to quit)")
    while True:
        try:
            line = input("> ")
        except EOFError:
            print()
            break
        if not line.strip():
            break
        result = interpret(line, model)
        _print_interpretation(result)
        if not result.script.commands:
            continue
        try:
            answer = input("confirm? [y/N] ")
        except EOFError:
            break
        if answer.strip().lower() not in ("y", "yes"):
            print("rejected; state unchanged")
            continue
        if not args.execute:
            print("confirmed (preview mode; pass --execute to run)")
            continue
        before = state.clock
        state, log = simulator.execute(state, result.script)
        for ev in log.events:
            if ev.kind in ("state-delta", "measurement", "fault",
                           "warning"):
                print(f"  [{ev.clock:10.1f}s] {ev.kind}: {ev.payload}")
        print(f"clock advanced {state.clock - before:.1f}s; "
              f"temperature {state.temperature}, "
              f"x {state.motor_x}, y {state.motor_y}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    model = load_model(args.model) if args.model else None
    app = create_app(model, expiry_seconds=args.expiry)
    try:
        uvicorn.run(app, host=args.host, port=args.port)
    except SystemExit as exc:
        return int(exc.code or 0)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    handlers = {
        "generate": cmd_generate,
        "train": cmd_train,
        "eval": cmd_eval,
        "interpret": cmd_interpret,
        "repl": cmd_repl,
        "serve": cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NlbeamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
