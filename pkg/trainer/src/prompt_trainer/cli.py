"""Training entry point: stage 1 trains the full backbone on a mixed
stream; stage 2 freezes it and trains task-specific prompt banks."""

import argparse
import json
import sys

from .data import read_stream
from .geometry import ModelGeometry, PrefixConfig, count_prompt_params
from .training import TrainConfig, load_backbone, train_stage1, train_stage2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prompt-trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run one training stage")
    train.add_argument("--stage", type=int, choices=[1, 2], required=True)
    train.add_argument("--data", required=True, help="unified JSONL stream")
    train.add_argument("--out", required=True, help="checkpoint path (.zip archive)")
    train.add_argument("--task", default=None, help="task family for stage 2 prompts")
    train.add_argument("--backbone", default=None, help="stage-1 checkpoint (stage 2 only)")
    train.add_argument("--seed", type=int, default=42)
    train.add_argument("--steps", type=int, default=50)
    train.add_argument("--batch-size", type=int, default=16)
    train.add_argument("--lr", type=float, default=3e-5)
    train.add_argument("--layers", type=int, default=2)
    train.add_argument("--d-model", type=int, default=64)
    train.add_argument("--heads", type=int, default=4)
    train.add_argument("--max-len", type=int, default=1024)
    train.add_argument("--prompt-len", type=int, default=100)
    train.add_argument("--prompt-hidden", type=int, default=800)
    return parser


def cmd_train(args) -> int:
    cfg = TrainConfig(
        stage=args.stage,
        lr=args.lr,
        batch_size=args.batch_size,
        steps=args.steps,
        seed=args.seed,
    )
    if args.stage == 1:
        stream = read_stream(args.data)
        geom = ModelGeometry(layers=args.layers, d_model=args.d_model, heads=args.heads, max_len=args.max_len)
        result = train_stage1(stream, geom, cfg, out_path=args.out)
        summary = {
            "stage": 1,
            "examples": len(stream),
            "vocab": len(result.vocab),
            "first_loss": round(result.losses[0], 6),
            "final_loss": round(result.losses[-1], 6),
            "checkpoint": args.out,
        }
    else:
        if not args.backbone or not args.task:
            sys.stderr.write("error: stage 2 needs --backbone and --task\n")
            return 1
        stream = read_stream(args.data)
        backbone, vocab, geometry = load_backbone(args.backbone)
        prefix = PrefixConfig(prompt_len=args.prompt_len, hidden=args.prompt_hidden)
        result = train_stage2(stream, backbone, vocab, args.task, cfg, prefix, out_path=args.out)
        summary = {
            "stage": 2,
            "task": args.task,
            "examples": sum(1 for ex in stream if ex.task == args.task),
            "prompt_parameters": count_prompt_params(geometry, prefix),
            "first_loss": round(result.losses[0], 6),
            "final_loss": round(result.losses[-1], 6),
            "checkpoint": args.out,
        }
    sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return cmd_train(args)
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
