"""Command-line pipeline: unify -> decontaminate -> mix -> evaluate -> stats.

Every subcommand is reproducible: identical flags, inputs, and seed give
byte-identical outputs. Exit codes: 0 success, 1 validation/content
failure, 2 environment/IO failure. Processing streams line by line, so
corpora never need to fit in memory (mix keeps only per-dataset line
offsets and shuffle state).
"""

import argparse
import glob
import json
import os
import struct
import sys
from concurrent.futures import ProcessPoolExecutor
from hashlib import blake2b

from . import adapters, decontam, metrics, mixer
from .errors import EmptyInputError, ForgeError, SchemaError
from .model import Manifest, TaskFamily, UnifiedExample, load_manifest, validate_example
from .tokens import get_tokenizer
from .unify import InstructionTable, SeparatorConfig, lint_payload, unify_record

DEFAULT_SEED = 42
SEED_ENV_VAR = "MVPFORGE_SEED"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def resolve_seed(flag_value: int | None) -> int:
    if flag_value is not None:
        return flag_value
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ForgeError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
    return DEFAULT_SEED


def _emit(report: dict):
    sys.stdout.write(json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def _warn(message: str):
    sys.stderr.write(f"warning: {message}\n")


def _carve_to_valid(seed: int, dataset_id: str, line_no: int, fraction: float) -> bool:
    """Deterministic per-record split assignment under the run seed."""
    digest = blake2b(
        struct.pack("<q", seed) + b"carve:" + dataset_id.encode("utf-8") + struct.pack("<Q", line_no),
        digest_size=8,
    ).digest()
    return int.from_bytes(digest, "little") / 2.0**64 < fraction


def _convert_split(task: tuple) -> dict:
    """Unify one (dataset, split) shard; returns counts, lint rows, violations.

    Module-level so the unify worker pool can pickle it; must stay pure per
    shard so output is identical for any worker count.
    """
    dataset_id, family_value, split, path, out_dir, strict, carve_fraction, seed = task
    family = TaskFamily(family_value)
    instr = InstructionTable()
    seps = SeparatorConfig()

    out_main = os.path.join(out_dir, f"{dataset_id}.{split}.jsonl")
    out_carved = os.path.join(out_dir, f"{dataset_id}.valid.jsonl")
    carving = split == "train" and carve_fraction > 0.0

    lint_rows: list[dict] = []
    violations: list[dict] = []
    examples = 0
    carved = 0

    def handle_bad(line_no: int, code: str, detail: str):
        row = {"dataset": dataset_id, "line": line_no, "code": code, "detail": detail}
        if strict:
            violations.append(row)
        else:
            lint_rows.append(row)

    with open(path, encoding="utf-8") as src, open(out_main, "w", encoding="utf-8", newline="\n") as main_out:
        carved_out = open(out_carved, "w", encoding="utf-8", newline="\n") if carving else None
        try:
            for line_no, raw in enumerate(src, start=1):
                if not raw.strip():
                    continue
                try:
                    record = adapters.parse_native_line(family, raw, dataset_id, split, line=line_no)
                    unified = unify_record(record, family, instr, seps)
                except ForgeError as exc:
                    handle_bad(line_no, "malformed-record", str(exc))
                    continue
                for code in lint_payload(record.payload, seps, target=record.target):
                    lint_rows.append({"dataset": dataset_id, "line": line_no, "code": code, "detail": ""})
                bad = False
                for ex in unified:
                    found = validate_example(ex)
                    if found:
                        handle_bad(line_no, "invalid-example", "; ".join(found))
                        bad = True
                        break
                if bad:
                    continue
                sink = main_out
                if carving and _carve_to_valid(seed, dataset_id, line_no, carve_fraction):
                    sink = carved_out
                    carved += len(unified)
                for ex in unified:
                    if sink is carved_out:
                        ex = UnifiedExample(ex.task, ex.dataset, "valid", ex.instruction, ex.input, ex.output)
                    sink.write(ex.to_json() + "\n")
                    examples += 1
        finally:
            if carved_out is not None:
                carved_out.close()

    return {
        "dataset": dataset_id,
        "split": split,
        "examples": examples,
        "carved": carved,
        "lint": lint_rows,
        "violations": violations,
    }


def cmd_unify(args) -> int:
    seed = resolve_seed(args.seed)
    manifest: Manifest = load_manifest(args.manifest)
    if len(manifest) == 0:
        _warn("manifest has no entries; nothing to do")
    os.makedirs(args.out, exist_ok=True)

    tasks = []
    for entry in manifest:
        carve = args.carve_valid if "valid" not in entry.splits else 0.0
        for split, ref in entry.splits.items():
            tasks.append((entry.dataset_id, entry.family.value, split, ref.path, args.out, args.strict, carve, seed))

    if args.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_convert_split, tasks))
    else:
        results = [_convert_split(task) for task in tasks]

    lint_path = os.path.join(args.out, "lint.jsonl")
    total_examples = 0
    total_warnings = 0
    total_violations = 0
    with open(lint_path, "w", encoding="utf-8", newline="\n") as lint_out:
        for result in results:
            total_examples += result["examples"]
            for row in result["lint"]:
                total_warnings += 1
                lint_out.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
            for row in result["violations"]:
                total_violations += 1
                lint_out.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")

    _emit(
        {
            "datasets": len(manifest),
            "shards": len(tasks),
            "examples": total_examples,
            "carved_to_valid": sum(r["carved"] for r in results),
            "warnings": total_warnings,
            "violations": total_violations,
            "lint_report": lint_path,
        }
    )
    if total_violations:
        sys.stderr.write(f"{total_violations} validation violations\n")
        return EXIT_VALIDATION
    return EXIT_OK


def _read_examples(path: str):
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield line, UnifiedExample.from_json(line)
            except SchemaError as exc:
                raise SchemaError(f"{path}:{line_no}: {exc}") from exc


def _expand_globs(patterns: list[str]) -> list[str]:
    paths = []
    for pattern in patterns:
        matched = sorted(glob.glob(pattern))
        if not matched and not os.path.exists(pattern):
            raise FileNotFoundError(f"no files match {pattern!r}")
        paths.extend(matched if matched else [pattern])
    return paths


def cmd_decontaminate(args) -> int:
    cfg = decontam.DecontamConfig(
        percentile=args.percentile, max_order=args.max_order, min_order=args.min_order
    )
    eval_paths = _expand_globs(args.eval) if args.eval else []
    index_paths = _expand_globs(args.index) if args.index else []
    if not eval_paths and not index_paths:
        _warn("no evaluation sets given; output is a pass-through")

    indexes = []
    for path in eval_paths:
        name = os.path.splitext(os.path.basename(path))[0]
        examples = (ex for _, ex in _read_examples(path))
        indexes.append(decontam.build_index(examples, cfg, source_dataset=name))
    for path in index_paths:
        name = os.path.splitext(os.path.basename(path))[0]
        indexes.append(decontam.load_index(path, source_dataset=name))

    if args.save_indexes:
        os.makedirs(args.save_indexes, exist_ok=True)
        for index in indexes:
            decontam.save_index(index, os.path.join(args.save_indexes, f"{index.source_dataset}.ngix"))

    report = decontam.FilterReport(orders={idx.source_dataset: idx.order for idx in indexes})
    min_order = min((idx.order for idx in indexes), default=0)
    train_paths = _expand_globs([args.train])
    with open(args.out, "w", encoding="utf-8", newline="\n") as out:
        position = 0
        for path in train_paths:
            for raw, ex in _read_examples(path):
                tokens = decontam.tokenize_for_overlap(decontam.example_text(ex), cfg)
                hit = decontam.hit_sets(tokens, indexes)
                report.record(
                    f"{ex.dataset}:{position}", hit, short=bool(indexes) and len(tokens) < min_order
                )
                if not hit:
                    out.write(raw.rstrip("\n") + "\n")
                position += 1

    _emit(report.to_dict())
    return EXIT_OK


class _LineIndexedFile:
    """Random access to JSONL lines through an in-memory offset array."""

    def __init__(self, path: str):
        self._handle = open(path, "rb")
        self._offsets = []
        offset = 0
        for line in self._handle:
            if line.strip():
                self._offsets.append(offset)
            offset += len(line)

    def __len__(self) -> int:
        return len(self._offsets)

    def __getitem__(self, index: int) -> str:
        self._handle.seek(self._offsets[index])
        return self._handle.readline().decode("utf-8").rstrip("\n")

    def close(self):
        self._handle.close()


def _load_mixture(path: str, seed_flag: int | None) -> tuple[mixer.MixtureSpec, dict[str, _LineIndexedFile]]:
    with open(path, encoding="utf-8") as fh:
        try:
            spec_obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"mixture spec is not valid JSON: {exc}") from exc
    base = os.path.dirname(os.path.abspath(path))
    members = []
    shards: dict[str, _LineIndexedFile] = {}
    for raw in spec_obj.get("members", []):
        for key in ("dataset", "task", "path"):
            if key not in raw:
                raise SchemaError(f"mixture member missing {key!r}")
        shard_path = raw["path"] if os.path.isabs(raw["path"]) else os.path.join(base, raw["path"])
        if not os.path.exists(shard_path):
            raise FileNotFoundError(f"mixture member {raw['dataset']!r} references missing file {shard_path}")
        shard = _LineIndexedFile(shard_path)
        declared = raw.get("size")
        size = declared if declared is not None else len(shard)
        if declared is not None and declared != len(shard):
            _warn(f"member {raw['dataset']!r} declares size {declared} but shard has {len(shard)} lines")
        members.append(mixer.Member(dataset_id=raw["dataset"], family=TaskFamily(raw["task"]), size=size))
        shards[raw["dataset"]] = shard

    if seed_flag is not None:
        seed = seed_flag
    elif "seed" in spec_obj:
        seed = int(spec_obj["seed"])
    else:
        seed = resolve_seed(None)

    spec = mixer.MixtureSpec(
        members=tuple(members),
        temperature=float(spec_obj.get("temperature", 2.0)),
        size_cap=spec_obj.get("size_cap"),
        seed=seed,
        epoch_length=int(spec_obj["epoch_length"]),
    )
    return spec, shards


def cmd_mix(args) -> int:
    spec, shards = _load_mixture(args.spec, args.seed)
    try:
        if args.task:
            spec = mixer.group_by_task(spec, TaskFamily(args.task))
            shards = {k: v for k, v in shards.items() if k in {m.dataset_id for m in spec.members}}
        plan = mixer.compute_rates(spec)

        stream = mixer.sample_stream(plan, shards)
        if args.shard_size:
            os.makedirs(args.out, exist_ok=True)
            shard_idx = 0
            written = 0
            sink = None
            for line in stream:
                if sink is None or written >= args.shard_size:
                    if sink:
                        sink.close()
                    sink = open(
                        os.path.join(args.out, f"part-{shard_idx:05d}.jsonl"),
                        "w",
                        encoding="utf-8",
                        newline="\n",
                    )
                    shard_idx += 1
                    written = 0
                sink.write(line + "\n")
                written += 1
            if sink:
                sink.close()
        else:
            with open(args.out, "w", encoding="utf-8", newline="\n") as sink:
                for line in stream:
                    sink.write(line + "\n")
    finally:
        for shard in shards.values():
            shard.close()

    _emit(
        {
            "datasets": list(plan.datasets),
            "rates": [round(r, 12) for r in plan.rates],
            "temperature": spec.temperature,
            "size_cap": spec.size_cap,
            "seed": plan.seed,
            "epoch_length": plan.epoch_length,
        }
    )
    return EXIT_OK


def _read_id_file(path: str, value_key: str) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            if "id" not in obj or value_key not in obj:
                raise SchemaError(f"{path}:{line_no}: needs keys 'id' and {value_key!r}")
            out[str(obj["id"])] = obj[value_key]
    return out


def cmd_evaluate(args) -> int:
    hyps = _read_id_file(args.hyp, "text")
    refs = _read_id_file(args.ref, "texts")
    if hyps.keys() != refs.keys():
        only_hyp = sorted(hyps.keys() - refs.keys())
        only_ref = sorted(refs.keys() - hyps.keys())
        sys.stderr.write(f"id mismatch: only in hypotheses {only_hyp}; only in references {only_ref}\n")
        return EXIT_VALIDATION

    ids = sorted(hyps.keys())
    pairs = [metrics.EvalPair(hypothesis=hyps[i], references=tuple(refs[i])) for i in ids]
    tokenizer = get_tokenizer(args.tokenizer)
    notes: tuple[str, ...] = ()
    per_example: dict[str, list[float]] | None = None

    if args.metric == "bleu":
        score = metrics.bleu(pairs, max_n=args.max_n, mode=args.mode, smoothing=args.smoothing, tokenizer=tokenizer)
        scores = {f"bleu_{args.max_n}": score * 100.0}
        if args.per_example:
            per_example = {
                f"bleu_{args.max_n}": [
                    metrics.bleu([p], max_n=args.max_n, mode="sentence", smoothing=args.smoothing, tokenizer=tokenizer)
                    for p in pairs
                ]
            }
    elif args.metric in ("rouge1", "rouge2"):
        n = 1 if args.metric == "rouge1" else 2
        score = metrics.rouge_n(pairs, n, use_stem=args.stem, tokenizer=tokenizer)
        scores = {f"rouge_{n}": score * 100.0}
        if args.per_example:
            per_example = {f"rouge_{n}": [metrics.rouge_n([p], n, use_stem=args.stem, tokenizer=tokenizer) for p in pairs]}
    elif args.metric == "rougeL":
        score = metrics.rouge_l(pairs, use_stem=args.stem, tokenizer=tokenizer)
        scores = {"rouge_l": score * 100.0}
        if args.per_example:
            per_example = {"rouge_l": [metrics.rouge_l([p], use_stem=args.stem, tokenizer=tokenizer) for p in pairs]}
    elif args.metric == "meteor":
        score = metrics.meteor_basic(pairs, tokenizer=tokenizer)
        scores = {"meteor": score * 100.0}
        notes = (metrics.METEOR_NOTE,)
        if args.per_example:
            per_example = {"meteor": [metrics.meteor_basic([p], tokenizer=tokenizer) for p in pairs]}
    elif args.metric == "distinct":
        score = metrics.distinct_n([p.hypothesis for p in pairs], args.n, tokenizer=tokenizer)
        scores = {f"distinct_{args.n}": score * 100.0}
        notes = ("distinct ignores references",)
    elif args.metric == "em_f1":
        em, f1 = metrics.squad_em_f1(pairs)
        scores = {"em": em * 100.0, "f1": f1 * 100.0}
        if args.per_example:
            per_example = {
                "em": [metrics.squad_em_f1([p])[0] for p in pairs],
                "f1": [metrics.squad_em_f1([p])[1] for p in pairs],
            }
    elif args.metric == "combined":
        if args.inform is None or args.success is None:
            raise ForgeError("--metric combined requires --inform and --success")
        bleu_x100 = args.bleu
        if bleu_x100 is None:
            bleu_x100 = metrics.bleu(pairs, max_n=4, mode="corpus", smoothing="none", tokenizer=tokenizer) * 100.0
        scores = {
            "combined": metrics.combined_score(bleu_x100, args.inform, args.success),
            "bleu_4": bleu_x100,
            "inform": args.inform,
            "success": args.success,
        }
    else:
        raise ForgeError(f"unknown metric {args.metric!r}")

    report = metrics.EvalReport(scores=scores, count=len(pairs), per_example=per_example, notes=notes)
    _emit(report.to_dict())
    return EXIT_OK


def cmd_stats(args) -> int:
    paths = _expand_globs(args.inputs)
    per_dataset: dict[str, dict] = {}
    total_count = 0
    total_in = 0
    total_out = 0
    for path in paths:
        for _, ex in _read_examples(path):
            bucket = per_dataset.setdefault(ex.dataset, {"count": 0, "input_words": 0, "output_words": 0})
            bucket["count"] += 1
            bucket["input_words"] += len(ex.input.split())
            bucket["output_words"] += len(ex.output.split())
            total_count += 1
            total_in += len(ex.input.split())
            total_out += len(ex.output.split())

    def summarize(count: int, input_words: int, output_words: int) -> dict:
        return {
            "count": count,
            "mean_input_words": round(input_words / count, 4) if count else None,
            "mean_output_words": round(output_words / count, 4) if count else None,
        }

    _emit(
        {
            "datasets": {
                name: summarize(b["count"], b["input_words"], b["output_words"])
                for name, b in sorted(per_dataset.items())
            },
            "total": summarize(total_count, total_in, total_out),
        }
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvpforge",
        description="Corpus engineering for multi-task text-to-text generation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"run seed (default {SEED_ENV_VAR} or {DEFAULT_SEED})")
    common.add_argument("--workers", type=int, default=1, help="worker processes for shard-parallel stages")

    p_unify = sub.add_parser("unify", parents=[common], help="convert manifest datasets to the unified format")
    p_unify.add_argument("manifest", help="tab-separated manifest file")
    p_unify.add_argument("--out", required=True, help="output directory for per-(dataset, split) shards")
    p_unify.add_argument("--strict", action="store_true", help="treat malformed records as violations (exit 1)")
    p_unify.add_argument(
        "--carve-valid",
        type=float,
        default=0.0,
        metavar="FRACTION",
        help="carve this fraction of train into a valid split for datasets without one",
    )
    p_unify.set_defaults(func=cmd_unify)

    p_dec = sub.add_parser("decontaminate", parents=[common], help="drop training examples overlapping eval sets")
    p_dec.add_argument("--train", required=True, help="glob of training JSONL shards")
    p_dec.add_argument("--eval", action="append", default=[], help="glob of evaluation JSONL shards (repeatable)")
    p_dec.add_argument("--index", action="append", default=[], help="prebuilt .ngix index files (repeatable)")
    p_dec.add_argument("--save-indexes", default=None, metavar="DIR", help="persist each eval set's index here")
    p_dec.add_argument("--out", required=True, help="output path for the filtered JSONL")
    p_dec.add_argument("--percentile", type=float, default=5.0)
    p_dec.add_argument("--max-order", type=int, default=13)
    p_dec.add_argument("--min-order", type=int, default=1)
    p_dec.set_defaults(func=cmd_decontaminate)

    p_mix = sub.add_parser("mix", parents=[common], help="emit a temperature-scaled mixture stream")
    p_mix.add_argument("spec", help="mixture spec JSON")
    p_mix.add_argument("--out", required=True, help="output file, or directory with --shard-size")
    p_mix.add_argument("--shard-size", type=int, default=None, help="lines per part-NNNNN.jsonl shard")
    p_mix.add_argument("--task", default=None, help="restrict to one task family's members")
    p_mix.set_defaults(func=cmd_mix)

    p_eval = sub.add_parser("evaluate", parents=[common], help="score hypotheses against references")
    p_eval.add_argument("--hyp", required=True, help="JSONL of {id, text}")
    p_eval.add_argument("--ref", required=True, help="JSONL of {id, texts}")
    p_eval.add_argument(
        "--metric",
        required=True,
        choices=["bleu", "rouge1", "rouge2", "rougeL", "meteor", "distinct", "em_f1", "combined"],
    )
    p_eval.add_argument("--max-n", type=int, default=4)
    p_eval.add_argument("--mode", choices=["corpus", "sentence"], default="corpus")
    p_eval.add_argument("--smoothing", choices=["none", "method7"], default="none")
    p_eval.add_argument("--n", type=int, default=1, help="order for distinct")
    p_eval.add_argument("--stem", action="store_true", help="stem tokens for ROUGE")
    p_eval.add_argument("--tokenizer", choices=["simple", "ptb"], default="simple")
    p_eval.add_argument("--inform", type=float, default=None)
    p_eval.add_argument("--success", type=float, default=None)
    p_eval.add_argument("--bleu", type=float, default=None, help="precomputed BLEU (x100) for the combined score")
    p_eval.add_argument("--per-example", action="store_true")
    p_eval.set_defaults(func=cmd_evaluate)

    p_stats = sub.add_parser("stats", parents=[common], help="per-dataset corpus statistics")
    p_stats.add_argument("inputs", nargs="+", help="globs of unified JSONL shards")
    p_stats.set_defaults(func=cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        sys.stderr.write("error: --workers must be >= 1\n")
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except (EmptyInputError, SchemaError, ForgeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
