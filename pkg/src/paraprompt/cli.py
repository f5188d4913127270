"""Pipeline command line: label -> index -> generate -> eval, plus params.

Batch and non-interactive. Every command is deterministic given the
config, the seed, and the mock backend, and each run writes a
resolved-config snapshot beside its outputs so results can be reproduced.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import backend as backend_mod
from . import dataio, novelty, paramcount, promptkit, retrieval
from .metrics import EvalRecord, evaluate_all, report_csv, report_text
from .textcore import NormalizationConfig, normalize, render

GENERATE_MODES = ("manual", "rapt", "ncrapt", "copy", "ground-truth")

# GPT2 context is 1024; keep n + decode margin inside it by default.
DEFAULT_MAX_PROMPT_TOKENS = 1024 - promptkit.DECODE_MARGIN


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise UsageError(message)


@dataclass
class PipelineConfig:
    train_path: str | None = None
    validation_path: str | None = None
    test_path: str | None = None
    dataset_name: str = "custom"
    data_format: str | None = None
    out_dir: str = "out"
    seed: int = 0
    mode: str = "rapt"
    k: int = 2
    strategy: str = "knn"
    query_class: str = "high"
    exclude_self: str = "auto"
    global_prefix_len: int = promptkit.DEFAULT_GLOBAL_PREFIX_LEN
    class_prefix_len: int = promptkit.DEFAULT_CLASS_PREFIX_LEN
    infix_len: int = promptkit.DEFAULT_INFIX_LEN
    max_prompt_tokens: int = DEFAULT_MAX_PROMPT_TOKENS
    low_max: float = 0.2
    high_min: float = 0.4
    lowercase: bool = True
    unicode_normalize: bool = True
    punctuation_split: bool = True
    collapse_whitespace: bool = True
    generation_url: str = "mock:echo"
    embedding_url: str = "mock:hash"
    embedding_model_name: str = "paraphrase-mpnet-base-v2"
    timeout: float = 30.0
    max_in_flight: int = 4
    retry_limit: int = 2
    semantic: bool = True
    template_path: str | None = None

    def normalization(self) -> NormalizationConfig:
        return NormalizationConfig(
            lowercase=self.lowercase,
            unicode_normalize=self.unicode_normalize,
            punctuation_split=self.punctuation_split,
            collapse_whitespace=self.collapse_whitespace,
        )

    def thresholds(self) -> novelty.NoveltyThresholds:
        return novelty.NoveltyThresholds(low_max=self.low_max, high_min=self.high_min)

    def backend_config(self) -> backend_mod.BackendConfig:
        return backend_mod.BackendConfig(
            generation_url=self.generation_url,
            embedding_url=self.embedding_url,
            embedding_model_name=self.embedding_model_name,
            timeout=self.timeout,
            max_in_flight=self.max_in_flight,
            retry_limit=self.retry_limit,
        )

    def slot_spec(self) -> promptkit.SlotSpec:
        return promptkit.SlotSpec(
            global_prefix_len=self.global_prefix_len,
            class_prefix_len=self.class_prefix_len,
            infix_len=self.infix_len,
        )

    def template(self) -> promptkit.TextTemplate:
        if self.template_path:
            return promptkit.load_template(self.template_path)
        return promptkit.DEFAULT_TEMPLATE


_BOOL_VALUES = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def load_config_file(path: str | Path) -> dict:
    """key=value config lines; # starts a comment, values are typed by field."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8-sig") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    fields = {f.name: f for f in dataclasses.fields(PipelineConfig)}
    typed: dict = {}
    for key, value in values.items():
        if key not in fields:
            raise UsageError(f"{path}: unknown config key {key!r}")
        ftype = fields[key].type
        if ftype in ("bool",):
            if value.lower() not in _BOOL_VALUES:
                raise UsageError(f"{path}: bad boolean for {key}: {value!r}")
            typed[key] = _BOOL_VALUES[value.lower()]
        elif ftype in ("int",):
            typed[key] = int(value)
        elif ftype in ("float",):
            typed[key] = float(value)
        else:
            typed[key] = value if value != "" else None
    return typed


def write_config_snapshot(config: PipelineConfig, out_dir: Path, command: str) -> None:
    lines = [f"# resolved config for: {command}"]
    for f in dataclasses.fields(PipelineConfig):
        value = getattr(config, f.name)
        lines.append(f"{f.name}={'' if value is None else value}")
    dataio.atomic_write_text(out_dir / f"resolved_config_{command}.txt", "\n".join(lines) + "\n")


def _require(config: PipelineConfig, attr: str, flag: str) -> str:
    value = getattr(config, attr)
    if not value:
        raise UsageError(f"{flag} is required for this command")
    return value


def _load_split(config: PipelineConfig, path: str, name: str) -> dataio.DatasetSplit:
    return dataio.load_pairs(path, fmt=config.data_format, name=name)


def cmd_label(config: PipelineConfig) -> int:
    """Label the training pairs with TER-based novelty classes."""
    train_path = _require(config, "train_path", "--train")
    out_dir = Path(config.out_dir)
    split = _load_split(config, train_path, "train")
    result = novelty.label_dataset(split.pairs, config.normalization(), config.thresholds())
    dataio.write_jsonl(out_dir / "labeled.jsonl", (lp.as_dict() for lp in result.labeled))
    dataio.atomic_write_text(
        out_dir / "labeled_meta.json", json.dumps(result.metadata(), indent=2) + "\n"
    )
    write_config_snapshot(config, out_dir, "label")
    meta = result.metadata()
    print(f"labeled {len(result.labeled)} pairs -> {out_dir / 'labeled.jsonl'}")
    print(f"histogram: {meta['histogram']} (rejected: {meta['rejected']})")
    return 0


def cmd_index(config: PipelineConfig) -> int:
    """Embed training sources and write the binary embedding file + sidecar."""
    train_path = _require(config, "train_path", "--train")
    out_dir = Path(config.out_dir)
    split = _load_split(config, train_path, "train")
    if not split.pairs:
        raise dataio.DataFormatError(train_path, None, "no pairs to index")
    embedder = backend_mod.make_embedding_backend(config.backend_config())
    vectors = embedder.embed([p.source for p in split.pairs])
    entries = [(p.id, vec) for p, vec in zip(split.pairs, vectors)]
    emb_path = out_dir / "embeddings.bin"
    ids_path = out_dir / "embeddings.ids.jsonl"
    retrieval.write_embeddings_binary(emb_path, ids_path, entries)
    index = retrieval.build_index(
        [(p, vec) for p, vec in zip(split.pairs, vectors)]
    )
    write_config_snapshot(config, out_dir, "index")
    print(f"indexed {len(index)} vectors of dim {index.dim} -> {emb_path}")
    return 0


def _load_index(config: PipelineConfig, split: dataio.DatasetSplit) -> retrieval.RetrievalIndex:
    out_dir = Path(config.out_dir)
    emb_path = out_dir / "embeddings.bin"
    ids_path = out_dir / "embeddings.ids.jsonl"
    if not emb_path.exists():
        raise dataio.DataFormatError(emb_path, None, "embedding file missing; run the index command first")
    entries = retrieval.load_embeddings_binary(emb_path, ids_path)
    by_id = {p.id: p for p in split.pairs}
    missing = [record_id for record_id, _ in entries if record_id not in by_id]
    if missing:
        raise dataio.DataFormatError(
            emb_path, None, f"embeddings reference unknown train ids (first: {missing[0]!r})"
        )
    return retrieval.build_index([(by_id[rid], vec) for rid, vec in entries])


def _novelty_by_id(config: PipelineConfig, split: dataio.DatasetSplit) -> dict[str, novelty.NoveltyClass]:
    labeled_path = Path(config.out_dir) / "labeled.jsonl"
    if labeled_path.exists():
        out = {}
        with open(labeled_path, "r", encoding="utf-8-sig") as fh:
            for line in fh:
                if line.strip():
                    lp = novelty.labeled_pair_from_dict(json.loads(line))
                    out[lp.pair.id] = lp.novelty
        return out
    result = novelty.label_dataset(split.pairs, config.normalization(), config.thresholds())
    return {lp.pair.id: lp.novelty for lp in result.labeled}


def cmd_generate(config: PipelineConfig) -> int:
    """Assemble prompts for the test inputs and collect completions."""
    if config.mode not in GENERATE_MODES:
        raise UsageError(f"mode must be one of {GENERATE_MODES}, got {config.mode!r}")
    test_path = _require(config, "test_path", "--test")
    out_dir = Path(config.out_dir)
    cfg_norm = config.normalization()
    template = config.template()
    inputs = _load_split(config, test_path, "test")
    rows: list[dict] = []

    if config.mode in ("copy", "ground-truth"):
        for pair in inputs.pairs:
            output = pair.source if config.mode == "copy" else pair.target
            rows.append({"id": pair.id, "prompt_n": 0, "output": output, "mode": config.mode})
        dataio.write_generations(out_dir / "generations.jsonl", rows)
        write_config_snapshot(config, out_dir, "generate")
        print(f"wrote {len(rows)} {config.mode} pseudo-generations")
        return 0

    gen_backend = backend_mod.make_generation_backend(config.backend_config())
    query_class = novelty.NoveltyClass.from_label(config.query_class)
    spec = config.slot_spec()
    if config.mode == "ncrapt":
        spec = spec.with_all_classes()

    index = None
    classes_by_id: dict[str, novelty.NoveltyClass] = {}
    query_vectors = None
    exclude_self = False
    if config.mode in ("rapt", "ncrapt"):
        train_path = _require(config, "train_path", "--train")
        train = _load_split(config, train_path, "train")
        index = _load_index(config, train)
        if len(index) == 0:
            print("warning: retrieval index is empty; layouts degrade to 0 examples")
        if config.mode == "ncrapt":
            classes_by_id = _novelty_by_id(config, train)
        embedder = backend_mod.make_embedding_backend(config.backend_config())
        query_vectors = embedder.embed([p.source for p in inputs.pairs])
        exclude_self = (
            config.exclude_self == "always"
            or (config.exclude_self == "auto" and config.train_path == config.test_path)
        )

    requests_list: list[backend_mod.GenerationRequest] = []
    prompt_meta: list[dict] = []
    for i, pair in enumerate(inputs.pairs):
        x = normalize(pair.source, cfg_norm)
        if not x:
            prompt_meta.append({"id": pair.id, "skip": "empty source after normalization"})
            continue
        dropped = 0
        if config.mode == "manual":
            layout = promptkit.assemble_manual(x, template)
        else:
            exclude = {pair.id} if exclude_self else set()
            if config.strategy == "random":
                hits = retrieval.query_random(
                    index, query_vectors[i], config.k, exclude, seed=config.seed + i
                )
                hits.sort(key=lambda pair_sim: pair_sim[1], reverse=True)
            else:
                hits = retrieval.query_knn(index, query_vectors[i], config.k, exclude)
            ascending = list(reversed(hits))
            examples = [
                promptkit.PromptExample(
                    source=normalize(record.pair.source, cfg_norm),
                    target=normalize(record.pair.target, cfg_norm),
                    similarity=sim,
                    novelty=classes_by_id.get(record.id),
                    id=record.id,
                )
                for record, sim in ascending
            ]
            if config.mode == "rapt":
                assemble = lambda ex: promptkit.assemble_rapt(x, ex, spec)
            else:
                assemble = lambda ex: promptkit.assemble_ncrapt(x, ex, query_class, spec)
            layout, dropped = promptkit.fit_examples_to_budget(
                assemble, examples, gen_backend.count_tokens, config.max_prompt_tokens
            )
        prompt = promptkit.render_text(layout, template)
        length = promptkit.layout_length(layout, gen_backend.count_tokens)
        requests_list.append(
            backend_mod.GenerationRequest(
                prompt=prompt,
                max_new_tokens=promptkit.DECODE_MARGIN,
                stop=("\n",),
                request_id=pair.id,
                layout_json=promptkit.layout_to_json(layout),
            )
        )
        meta = {"id": pair.id, "prompt_n": length.prompt_tokens, "prompt": prompt}
        if config.mode != "manual":
            meta["examples"] = [e.id for e in layout.examples]
        if dropped:
            meta["dropped_examples"] = dropped
        prompt_meta.append(meta)

    responses = backend_mod.generate_batch(
        gen_backend, requests_list, max_in_flight=config.max_in_flight
    )
    resp_iter = iter(responses)
    infix_class = query_class if config.mode == "ncrapt" else None
    for meta in prompt_meta:
        if "skip" in meta:
            rows.append({"id": meta["id"], "prompt_n": 0, "output": "", "error": meta["skip"]})
            continue
        response = next(resp_iter)
        row = {"id": meta["id"], "prompt_n": meta["prompt_n"], "mode": config.mode}
        if config.mode != "manual":
            # soft slot spans have no canonical text; the prompt crossed
            # the wire through the template's stand-in strings
            row["discrete_render"] = True
            row["examples"] = meta["examples"]
        try:
            tokens = backend_mod.parse_completion(
                meta["prompt"] + response.text, template, infix_class, cfg_norm
            )
            row["output"] = render(tokens)
        except backend_mod.CompletionParseError as err:
            row["output"] = ""
            row["error"] = str(err)
        if "dropped_examples" in meta:
            row["dropped_examples"] = meta["dropped_examples"]
        rows.append(row)

    dataio.write_generations(out_dir / "generations.jsonl", rows)
    write_config_snapshot(config, out_dir, "generate")
    print(f"wrote {len(rows)} generations ({config.mode}) -> {out_dir / 'generations.jsonl'}")
    return 0


def cmd_eval(config: PipelineConfig) -> int:
    """Score generations against the test split's ground truths."""
    test_path = _require(config, "test_path", "--test")
    out_dir = Path(config.out_dir)
    cfg_norm = config.normalization()
    split = _load_split(config, test_path, "test")
    generations = dataio.load_generations(out_dir / "generations.jsonl")
    by_id = {p.id: p for p in split.pairs}

    records: list[EvalRecord] = []
    texts: list[tuple[str, str]] = []
    skipped_no_reference = 0
    for row in generations:
        pair = by_id.get(str(row["id"]))
        if pair is None:
            raise dataio.DataFormatError(
                out_dir / "generations.jsonl", None,
                f"generation id {row['id']!r} not present in {test_path}",
            )
        if not pair.target:
            skipped_no_reference += 1
            continue
        records.append(
            EvalRecord(
                source=normalize(pair.source, cfg_norm),
                prediction=normalize(str(row["output"]), cfg_norm),
                references=(normalize(pair.target, cfg_norm),),
            )
        )
        texts.append((pair.source, str(row["output"])))
    if not records:
        raise dataio.DataFormatError(
            out_dir / "generations.jsonl", None, "nothing to evaluate"
        )

    vector_pairs = None
    if config.semantic:
        embedder = backend_mod.make_embedding_backend(config.backend_config())
        source_vecs = embedder.embed([src for src, _ in texts])
        # Empty predictions have no meaningful embedding; reuse an
        # all-zero vector so they are excluded and tallied by the metric.
        pred_texts = [pred for _, pred in texts]
        nonempty = [t for t in pred_texts if t]
        embedded = iter(embedder.embed(nonempty)) if nonempty else iter(())
        pred_vecs = [next(embedded) if t else source_vecs[0] * 0.0 for t in pred_texts]
        vector_pairs = list(zip(source_vecs, pred_vecs))

    report = evaluate_all(records, vector_pairs, cfg_norm)
    if skipped_no_reference:
        report.diagnostics["missing_reference_skipped"] = skipped_no_reference
    label = str(generations[0].get("mode", config.mode))
    text = report_text(report, label=label)
    dataio.atomic_write_text(out_dir / "report.txt", text)
    dataio.atomic_write_text(out_dir / "report.csv", report_csv(report, label=label))
    write_config_snapshot(config, out_dir, "eval")
    print(text, end="")
    return 0


def cmd_params(args: argparse.Namespace) -> int:
    """Print the trainable-parameter table for the chosen model shapes."""
    if args.shape:
        shapes = []
        for name in args.shape:
            if name not in paramcount.PRESETS:
                raise UsageError(
                    f"unknown shape {name!r}; presets: {sorted(paramcount.PRESETS)}"
                )
            shapes.append(paramcount.PRESETS[name])
    else:
        shapes = [paramcount.GPT2_MEDIUM, paramcount.GPT2_LARGE]
    if args.layers or args.width:
        if not (args.layers and args.width):
            raise UsageError("--layers and --width must be given together")
        shapes = [
            paramcount.ModelShape(
                name=f"custom-L{args.layers}-d{args.width}",
                layers=args.layers,
                width=args.width,
            )
        ]
    table = paramcount.report_table(shapes)
    print(table.render_text(), end="")
    if args.out:
        out_dir = Path(args.out)
        dataio.atomic_write_text(out_dir / "params.txt", table.render_text())
        dataio.atomic_write_text(out_dir / "params.csv", table.render_csv())
    return 0


def cmd_validate(config: PipelineConfig) -> int:
    """Check loaded split sizes against the published table."""
    splits = []
    for name, path in (
        ("train", config.train_path),
        ("validation", config.validation_path),
        ("test", config.test_path),
    ):
        if path:
            splits.append(_load_split(config, path, name))
    if not splits:
        raise UsageError("give at least one of --train/--validation/--test")
    report = dataio.validate_split_sizes(splits, config.dataset_name)
    print(report.render(), end="")
    return 0


def cmd_pipeline(config: PipelineConfig) -> int:
    cmd_label(config)
    cmd_index(config)
    cmd_generate(config)
    return cmd_eval(config)


def _add_data_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--train", dest="train_path")
    parser.add_argument("--validation", dest="validation_path")
    parser.add_argument("--test", dest="test_path")
    parser.add_argument("--dataset-name", dest="dataset_name")
    parser.add_argument("--format", dest="data_format", choices=("jsonl", "tsv"))


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config")
    parser.add_argument("--out", dest="out_dir")
    parser.add_argument("--seed", type=int)
    for flag in ("lowercase", "unicode-normalize", "punctuation-split", "collapse-whitespace"):
        parser.add_argument(
            f"--normalization-{flag}",
            dest=flag.replace("-", "_"),
            action=argparse.BooleanOptionalAction,
        )


def build_parser() -> _Parser:
    parser = _Parser(prog="paraprompt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, needs_generation in (
        ("label", False),
        ("index", False),
        ("generate", True),
        ("eval", False),
        ("validate", False),
        ("pipeline", True),
    ):
        p = sub.add_parser(name)
        _add_common_flags(p)
        _add_data_flags(p)
        p.add_argument("--low-max", dest="low_max", type=float)
        p.add_argument("--high-min", dest="high_min", type=float)
        p.add_argument("--generation-url", dest="generation_url")
        p.add_argument("--embedding-url", dest="embedding_url")
        p.add_argument("--embedding-model", dest="embedding_model_name")
        p.add_argument("--timeout", type=float)
        p.add_argument("--max-in-flight", dest="max_in_flight", type=int)
        p.add_argument("--retry-limit", dest="retry_limit", type=int)
        p.add_argument("--template", dest="template_path")
        p.add_argument("--semantic", action=argparse.BooleanOptionalAction)
        if needs_generation:
            p.add_argument("--mode", choices=GENERATE_MODES)
            p.add_argument("--k", type=int)
            p.add_argument("--strategy", choices=("knn", "random"))
            p.add_argument("--query-class", dest="query_class", choices=("low", "medium", "high"))
            p.add_argument("--exclude-self", dest="exclude_self", choices=("auto", "always", "never"))
            p.add_argument("--global-prefix-len", dest="global_prefix_len", type=int)
            p.add_argument("--class-prefix-len", dest="class_prefix_len", type=int)
            p.add_argument("--infix-len", dest="infix_len", type=int)
            p.add_argument("--max-prompt-tokens", dest="max_prompt_tokens", type=int)

    params = sub.add_parser("params")
    params.add_argument("--shape", action="append", choices=sorted(paramcount.PRESETS))
    params.add_argument("--layers", type=int)
    params.add_argument("--width", type=int)
    params.add_argument("--out")
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    field_names = {f.name for f in dataclasses.fields(PipelineConfig)}
    for key, value in vars(args).items():
        if key in field_names and value is not None:
            values[key] = value
    try:
        return PipelineConfig(**values)
    except (TypeError, ValueError) as err:
        raise UsageError(str(err)) from err


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "params":
            return cmd_params(args)
        config = resolve_config(args)
        handler = {
            "label": cmd_label,
            "index": cmd_index,
            "generate": cmd_generate,
            "eval": cmd_eval,
            "validate": cmd_validate,
            "pipeline": cmd_pipeline,
        }[args.command]
        return handler(config)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except (dataio.DataFormatError, retrieval.IndexBuildError, FileNotFoundError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2
    except backend_mod.BackendError as err:
        print(f"backend error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
