"""End-to-end pipeline: curate -> vocab -> gen -> train -> embed ->
retrieve -> eval, plus the ablation driver and run comparison.

Every stage is idempotent: its outputs are cached under a fingerprint of
the resolved config plus its input files, so re-running with unchanged
inputs reuses the previous outputs byte for byte. The manifest written
at the end contains only deterministic content (config, fingerprints,
relative output paths); wall-clock timings and cache-hit flags go to a
separate ``timings.json`` because they vary run to run.
"""

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import yaml

from . import __version__, curate, encoder, evaluate, pretrain, retrieval, wordpiece
from .errors import DataValidationError
from .hashing import fingerprint_bytes, fingerprint_file
from .ingest import (
    RejectedLine,
    make_pair,
    parse_aligned_tsv,
    parse_passages_tsv,
    parse_qa_jsonl,
    write_aligned_tsv,
    write_rejects_report,
)
from .xemb import read_xemb, write_xemb

MANIFEST_NAME = "manifest.json"
TIMINGS_NAME = "timings.json"

# Reference full-scale settings documented for provenance; this toolkit
# does not execute them.
DEFAULT_PROVENANCE = (
    "Full-scale reference settings (documented, not executed): masked-LM "
    "post-training with Adam, lr 2e-5, weight decay 0.01, warmup 10000, "
    "500000 steps at sequence length 128 (batch 32) plus 100000 steps at "
    "length 512 (batch 8); translation-LM post-training 300000 steps "
    "(batch 16); random seed 12345."
)

DEFAULT_CONFIG: dict[str, Any] = {
    "label": "",
    "language_pair": {"low": "und", "high": "en"},
    "data": {
        "low_pairs": "",
        "high_pairs": "",
        "train_qa": "",
        "eval_qa": "",
        "passages": "",
        "base_vocab": "",
        "donor_lexicon": "",
    },
    "curate": {
        "scorer": "bow",
        "low_translator": "identity",
        "high_translator": "identity",
    },
    "thresholds": {"low": 0.7, "high": 0.8},
    "seeds": {"global": 12345},
    "chunk_lens": [128, 512],
    "tlm_max_len": 256,
    "mask_rate": 0.15,
    "k_values": [10, 20],
    "encoder": {
        "embed_dim": 128,
        "feature_dim": 65536,
        "lr": 0.5,
        "batch": 8,
        "steps": 2000,
    },
    "augment": {"translator": "none", "count": 0},
    "ablation": {"mlm_only": False},
    "eval": {"matchers": ["string", "regex"]},
    "provenance": DEFAULT_PROVENANCE,
}

_PATH_KEYS = ("low_pairs", "high_pairs", "train_qa", "eval_qa", "passages",
              "base_vocab", "donor_lexicon")


def _merge(defaults: dict, overrides: dict, where: str = "") -> dict:
    out = {}
    for key, default in defaults.items():
        if key in overrides:
            value = overrides[key]
            if isinstance(default, dict):
                if not isinstance(value, dict):
                    raise DataValidationError(f"config key {where}{key} must be a mapping")
                out[key] = _merge(default, value, f"{where}{key}.")
            else:
                out[key] = value
        else:
            out[key] = default
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise DataValidationError(
            f"unknown config keys: {', '.join(sorted(where + k for k in unknown))}"
        )
    return out


def _resolve_translator_spec(spec: str, base_dir: Path) -> str:
    if spec.startswith("dict:"):
        return "dict:" + str((base_dir / spec[5:]).resolve())
    return spec


def load_config(path: str | Path, seed_override: int | None = None) -> dict:
    """Load a YAML config, merge defaults, resolve paths, validate."""
    path = Path(path)
    raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict):
        raise DataValidationError(f"{path}: config root must be a mapping")
    cfg = _merge(DEFAULT_CONFIG, raw)
    base = path.parent.resolve()
    for key in _PATH_KEYS:
        value = cfg["data"][key]
        if value:
            cfg["data"][key] = str((base / value).resolve())
    cfg["curate"]["low_translator"] = _resolve_translator_spec(
        cfg["curate"]["low_translator"], base)
    cfg["curate"]["high_translator"] = _resolve_translator_spec(
        cfg["curate"]["high_translator"], base)
    cfg["augment"]["translator"] = _resolve_translator_spec(
        cfg["augment"]["translator"], base)
    if seed_override is not None:
        cfg["seeds"]["global"] = int(seed_override)
    validate_config(cfg)
    return cfg


def run_label(cfg: dict) -> str:
    """Report label; derived so ablation configs differ in one key only."""
    if cfg["label"]:
        return cfg["label"]
    low = cfg["language_pair"]["low"]
    high = cfg["language_pair"]["high"]
    variant = "mlm" if cfg["ablation"]["mlm_only"] else "mlm+tlm"
    return f"{low}-{high}/{variant}"


def validate_config(cfg: dict) -> None:
    if not 0.0 < cfg["mask_rate"] < 1.0:
        raise DataValidationError("mask_rate must be in (0, 1)")
    ks = cfg["k_values"]
    if sorted(ks) != list(ks) or any(k < 1 for k in ks):
        raise DataValidationError("k_values must be positive and ascending")
    for name in ("embed_dim", "feature_dim", "batch", "steps"):
        if int(cfg["encoder"][name]) < 1:
            raise DataValidationError(f"encoder.{name} must be >= 1")
    for name, value in cfg["thresholds"].items():
        if not 0.0 <= float(value) <= 1.0:
            raise DataValidationError(f"threshold {name} must be in [0, 1]")
    if cfg["tlm_max_len"] < 8:
        raise DataValidationError("tlm_max_len must be >= 8")
    if cfg["curate"]["scorer"] not in ("bow", "column"):
        raise DataValidationError("curate.scorer must be 'bow' or 'column'")


def config_hash(cfg: dict) -> str:
    return fingerprint_bytes(json.dumps(cfg, sort_keys=True).encode("utf-8"))


def config_diff(a: dict, b: dict, prefix: str = "") -> list[str]:
    """Dotted paths of keys whose values differ between two config trees."""
    diffs = []
    for key in sorted(set(a) | set(b)):
        path = f"{prefix}{key}"
        va, vb = a.get(key), b.get(key)
        if isinstance(va, dict) and isinstance(vb, dict):
            diffs.extend(config_diff(va, vb, path + "."))
        elif va != vb:
            diffs.append(path)
    return diffs


def make_translator(spec: str) -> Callable[[str], str] | None:
    if spec in ("", "none"):
        return None
    if spec == "identity":
        return curate.identity_translator
    if spec.startswith("dict:"):
        return curate.load_dict_translator(spec[5:])
    raise DataValidationError(f"unknown translator spec {spec!r}")


@dataclass
class StageRecord:
    name: str
    outputs: dict[str, str]  # relative path -> fingerprint
    cache_hit: bool = False
    seconds: float = 0.0


@dataclass
class RunManifest:
    tool_version: str
    config: dict
    config_hash: str
    inputs: dict[str, str]
    qa_fingerprint: str
    stages: list[StageRecord] = field(default_factory=list)
    status: Any = "ok"

    def stable_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "config": self.config,
            "config_hash": self.config_hash,
            "inputs": self.inputs,
            "qa_fingerprint": self.qa_fingerprint,
            "stages": [{"name": s.name, "outputs": s.outputs} for s in self.stages],
            "status": self.status,
        }

    def output_path(self, stage: str, name: str) -> str | None:
        for record in self.stages:
            if record.name == stage:
                for rel in record.outputs:
                    if Path(rel).name == name:
                        return rel
        return None


def _write_manifest(manifest: RunManifest, out_dir: Path) -> None:
    (out_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest.stable_dict(), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    timings = {
        "stages": {
            s.name: {"seconds": s.seconds, "cache_hit": s.cache_hit}
            for s in manifest.stages
        }
    }
    (out_dir / TIMINGS_NAME).write_text(
        json.dumps(timings, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def read_manifest(path: str | Path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    return json.loads(path.read_text(encoding="utf-8"))


def verify_manifest(path: str | Path) -> list[str]:
    """Paths whose current fingerprint no longer matches the manifest."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    manifest = json.loads(path.read_text(encoding="utf-8"))
    out_dir = path.parent
    bad = []
    for stage in manifest["stages"]:
        for rel, fp in stage["outputs"].items():
            target = out_dir / rel
            if not target.exists() or fingerprint_file(target) != fp:
                bad.append(rel)
    return bad


def _require_file(path: str, stage: str, what: str) -> Path:
    if not path:
        raise DataValidationError(f"stage {stage}: no {what} file configured")
    p = Path(path)
    if not p.exists():
        raise DataValidationError(f"stage {stage}: missing {what} file: {p}")
    return p


class _StageRunner:
    """Runs one named stage with fingerprint-based output caching."""

    def __init__(self, out_dir: Path, cfg: dict):
        self.out_dir = out_dir
        self.cfg = cfg
        self.cfg_hash = config_hash(cfg)
        self.records: list[StageRecord] = []
        self.input_fps: dict[str, str] = {}
        (out_dir / "stages").mkdir(parents=True, exist_ok=True)

    def note_input(self, path: str | Path) -> str:
        fp = fingerprint_file(path)
        # intermediates live under the run directory; keep them relative so
        # manifests from identical runs compare byte-equal
        try:
            key = str(Path(path).relative_to(self.out_dir))
        except ValueError:
            key = str(path)
        self.input_fps[key] = fp
        return fp

    def run(self, name: str, input_paths: list[Path], outputs: list[str],
            compute: Callable[[], None]) -> StageRecord:
        started = time.perf_counter()
        input_fps = [self.note_input(p) for p in input_paths]
        stage_fp = fingerprint_bytes(json.dumps(
            {"config": self.cfg_hash, "inputs": input_fps, "outputs": outputs},
            sort_keys=True).encode("utf-8"))
        marker_path = self.out_dir / "stages" / f"{name}.json"
        record = None
        if marker_path.exists():
            marker = json.loads(marker_path.read_text(encoding="utf-8"))
            if marker.get("fingerprint") == stage_fp:
                existing = {}
                ok = True
                for rel, fp in marker.get("outputs", {}).items():
                    target = self.out_dir / rel
                    if target.exists() and fingerprint_file(target) == fp:
                        existing[rel] = fp
                    else:
                        ok = False
                        break
                if ok:
                    record = StageRecord(name, existing, cache_hit=True,
                                         seconds=time.perf_counter() - started)
        if record is None:
            compute()
            out_fps = {}
            for rel in outputs:
                target = self.out_dir / rel
                if not target.exists():
                    raise DataValidationError(f"stage {name} did not produce {rel}")
                out_fps[rel] = fingerprint_file(target)
            marker_path.write_text(json.dumps(
                {"fingerprint": stage_fp, "outputs": out_fps},
                sort_keys=True, indent=2) + "\n", encoding="utf-8")
            record = StageRecord(name, out_fps, cache_hit=False,
                                 seconds=time.perf_counter() - started)
        self.records.append(record)
        return record


def _tokenizer_from_file(path: str | Path) -> wordpiece.TokenizerModel:
    return wordpiece.TokenizerModel(wordpiece.load_vocab(path))


def _passage_tokens(model: wordpiece.TokenizerModel, title: str, text: str) -> list[str]:
    return wordpiece.wordpiece_tokenize(title + " " + text, model)


def run_pipeline(cfg: dict, out_dir: str | Path) -> RunManifest:
    """Execute all stages in order; returns the written manifest.

    TLM generation is skipped when ``ablation.mlm_only`` is set; nothing
    else changes between the two variants. A failing stage aborts and
    leaves a partial manifest naming it.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runner = _StageRunner(out_dir, cfg)
    data = cfg["data"]
    low_lang = cfg["language_pair"]["low"]
    high_lang = cfg["language_pair"]["high"]
    seed = int(cfg["seeds"]["global"])

    qa_fp = ""
    if data["eval_qa"] and Path(data["eval_qa"]).exists():
        qa_fp = fingerprint_file(data["eval_qa"])
    manifest = RunManifest(
        tool_version=__version__,
        config=cfg,
        config_hash=config_hash(cfg),
        inputs={},
        qa_fingerprint=qa_fp,
    )

    current = "curate"
    try:
        # curate: filter both bilingual corpora, pivot-join, dedup
        low_path = _require_file(data["low_pairs"], "curate", "low-pivot pairs")
        high_path = _require_file(data["high_pairs"], "curate", "high-pivot pairs")

        def do_curate():
            low = parse_aligned_tsv(low_path, low_lang, "en")
            high = parse_aligned_tsv(high_path, high_lang, "en")
            if cfg["curate"]["scorer"] == "column":
                f_low = curate.filter_on_column(low.records, float(cfg["thresholds"]["low"]))
                f_high = curate.filter_on_column(high.records, float(cfg["thresholds"]["high"]))
            else:
                t_low = make_translator(cfg["curate"]["low_translator"]) or curate.identity_translator
                t_high = make_translator(cfg["curate"]["high_translator"]) or curate.identity_translator
                f_low = curate.similarity_filter(low.records, curate.BOW_SCORER, t_low,
                                                 float(cfg["thresholds"]["low"]))
                f_high = curate.similarity_filter(high.records, curate.BOW_SCORER, t_high,
                                                  float(cfg["thresholds"]["high"]))
            write_aligned_tsv(curate.dedup(f_low.kept), out_dir / "filtered_low.tsv")
            write_aligned_tsv(curate.dedup(f_high.kept), out_dir / "filtered_high.tsv")
            joined = curate.pivot_join(curate.dedup(f_low.kept), curate.dedup(f_high.kept))
            joined = curate.dedup(joined)
            curate.write_trijoin_tsv(joined, out_dir / "tri.tsv")
            aligned = []
            for rec in joined:
                sims = [s for s in (rec.low_similarity, rec.high_similarity) if s is not None]
                aligned.append(make_pair(rec.low_text, rec.high_text, low_lang, high_lang,
                                         min(sims) if len(sims) == 2 else None))
            write_aligned_tsv(aligned, out_dir / "aligned.tsv")
            mono = sorted({p.text_a for p in curate.dedup(f_low.kept)})
            (out_dir / "mono_low.txt").write_text(
                "".join(line + "\n" for line in mono), encoding="utf-8")
            write_rejects_report(
                [RejectedLine(0, reason, p.text_a)
                 for p, reason in f_low.rejects + f_high.rejects],
                out_dir / "curate_rejects.tsv")

        runner.run("curate", [low_path, high_path],
                   ["filtered_low.tsv", "filtered_high.tsv", "tri.tsv",
                    "aligned.tsv", "mono_low.txt", "curate_rejects.tsv"],
                   do_curate)

        # vocab: harvest unknown whole words, extend the base vocabulary
        current = "vocab"
        base_vocab_path = _require_file(data["base_vocab"], "vocab", "base vocabulary")
        lexicon_path = None
        if data["donor_lexicon"]:
            lexicon_path = _require_file(data["donor_lexicon"], "vocab", "donor lexicon")

        def do_vocab():
            base = wordpiece.load_vocab(base_vocab_path)
            model = wordpiece.TokenizerModel(base)
            if lexicon_path is not None:
                segmenter = wordpiece.lexicon_segmenter(wordpiece.load_lexicon(lexicon_path))
            else:
                segmenter = wordpiece.whitespace_segmenter
            sentences = (out_dir / "mono_low.txt").read_text(encoding="utf-8").splitlines()
            harvested = wordpiece.harvest_new_tokens(sentences, segmenter, model)
            (out_dir / "harvested.txt").write_text(
                "".join(t + "\n" for t in harvested), encoding="utf-8")
            extended = wordpiece.extend_vocab(base, harvested)
            wordpiece.save_vocab(extended.vocab, out_dir / "vocab_extended.txt")
            (out_dir / "vocab_stats.json").write_text(json.dumps({
                "base_size": len(base),
                "harvested": len(harvested),
                "added": extended.added,
                "skipped_existing": extended.skipped_existing,
            }, sort_keys=True, indent=2) + "\n", encoding="utf-8")

        vocab_inputs = [out_dir / "mono_low.txt", base_vocab_path]
        if lexicon_path is not None:
            vocab_inputs.append(lexicon_path)
        runner.run("vocab", vocab_inputs,
                   ["harvested.txt", "vocab_extended.txt", "vocab_stats.json"],
                   do_vocab)

        # gen: masked-LM chunks per configured length, translation pairs
        current = "gen"
        mlm_only = bool(cfg["ablation"]["mlm_only"])

        def do_gen():
            model = _tokenizer_from_file(out_dir / "vocab_extended.txt")
            lexicon = None
            if lexicon_path is not None:
                lexicon = wordpiece.load_lexicon(lexicon_path)

            def encode_low(text: str) -> list[int]:
                if lexicon is not None:
                    text = " ".join(wordpiece.segment_longest_match(text, lexicon))
                return wordpiece.encode(text, model)

            sentences = (out_dir / "mono_low.txt").read_text(encoding="utf-8").splitlines()
            docs = [ids for ids in (encode_low(s) for s in sentences) if ids]
            stats = {}
            for chunk_len in cfg["chunk_lens"]:
                result = pretrain.generate_mlm(docs, model.vocab, int(chunk_len),
                                               float(cfg["mask_rate"]), seed)
                pretrain.write_mlm_jsonl(result.examples, out_dir / f"mlm_{chunk_len}.jsonl")
                stats[f"mlm_{chunk_len}"] = {
                    "examples": len(result.examples),
                    "dropped_tails": result.dropped_tails,
                }
            if not mlm_only:
                aligned = parse_aligned_tsv(out_dir / "aligned.tsv", low_lang, high_lang)
                token_pairs, pair_ids = [], []
                for pair in aligned.records:
                    token_pairs.append((encode_low(pair.text_a),
                                        wordpiece.encode(pair.text_b, model)))
                    pair_ids.append(pair.pair_id)
                result = pretrain.tlm_pairs(token_pairs, int(cfg["tlm_max_len"]),
                                            model.vocab, float(cfg["mask_rate"]), seed,
                                            pair_ids=pair_ids)
                pretrain.write_tlm_jsonl(result.examples, out_dir / "tlm.jsonl")
                stats["tlm"] = {
                    "examples": len(result.examples),
                    "skipped_pairs": result.skipped_pairs,
                    "span_mask_counts": [
                        sum(e.span_mask_counts[0] for e in result.examples),
                        sum(e.span_mask_counts[1] for e in result.examples),
                    ],
                }
            (out_dir / "gen_stats.json").write_text(
                json.dumps(stats, sort_keys=True, indent=2) + "\n", encoding="utf-8")

        gen_outputs = [f"mlm_{cl}.jsonl" for cl in cfg["chunk_lens"]] + ["gen_stats.json"]
        gen_inputs = [out_dir / "mono_low.txt", out_dir / "vocab_extended.txt"]
        if not mlm_only:
            gen_outputs.insert(-1, "tlm.jsonl")
            gen_inputs.append(out_dir / "aligned.tsv")
        runner.run("gen", gen_inputs, gen_outputs, do_gen)

        # train: question-passage alignment on the QA training data
        current = "train"
        train_qa_path = _require_file(data["train_qa"], "train", "training QA")

        def do_train():
            model = _tokenizer_from_file(out_dir / "vocab_extended.txt")
            qa = parse_qa_jsonl(train_qa_path)
            enc_cfg = cfg["encoder"]
            feature_dim = int(enc_cfg["feature_dim"])
            pairs, tags = [], []
            skipped = 0
            for ex in qa:
                if not ex.positive_contexts:
                    skipped += 1
                    continue
                ctx = ex.positive_contexts[0]
                pairs.append((
                    encoder.featurize(wordpiece.wordpiece_tokenize(ex.question, model),
                                      feature_dim),
                    encoder.featurize(_passage_tokens(model, ctx.title, ctx.text),
                                      feature_dim),
                ))
                tags.append(ex.language)
            translator = make_translator(cfg["augment"]["translator"])
            augment_count = int(cfg["augment"]["count"])
            if translator is not None and augment_count > 0:
                added = 0
                for ex in qa:
                    if added >= augment_count:
                        break
                    if not ex.positive_contexts:
                        continue
                    ctx = ex.positive_contexts[0]
                    pairs.append((
                        encoder.featurize(
                            wordpiece.wordpiece_tokenize(translator(ex.question), model),
                            feature_dim),
                        encoder.featurize(_passage_tokens(model, ctx.title, ctx.text),
                                          feature_dim),
                    ))
                    tags.append(f"{ex.language}+translated")
                    added += 1
            params = encoder.init_params(feature_dim, int(enc_cfg["embed_dim"]), seed)
            result = encoder.train(params, pairs, float(enc_cfg["lr"]),
                                   int(enc_cfg["batch"]), int(enc_cfg["steps"]),
                                   seed, tags=tags)
            encoder.save_params(result.params, out_dir / "params.npz")
            (out_dir / "train_log.json").write_text(json.dumps({
                "losses": result.losses,
                "examples": len(pairs),
                "skipped_no_context": skipped,
                "batch_composition": result.batch_composition,
            }, sort_keys=True) + "\n", encoding="utf-8")

        runner.run("train", [train_qa_path, out_dir / "vocab_extended.txt"],
                   ["params.npz", "train_log.json"], do_train)

        # embed: export passage and question embeddings
        current = "embed"
        passages_path = _require_file(data["passages"], "embed", "passage collection")
        eval_qa_path = _require_file(data["eval_qa"], "embed", "evaluation QA")

        def do_embed():
            model = _tokenizer_from_file(out_dir / "vocab_extended.txt")
            params = encoder.load_params(out_dir / "params.npz")
            passages = parse_passages_tsv(passages_path).records
            items = [(p.pid, _passage_tokens(model, p.title, p.text)) for p in passages]
            write_xemb(encoder.export_embeddings(params, items, encoder.SIDE_PASSAGE),
                       out_dir / "passages.xemb")
            qa = parse_qa_jsonl(eval_qa_path)
            q_items = [(ex.qid, wordpiece.wordpiece_tokenize(ex.question, model))
                       for ex in qa]
            write_xemb(encoder.export_embeddings(params, q_items, encoder.SIDE_QUESTION),
                       out_dir / "questions.xemb")

        runner.run("embed",
                   [passages_path, eval_qa_path, out_dir / "params.npz",
                    out_dir / "vocab_extended.txt"],
                   ["passages.xemb", "questions.xemb"], do_embed)

        # retrieve: exact top-k runs
        current = "retrieve"

        def do_retrieve():
            passages = parse_passages_tsv(passages_path).records
            index = retrieval.build_index(read_xemb(out_dir / "passages.xemb"), passages)
            queries = read_xemb(out_dir / "questions.xemb")
            run = retrieval.batch_retrieve(index, queries, k=max(cfg["k_values"]))
            retrieval.write_run(run, out_dir / "run.jsonl")

        runner.run("retrieve",
                   [out_dir / "passages.xemb", out_dir / "questions.xemb", passages_path],
                   ["run.jsonl", "run.jsonl.meta.json"], do_retrieve)

        # eval: metrics report
        current = "eval"

        def do_eval():
            run = retrieval.read_run(out_dir / "run.jsonl")
            qa = parse_qa_jsonl(eval_qa_path)
            passages = parse_passages_tsv(passages_path).records
            report = evaluate.evaluate_run(
                run, qa, passages,
                k_values=cfg["k_values"],
                matchers=cfg["eval"]["matchers"],
                label=run_label(cfg),
            )
            (out_dir / "report.json").write_text(
                evaluate.render_report(report, "json"), encoding="utf-8")
            (out_dir / "report.md").write_text(
                evaluate.render_report(report, "markdown"), encoding="utf-8")

        runner.run("eval", [out_dir / "run.jsonl", eval_qa_path, passages_path],
                   ["report.json", "report.md"], do_eval)
    except Exception as exc:
        manifest.stages = runner.records
        manifest.inputs = dict(sorted(runner.input_fps.items()))
        manifest.status = {"failed_stage": current, "error": str(exc)}
        _write_manifest(manifest, out_dir)
        raise

    manifest.stages = runner.records
    manifest.inputs = dict(sorted(runner.input_fps.items()))
    manifest.qa_fingerprint = fingerprint_file(eval_qa_path)
    _write_manifest(manifest, out_dir)
    return manifest


@dataclass
class RunComparison:
    label_a: str
    label_b: str
    config_diff: list[str]
    rows: list[dict]

    def to_dict(self) -> dict:
        return {
            "label_a": self.label_a,
            "label_b": self.label_b,
            "config_diff": self.config_diff,
            "rows": self.rows,
        }


def compare_runs(manifest_a: str | Path, manifest_b: str | Path) -> RunComparison:
    """Side-by-side metric table plus McNemar between two finished runs.

    Refuses to compare runs evaluated on different QA files.
    """
    ma = read_manifest(manifest_a)
    mb = read_manifest(manifest_b)
    if ma["qa_fingerprint"] != mb["qa_fingerprint"]:
        raise DataValidationError(
            "runs were evaluated on different QA files: "
            f"{ma['qa_fingerprint']} vs {mb['qa_fingerprint']}"
        )
    dir_a = Path(manifest_a).parent if Path(manifest_a).is_file() else Path(manifest_a)
    dir_b = Path(manifest_b).parent if Path(manifest_b).is_file() else Path(manifest_b)
    report_a = evaluate.report_from_dict(
        json.loads((dir_a / "report.json").read_text(encoding="utf-8")))
    report_b = evaluate.report_from_dict(
        json.loads((dir_b / "report.json").read_text(encoding="utf-8")))
    blocks_b = {(blk.language, blk.matcher): blk for blk in report_b.blocks}
    rows = []
    for blk in report_a.blocks:
        other = blocks_b.get((blk.language, blk.matcher))
        if other is None:
            continue
        for k in sorted(blk.recall_at):
            if k not in other.recall_at:
                continue
            test = evaluate.mcnemar(blk.hit_vectors[k], other.hit_vectors[k])
            rows.append({
                "language": blk.language,
                "matcher": blk.matcher,
                "k": k,
                "recall_a": blk.recall_at[k],
                "recall_b": other.recall_at[k],
                "rouge1_a": blk.rouge1_at[k].mean_recall,
                "rouge1_b": other.rouge1_at[k].mean_recall,
                "mcnemar": evaluate.mcnemar_to_dict(test),
            })
    return RunComparison(
        label_a=report_a.label,
        label_b=report_b.label,
        config_diff=config_diff(ma["config"], mb["config"]),
        rows=rows,
    )


def render_comparison(comparison: RunComparison, fmt: str = "markdown") -> str:
    if fmt == "json":
        return json.dumps(comparison.to_dict(), sort_keys=True, indent=2) + "\n"
    lines = [f"# Run comparison: {comparison.label_a} vs {comparison.label_b}", ""]
    if comparison.config_diff:
        lines.append("Config differences: " + ", ".join(comparison.config_diff))
    else:
        lines.append("Config differences: none")
    lines.append("")
    header = ["Block", "k", f"R@k {comparison.label_a} (%)",
              f"R@k {comparison.label_b} (%)", f"ROUGE-1 {comparison.label_a} (%)",
              f"ROUGE-1 {comparison.label_b} (%)", "b", "c", "p-value"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for row in comparison.rows:
        test = row["mcnemar"]
        star = "*" if test["p_value"] < 0.05 else ""
        lines.append("| " + " | ".join([
            f"{row['language']}, {row['matcher']}",
            str(row["k"]),
            f"{100.0 * row['recall_a']:.2f}{star}",
            f"{100.0 * row['recall_b']:.2f}",
            f"{100.0 * row['rouge1_a']:.2f}",
            f"{100.0 * row['rouge1_b']:.2f}",
            str(test["b"]),
            str(test["c"]),
            f"{test['p_value']:.4f}",
        ]) + " |")
    return "\n".join(lines) + "\n"
