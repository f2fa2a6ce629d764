"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data validation error,
3 numerical failure.
"""

import json
import sys
from pathlib import Path

import click

from . import __version__, curate as curate_mod, encoder as encoder_mod
from . import evaluate as evaluate_mod, pipeline as pipeline_mod
from . import pretrain as pretrain_mod, retrieval as retrieval_mod
from . import wordpiece as wp
from .errors import DataValidationError, NumericalError
from .ingest import (
    parse_aligned_tsv,
    parse_passages_tsv,
    parse_qa_jsonl,
    write_aligned_tsv,
    write_rejects_report,
)
from .xemb import read_xemb, write_xemb


@click.group()
@click.version_option(version=__version__, prog_name="xlingqa")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Pipeline config file (YAML).")
@click.option("--seed", type=int, default=None, help="Override the global seed.")
@click.option("--out-dir", type=click.Path(), default=None, help="Pipeline output directory.")
@click.pass_context
def cli(ctx, config_path, seed, out_dir):
    """Cross-lingual retrieval experiment toolkit."""
    ctx.obj = {"config": config_path, "seed": seed, "out_dir": out_dir}


def _parse_langs(spec: str) -> tuple[str, str]:
    parts = [p.strip() for p in spec.split(",")]
    if len(parts) != 2 or not all(parts):
        raise click.UsageError(f"expected two comma-separated language codes, got {spec!r}")
    return parts[0], parts[1]


# --- curate -----------------------------------------------------------------

@cli.group()
def curate():
    """Build and filter aligned sentence pairs."""


@curate.command("join")
@click.option("--low", "low_path", required=True, type=click.Path())
@click.option("--high", "high_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--low-langs", default="und,en", show_default=True,
              help="Language codes of the low corpus as text_a,text_b.")
@click.option("--high-langs", default="und,en", show_default=True)
@click.option("--pivot-side", type=click.Choice(["a", "b"]), default="b", show_default=True)
def curate_join(low_path, high_path, out_path, low_langs, high_langs, pivot_side):
    """Pivot-join two bilingual TSVs on their shared pivot sentences."""
    low_a, low_b = _parse_langs(low_langs)
    high_a, high_b = _parse_langs(high_langs)
    low = parse_aligned_tsv(low_path, low_a, low_b)
    high = parse_aligned_tsv(high_path, high_a, high_b)
    joined = curate_mod.pivot_join(low.records, high.records, pivot_side=pivot_side)
    curate_mod.write_trijoin_tsv(joined, out_path)
    click.echo(f"joined {len(low.records)} x {len(high.records)} -> {len(joined)} records "
               f"({low.rejected + high.rejected} rejected input lines)")


@curate.command("filter")
@click.option("--in", "in_path", required=True, type=click.Path())
@click.option("--threshold", type=float, required=True)
@click.option("--scorer", type=click.Choice(["bow", "column"]), default="bow", show_default=True)
@click.option("--translator", default="identity", show_default=True,
              help="identity or dict:<tsv path>.")
@click.option("--langs", default="und,en", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--rejects", "rejects_path", type=click.Path(), default=None,
              help="Where to write the rejects report.")
def curate_filter(in_path, threshold, scorer, translator, langs, out_path, rejects_path):
    """Keep pairs whose similarity clears the threshold."""
    lang_a, lang_b = _parse_langs(langs)
    pairs = parse_aligned_tsv(in_path, lang_a, lang_b)
    if scorer == "column":
        result = curate_mod.filter_on_column(pairs.records, threshold)
    else:
        translate = pipeline_mod.make_translator(translator) or curate_mod.identity_translator
        result = curate_mod.similarity_filter(pairs.records, curate_mod.BOW_SCORER,
                                              translate, threshold)
    write_aligned_tsv(result.kept, out_path)
    if rejects_path:
        from .ingest import RejectedLine
        write_rejects_report(
            [RejectedLine(0, reason, p.text_a) for p, reason in result.rejects],
            rejects_path)
    click.echo(f"kept {len(result.kept)}/{len(pairs.records)} pairs at threshold {threshold}")


@curate.command("sample")
@click.option("--in", "in_path", required=True, type=click.Path())
@click.option("--n", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=12345, show_default=True)
@click.option("--langs", default="und,en", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def curate_sample(in_path, n, seed, langs, out_path):
    """Draw a calibration sample as a review sheet with a verdict column."""
    lang_a, lang_b = _parse_langs(langs)
    pairs = parse_aligned_tsv(in_path, lang_a, lang_b)
    sample = curate_mod.calibration_sample(pairs.records, n, seed)
    curate_mod.write_review_tsv(sample, out_path)
    click.echo(f"sampled {len(sample)} of {len(pairs.records)} pairs")


# --- vocab ------------------------------------------------------------------

@cli.group()
def vocab():
    """Harvest unknown words and extend a vocabulary."""


@vocab.command("harvest")
@click.option("--corpus", required=True, type=click.Path(), help="Text file, one sentence per line.")
@click.option("--donor-lexicon", type=click.Path(), default=None,
              help="Word list for longest-match segmentation; whitespace split if omitted.")
@click.option("--base-vocab", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
def vocab_harvest(corpus, donor_lexicon, base_vocab, out_path):
    """Collect donor words the base model renders as a single UNK."""
    from .ingest import read_text_lines
    base = wp.TokenizerModel(wp.load_vocab(base_vocab))
    if donor_lexicon:
        segmenter = wp.lexicon_segmenter(wp.load_lexicon(donor_lexicon))
    else:
        segmenter = wp.whitespace_segmenter
    harvested = wp.harvest_new_tokens(read_text_lines(corpus), segmenter, base)
    Path(out_path).write_text("".join(t + "\n" for t in harvested), encoding="utf-8")
    click.echo(f"harvested {len(harvested)} tokens")


@vocab.command("extend")
@click.option("--base", "base_path", required=True, type=click.Path())
@click.option("--add", "add_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
def vocab_extend(base_path, add_path, out_path):
    """Append new tokens after the existing ids."""
    base = wp.load_vocab(base_path)
    with open(add_path, "r", encoding="utf-8") as fh:
        new_tokens = [line.rstrip("\n") for line in fh if line.strip()]
    result = wp.extend_vocab(base, new_tokens)
    wp.save_vocab(result.vocab, out_path)
    click.echo(f"vocabulary {len(base)} -> {len(result.vocab)} "
               f"(added {result.added}, skipped {result.skipped_existing})")


# --- gen --------------------------------------------------------------------

@cli.group()
def gen():
    """Generate masked-LM and translation-LM training instances."""


@gen.command("mlm")
@click.option("--corpus", required=True, type=click.Path())
@click.option("--vocab", "vocab_path", required=True, type=click.Path())
@click.option("--chunk-len", type=click.Choice(["128", "512"]), default="128", show_default=True)
@click.option("--rate", type=float, default=0.15, show_default=True)
@click.option("--seed", type=int, default=12345, show_default=True)
@click.option("--lexicon", "lexicon_path", type=click.Path(), default=None,
              help="Pre-segment unspaced text with this word list.")
@click.option("--out", "out_path", required=True, type=click.Path())
def gen_mlm(corpus, vocab_path, chunk_len, rate, seed, lexicon_path, out_path):
    """Chunk a corpus and emit masked training instances."""
    from .ingest import read_text_lines
    model = wp.TokenizerModel(wp.load_vocab(vocab_path))
    lexicon = wp.load_lexicon(lexicon_path) if lexicon_path else None

    def encode(text: str) -> list[int]:
        if lexicon is not None:
            text = " ".join(wp.segment_longest_match(text, lexicon))
        return wp.encode(text, model)

    docs = [ids for ids in (encode(s) for s in read_text_lines(corpus)) if ids]
    result = pretrain_mod.generate_mlm(docs, model.vocab, int(chunk_len), rate, seed)
    pretrain_mod.write_mlm_jsonl(result.examples, out_path)
    click.echo(f"wrote {len(result.examples)} examples "
               f"({result.dropped_tails} short tails dropped)")


@gen.command("tlm")
@click.option("--pairs", "pairs_path", required=True, type=click.Path())
@click.option("--vocab", "vocab_path", required=True, type=click.Path())
@click.option("--max-len", type=int, default=256, show_default=True)
@click.option("--rate", type=float, default=0.15, show_default=True)
@click.option("--seed", type=int, default=12345, show_default=True)
@click.option("--langs", default="und,en", show_default=True)
@click.option("--lexicon", "lexicon_path", type=click.Path(), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def gen_tlm(pairs_path, vocab_path, max_len, rate, seed, langs, lexicon_path, out_path):
    """Emit two masked instances per aligned pair, one per order."""
    lang_a, lang_b = _parse_langs(langs)
    model = wp.TokenizerModel(wp.load_vocab(vocab_path))
    lexicon = wp.load_lexicon(lexicon_path) if lexicon_path else None
    parsed = parse_aligned_tsv(pairs_path, lang_a, lang_b)

    def encode_low(text: str) -> list[int]:
        if lexicon is not None:
            text = " ".join(wp.segment_longest_match(text, lexicon))
        return wp.encode(text, model)

    token_pairs = [(encode_low(p.text_a), wp.encode(p.text_b, model))
                   for p in parsed.records]
    pair_ids = [p.pair_id for p in parsed.records]
    result = pretrain_mod.tlm_pairs(token_pairs, max_len, model.vocab, rate, seed,
                                    pair_ids=pair_ids)
    pretrain_mod.write_tlm_jsonl(result.examples, out_path)
    click.echo(f"wrote {len(result.examples)} examples "
               f"({result.skipped_pairs} pairs skipped)")


# --- encoder ----------------------------------------------------------------

@cli.group(name="encoder")
def encoder_group():
    """Train the dual encoder and export embeddings."""


def _tokens_fn(vocab_path):
    if vocab_path:
        model = wp.TokenizerModel(wp.load_vocab(vocab_path))
        return lambda text: wp.wordpiece_tokenize(text, model)
    return lambda text: text.split()


@encoder_group.command("train")
@click.option("--data", "data_path", required=True, type=click.Path(),
              help="QA JSONL with positive contexts.")
@click.option("--dim", type=int, default=128, show_default=True)
@click.option("--feat-dim", type=int, default=65536, show_default=True)
@click.option("--lr", type=float, default=0.5, show_default=True)
@click.option("--batch", type=int, default=8, show_default=True)
@click.option("--steps", type=int, default=2000, show_default=True)
@click.option("--seed", type=int, default=12345, show_default=True)
@click.option("--vocab", "vocab_path", type=click.Path(), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--log", "log_path", type=click.Path(), default=None)
def encoder_train(data_path, dim, feat_dim, lr, batch, steps, seed, vocab_path,
                  out_path, log_path):
    """Train question-passage alignment with in-batch negatives."""
    tokens = _tokens_fn(vocab_path)
    qa = parse_qa_jsonl(data_path)
    pairs, tags, skipped = [], [], 0
    for ex in qa:
        if not ex.positive_contexts:
            skipped += 1
            continue
        ctx = ex.positive_contexts[0]
        pairs.append((
            encoder_mod.featurize(tokens(ex.question), feat_dim),
            encoder_mod.featurize(tokens(ctx.title + " " + ctx.text), feat_dim),
        ))
        tags.append(ex.language)
    params = encoder_mod.init_params(feat_dim, dim, seed)
    result = encoder_mod.train(params, pairs, lr, batch, steps, seed, tags=tags)
    encoder_mod.save_params(result.params, out_path)
    if log_path:
        Path(log_path).write_text(json.dumps({
            "losses": result.losses,
            "batch_composition": result.batch_composition,
            "skipped_no_context": skipped,
        }, sort_keys=True) + "\n", encoding="utf-8")
    final = result.losses[-1] if result.losses else float("nan")
    click.echo(f"trained on {len(pairs)} pairs for {len(result.losses)} steps "
               f"(final loss {final:.4f}, {skipped} examples without contexts skipped)")


@encoder_group.command("embed")
@click.option("--params", "params_path", required=True, type=click.Path())
@click.option("--passages", "passages_path", type=click.Path(), default=None)
@click.option("--qa", "qa_path", type=click.Path(), default=None)
@click.option("--side", type=click.Choice([encoder_mod.SIDE_QUESTION, encoder_mod.SIDE_PASSAGE]),
              required=True)
@click.option("--vocab", "vocab_path", type=click.Path(), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def encoder_embed(params_path, passages_path, qa_path, side, vocab_path, out_path):
    """Export dense embeddings for passages or questions."""
    if bool(passages_path) == bool(qa_path):
        raise click.UsageError("provide exactly one of --passages or --qa")
    tokens = _tokens_fn(vocab_path)
    params = encoder_mod.load_params(params_path)
    if passages_path:
        records = parse_passages_tsv(passages_path).records
        items = [(p.pid, tokens(p.title + " " + p.text)) for p in records]
    else:
        items = [(ex.qid, tokens(ex.question)) for ex in parse_qa_jsonl(qa_path)]
    matrix = encoder_mod.export_embeddings(params, items, side)
    write_xemb(matrix, out_path)
    click.echo(f"wrote {len(matrix)} x {matrix.dim} embeddings")


# --- retrieve / eval ----------------------------------------------------------

@cli.command("retrieve")
@click.option("--index", "index_path", required=True, type=click.Path(),
              help="Passage embedding file.")
@click.option("--passages", "passages_path", required=True, type=click.Path())
@click.option("--queries", "queries_path", required=True, type=click.Path())
@click.option("--k", type=int, default=20, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def retrieve_cmd(index_path, passages_path, queries_path, k, workers, out_path):
    """Exact top-k retrieval over a passage embedding matrix."""
    passages = parse_passages_tsv(passages_path).records
    index = retrieval_mod.build_index(read_xemb(index_path), passages)
    queries = read_xemb(queries_path)
    run = retrieval_mod.batch_retrieve(index, queries, k=k, n_workers=workers)
    retrieval_mod.write_run(run, out_path)
    click.echo(f"retrieved top-{k} for {len(queries)} queries over {index.size} passages")


@cli.command("eval")
@click.option("--run", "run_path", required=True, type=click.Path())
@click.option("--qa", "qa_path", required=True, type=click.Path())
@click.option("--passages", "passages_path", required=True, type=click.Path())
@click.option("--k", "k_spec", default="10,20", show_default=True,
              help="Comma-separated cutoffs.")
@click.option("--matcher", type=click.Choice(["string", "regex", "both"]),
              default="both", show_default=True)
@click.option("--baseline-run", "baseline_path", type=click.Path(), default=None)
@click.option("--label", default="run", show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="JSON report path.")
@click.option("--md", "md_path", type=click.Path(), default=None,
              help="Markdown report path.")
def eval_cmd(run_path, qa_path, passages_path, k_spec, matcher, baseline_path,
             label, out_path, md_path):
    """Answer-level recall, ROUGE-1, language distribution, significance."""
    try:
        ks = [int(k) for k in k_spec.split(",") if k.strip()]
    except ValueError:
        raise click.UsageError(f"bad --k value {k_spec!r}")
    matchers = ["string", "regex"] if matcher == "both" else [matcher]
    run = retrieval_mod.read_run(run_path)
    qa = parse_qa_jsonl(qa_path)
    passages = parse_passages_tsv(passages_path).records
    baseline = retrieval_mod.read_run(baseline_path) if baseline_path else None
    report = evaluate_mod.evaluate_run(run, qa, passages, k_values=ks,
                                       matchers=matchers, label=label,
                                       baseline=baseline)
    if out_path:
        Path(out_path).write_text(evaluate_mod.render_report(report, "json"),
                                  encoding="utf-8")
    if md_path:
        Path(md_path).write_text(evaluate_mod.render_report(report, "markdown"),
                                 encoding="utf-8")
    for blk in report.blocks:
        recalls = "  ".join(f"R@{k}={100.0 * blk.recall_at[k]:.2f}%"
                            for k in report.k_values)
        click.echo(f"[{blk.language}/{blk.matcher}] n={blk.n_questions}  {recalls}")


# --- pipeline -----------------------------------------------------------------

@cli.group(name="pipeline")
def pipeline_group():
    """Run and compare full experiment pipelines."""


@pipeline_group.command("run")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out-dir", "out_dir", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None)
@click.pass_context
def pipeline_run(ctx, config_path, out_dir, seed):
    """Execute curate -> vocab -> gen -> train -> embed -> retrieve -> eval."""
    config_path = config_path or (ctx.obj or {}).get("config")
    out_dir = out_dir or (ctx.obj or {}).get("out_dir")
    seed = seed if seed is not None else (ctx.obj or {}).get("seed")
    if not config_path:
        raise click.UsageError("a config file is required (--config)")
    if not out_dir:
        raise click.UsageError("an output directory is required (--out-dir)")
    cfg = pipeline_mod.load_config(config_path, seed_override=seed)
    manifest = pipeline_mod.run_pipeline(cfg, out_dir)
    for stage in manifest.stages:
        flag = "cached" if stage.cache_hit else f"{stage.seconds:.2f}s"
        click.echo(f"stage {stage.name}: {flag}")
    click.echo(f"manifest: {Path(out_dir) / pipeline_mod.MANIFEST_NAME}")


@pipeline_group.command("compare")
@click.option("--a", "path_a", required=True, type=click.Path(),
              help="Manifest file or run directory.")
@click.option("--b", "path_b", required=True, type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Markdown comparison path.")
@click.option("--json", "json_path", type=click.Path(), default=None)
def pipeline_compare(path_a, path_b, out_path, json_path):
    """Side-by-side metrics and McNemar significance for two runs."""
    comparison = pipeline_mod.compare_runs(path_a, path_b)
    rendered = pipeline_mod.render_comparison(comparison, "markdown")
    if out_path:
        Path(out_path).write_text(rendered, encoding="utf-8")
    if json_path:
        Path(json_path).write_text(pipeline_mod.render_comparison(comparison, "json"),
                                   encoding="utf-8")
    click.echo(rendered, nl=False)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except DataValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except (FileNotFoundError, IsADirectoryError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
