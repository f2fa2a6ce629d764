"""Deterministic synthetic demo world for desk-scale sanity runs.

Builds a tiny low-resource language ("xx"), a high-resource partner
("yy") and an English pivot, with dictionary translators, a base
vocabulary that knows everything except the low-resource words, QA data
whose gold passages share tokens with their questions, and ready-to-run
pipeline configs (full and MLM-only ablation).

Run as a script: ``python -m xlingqa.demo --out demo``.
"""

import argparse
from pathlib import Path

from .ingest import Passage, QaExample, make_pair, write_aligned_tsv, write_passages_tsv, write_qa_jsonl
from .wordpiece import SPECIAL_TOKENS

N_PAIRS = 30
N_NOISE = 5
N_HIGH = 28
N_TRAIN = 16
N_EVAL = 8
N_DISTRACTORS = 14


def low_tokens(i: int) -> list[str]:
    return [f"xx{i}t{j}" for j in range(10)]


def en_tokens(i: int) -> list[str]:
    return [f"en{i}w{j}" for j in range(6)]


def high_tokens(i: int) -> list[str]:
    return [f"yy{i}w{j}" for j in range(6)]


def passage_tokens(i: int) -> list[str]:
    return [f"yy{i}p{j}" for j in range(8)]


def question_text(i: int) -> str:
    return " ".join(low_tokens(i)[:4])


CONFIG_TEMPLATE = """\
language_pair:
  low: xx
  high: yy
data:
  low_pairs: low_en.tsv
  high_pairs: high_en.tsv
  train_qa: train_qa.jsonl
  eval_qa: eval_qa.jsonl
  passages: passages.tsv
  base_vocab: base_vocab.txt
curate:
  scorer: bow
  low_translator: dict:dict_low_en.tsv
  high_translator: dict:dict_high_en.tsv
thresholds:
  low: 0.7
  high: 0.8
seeds:
  global: 12345
encoder:
  embed_dim: 32
  feature_dim: 2048
  lr: 1.0
  batch: 4
  steps: 150
augment:
  translator: identity
  count: 4
ablation:
  mlm_only: {mlm_only}
"""


def write_demo(root: str | Path) -> dict[str, Path]:
    """Write all demo inputs and two pipeline configs under ``root``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    low_rows = [make_pair(" ".join(low_tokens(i)), " ".join(en_tokens(i)), "xx", "en")
                for i in range(N_PAIRS)]
    low_rows += [make_pair(f"zz{i}a zz{i}b", " ".join(en_tokens(i)), "xx", "en")
                 for i in range(N_NOISE)]
    paths["low_pairs"] = root / "low_en.tsv"
    write_aligned_tsv(low_rows, paths["low_pairs"])

    high_rows = [make_pair(" ".join(high_tokens(i)), " ".join(en_tokens(i)), "yy", "en")
                 for i in range(N_HIGH)]
    high_rows += [make_pair(f"ww{i}a ww{i}b", " ".join(en_tokens(i)), "yy", "en")
                  for i in range(3)]
    paths["high_pairs"] = root / "high_en.tsv"
    write_aligned_tsv(high_rows, paths["high_pairs"])

    # translators used by the similarity filter; noise rows stay unmapped
    with open(root / "dict_low_en.tsv", "w", encoding="utf-8") as fh:
        for i in range(N_PAIRS):
            for j, token in enumerate(low_tokens(i)):
                fh.write(f"{token}\t{en_tokens(i)[j % 6]}\n")
    paths["dict_low_en"] = root / "dict_low_en.tsv"
    with open(root / "dict_high_en.tsv", "w", encoding="utf-8") as fh:
        for i in range(N_HIGH):
            for j, token in enumerate(high_tokens(i)):
                fh.write(f"{token}\t{en_tokens(i)[j]}\n")
    paths["dict_high_en"] = root / "dict_high_en.tsv"

    # the base vocabulary knows English, the high-resource language and
    # the distractor languages, but none of the low-resource words
    vocab: list[str] = list(SPECIAL_TOKENS)
    for i in range(N_PAIRS):
        vocab.extend(en_tokens(i))
    for i in range(N_HIGH):
        vocab.extend(high_tokens(i))
    for i in range(N_TRAIN):
        vocab.extend(passage_tokens(i))
        vocab.append(f"title{i}")
    for j in range(N_DISTRACTORS):
        vocab.extend([f"th{j}d{m}" for m in range(6)])
    vocab.extend([".", ","])
    paths["base_vocab"] = root / "base_vocab.txt"
    with open(paths["base_vocab"], "w", encoding="utf-8") as fh:
        for token in dict.fromkeys(vocab):
            fh.write(token + "\n")

    passages = [
        Passage(pid=f"p{i:03d}", title=f"title{i}",
                text=" ".join(passage_tokens(i)), language="yy")
        for i in range(N_TRAIN)
    ]
    passages += [
        Passage(pid=f"d{j:03d}", title="",
                text=" ".join(f"th{j}d{m}" for m in range(6)), language="th")
        for j in range(N_DISTRACTORS)
    ]
    paths["passages"] = root / "passages.tsv"
    write_passages_tsv(passages, paths["passages"])

    def answer(i: int) -> str:
        return f"yy{i}p1 yy{i}p2"

    train_qa = [
        QaExample(qid=f"tr{i:03d}", question=question_text(i),
                  answers=(answer(i),), positive_contexts=(passages[i],),
                  language="xx")
        for i in range(N_TRAIN)
    ]
    paths["train_qa"] = root / "train_qa.jsonl"
    write_qa_jsonl(train_qa, paths["train_qa"])

    eval_qa = [
        QaExample(qid=f"ev{i:03d}", question=question_text(i),
                  answers=(answer(i),), positive_contexts=(),
                  language="xx")
        for i in range(N_EVAL)
    ]
    paths["eval_qa"] = root / "eval_qa.jsonl"
    write_qa_jsonl(eval_qa, paths["eval_qa"])

    paths["config"] = root / "config.yaml"
    paths["config"].write_text(CONFIG_TEMPLATE.format(mlm_only="false"), encoding="utf-8")
    paths["config_mlm_only"] = root / "config_mlm_only.yaml"
    paths["config_mlm_only"].write_text(CONFIG_TEMPLATE.format(mlm_only="true"),
                                        encoding="utf-8")
    return paths


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Write the synthetic demo inputs.")
    parser.add_argument("--out", default="demo", help="target directory")
    args = parser.parse_args(argv)
    paths = write_demo(args.out)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
