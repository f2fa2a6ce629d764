import io

import pytest

from xlingqa.ingest import Passage, QaExample
from xlingqa.wordpiece import Vocabulary, TokenizerModel, new_vocab


def stream(text: str) -> io.BytesIO:
    return io.BytesIO(text.encode("utf-8"))


@pytest.fixture
def tiny_vocab() -> Vocabulary:
    return new_vocab(["play", "##ing", "hello", "a", "##b", "b", "c", "world"])


@pytest.fixture
def tiny_model(tiny_vocab) -> TokenizerModel:
    return TokenizerModel(tiny_vocab)


def make_passage(pid: str, text: str, language: str = "en", title: str = "") -> Passage:
    return Passage(pid=pid, title=title, text=text, language=language)


def make_qa(qid: str, question: str, answers, language: str = "en",
            contexts=()) -> QaExample:
    return QaExample(qid=qid, question=question, answers=tuple(answers),
                     positive_contexts=tuple(contexts), language=language)
