import json
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from xlingqa.errors import DataValidationError
from xlingqa.evaluate import (
    EvalReport,
    HitVector,
    evaluate_run,
    language_distribution,
    match_regex,
    match_string,
    mcnemar,
    normalize_text,
    recall_at_k,
    render_report,
    report_from_dict,
    report_to_dict,
    rouge1_max,
    rouge1_parts,
)
from xlingqa.retrieval import RetrievalRun

from conftest import make_passage, make_qa


class TestNormalize:
    def test_punctuation_and_case(self):
        assert normalize_text("Addis—Ababa!") == "addis ababa"

    def test_idempotent(self):
        assert normalize_text("addis ababa") == "addis ababa"

    def test_empty(self):
        assert normalize_text("") == ""

    def test_nfkc_applied(self):
        # fullwidth latin folds to ascii
        assert normalize_text("ＡＢ") == "ab"

    def test_whitespace_collapse(self):
        assert normalize_text("  a\t\tb\n c ") == "a b c"

    @given(st.text(max_size=40))
    @settings(max_examples=200, deadline=None)
    def test_always_idempotent(self, text):
        once = normalize_text(text)
        assert normalize_text(once) == once


class TestMatchers:
    def test_token_hit(self):
        assert match_string("Ababa", "in addis ababa today") is True

    def test_token_level_rejects_substring(self):
        assert match_string("ab", "a slab of stone") is False

    def test_order_matters(self):
        assert match_string("new york city", "york city new") is False

    def test_multiword_contiguous(self):
        assert match_string("new york", "the new york times") is True
        assert match_string("new york", "new haven york") is False

    def test_regex_matches_substring(self):
        assert match_regex("ab", "slab") is True

    def test_regex_escaping(self):
        # "+" normalizes to a space, so the pattern is "a b"
        assert match_regex("a+b", "a+b") is True
        assert match_regex("a+b", "aab") is False

    def test_empty_passage(self):
        assert match_regex("x", "") is False

    def test_empty_answer_is_false(self):
        assert match_string("!!!", "anything") is False
        assert match_regex("", "anything") is False

    @given(st.lists(st.sampled_from(["ab", "cd", "e", "fg"]), max_size=6),
           st.lists(st.sampled_from(["ab", "cd", "e", "fg"]), min_size=1, max_size=12))
    @settings(max_examples=300, deadline=None)
    def test_string_implies_regex(self, answer_tokens, passage_tokens):
        answer = " ".join(answer_tokens)
        passage = " ".join(passage_tokens)
        if match_string(answer, passage):
            assert match_regex(answer, passage)


def fixture_run_and_qa():
    """10 questions; 3 answered within top-10, 2 more within top-20."""
    passages = [make_passage(f"f{i:03d}", "filler text nothing here") for i in range(40)]
    passages += [make_passage(f"m{i}", f"the answer{i} token appears") for i in range(10)]
    qa = [make_qa(f"q{i}", f"question {i}?", [f"answer{i}"], "am") for i in range(10)]
    hits = []
    fillers = iter([p.pid for p in passages if p.pid.startswith("f")] * 10)
    for i in range(10):
        ranked = []
        for rank in range(20):
            if i < 3 and rank == 5:
                ranked.append((f"m{i}", 20.0 - rank))
            elif 3 <= i < 5 and rank == 15:
                ranked.append((f"m{i}", 20.0 - rank))
            else:
                ranked.append((next(fillers), 20.0 - rank))
        hits.append(ranked)
    run = RetrievalRun([ex.qid for ex in qa], hits, k=20)
    return run, qa, passages


def brute_force_recall(run, qa, passages, k, matcher):
    """Exhaustive (question x passage) scan, independent of recall_at_k."""
    text_of = {p.pid: p.text for p in passages}
    hits = 0
    for ex in qa:
        found = False
        for pid, _ in run.hits_for(ex.qid)[:k]:
            for answer in ex.answers:
                if matcher(answer, text_of[pid]):
                    found = True
        hits += found
    return hits / len(qa)


class TestRecall:
    def test_no_matches(self):
        passages = [make_passage("p1", "nothing relevant")]
        qa = [make_qa("q1", "?", ["answer"])]
        run = RetrievalRun(["q1"], [[("p1", 1.0)]], k=10)
        result = recall_at_k(run, qa, passages, 10)
        assert result.recall == 0.0

    def test_all_first_hits(self):
        passages = [make_passage("p1", "the answer is here")]
        qa = [make_qa("q1", "?", ["answer"]), make_qa("q2", "?", ["answer"])]
        run = RetrievalRun(["q1", "q2"], [[("p1", 1.0)], [("p1", 1.0)]], k=10)
        for k in (1, 5, 10):
            assert recall_at_k(run, qa, passages, k).recall == 1.0

    def test_fixture_oracle(self):
        run, qa, passages = fixture_run_and_qa()
        r10 = recall_at_k(run, qa, passages, 10)
        r20 = recall_at_k(run, qa, passages, 20)
        assert r10.recall == pytest.approx(0.30)
        assert r20.recall == pytest.approx(0.50)
        assert r10.recall == brute_force_recall(run, qa, passages, 10, match_string)
        assert r20.recall == brute_force_recall(run, qa, passages, 20, match_string)

    def test_monotone_in_k(self):
        run, qa, passages = fixture_run_and_qa()
        assert (recall_at_k(run, qa, passages, 10).recall
                <= recall_at_k(run, qa, passages, 20).recall)

    def test_hit_vector_in_qa_order(self):
        run, qa, passages = fixture_run_and_qa()
        hv = recall_at_k(run, qa, passages, 20).hit_vector
        assert hv.qids == [ex.qid for ex in qa]
        assert hv.hits == [True] * 5 + [False] * 5

    def test_unknown_run_qid_is_hard_error(self):
        passages = [make_passage("p1", "x")]
        qa = [make_qa("q1", "?", ["a"])]
        run = RetrievalRun(["zzz"], [[("p1", 1.0)]], k=10)
        with pytest.raises(DataValidationError, match="zzz"):
            recall_at_k(run, qa, passages, 10)

    def test_missing_run_entry_counts_as_miss(self):
        passages = [make_passage("p1", "the answer")]
        qa = [make_qa("q1", "?", ["answer"]), make_qa("q2", "?", ["answer"])]
        run = RetrievalRun(["q1"], [[("p1", 1.0)]], k=10)
        result = recall_at_k(run, qa, passages, 10)
        assert result.recall == 0.5
        assert result.missing_run_qids == 1

    def test_any_answer_counts(self):
        passages = [make_passage("p1", "contains beta here")]
        qa = [make_qa("q1", "?", ["alpha", "beta"])]
        run = RetrievalRun(["q1"], [[("p1", 1.0)]], k=10)
        assert recall_at_k(run, qa, passages, 10).recall == 1.0

    def test_empty_answer_counter(self):
        passages = [make_passage("p1", "x")]
        qa = [make_qa("q1", "?", ["..."])]
        run = RetrievalRun(["q1"], [[("p1", 1.0)]], k=10)
        assert recall_at_k(run, qa, passages, 10).empty_answer_count == 1


class TestRouge:
    def test_identity_scores_one(self):
        passages = [make_passage("p1", "exact answer text")]
        qa = [make_qa("q1", "?", ["exact answer text"])]
        run = RetrievalRun(["q1"], [[("p1", 1.0)]], k=10)
        assert rouge1_max(run, qa, passages, 10).mean_recall == 1.0

    def test_partial_two_thirds(self):
        passages = [make_passage("p1", "addis ababa is large")]
        qa = [make_qa("q1", "?", ["addis ababa ethiopia"])]
        run = RetrievalRun(["q1"], [[("p1", 1.0)]], k=10)
        assert rouge1_max(run, qa, passages, 10).mean_recall == pytest.approx(2 / 3, abs=1e-9)

    def test_no_overlap(self):
        passages = [make_passage("p1", "qq ww ee")]
        qa = [make_qa("q1", "?", ["aa bb"])]
        run = RetrievalRun(["q1"], [[("p1", 1.0)]], k=10)
        assert rouge1_max(run, qa, passages, 10).mean_recall == 0.0

    def test_multiplicity_clipping(self):
        # answer repeats a token; passage has it once -> 1 of 2 matched
        recall, _, _ = rouge1_parts("go go", "please go now")
        assert recall == pytest.approx(0.5)

    def test_max_over_passages_and_answers(self):
        passages = [make_passage("p1", "alpha"), make_passage("p2", "beta gamma")]
        qa = [make_qa("q1", "?", ["beta gamma", "delta"])]
        run = RetrievalRun(["q1"], [[("p1", 2.0), ("p2", 1.0)]], k=10)
        assert rouge1_max(run, qa, passages, 10).mean_recall == 1.0

    def test_full_containment_scores_one_when_recall_hits(self):
        passages = [make_passage("p1", "the answer phrase appears here")]
        qa = [make_qa("q1", "?", ["answer phrase"])]
        run = RetrievalRun(["q1"], [[("p1", 1.0)]], k=10)
        assert recall_at_k(run, qa, passages, 10).recall == 1.0
        assert rouge1_max(run, qa, passages, 10).mean_recall == 1.0


class TestLanguageDistribution:
    def test_all_one_language(self):
        passages = [make_passage(f"p{i}", "x", language="th") for i in range(5)]
        run = RetrievalRun(["q1"], [[(f"p{i}", 1.0) for i in range(5)]], k=20)
        assert language_distribution(run, passages) == {"th": 1.0}

    def test_ninety_ten(self):
        passages = ([make_passage(f"t{i}", "x", "th") for i in range(18)]
                    + [make_passage(f"e{i}", "x", "en") for i in range(2)])
        hits = [[(p.pid, 1.0) for p in passages]]
        run = RetrievalRun(["q1"], hits, k=20)
        dist = language_distribution(run, passages, k=20)
        assert dist == {"en": 0.1, "th": 0.9}

    def test_threshold_drops_rare_language_from_rendering(self):
        # 1 of 200 retrieved (0.5%) stays in the map, not in the report
        passages = ([make_passage(f"t{i}", "x", "th") for i in range(199)]
                    + [make_passage("rare", "x", "am")])
        hits = [[(p.pid, 1.0) for p in passages[i * 20:(i + 1) * 20]] for i in range(10)]
        run = RetrievalRun([f"q{i}" for i in range(10)], hits, k=20)
        dist = language_distribution(run, passages, k=20)
        assert dist["am"] == pytest.approx(0.005)
        qa = [make_qa(f"q{i}", "?", ["zzz"], "am") for i in range(10)]
        report = evaluate_run(run, qa, passages, k_values=(10, 20), matchers=("string",))
        rendered = render_report(report, "markdown")
        assert "| th |" in rendered
        assert "| am |" not in rendered
        assert report.blocks[0].language_distribution["am"] == pytest.approx(0.005)

    def test_sums_to_one(self):
        rng = random.Random(0)
        passages = [make_passage(f"p{i}", "x", rng.choice("abcde")) for i in range(50)]
        hits = [[(f"p{rng.randrange(50)}", 1.0)] * 0 or
                [(p.pid, 1.0) for p in rng.sample(passages, 20)] for _ in range(7)]
        run = RetrievalRun([f"q{i}" for i in range(7)], hits, k=20)
        assert sum(language_distribution(run, passages).values()) == pytest.approx(1.0, abs=1e-9)

    def test_unresolvable_pid(self):
        run = RetrievalRun(["q1"], [[("ghost", 1.0)]], k=20)
        with pytest.raises(DataValidationError, match="ghost"):
            language_distribution(run, [])


class TestMcNemar:
    def test_identical_vectors(self):
        res = mcnemar([True, False, True], [True, False, True])
        assert (res.b, res.c, res.p_value, res.method) == (0, 0, 1.0, "exact")

    def test_exact_binomial_value(self):
        # b=10, c=2: p = 2 * (C(12,0)+C(12,1)+C(12,2)) / 2^12 = 158/4096
        a = [True] * 10 + [False] * 2 + [True] * 5 + [False] * 5
        b = [False] * 10 + [True] * 2 + [True] * 5 + [False] * 5
        res = mcnemar(a, b)
        assert (res.b, res.c) == (10, 2)
        assert res.method == "exact"
        assert res.p_value == pytest.approx(158 / 4096, abs=1e-9)

    def test_chi_square_with_continuity_correction(self):
        a = [True] * 40 + [False] * 20 + [True] * 10
        b = [False] * 40 + [True] * 20 + [True] * 10
        res = mcnemar(a, b)
        assert (res.b, res.c) == (40, 20)
        assert res.method == "chi2_cc"
        assert res.statistic == pytest.approx(361 / 60, abs=1e-12)
        # independent tail oracle via the complementary error function
        oracle = math.erfc(math.sqrt(res.statistic / 2.0))
        assert res.p_value == pytest.approx(oracle, abs=1e-12)
        assert res.p_value == pytest.approx(0.0142, abs=1e-3)

    def test_symmetry(self):
        rng = random.Random(4)
        for _ in range(50):
            a = [rng.random() < 0.5 for _ in range(30)]
            b = [rng.random() < 0.5 for _ in range(30)]
            assert mcnemar(a, b).p_value == mcnemar(b, a).p_value

    def test_capped_at_one(self):
        a = [True, False] * 6
        b = [False, True] * 6
        assert mcnemar(a, b).p_value <= 1.0

    def test_qid_order_mismatch_rejected(self):
        hv1 = HitVector(["a", "b"], [True, False])
        hv2 = HitVector(["b", "a"], [True, False])
        with pytest.raises(DataValidationError):
            mcnemar(hv1, hv2)

    def test_length_mismatch(self):
        with pytest.raises(DataValidationError):
            mcnemar([True], [True, False])


class TestReport:
    def run_report(self, with_baseline=False):
        run, qa, passages = fixture_run_and_qa()
        baseline = None
        if with_baseline:
            baseline = RetrievalRun(run.qids, [h[:1] * 20 for h in run.hits], k=20)
        return evaluate_run(run, qa, passages, k_values=(10, 20),
                            matchers=("string", "regex"), label="fixture",
                            baseline=baseline)

    def test_blocks_per_language_and_matcher(self):
        report = self.run_report()
        assert [(b.language, b.matcher) for b in report.blocks] == [
            ("am", "string"), ("am", "regex")]
        assert report.n_questions == 20

    def test_json_round_trip(self):
        report = self.run_report(with_baseline=True)
        obj = json.loads(render_report(report, "json"))
        again = report_to_dict(report_from_dict(obj))
        assert again == report_to_dict(report)

    def test_asterisk_flips_exactly_at_p_005(self):
        report = self.run_report()
        block = report.blocks[0]
        from xlingqa.evaluate import McNemarResult
        block.mcnemar_at = {10: McNemarResult(1, 0, 1.0, 0.049, "exact"),
                            20: McNemarResult(1, 0, 1.0, 0.051, "exact")}
        rendered = render_report(report, "markdown")
        row = [line for line in rendered.splitlines() if "string" in line][0]
        cells = [c.strip() for c in row.split("|")]
        assert cells[2].endswith("*")      # R@10 with p=0.049
        assert not cells[3].endswith("*")  # R@20 with p=0.051

    def test_render_deterministic(self):
        a = render_report(self.run_report(True), "json")
        b = render_report(self.run_report(True), "json")
        assert a == b

    def test_empty_report_renders_headers(self):
        report = EvalReport(label="empty", k_values=(10, 20))
        rendered = render_report(report, "markdown")
        assert "R@10" in rendered and "R@20" in rendered

    def test_golden_markdown(self, tmp_path):
        report = self.run_report(with_baseline=True)
        rendered = render_report(report, "markdown")
        golden = open("tests/data/golden_report.md", encoding="utf-8").read()
        assert rendered == golden
