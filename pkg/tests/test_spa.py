"""Prompt selection and answer-rarity scoring."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_detection
from vadkit.errors import SpaError
from vadkit.spa import (
    AnswerDistribution,
    PromptPool,
    SpaModel,
    entropy,
    fit_distribution,
    normalize_token,
    select_prompt,
    static_object_score,
)


def dets_with_answers(tokens: list[str], prompt_id: str = "p") -> list:
    return [make_detection(i, answers={prompt_id: tok}) for i, tok in enumerate(tokens)]


POOL = PromptPool.from_raw(
    [
        {"prompt_id": "p_action", "text": "what is the person doing?"},
        {"prompt_id": "p_place", "text": "where is the person?"},
    ]
)


class TestNormalizeToken:
    def test_trims_and_lowercases(self):
        assert normalize_token("  Walking\t") == "walking"


class TestFitDistribution:
    def test_ten_walking(self):
        dist = fit_distribution(dets_with_answers(["walking"] * 10), "p", alpha=1.0)
        # (10 + 1) / (10 + 1 * (1 + 1)) with one observed token
        assert dist.probability("walking") == pytest.approx(11 / 12, abs=1e-15)

    def test_counts(self):
        dist = fit_distribution(dets_with_answers(["a", "a", "b"]), "p")
        assert dist.counts == {"a": 2, "b": 1}
        assert dist.total == 3

    def test_empty_training_rejected(self):
        with pytest.raises(SpaError, match="no training detections"):
            fit_distribution([], "p")

    def test_missing_answer_rejected(self):
        dets = dets_with_answers(["walking"]) + [make_detection(1, answers={})]
        with pytest.raises(SpaError, match="no answer for prompt 'p'"):
            fit_distribution(dets, "p")

    def test_normalization_merges_case_variants(self):
        dist = fit_distribution(dets_with_answers(["Walking", " walking "]), "p")
        assert dist.counts == {"walking": 2}
        raw = fit_distribution(dets_with_answers(["Walking", " walking "]), "p", normalize=False)
        assert len(raw.counts) == 2

    def test_negative_alpha_rejected(self):
        with pytest.raises(SpaError, match="alpha"):
            AnswerDistribution(prompt_id="p", counts={"a": 1}, alpha=-0.5)


class TestEntropy:
    def test_single_answer_no_smoothing_is_zero(self):
        dist = AnswerDistribution("p", {"a": 7}, alpha=0.0)
        assert entropy(dist) == 0.0

    def test_uniform_four_is_two_bits(self):
        dist = AnswerDistribution("p", {"a": 5, "b": 5, "c": 5, "d": 5}, alpha=0.0)
        assert entropy(dist) == pytest.approx(2.0, abs=1e-12)

    def test_three_one_split(self):
        # -(3/4) log2(3/4) - (1/4) log2(1/4)
        dist = AnswerDistribution("p", {"a": 3, "b": 1}, alpha=0.0)
        expected = -(0.75 * math.log2(0.75) + 0.25 * math.log2(0.25))
        assert entropy(dist) == pytest.approx(expected, abs=1e-12)
        assert entropy(dist) == pytest.approx(0.811278, abs=1e-6)

    def test_empty_distribution_rejected(self):
        with pytest.raises(SpaError):
            entropy(AnswerDistribution("p", {}, alpha=1.0))

    @given(st.lists(st.integers(1, 50), min_size=1, max_size=6))
    @settings(max_examples=150)
    def test_bounded_by_log_smoothed_support(self, counts):
        dist = AnswerDistribution(
            "p", {f"a{i}": c for i, c in enumerate(counts)}, alpha=1.0
        )
        assert 0.0 <= entropy(dist) <= math.log2(len(counts) + 1) + 1e-12


class TestSelectPrompt:
    def test_pool_of_one(self):
        pool = PromptPool.from_raw([{"prompt_id": "only", "text": "?"}])
        dets = dets_with_answers(["x", "y"], prompt_id="only")
        assert select_prompt(pool, dets) == "only"

    def test_concentrated_beats_uniform(self):
        dets = [
            make_detection(i, answers={"p_action": "walking", "p_place": f"spot{i % 3}"})
            for i in range(9)
        ]
        assert select_prompt(POOL, dets) == "p_action"

    def test_tie_keeps_pool_order(self):
        dets = [
            make_detection(i, answers={"p_action": f"a{i}", "p_place": f"b{i}"})
            for i in range(4)
        ]
        assert select_prompt(POOL, dets) == "p_action"

    @given(st.permutations(range(9)))
    @settings(max_examples=100, deadline=None)
    def test_invariant_under_detection_order(self, perm):
        dets = [
            make_detection(i, answers={"p_action": "walking" if i < 7 else "running",
                                       "p_place": f"spot{i % 4}"})
            for i in range(9)
        ]
        shuffled = [dets[i] for i in perm]
        assert select_prompt(POOL, shuffled) == select_prompt(POOL, dets)


class TestStaticObjectScore:
    def test_seen_answer(self):
        dist = fit_distribution(dets_with_answers(["walking"] * 10), "p", alpha=1.0)
        assert static_object_score(dist, "walking") == pytest.approx(1 / 12, abs=1e-12)
        assert static_object_score(dist, "walking") == pytest.approx(0.08333, abs=1e-5)

    def test_unseen_answer(self):
        dist = fit_distribution(dets_with_answers(["walking"] * 10), "p", alpha=1.0)
        assert static_object_score(dist, "fighting") == pytest.approx(11 / 12, abs=1e-12)
        assert static_object_score(dist, "fighting") == pytest.approx(0.91667, abs=1e-5)

    def test_equal_counts_equal_scores(self):
        dist = fit_distribution(dets_with_answers(["a", "b", "a", "b"]), "p")
        assert static_object_score(dist, "a") == static_object_score(dist, "b")

    @given(st.dictionaries(st.sampled_from("abcdef"), st.integers(1, 30),
                           min_size=1, max_size=6))
    @settings(max_examples=150)
    def test_strictly_decreasing_in_count(self, counts):
        # adding one observation of an answer must strictly lower its score
        answer = sorted(counts)[0]
        before = static_object_score(AnswerDistribution("p", counts, alpha=1.0), answer)
        bumped = dict(counts)
        bumped[answer] += 1
        after = static_object_score(AnswerDistribution("p", bumped, alpha=1.0), answer)
        assert after < before

    @given(st.dictionaries(st.sampled_from("abcdef"), st.integers(1, 30),
                           min_size=1, max_size=6))
    @settings(max_examples=150)
    def test_open_interval_and_unseen_maximal(self, counts):
        dist = AnswerDistribution("p", counts, alpha=1.0)
        seen_scores = [static_object_score(dist, a) for a in counts]
        unseen = static_object_score(dist, "zzz-never-observed")
        for s in seen_scores:
            assert 0.0 < s < 1.0
            assert unseen > s
        assert 0.0 < unseen < 1.0


class TestSpaModel:
    def fit_model(self) -> SpaModel:
        dets = [
            make_detection(i, answers={"p_action": "walking", "p_place": f"spot{i % 3}"})
            for i in range(9)
        ]
        return SpaModel.fit(POOL, dets, alpha=1.0)

    def test_fit_selects_min_entropy_prompt(self):
        model = self.fit_model()
        assert model.prompt_id == "p_action"
        assert model.entropy_by_prompt["p_action"] < model.entropy_by_prompt["p_place"]

    def test_score_uses_selected_prompt(self):
        model = self.fit_model()
        normal = make_detection(0, answers={"p_action": "walking"})
        odd = make_detection(0, answers={"p_action": "fighting"})
        assert model.score(odd) > model.score(normal)

    def test_score_missing_answer_rejected(self):
        model = self.fit_model()
        with pytest.raises(SpaError, match="p_action"):
            model.score(make_detection(0, answers={"p_place": "spot0"}))

    def test_save_load_round_trip(self, tmp_path):
        model = self.fit_model()
        path = tmp_path / "spa_model.json"
        model.save(path)
        loaded = SpaModel.load(path)
        assert loaded.prompt_id == model.prompt_id
        assert loaded.distribution.counts == model.distribution.counts
        assert loaded.distribution.alpha == model.distribution.alpha
        det = make_detection(0, answers={"p_action": "walking"})
        assert loaded.score(det) == model.score(det)
