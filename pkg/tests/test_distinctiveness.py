import numpy as np
import pytest

from index.indexer import build_df
from preprocess.tokenizer import normalize_text
from search.distinctiveness import (DistinctivenessScorer, RewardParams, WeightEntry, WeightParams,
                                    build_weight_table, ciderbtw, combine_losses, combined_reward,
                                    compute_weights, weighted_reward, weighted_xe, weights_from_scores)
from search.scorer import cider_score
from utils.errors import EmptySimilarSet, LengthMismatch, NoReferences, OutOfRange

from oracle import make_records

CAPTIONS = {
    "hydrant": ["a red fire hydrant next to the street", "red hydrant on a street corner"],
    "walk1": ["a man walking on a street", "a person walking down the street"],
    "walk2": ["a man walking a dog on a street", "man and dog walking down a street"],
    "fruit": ["a bowl of fruit on a table", "fresh fruit in a bowl"],
}


def tokens(image_id):
    return [normalize_text(c) for c in CAPTIONS[image_id]]


@pytest.fixture
def street_df():
    return build_df(make_records(CAPTIONS), threads=1)


@pytest.fixture
def fixture_groups(fixture_corpus):
    records, _ = fixture_corpus
    return {r.id: [normalize_text(c) for c in r.captions] for r in records}


class TestCiderBtw:

    def test_mean_of_single_reference_scores(self, fixture_df, fixture_groups):
        rng = np.random.default_rng(21)
        ids = sorted(fixture_groups)
        scorer = DistinctivenessScorer(fixture_df)
        for _ in range(200):
            picked = rng.choice(len(ids), size=6, replace=False)
            candidate = fixture_groups[ids[picked[0]]][int(rng.integers(5))]
            similar = [fixture_groups[ids[i]] for i in picked[1:]]
            hyp = scorer.cider.vectorize(candidate)
            singles = [scorer.cider.similarity(hyp, scorer.cider.vectorize(ref)) for group in similar for ref in group]
            assert len(singles) == 25
            assert ciderbtw(candidate, similar, fixture_df) == pytest.approx(np.mean(singles), abs=1e-12)

    def test_matches_single_reference_cider(self, fixture_df, fixture_groups):
        ids = sorted(fixture_groups)
        candidate = fixture_groups[ids[3]][0]
        similar = [fixture_groups[i] for i in ids[4:9]]
        singles = [cider_score(candidate, [ref], fixture_df) for group in similar for ref in group]
        assert ciderbtw(candidate, similar, fixture_df) == pytest.approx(np.mean(singles), abs=1e-12)

    def test_equal_groups_average_image_scores(self, fixture_df, fixture_groups):
        ids = sorted(fixture_groups)
        candidate = fixture_groups[ids[0]][1]
        similar = [fixture_groups[i] for i in ids[1:4]]
        per_image = [cider_score(candidate, group, fixture_df) for group in similar]
        assert ciderbtw(candidate, similar, fixture_df) == pytest.approx(np.mean(per_image), abs=1e-12)

    def test_generic_caption_scores_higher(self, street_df):
        similar = [tokens("walk1"), tokens("walk2")]
        generic = normalize_text("a man walking down the street")
        distinctive = normalize_text("a red fire hydrant")
        assert ciderbtw(distinctive, similar, street_df) == 0.0
        assert ciderbtw(generic, similar, street_df) > 0.0
        assert cider_score(distinctive, tokens("hydrant"), street_df) > 0.0

    @pytest.mark.parametrize("similar", [[], [[], []]])
    def test_empty_similar_set(self, street_df, similar):
        with pytest.raises(EmptySimilarSet):
            ciderbtw(("a",), similar, street_df)


class TestWeights:

    def test_scaled_by_max(self):
        assert weights_from_scores([2.0, 4.0], WeightParams(lambda_w=1.5, alpha_w=1.0)) == [1.0, 0.5]

    def test_default_parameters(self):
        weights = weights_from_scores([1.0, 3.0, 0.0])
        np.testing.assert_allclose(weights, [1.5 - 0.5 / 3, 1.0, 1.5])

    def test_antitone_and_scale_invariant(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            scores = rng.uniform(0, 10, size=5)
            weights = np.array(weights_from_scores(scores.tolist()))
            order = np.argsort(scores)
            assert np.all(np.diff(weights[order]) <= 1e-12)
            scaled = weights_from_scores((scores * rng.uniform(0.1, 50)).tolist())
            np.testing.assert_allclose(scaled, weights, atol=1e-12)

    def test_zero_scores_keep_lambda(self):
        assert weights_from_scores([0.0, 0.0], WeightParams(lambda_w=2.0, alpha_w=1.0)) == [2.0, 2.0]

    def test_bounds(self):
        rng = np.random.default_rng(3)
        params = WeightParams(lambda_w=1.2, alpha_w=0.7)
        for _ in range(100):
            scores = rng.uniform(0, 10, size=5).tolist()
            weights = weights_from_scores(scores, params)
            assert all(1.2 - 0.7 - 1e-12 <= w <= 1.2 for w in weights)
            assert weights[int(np.argmax(scores))] == pytest.approx(0.5)

    def test_weights_use_ground_truth_ciderbtw(self, fixture_df, fixture_groups):
        ids = sorted(fixture_groups)
        for n in range(0, 60, 3):
            gts = fixture_groups[ids[n]]
            similar = [fixture_groups[ids[(n + j) % len(ids)]] for j in range(1, 6)]
            entries = compute_weights(gts, similar, fixture_df)
            for gt, (v, w) in zip(gts, entries):
                assert v == pytest.approx(ciderbtw(gt, similar, fixture_df), abs=1e-12)
            top = max(v for v, _ in entries)
            if top > 0:
                expected = [1.5 - 0.5 * v / top for v, _ in entries]
                np.testing.assert_allclose([w for _, w in entries], expected)

    def test_distinctive_ground_truth_gets_higher_weight(self, street_df):
        gts = [normalize_text("a red fire hydrant"), normalize_text("a man walking down the street")]
        entries = compute_weights(gts, [tokens("walk1"), tokens("walk2")], street_df)
        assert entries[0][1] == 1.5
        assert entries[1][1] == 1.0

    def test_build_weight_table(self):
        table = build_weight_table({"img": [(0.5, 1.25), (1.0, 1.0)]})
        assert table == {"img": [WeightEntry(0, 0.5, 1.25), WeightEntry(1, 1.0, 1.0)]}

    @pytest.mark.parametrize("kwargs", [{"lambda_w": 0.0}, {"lambda_w": 1.0, "alpha_w": 1.5},
                                        {"alpha_w": -0.1}])
    def test_invalid_params(self, kwargs):
        with pytest.raises(OutOfRange):
            WeightParams(**kwargs)


class TestLosses:

    def test_weighted_xe(self):
        assert weighted_xe([2.0, 1.0, 4.0], [1.5, 1.0, 0.5]) == pytest.approx(6.0)

    def test_weighted_xe_length(self):
        with pytest.raises(LengthMismatch):
            weighted_xe([1.0], [1.0, 1.0])

    def test_combine_losses(self):
        assert combine_losses(2.0, 6.0, 0.25) == pytest.approx(5.0)
        assert combine_losses(2.0, 6.0, 1.0) == 2.0

    def test_combine_losses_range(self):
        with pytest.raises(OutOfRange):
            combine_losses(1.0, 1.0, 1.5)


class TestRewards:

    def test_uniform_weights_match_cider(self, street_df):
        candidate = normalize_text("a man walking on the street")
        gts = tokens("walk1")
        assert weighted_reward(candidate, gts, [1.0, 1.0], street_df) == pytest.approx(
            cider_score(candidate, gts, street_df), abs=1e-12)

    def test_weighted_reward_divides_by_n(self, street_df):
        candidate = normalize_text("a man walking on the street")
        gts = tokens("walk1")
        singles = [cider_score(candidate, [gt], street_df) for gt in gts]
        expected = (1.5 * singles[0] + 0.5 * singles[1]) / 2
        assert weighted_reward(candidate, gts, [1.5, 0.5], street_df) == pytest.approx(expected, abs=1e-12)

    def test_decomposition(self, street_df):
        candidate = normalize_text("a man walking a dog down the street")
        gts = tokens("walk2")
        similar = [tokens("walk1"), tokens("hydrant")]
        reward, parts = combined_reward(candidate, gts, [1.2, 0.8], similar, street_df,
                                        rparams=RewardParams(alpha_r=0.4))
        assert parts["r_tilde"] == pytest.approx(weighted_reward(candidate, gts, [1.2, 0.8], street_df))
        assert parts["ciderbtw"] == pytest.approx(ciderbtw(candidate, similar, street_df))
        assert reward == pytest.approx(parts["r_tilde"] - 0.4 * parts["ciderbtw"])

    def test_no_penalty(self, street_df):
        candidate = normalize_text("a man walking a dog")
        reward, parts = combined_reward(candidate, tokens("walk2"), [1.0, 1.0], [tokens("walk1")], street_df,
                                        rparams=RewardParams(alpha_r=0.0))
        assert reward == parts["r_tilde"]

    def test_penalty_arithmetic(self, street_df):
        scorer = DistinctivenessScorer(street_df)
        scorer.weighted_reward_vectors = lambda *args: 7.5
        scorer.ciderbtw_vectors = lambda *args: 5.0
        reward, _ = scorer.combined_reward_vectors(None, [], [], [], RewardParams(alpha_r=0.4))
        assert reward == 5.5

    def test_errors(self, street_df):
        with pytest.raises(NoReferences):
            weighted_reward(("a",), [], [], street_df)
        with pytest.raises(LengthMismatch):
            weighted_reward(("a",), tokens("walk1"), [1.0], street_df)
        with pytest.raises(OutOfRange):
            RewardParams(alpha_r=-1.0)

    def test_penalty_favors_distinctive_candidate(self, street_df):
        gts = tokens("hydrant")
        similar = [tokens("walk1"), tokens("walk2")]
        distinctive = normalize_text("a red fire hydrant on the street")
        generic = normalize_text("a man walking down the street")
        gaps = []
        for alpha_r in (0.0, 0.2, 0.4, 0.8):
            params = RewardParams(alpha_r=alpha_r)
            r_distinctive, _ = combined_reward(distinctive, gts, [1.0, 1.0], similar, street_df, rparams=params)
            r_generic, _ = combined_reward(generic, gts, [1.0, 1.0], similar, street_df, rparams=params)
            gaps.append(r_distinctive - r_generic)
        assert all(later > earlier for earlier, later in zip(gaps, gaps[1:]))
