import math

import numpy as np
import pytest

from kgenrich import predictor
from kgenrich.kg import (
    DEV,
    TEST,
    TRAIN,
    EntityPredicatePair,
    KnowledgeGraph,
    Orientation,
    Triplet,
    Vocabulary,
)
from kgenrich.predictor import (
    PredicateMarginal,
    StarvationError,
    accept_probability,
    predict_qg,
    predict_rs,
    predict_topk,
    proposal_space,
    sample_accepted,
)
from kgenrich.query_log import QueryPairTable

from conftest import random_model

SUBJ = Orientation.SUBJECT_KNOWN


class TestAcceptProbability:
    def test_max_score_gives_one(self):
        assert accept_probability(12.0, 12.0) == 1.0

    def test_closed_form_quarter(self):
        assert accept_probability(12.0 - math.log(4), 12.0) == pytest.approx(0.25, rel=1e-12)

    def test_deep_negative_no_underflow(self):
        p = accept_probability(12.0 - 50.0, 12.0)
        assert p == pytest.approx(math.exp(-50.0), rel=1e-12)
        assert p > 0

    def test_overshoot_clamped(self):
        assert accept_probability(15.0, 12.0) == 1.0

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            accept_probability(float("nan"), 12.0)
        with pytest.raises(ValueError):
            accept_probability(float("inf"), 12.0)

    def test_gamma_must_be_positive(self):
        with pytest.raises(ValueError):
            accept_probability(0.0, 0.0)


class TestPredicateMarginal:
    def test_from_train_frequencies(self, tiny_kg):
        marginal = PredicateMarginal.from_kg(tiny_kg)
        # train split: three p0, one p1
        assert marginal.probability(0) == pytest.approx(0.75)
        assert marginal.probability(1) == pytest.approx(0.25)

    def test_probabilities_sum_to_one(self, tiny_kg):
        marginal = PredicateMarginal.from_kg(tiny_kg)
        assert abs(marginal.probabilities.sum() - 1.0) <= 1e-12

    def test_support_only_train_predicates(self):
        kg = KnowledgeGraph(
            Vocabulary(["a", "b"]),
            Vocabulary(["p", "q"]),
            {Triplet(0, 0, 1): TRAIN, Triplet(1, 1, 0): TEST},
        )
        marginal = PredicateMarginal.from_kg(kg)
        assert list(marginal.support) == [0]
        assert marginal.probability(1) == 0.0


def make_pair_table(kg, pairs_with_freq):
    counts = {}
    for (entity, predicate, orientation), freq in pairs_with_freq:
        counts[EntityPredicatePair(entity, predicate, orientation)] = freq
    return QueryPairTable(counts)


class TestPredictRs:
    def test_single_prediction_valid(self, tiny_kg):
        model = random_model(6, 2, dim=4, gamma=4.0)
        (pred,) = predict_rs(model, tiny_kg, 1, seed=0, batch_size=256)
        assert not tiny_kg.contains(pred.triplet, {TRAIN, DEV})
        assert pred.score <= model.gamma
        assert pred.method == "rs"
        assert pred.guiding_pair is None

    def test_deterministic_under_seed(self, tiny_kg):
        model = random_model(6, 2, dim=4, gamma=4.0)
        a = predict_rs(model, tiny_kg, 20, seed=5, batch_size=512)
        b = predict_rs(model, tiny_kg, 20, seed=5, batch_size=512)
        assert a == b

    def test_thread_count_does_not_change_output(self, tiny_kg):
        model = random_model(6, 2, dim=4, gamma=4.0)
        a = predict_rs(model, tiny_kg, 30, seed=5, batch_size=4096, threads=1)
        b = predict_rs(model, tiny_kg, 30, seed=5, batch_size=4096, threads=8)
        assert a == b

    def test_excludes_train_dev_and_duplicates(self, tiny_kg):
        model = random_model(6, 2, dim=4, gamma=4.0)
        preds = predict_rs(model, tiny_kg, 40, seed=1, batch_size=512)
        trips = [p.triplet for p in preds]
        assert len(set(trips)) == len(trips)
        for t in trips:
            assert not tiny_kg.contains(t, {TRAIN, DEV})

    def test_starvation_aborts(self, tiny_kg):
        # a graph this small runs out of novel triplets long before 10**9
        model = random_model(6, 2, dim=4, gamma=4.0)
        with pytest.raises(StarvationError):
            predict_rs(model, tiny_kg, 10**9, seed=0, batch_size=256, starvation_batches=20)

    def test_model_graph_mismatch_rejected(self, tiny_kg):
        model = random_model(7, 2, dim=4)
        with pytest.raises(ValueError):
            predict_rs(model, tiny_kg, 1, seed=0)


class TestSamplerFidelity:
    def test_accepted_distribution_matches_enumeration(self, tiny_kg):
        """Accepted (h, t) given r must follow exp(score)/sum(exp(score)),
        checked against exhaustive enumeration of all 72 candidates."""
        model = random_model(6, 2, dim=4, gamma=4.0, seed=7)
        accepted = sample_accepted(model, tiny_kg, 30000, seed=11, batch_size=1 << 14)
        marginal = PredicateMarginal.from_kg(tiny_kg)
        for r in (0, 1):
            hh, tt = np.meshgrid(np.arange(6), np.arange(6), indexing="ij")
            scores = model.score_batch(hh.ravel(), np.full(36, r), tt.ravel())
            oracle = np.exp(scores) / np.exp(scores).sum()
            counts = np.zeros(36)
            for trip in accepted:
                if trip.predicate == r:
                    counts[trip.head * 6 + trip.tail] += 1
            assert counts.sum() > 1000
            tv = 0.5 * np.abs(counts / counts.sum() - oracle).sum()
            assert tv <= 0.05


class TestPredictQg:
    def _setup(self, tiny_kg):
        model = random_model(6, 2, dim=4, gamma=4.0)
        table = make_pair_table(
            tiny_kg,
            [((0, 0, SUBJ), 3), ((2, 1, SUBJ), 1)],
        )
        return model, table

    def test_provenance_matches_guiding_pair(self, tiny_kg):
        model, table = self._setup(tiny_kg)
        preds = predict_qg(model, tiny_kg, table, 8, seed=2, batch_size=512)
        table_pairs = set(table.pairs(SUBJ))
        for p in preds:
            assert p.guiding_pair in table_pairs
            assert p.triplet.head == p.guiding_pair.entity
            assert p.triplet.predicate == p.guiding_pair.predicate

    def test_single_pair_distinct_tails(self, tiny_kg):
        model = random_model(6, 2, dim=4, gamma=4.0)
        table = make_pair_table(tiny_kg, [((0, 1, SUBJ), 1)])
        preds = predict_qg(model, tiny_kg, table, 3, seed=3, batch_size=256)
        assert len({p.triplet.tail for p in preds}) == 3
        assert all(p.triplet.head == 0 and p.triplet.predicate == 1 for p in preds)

    def test_candidate_space_is_entity_vocabulary(self, tiny_kg):
        """With one guiding pair the only free slot is the missing entity, so
        every possible emission lies in an |E|-sized candidate set."""
        model = random_model(6, 2, dim=4, gamma=4.0)
        table = make_pair_table(tiny_kg, [((0, 1, SUBJ), 1)])
        candidates = {Triplet(0, 1, t) for t in range(tiny_kg.n_entities)}
        preds = predict_qg(model, tiny_kg, table, 4, seed=4, batch_size=256)
        assert {p.triplet for p in preds} <= candidates

    def test_empty_table_rejected(self, tiny_kg):
        model = random_model(6, 2, dim=4)
        with pytest.raises(ValueError):
            predict_qg(model, tiny_kg, QueryPairTable({}), 1, seed=0)

    def test_object_known_orientation(self, tiny_kg):
        model = random_model(6, 2, dim=4, gamma=4.0)
        table = make_pair_table(tiny_kg, [((5, 0, Orientation.OBJECT_KNOWN), 2)])
        preds = predict_qg(
            model, tiny_kg, table, 3, seed=1, orientation=Orientation.OBJECT_KNOWN, batch_size=256
        )
        assert all(p.triplet.tail == 5 and p.triplet.predicate == 0 for p in preds)

    def test_deterministic(self, tiny_kg):
        model, table = self._setup(tiny_kg)
        a = predict_qg(model, tiny_kg, table, 10, seed=9, batch_size=512)
        b = predict_qg(model, tiny_kg, table, 10, seed=9, batch_size=512)
        assert a == b


class TestPredictTopk:
    def test_frequency_ordering_with_tiebreak(self, tiny_kg):
        model = random_model(6, 2, dim=4, gamma=4.0)
        table = make_pair_table(
            tiny_kg,
            [((3, 1, SUBJ), 5), ((1, 0, SUBJ), 2), ((0, 0, SUBJ), 2)],
        )
        preds = predict_topk(model, tiny_kg, table, k=2, per_pair_m=1)
        chosen = [p.guiding_pair for p in preds]
        assert chosen[0] == EntityPredicatePair(3, 1, SUBJ)
        # frequency tie between (1, p0) and (0, p0): (predicate, entity) ascending
        assert chosen[1] == EntityPredicatePair(0, 0, SUBJ)

    def test_m1_is_argmax_completion(self, tiny_kg):
        model = random_model(6, 2, dim=4, gamma=4.0)
        table = make_pair_table(tiny_kg, [((4, 0, SUBJ), 1)])
        preds = predict_topk(model, tiny_kg, table, k=1, per_pair_m=1)
        scores = model.score_batch(
            np.full(6, 4), np.zeros(6, dtype=int), np.arange(6)
        )
        excluded = tiny_kg.triplet_set({TRAIN, DEV})
        best = max(
            (s, -t) for t, s in enumerate(scores) if Triplet(4, 0, t) not in excluded
        )
        if preds:
            assert preds[0].triplet.tail == -best[1]

    def test_output_size_is_km_minus_collisions(self, tiny_kg):
        model = random_model(6, 2, dim=4, gamma=4.0)
        table = make_pair_table(tiny_kg, [((0, 0, SUBJ), 2), ((2, 1, SUBJ), 1)])
        k, m = 2, 4
        preds = predict_topk(model, tiny_kg, table, k=k, per_pair_m=m)
        excluded = tiny_kg.triplet_set({TRAIN, DEV})
        collisions = 0
        for pair in table.pairs(SUBJ):
            scores = model.score_batch(
                np.full(6, pair.entity), np.full(6, pair.predicate), np.arange(6)
            )
            order = np.lexsort((np.arange(6), -scores))[:m]
            collisions += sum(
                Triplet(pair.entity, pair.predicate, int(t)) in excluded for t in order
            )
        assert len(preds) == k * m - collisions

    def test_k_beyond_table_warns_and_clamps(self, tiny_kg, caplog):
        model = random_model(6, 2, dim=4, gamma=4.0)
        table = make_pair_table(tiny_kg, [((0, 0, SUBJ), 1)])
        with caplog.at_level("WARNING"):
            preds = predict_topk(model, tiny_kg, table, k=10, per_pair_m=1)
        assert "exceeds table size" in caplog.text
        assert len({p.guiding_pair for p in preds}) <= 1


class TestProposalSpace:
    def test_sizes(self, tiny_kg):
        assert proposal_space("rs", tiny_kg) == 6 * 6 * 2
        assert proposal_space("qg", tiny_kg) == 6
        with pytest.raises(ValueError):
            proposal_space("nope", tiny_kg)


class TestPredictionIO:
    def test_roundtrip(self, tiny_kg, tmp_path):
        model = random_model(6, 2, dim=4, gamma=4.0)
        table = make_pair_table(tiny_kg, [((0, 0, SUBJ), 1)])
        preds = predict_rs(model, tiny_kg, 5, seed=0, batch_size=256)
        preds += predict_qg(model, tiny_kg, table, 3, seed=1, batch_size=256)
        path = tmp_path / "preds.tsv"
        predictor.save_predictions(preds, tiny_kg, path)
        loaded = predictor.load_predictions(path, tiny_kg)
        assert [p.triplet for p in loaded] == [p.triplet for p in preds]
        assert [p.method for p in loaded] == [p.method for p in preds]
        assert [p.guiding_pair for p in loaded] == [p.guiding_pair for p in preds]
        assert all(a.score == b.score for a, b in zip(loaded, preds))

    def test_malformed_rejected(self, tiny_kg, tmp_path):
        path = tmp_path / "preds.tsv"
        path.write_text("e0\tp0\te1\n", encoding="utf-8")
        with pytest.raises(ValueError):
            predictor.load_predictions(path, tiny_kg)
