import math

import numpy as np
import pytest

from kgenrich import rotate
from kgenrich.kg import TRAIN, KnowledgeGraph, Triplet, Vocabulary
from kgenrich.rotate import RotatEModel, TrainConfig
from kgenrich.seeds import rng_stream

from conftest import random_model


def direct_distance(model, h, r, t, norm="l1"):
    """Independent oracle: per-coordinate complex arithmetic in plain Python."""
    total_l1 = 0.0
    total_sq = 0.0
    for j in range(model.dim):
        hv = complex(model.entities[h, j])
        tv = complex(model.entities[t, j])
        theta = float(model.phases[r, j])
        rot = complex(math.cos(theta), math.sin(theta))
        mod = abs(hv * rot - tv)
        total_l1 += mod
        total_sq += mod * mod
    return total_l1 if norm == "l1" else math.sqrt(total_sq)


class TestDistance:
    def test_identity_rotation_zero(self):
        ents = np.array([[0.3 + 0.4j, -1 + 2j]] * 2)
        model = RotatEModel(ents, np.zeros((1, 2)), gamma=12.0)
        assert model.distance(0, 0, 1) == 0.0

    def test_pi_rotation(self):
        model = RotatEModel(np.array([[1 + 0j], [1 + 0j]]), np.array([[np.pi]]), gamma=12.0)
        assert model.distance(0, 0, 1) == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.parametrize("norm", ["l1", "l2"])
    def test_matches_complex_oracle(self, norm):
        model = random_model(5, 3, dim=3, seed=11, norm=norm)
        rng = rng_stream(5, "test")
        for _ in range(20):
            h, t = rng.integers(5, size=2)
            r = int(rng.integers(3))
            assert model.distance(int(h), r, int(t)) == pytest.approx(
                direct_distance(model, int(h), r, int(t), norm), abs=1e-12
            )


class TestScore:
    def test_zero_distance_gives_gamma(self):
        ents = np.array([[1 + 1j]] * 2)
        model = RotatEModel(ents, np.zeros((1, 1)), gamma=7.5)
        assert model.score(0, 0, 1) == 7.5

    def test_gamma_minus_distance(self):
        model = random_model(4, 2, dim=4, gamma=12.0, seed=1)
        h, r, t = 0, 1, 2
        assert model.score(h, r, t) == pytest.approx(12.0 - model.distance(h, r, t))

    def test_bounded_by_gamma(self):
        model = random_model(8, 3, dim=6, gamma=4.0, seed=2)
        rng = rng_stream(1, "bound")
        for _ in range(100):
            h, t = rng.integers(8, size=2)
            r = int(rng.integers(3))
            assert model.score(int(h), r, int(t)) <= 4.0


class TestInvariants:
    def test_unit_modulus_rotations(self):
        model = random_model(3, 4, dim=16, seed=9)
        rot = model.rotation_table()
        assert np.abs(np.abs(rot) - 1.0).max() <= 1e-12

    def test_rotation_preserves_l2_norm(self):
        model = random_model(6, 4, dim=8, seed=10)
        rng = rng_stream(2, "norms")
        for _ in range(20):
            h = int(rng.integers(6))
            r = int(rng.integers(4))
            v = model.entities[h]
            rotated = v * model.rotations(np.array([r]))[0]
            assert np.linalg.norm(rotated) == pytest.approx(np.linalg.norm(v), abs=1e-10)

    def test_identity_fit(self):
        """Reflexive graph (t = h) with zero phases sits at zero distance and
        the loss floor set by the negatives."""
        ents = (0.5 + 0.25j) * np.ones((4, 3))
        model = RotatEModel(ents, np.zeros((2, 3)), gamma=6.0)
        cfg = TrainConfig(seed=0, dim=3, gamma=6.0, negatives=2)
        pos = Triplet(1, 0, 1)
        negs = [Triplet(1, 0, 2), Triplet(3, 0, 1)]
        assert model.distance(1, 0, 1) == 0.0
        s_negs = [model.score(*n) for n in negs]
        floor = -math.log(1 / (1 + math.exp(-6.0))) + sum(
            -math.log(1 / (1 + math.exp(s))) / 2 for s in s_negs
        )
        assert rotate.loss(model, pos, negs, cfg) == pytest.approx(floor, rel=1e-12)


class TestLoss:
    def test_sigma_half_case(self):
        """n=1, k=1, both scores 0: L = 2 ln 2."""
        ents = np.zeros((2, 1), dtype=complex)
        model = RotatEModel(ents, np.zeros((1, 1)), gamma=1e-9)
        # distance 0 for any pair, so score == gamma ~ 0
        cfg = TrainConfig(seed=0, dim=1, gamma=1e-9, negatives=1, neg_weight=1.0)
        value = rotate.loss(model, Triplet(0, 0, 1), [Triplet(1, 0, 0)], cfg)
        assert value == pytest.approx(2 * math.log(2), rel=1e-6)

    def test_limits(self):
        """Strong positive and hopeless negative drive the loss to zero."""
        ents = np.array([[50 + 0j], [50 + 0j], [-50 + 0j]])
        model = RotatEModel(ents, np.zeros((1, 1)), gamma=90.0)
        cfg = TrainConfig(seed=0, dim=1, gamma=90.0, negatives=1)
        value = rotate.loss(model, Triplet(0, 0, 1), [Triplet(0, 0, 2)], cfg)
        # s_pos = 90, s_neg = 90 - 100 = -10: both terms nearly vanish
        assert value < 1e-4

    def test_matches_scalar_recomputation(self):
        model = random_model(6, 2, dim=4, gamma=5.0, seed=21)
        cfg = TrainConfig(seed=0, dim=4, gamma=5.0, negatives=3, neg_weight=2.0)
        pos = Triplet(0, 1, 2)
        negs = [Triplet(3, 1, 2), Triplet(0, 1, 4), Triplet(5, 1, 2)]

        def sigma(x):
            return 1.0 / (1.0 + math.exp(-x))

        expected = -math.log(sigma(model.score(*pos)))
        for ng in negs:
            expected += -math.log(sigma(-model.score(*ng))) / 2.0
        assert rotate.loss(model, pos, negs, cfg) == pytest.approx(expected, rel=1e-10)

    def test_wrong_negative_count_rejected(self):
        model = random_model(3, 1, dim=2)
        cfg = TrainConfig(seed=0, dim=2, negatives=2)
        with pytest.raises(ValueError):
            rotate.loss(model, Triplet(0, 0, 1), [Triplet(1, 0, 2)], cfg)


def finite_difference_grads(model, pos, negs, cfg, eps=1e-5):
    """Central-difference oracle over every involved parameter component."""
    involved_e = {t.head for t in [pos, *negs]} | {t.tail for t in [pos, *negs]}
    involved_p = {t.predicate for t in [pos, *negs]}
    ent_grads, phase_grads = {}, {}
    for e in involved_e:
        g = np.zeros(model.dim, dtype=complex)
        for j in range(model.dim):
            for part, delta in (("re", eps), ("im", 1j * eps)):
                m1, m2 = model.copy(), model.copy()
                m1.entities[e, j] += delta
                m2.entities[e, j] -= delta
                fd = (rotate.loss(m1, pos, negs, cfg) - rotate.loss(m2, pos, negs, cfg)) / (2 * eps)
                g[j] += fd if part == "re" else 1j * fd
        ent_grads[e] = g
    for p in involved_p:
        g = np.zeros(model.dim)
        for j in range(model.dim):
            m1, m2 = model.copy(), model.copy()
            m1.phases[p, j] += eps
            m2.phases[p, j] -= eps
            g[j] = (rotate.loss(m1, pos, negs, cfg) - rotate.loss(m2, pos, negs, cfg)) / (2 * eps)
        phase_grads[p] = g
    return ent_grads, phase_grads


def relative_error(a, b):
    denom = max(np.abs(a).max(), np.abs(b).max(), 1e-8)
    return np.abs(a - b).max() / denom


class TestGradients:
    def test_uninvolved_parameter_zero(self):
        model = random_model(6, 3, dim=2)
        cfg = TrainConfig(seed=0, dim=2, negatives=1)
        g = rotate.gradients(model, Triplet(0, 0, 1), [Triplet(2, 0, 1)], cfg)
        assert 5 not in g.entities
        assert np.all(g.entity_grad(5) == 0)
        assert np.all(g.phase_grad(2) == 0)

    @pytest.mark.parametrize("norm", ["l1", "l2"])
    def test_matches_finite_differences(self, norm):
        cfg = TrainConfig(seed=0, dim=2, gamma=6.0, negatives=2, norm=norm)
        model = random_model(5, 2, dim=2, gamma=6.0, seed=33, norm=norm)
        pos = Triplet(0, 0, 1)
        negs = [Triplet(2, 0, 1), Triplet(0, 0, 3)]
        ana = rotate.gradients(model, pos, negs, cfg)
        ent_fd, phase_fd = finite_difference_grads(model, pos, negs, cfg)
        for e, fd in ent_fd.items():
            assert relative_error(ana.entity_grad(e), fd) <= 1e-4
        for p, fd in phase_fd.items():
            assert relative_error(ana.phase_grad(p), fd) <= 1e-4

    def test_l1_subgradient_zero_at_zero_modulus(self):
        """h rotated exactly onto t: every coordinate modulus is 0 and the
        chosen subgradient leaves the positive-term gradient at 0."""
        ents = np.array([[1 + 1j, 2 - 1j]] * 2 + [[0.1 + 0j, -0.3 + 0.2j]])
        model = RotatEModel(ents, np.zeros((1, 2)), gamma=3.0)
        cfg = TrainConfig(seed=0, dim=2, gamma=3.0, negatives=1)
        g = rotate.gradients(model, Triplet(0, 0, 1), [Triplet(2, 0, 1)], cfg)
        # only the negative contributes to entity 0? entity 0 is the positive
        # head whose residual is exactly zero: its gradient must vanish
        assert np.all(g.entity_grad(0) == 0)


def small_training_kg(n_triplets=500, n_entities=60, n_predicates=4, seed=0):
    rng = rng_stream(seed, "kg")
    entities = Vocabulary([f"e{i}" for i in range(n_entities)])
    predicates = Vocabulary([f"p{i}" for i in range(n_predicates)])
    stored = {}
    while len(stored) < n_triplets:
        h, t = rng.integers(n_entities, size=2)
        r = int(rng.integers(n_predicates))
        stored[Triplet(int(h), r, int(t))] = TRAIN
    return KnowledgeGraph(entities, predicates, stored)


class TestTrain:
    def test_loss_decreases_over_training(self):
        kg = small_training_kg()
        cfg = TrainConfig(seed=4, dim=8, gamma=6.0, negatives=2, learning_rate=0.05, epochs=50, batch_size=128)
        _, losses = rotate.train(kg, cfg)
        assert len(losses) == 50
        assert losses[-1] < losses[0]

    def test_bit_identical_under_seed(self):
        kg = small_training_kg(n_triplets=120)
        cfg = TrainConfig(seed=8, dim=4, gamma=6.0, negatives=2, epochs=3, batch_size=64)
        m1, l1 = rotate.train(kg, cfg)
        m2, l2 = rotate.train(kg, cfg)
        assert l1 == l2
        assert np.array_equal(m1.entities, m2.entities)
        assert np.array_equal(m1.phases, m2.phases)

    def test_zero_negatives_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(seed=0, negatives=0)

    def test_empty_train_split_rejected(self):
        kg = KnowledgeGraph.from_label_triples([("a", "p", "b")], split="test")
        with pytest.raises(ValueError):
            rotate.train(kg, TrainConfig(seed=0, dim=2, epochs=1))

    def test_negatives_never_in_train_split(self, monkeypatch):
        kg = small_training_kg(n_triplets=60, n_entities=12)
        train_set = set(kg.triplets_in({TRAIN}))
        captured = []
        original = rotate._sample_negatives

        def spy(h, r, t, config, n_entities, index, rng):
            nh, nt = original(h, r, t, config, n_entities, index, rng)
            captured.append((nh.copy(), np.broadcast_to(r[:, None], nh.shape).copy(), nt.copy()))
            return nh, nt

        monkeypatch.setattr(rotate, "_sample_negatives", spy)
        rotate.train(kg, TrainConfig(seed=1, dim=2, epochs=1, negatives=2, batch_size=32))
        assert captured
        for nh, nr, nt in captured:
            for hh, rr, tt in zip(nh.ravel(), nr.ravel(), nt.ravel()):
                assert Triplet(int(hh), int(rr), int(tt)) not in train_set


class TestCheckpoint:
    def test_roundtrip_scores_exact(self, tmp_path):
        model = random_model(20, 5, dim=6, gamma=9.0, seed=13)
        path = tmp_path / "model.txt"
        rotate.save_model(model, path)
        loaded = rotate.load_model(path)
        rng = rng_stream(3, "roundtrip")
        for _ in range(100):
            h, t = rng.integers(20, size=2)
            r = int(rng.integers(5))
            assert abs(loaded.score(int(h), r, int(t)) - model.score(int(h), r, int(t))) <= 1e-12

    def test_truncated_rejected(self, tmp_path):
        model = random_model(5, 2, dim=3)
        path = tmp_path / "model.txt"
        rotate.save_model(model, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-2]) + "\n")
        with pytest.raises(ValueError):
            rotate.load_model(path)

    def test_vocab_size_mismatch_rejected(self, tmp_path):
        model = random_model(5, 2, dim=3)
        path = tmp_path / "model.txt"
        rotate.save_model(model, path)
        with pytest.raises(ValueError):
            rotate.load_model(path, expect_entities=6)
        with pytest.raises(ValueError):
            rotate.load_model(path, expect_predicates=3)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "model.txt"
        path.write_text("something else\n")
        with pytest.raises(ValueError):
            rotate.load_model(path)

    def test_norm_passed_at_load(self, tmp_path):
        model = random_model(4, 2, dim=3, norm="l2")
        path = tmp_path / "model.txt"
        rotate.save_model(model, path)
        loaded = rotate.load_model(path, norm="l2")
        assert loaded.score(0, 0, 1) == pytest.approx(model.score(0, 0, 1), abs=1e-12)
