import numpy as np
import pytest

from kgenrich.kg import DEV, TEST, TRAIN, KnowledgeGraph, Triplet, Vocabulary


@pytest.fixture
def tiny_kg() -> KnowledgeGraph:
    """Six entities, two predicates, a handful of triplets in every split."""
    entities = Vocabulary([f"e{i}" for i in range(6)])
    predicates = Vocabulary(["p0", "p1"])
    stored = {
        Triplet(0, 0, 1): TRAIN,
        Triplet(1, 0, 2): TRAIN,
        Triplet(2, 0, 3): TRAIN,
        Triplet(2, 1, 3): TRAIN,
        Triplet(3, 1, 4): DEV,
        Triplet(4, 1, 5): TEST,
        Triplet(5, 0, 0): TEST,
    }
    return KnowledgeGraph(entities, predicates, stored)


@pytest.fixture
def label_kg() -> KnowledgeGraph:
    return KnowledgeGraph.from_label_triples(
        [
            ("MarieCurie", "birthplace", "Warsaw"),
            ("MarieCurie", "field", "Physics"),
            ("Chopin", "birthplace", "Zelazowa"),
        ]
    )


def random_model(n_entities, n_predicates, dim=4, gamma=6.0, seed=3, norm="l1"):
    from kgenrich.rotate import RotatEModel, TrainConfig

    cfg = TrainConfig(seed=seed, dim=dim, gamma=gamma, norm=norm)
    return RotatEModel.init_random(n_entities, n_predicates, cfg)
