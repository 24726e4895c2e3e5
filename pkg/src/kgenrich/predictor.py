"""Novel-triplet prediction by rejection sampling, with optional guidance.

Three regimes share one acceptance rule p(accept) = exp(s - gamma), which is
a valid probability because RotatE scores never exceed the margin:

* RS    - predicate from the train-split marginal, head and tail uniform
          over the entity vocabulary (candidate space |E|^2 |P|).
* QG    - a guiding (entity, predicate) pair from a query-log table fixes
          two slots; only the missing entity is sampled (space |E| per pair).
* top-k - the k most frequent pairs, completed by exhaustive argmax scoring
          instead of sampling.

Emitted predictions are deduplicated and never in train or dev.  Output is
reproducible for a fixed seed regardless of the thread count: proposals come
from one stream in batch order and threads only parallelize scoring chunks,
which are merged back in index order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .kg import (
    DEV,
    TRAIN,
    EntityPredicatePair,
    KnowledgeGraph,
    Orientation,
    Triplet,
)
from .query_log import QueryPairTable
from .rotate import RotatEModel
from .seeds import rng_stream

log = logging.getLogger(__name__)

RS = "rs"
QG = "qg"
TOPK = "topk"

EXCLUDED_SPLITS = frozenset({TRAIN, DEV})


class StarvationError(RuntimeError):
    """No new prediction for too many consecutive proposal batches."""


@dataclass(frozen=True)
class Prediction:
    triplet: Triplet
    score: float
    method: str
    guiding_pair: EntityPredicatePair | None = None


def accept_probability(score: float, gamma: float) -> float:
    """exp(min(score, gamma) - gamma); the clamp guards numeric overshoot."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if not np.isfinite(score):
        raise ValueError(f"score must be finite, got {score}")
    return float(np.exp(min(score, gamma) - gamma))


class PredicateMarginal:
    """Predicate distribution estimated from train-split frequencies."""

    def __init__(self, support: np.ndarray, probabilities: np.ndarray):
        support = np.asarray(support, dtype=np.int64)
        probabilities = np.asarray(probabilities, dtype=np.float64)
        if support.shape != probabilities.shape or support.ndim != 1:
            raise ValueError("support and probabilities must be aligned 1-d arrays")
        if len(support) == 0:
            raise ValueError("empty predicate support")
        if abs(probabilities.sum() - 1.0) > 1e-12 or (probabilities <= 0).any():
            raise ValueError("probabilities must be positive and sum to 1")
        self.support = support
        self.probabilities = probabilities

    @classmethod
    def from_kg(cls, kg: KnowledgeGraph, scope: Iterable[str] = frozenset({TRAIN})) -> "PredicateMarginal":
        _, r, _ = kg.id_arrays(scope)
        if len(r) == 0:
            raise ValueError("no triplets in scope to estimate the predicate marginal")
        support, counts = np.unique(r, return_counts=True)
        return cls(support, counts / counts.sum())

    def probability(self, predicate_id: int) -> float:
        idx = np.searchsorted(self.support, predicate_id)
        if idx < len(self.support) and self.support[idx] == predicate_id:
            return float(self.probabilities[idx])
        return 0.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(self.support, size=size, p=self.probabilities)


def proposal_space(method: str, kg: KnowledgeGraph) -> int:
    """Size of the candidate space one proposal draw indexes into."""
    if method == RS:
        return kg.n_entities * kg.n_entities * kg.n_predicates
    if method in (QG, TOPK):
        return kg.n_entities
    raise ValueError(f"unknown method {method!r}")


def _check_model_fits(model: RotatEModel, kg: KnowledgeGraph) -> None:
    if model.n_entities != kg.n_entities or model.n_predicates != kg.n_predicates:
        raise ValueError(
            f"model shape ({model.n_entities} entities, {model.n_predicates} predicates) "
            f"does not match graph ({kg.n_entities}, {kg.n_predicates})"
        )


def _score_chunked(model: RotatEModel, h, r, t, threads: int, rot_table=None) -> np.ndarray:
    """Thread-parallel scoring; scores are per-row, so any chunking merged in
    index order is bit-identical to the single-threaded result."""
    n = len(h)
    if threads <= 1 or n < 2048:
        return model.score_batch(h, r, t, rot_table)
    bounds = np.linspace(0, n, threads + 1, dtype=int)
    chunks = [(h[a:b], r[a:b], t[a:b]) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: model.score_batch(*c, rot_table), chunks))
    return np.concatenate(parts)


def _rs_batch(model, kg, marginal, rng, batch_size, threads, rot_table):
    r = marginal.sample(rng, batch_size)
    h = rng.integers(0, kg.n_entities, size=batch_size)
    t = rng.integers(0, kg.n_entities, size=batch_size)
    scores = _score_chunked(model, h, r, t, threads, rot_table)
    u = rng.random(batch_size)
    keep = u < np.exp(np.minimum(scores, model.gamma) - model.gamma)
    idx = np.flatnonzero(keep)
    return h[idx], r[idx], t[idx], scores[idx], None


def sample_accepted(
    model: RotatEModel,
    kg: KnowledgeGraph,
    n: int,
    seed: int,
    batch_size: int = 65536,
    max_batches: int = 100000,
    threads: int = 1,
) -> list[Triplet]:
    """Raw accepted RS stream, with multiplicity and no train/dev exclusion.

    This is the sampler predict_rs filters; kept separate because the
    accepted-sample distribution itself (proportional to exp(score) within
    each predicate) is what diagnostics and fidelity checks need.
    """
    _check_model_fits(model, kg)
    marginal = PredicateMarginal.from_kg(kg)
    rng = rng_stream(seed, "proposals")
    rot_table = model.rotation_table()
    out: list[Triplet] = []
    for _ in range(max_batches):
        h, r, t, _, _ = _rs_batch(model, kg, marginal, rng, batch_size, threads, rot_table)
        for hh, rr, tt in zip(h, r, t):
            out.append(Triplet(int(hh), int(rr), int(tt)))
            if len(out) >= n:
                return out
    raise StarvationError(
        f"collected {len(out)}/{n} accepted samples in {max_batches} batches"
    )


def _collect_predictions(
    n: int,
    method: str,
    propose: Callable[[], tuple],
    excluded: frozenset[Triplet],
    starvation_batches: int,
) -> list[Prediction]:
    out: list[Prediction] = []
    seen: set[Triplet] = set()
    empty_streak = 0
    batches = 0
    accepted_total = 0
    while len(out) < n:
        h, r, t, scores, pairs = propose()
        batches += 1
        accepted_total += len(h)
        new = 0
        for i in range(len(h)):
            trip = Triplet(int(h[i]), int(r[i]), int(t[i]))
            if trip in seen or trip in excluded:
                continue
            seen.add(trip)
            out.append(
                Prediction(
                    triplet=trip,
                    score=float(scores[i]),
                    method=method,
                    guiding_pair=None if pairs is None else pairs[i],
                )
            )
            new += 1
            if len(out) >= n:
                break
        if new == 0:
            empty_streak += 1
            if empty_streak >= starvation_batches:
                raise StarvationError(
                    f"{method}: no new prediction in {empty_streak} consecutive batches "
                    f"({batches} batches total, {accepted_total} raw acceptances, "
                    f"{len(out)}/{n} collected); the model may be degenerate or the "
                    f"candidate space exhausted"
                )
        else:
            empty_streak = 0
    return out


def predict_rs(
    model: RotatEModel,
    kg: KnowledgeGraph,
    n: int,
    seed: int,
    batch_size: int = 65536,
    starvation_batches: int = 10000,
    threads: int = 1,
) -> list[Prediction]:
    """n deduplicated rejection-sampling predictions, none in train or dev."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_model_fits(model, kg)
    marginal = PredicateMarginal.from_kg(kg)
    rng = rng_stream(seed, "proposals")
    rot_table = model.rotation_table()
    excluded = kg.triplet_set(EXCLUDED_SPLITS)
    return _collect_predictions(
        n,
        RS,
        lambda: _rs_batch(model, kg, marginal, rng, batch_size, threads, rot_table),
        excluded,
        starvation_batches,
    )


def predict_qg(
    model: RotatEModel,
    kg: KnowledgeGraph,
    pair_table: QueryPairTable,
    n: int,
    seed: int,
    orientation: Orientation = Orientation.SUBJECT_KNOWN,
    frequency_weighted: bool = False,
    batch_size: int = 65536,
    starvation_batches: int = 10000,
    threads: int = 1,
) -> list[Prediction]:
    """Query-guided predictions: a guiding pair fixes one entity and the
    predicate, only the missing entity is proposed (uniformly), and
    acceptance uses the same exp(s - gamma) rule as RS."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_model_fits(model, kg)
    pairs = pair_table.pairs(orientation)
    if not pairs:
        raise ValueError(f"pair table has no pairs with orientation {orientation.value}")
    weights = None
    if frequency_weighted:
        freqs = np.array([pair_table.frequency(p) for p in pairs], dtype=np.float64)
        weights = freqs / freqs.sum()
    known = np.array([p.entity for p in pairs], dtype=np.int64)
    preds = np.array([p.predicate for p in pairs], dtype=np.int64)
    rng = rng_stream(seed, "proposals")
    rot_table = model.rotation_table()
    excluded = kg.triplet_set(EXCLUDED_SPLITS)

    def propose():
        pick = rng.choice(len(pairs), size=batch_size, p=weights)
        missing = rng.integers(0, kg.n_entities, size=batch_size)
        if orientation is Orientation.SUBJECT_KNOWN:
            h, t = known[pick], missing
        else:
            h, t = missing, known[pick]
        r = preds[pick]
        scores = _score_chunked(model, h, r, t, threads, rot_table)
        u = rng.random(batch_size)
        keep = u < np.exp(np.minimum(scores, model.gamma) - model.gamma)
        idx = np.flatnonzero(keep)
        return h[idx], r[idx], t[idx], scores[idx], [pairs[j] for j in pick[idx]]

    return _collect_predictions(n, QG, propose, excluded, starvation_batches)


def predict_topk(
    model: RotatEModel,
    kg: KnowledgeGraph,
    pair_table: QueryPairTable,
    k: int,
    per_pair_m: int,
    orientation: Orientation = Orientation.SUBJECT_KNOWN,
    threads: int = 1,
) -> list[Prediction]:
    """Complete the k most frequent pairs with their per_pair_m highest-scoring
    entities (exhaustive, no sampling); train/dev collisions are dropped."""
    if k < 1 or per_pair_m < 1:
        raise ValueError("k and per_pair_m must be >= 1")
    _check_model_fits(model, kg)
    pairs = pair_table.pairs(orientation)
    if not pairs:
        raise ValueError(f"pair table has no pairs with orientation {orientation.value}")
    if k > len(pairs):
        log.warning("top-k: k=%d exceeds table size %d; using the full table", k, len(pairs))
        k = len(pairs)
    ranked = sorted(
        pairs, key=lambda p: (-pair_table.frequency(p), p.predicate, p.entity)
    )[:k]
    excluded = kg.triplet_set(EXCLUDED_SPLITS)
    all_entities = np.arange(kg.n_entities, dtype=np.int64)
    rot_table = model.rotation_table()

    out: list[Prediction] = []
    seen: set[Triplet] = set()
    for pair in ranked:
        fixed = np.full(kg.n_entities, pair.entity, dtype=np.int64)
        preds = np.full(kg.n_entities, pair.predicate, dtype=np.int64)
        if orientation is Orientation.SUBJECT_KNOWN:
            h, t = fixed, all_entities
        else:
            h, t = all_entities, fixed
        scores = _score_chunked(model, h, preds, t, threads, rot_table)
        order = np.lexsort((all_entities, -scores))[:per_pair_m]
        for j in order:
            trip = Triplet(int(h[j]), int(pair.predicate), int(t[j]))
            if trip in excluded or trip in seen:
                continue
            seen.add(trip)
            out.append(Prediction(trip, float(scores[j]), TOPK, pair))
    return out


# ---------------------------------------------------------------------------
# interchange format


def save_predictions(predictions: Sequence[Prediction], kg: KnowledgeGraph, path) -> None:
    """`head predicate tail score method pair_entity pair_predicate` TSV;
    the pair columns are empty for RS."""
    with open(path, "w", encoding="utf-8") as f:
        for p in predictions:
            h, r, t = kg.label_triple(p.triplet)
            if p.guiding_pair is None:
                pe = pp = ""
            else:
                pe = kg.entities.resolve(p.guiding_pair.entity)
                pp = kg.predicates.resolve(p.guiding_pair.predicate)
            f.write(f"{h}\t{r}\t{t}\t{p.score:.17g}\t{p.method}\t{pe}\t{pp}\n")


def load_predictions(path, kg: KnowledgeGraph) -> list[Prediction]:
    out: list[Prediction] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 7:
                raise ValueError(f"{path}:{lineno}: expected 7 tab-separated fields")
            h, r, t, score, method, pe, pp = fields
            try:
                trip = Triplet(
                    kg.entities.id_of(h), kg.predicates.id_of(r), kg.entities.id_of(t)
                )
                pair = None
                if pe or pp:
                    orientation = (
                        Orientation.SUBJECT_KNOWN
                        if kg.entities.id_of(pe) == trip.head
                        else Orientation.OBJECT_KNOWN
                    )
                    pair = EntityPredicatePair(
                        kg.entities.id_of(pe), kg.predicates.id_of(pp), orientation
                    )
            except KeyError as e:
                raise ValueError(f"{path}:{lineno}: {e}") from None
            out.append(Prediction(trip, float(score), method, pair))
    return out
