"""Post-hoc guidance over predicted entity-predicate pairs.

KM partitions pairs into metadata-compatible and incompatible using entity
types against predicate domain (subject slot known) or range (object slot
known); missing metadata counts as incompatible, with a reason code that
keeps those cases separable.  ES ranks pairs by the best embedding score
seen across their predicted triplets and cuts the ranking into equal-count
bins, highest scores first.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .ingest import MetadataTable
from .kg import EntityPredicatePair, KnowledgeGraph, Orientation, pair_of_triplet
from .predictor import Prediction

log = logging.getLogger(__name__)


class KmReason(Enum):
    DOMAIN_MATCH = "domain_match"
    DOMAIN_MISMATCH = "domain_mismatch"
    MISSING_ENTITY_TYPE = "missing_entity_type"
    MISSING_PREDICATE_CONSTRAINT = "missing_predicate_constraint"


@dataclass(frozen=True)
class KmVerdict:
    pair: EntityPredicatePair
    compatible: bool
    reason: KmReason

    def __post_init__(self):
        if self.compatible and self.reason is not KmReason.DOMAIN_MATCH:
            raise ValueError("compatible verdicts must carry DOMAIN_MATCH")


def km_classify(pair: EntityPredicatePair, metadata: MetadataTable) -> KmVerdict:
    """Compatible iff the entity's types intersect the predicate's constraint
    for the pair's orientation; anything unknown is conservatively
    incompatible."""
    types = metadata.types_of(pair.entity)
    if not types:
        return KmVerdict(pair, False, KmReason.MISSING_ENTITY_TYPE)
    if pair.orientation is Orientation.SUBJECT_KNOWN:
        constraint = metadata.domain_of(pair.predicate)
    else:
        constraint = metadata.range_of(pair.predicate)
    if not constraint:
        return KmVerdict(pair, False, KmReason.MISSING_PREDICATE_CONSTRAINT)
    if types & constraint:
        return KmVerdict(pair, True, KmReason.DOMAIN_MATCH)
    return KmVerdict(pair, False, KmReason.DOMAIN_MISMATCH)


def km_classify_all(
    pairs: Iterable[EntityPredicatePair], metadata: MetadataTable
) -> list[KmVerdict]:
    return [km_classify(p, metadata) for p in pairs]


def km_groups(verdicts: Iterable[KmVerdict]) -> dict[str, list[EntityPredicatePair]]:
    groups: dict[str, list[EntityPredicatePair]] = {"compatible": [], "incompatible": []}
    for v in verdicts:
        groups["compatible" if v.compatible else "incompatible"].append(v.pair)
    return groups


def save_km_tsv(verdicts: Sequence[KmVerdict], kg: KnowledgeGraph, path) -> None:
    """`entity<TAB>predicate<TAB>compatible<TAB>reason` rows."""
    with open(path, "w", encoding="utf-8") as f:
        for v in verdicts:
            f.write(
                f"{kg.entities.resolve(v.pair.entity)}\t"
                f"{kg.predicates.resolve(v.pair.predicate)}\t"
                f"{int(v.compatible)}\t{v.reason.value}\n"
            )


@dataclass
class EsBinning:
    """Pairs ranked by max prediction score and cut into equal-count bins;
    bin 0 holds the highest scores and sizes differ by at most one."""

    n_bins: int
    entries: list[tuple[EntityPredicatePair, float, int]]  # (pair, max_score, bin)

    def bins(self) -> dict[int, list[EntityPredicatePair]]:
        out: dict[int, list[EntityPredicatePair]] = {b: [] for b in range(self.n_bins)}
        for pair, _, b in self.entries:
            out[b].append(pair)
        return out

    def max_score(self, pair: EntityPredicatePair) -> float:
        for p, s, _ in self.entries:
            if p == pair:
                return s
        raise KeyError(pair)


def es_bin(
    predictions: Sequence[Prediction],
    n_bins: int = 50,
    orientation: Orientation = Orientation.SUBJECT_KNOWN,
) -> EsBinning:
    """Bin the pairs occurring in `predictions` by their highest score.

    A pair appearing in several predicted triplets is placed once, by the
    best of its scores.  Ties break on (predicate id, entity id) so the
    binning is deterministic.
    """
    if not predictions:
        raise ValueError("es_bin needs at least one prediction")
    best: dict[EntityPredicatePair, float] = {}
    for p in predictions:
        pair = pair_of_triplet(p.triplet, orientation)
        if pair not in best or p.score > best[pair]:
            best[pair] = p.score
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0].predicate, kv[0].entity))
    n = len(ranked)
    if n < n_bins:
        log.warning("es_bin: only %d pairs for %d bins; using %d singleton bins", n, n_bins, n)
        n_bins = n
    base, extra = divmod(n, n_bins)
    entries: list[tuple[EntityPredicatePair, float, int]] = []
    pos = 0
    for b in range(n_bins):
        size = base + (1 if b < extra else 0)
        for pair, score in ranked[pos : pos + size]:
            entries.append((pair, score, b))
        pos += size
    return EsBinning(n_bins=n_bins, entries=entries)


def save_es_tsv(binning: EsBinning, kg: KnowledgeGraph, path) -> None:
    """`entity<TAB>predicate<TAB>max_score<TAB>bin` rows."""
    with open(path, "w", encoding="utf-8") as f:
        for pair, score, b in binning.entries:
            f.write(
                f"{kg.entities.resolve(pair.entity)}\t"
                f"{kg.predicates.resolve(pair.predicate)}\t"
                f"{score:.17g}\t{b}\n"
            )
