"""Automatic evaluation of predictions against the held-out test split.

Metrics follow the closed-world caveat: a pair or triplet absent from the
test split is not necessarily wrong, so these numbers are lower bounds.
Recall is deliberately not computed (all methods emit the same number of
predictions, so it carries no extra information).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .kg import (
    TEST,
    EntityPredicatePair,
    KnowledgeGraph,
    Orientation,
    Triplet,
    pair_of_triplet,
)
from .predictor import Prediction
from .seeds import rng_stream

log = logging.getLogger(__name__)


def _as_triplets(items: Iterable) -> set[Triplet]:
    out = set()
    for it in items:
        out.add(it.triplet if isinstance(it, Prediction) else Triplet(*it))
    return out


def as_pairs(
    items: Iterable, orientation: Orientation = Orientation.SUBJECT_KNOWN
) -> set[EntityPredicatePair]:
    """Pairs from predictions/triplets (opened at `orientation`), or pairs
    passed through unchanged."""
    out: set[EntityPredicatePair] = set()
    for it in items:
        if isinstance(it, EntityPredicatePair):
            out.add(it)
        elif isinstance(it, Prediction):
            out.add(pair_of_triplet(it.triplet, orientation))
        else:
            out.add(pair_of_triplet(Triplet(*it), orientation))
    return out


def hit_triplets(predictions: Iterable, kg: KnowledgeGraph) -> int:
    """Number of predicted triplets present in the test split."""
    return len(_as_triplets(predictions) & kg.triplet_set({TEST}))


def pair_precision(
    items: Iterable,
    kg: KnowledgeGraph,
    orientation: Orientation = Orientation.SUBJECT_KNOWN,
) -> float:
    """Fraction of pairs with at least one matching test triplet.

    A pair is matched in the orientation it carries: SubjectKnown (e, p)
    needs a test triplet (e, p, *), ObjectKnown needs (*, p, e).
    """
    pairs = as_pairs(items, orientation)
    if not pairs:
        raise ValueError("pair precision is undefined for zero pairs")
    test_pairs: dict[Orientation, set[EntityPredicatePair]] = {}
    matched = 0
    for pair in pairs:
        o = pair.orientation
        if o not in test_pairs:
            test_pairs[o] = kg.pairs_of({TEST}, o)
        if pair in test_pairs[o]:
            matched += 1
    return matched / len(pairs)


def group_precision(
    groups: Mapping, kg: KnowledgeGraph
) -> dict:
    """Pair precision per labeled group; empty groups map to None, not 0."""
    out = {}
    for label, pairs in groups.items():
        pairs = list(pairs)
        out[label] = pair_precision(pairs, kg) if pairs else None
    return out


@dataclass
class EvalReport:
    method: str
    n_predictions: int
    hit_triplets: int
    predicted_pair_count: int
    pair_precision: float
    group_precision: dict = field(default_factory=dict)

    def as_text(self) -> str:
        lines = [
            f"method={self.method}",
            f"predictions={self.n_predictions}",
            f"hit_triplets={self.hit_triplets}",
            f"predicted_pairs={self.predicted_pair_count}",
            f"pair_precision={self.pair_precision:.6f}",
        ]
        for label in self.group_precision:
            value = self.group_precision[label]
            rendered = "n/a" if value is None else f"{value:.6f}"
            lines.append(f"group_precision[{label}]={rendered}")
        return "".join(line + "\n" for line in lines)

    def as_tsv(self) -> str:
        rows = [
            ("method", self.method),
            ("predictions", self.n_predictions),
            ("hit_triplets", self.hit_triplets),
            ("predicted_pairs", self.predicted_pair_count),
            ("pair_precision", f"{self.pair_precision:.6f}"),
        ]
        return "".join(f"{k}\t{v}\n" for k, v in rows)


def evaluate(
    predictions: Sequence[Prediction],
    kg: KnowledgeGraph,
    method: str,
    orientation: Orientation = Orientation.SUBJECT_KNOWN,
    groups: Mapping | None = None,
) -> EvalReport:
    pairs = as_pairs(predictions, orientation)
    return EvalReport(
        method=method,
        n_predictions=len(predictions),
        hit_triplets=hit_triplets(predictions, kg),
        predicted_pair_count=len(pairs),
        pair_precision=pair_precision(pairs, kg),
        group_precision=group_precision(groups, kg) if groups else {},
    )


# ---------------------------------------------------------------------------
# human-evaluation support: sample export and the R/C ratio

_ANNOTATION_HEADER = """\
# Annotation sample: mark each entity-predicate pair in both columns with 1 or 0.
# correct:  the entity can logically possess the attribute or relationship the
#           predicate describes (an inanimate object, say, cannot have a birthplace).
# relevant: a typical user looking this entity up would find the predicate's
#           information useful for that entity (a physiologist's "associated band"
#           may be correct yet irrelevant).
# Columns: entity<TAB>predicate<TAB>orientation<TAB>correct<TAB>relevant
"""


def export_annotation_sample(
    pairs: Iterable[EntityPredicatePair],
    kg: KnowledgeGraph,
    path,
    n: int = 200,
    seed: int | None = None,
) -> list[EntityPredicatePair]:
    """Write a uniform sample (without replacement) of pairs for manual
    annotation; deterministic under `seed` and invariant to input order."""
    if seed is None:
        raise ValueError("export_annotation_sample requires an explicit seed")
    ordered = sorted(set(pairs), key=lambda p: (p.orientation.value, p.predicate, p.entity))
    if n >= len(ordered):
        if n > len(ordered):
            log.warning(
                "annotation sample: requested %d of %d pairs; exporting all", n, len(ordered)
            )
        sample = ordered
    else:
        idx = rng_stream(seed, "annotation").choice(len(ordered), size=n, replace=False)
        sample = [ordered[i] for i in idx]
    with open(path, "w", encoding="utf-8") as f:
        f.write(_ANNOTATION_HEADER)
        for pair in sample:
            f.write(
                f"{kg.entities.resolve(pair.entity)}\t"
                f"{kg.predicates.resolve(pair.predicate)}\t"
                f"{pair.orientation.value}\t\t\n"
            )
    return sample


_BOOL = {
    "1": True, "true": True, "yes": True, "y": True,
    "0": False, "false": False, "no": False, "n": False,
}


def rc_ratio(path) -> float:
    """Among pairs annotated correct, the fraction also annotated relevant.

    Rows marked relevant but not correct contribute to neither side of the
    ratio; they are counted and warned about.
    """
    correct = 0
    relevant_and_correct = 0
    contradictory = 0
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 tab-separated fields")
            c_raw, r_raw = fields[3].strip().lower(), fields[4].strip().lower()
            if c_raw not in _BOOL or r_raw not in _BOOL:
                raise ValueError(f"{path}:{lineno}: unfilled or non-boolean annotation")
            c, r = _BOOL[c_raw], _BOOL[r_raw]
            if c:
                correct += 1
                if r:
                    relevant_and_correct += 1
            elif r:
                contradictory += 1
    if contradictory:
        log.warning("rc_ratio: %d rows relevant but not correct; excluded", contradictory)
    if correct == 0:
        raise ValueError("rc_ratio is undefined with zero correct annotations")
    return relevant_and_correct / correct


def save_bin_precisions(precisions: Mapping[int, float | None], path) -> None:
    """`bin<TAB>precision` rows in bin order, for external plotting."""
    with open(path, "w", encoding="utf-8") as f:
        for b in sorted(precisions):
            value = precisions[b]
            f.write(f"{b}\t{'n/a' if value is None else f'{value:.6f}'}\n")
