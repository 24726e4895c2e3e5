"""Core in-memory knowledge-graph model.

A knowledge graph is a set of (head, predicate, tail) triplets over two
dense-interned vocabularies (entities and predicates), optionally carrying a
train/dev/test partition.  Everything here is immutable after construction
and safe for concurrent readers; embedding matrices index entities and
predicates directly by their vocabulary ids.
"""

from __future__ import annotations

import enum
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

TRAIN = "train"
DEV = "dev"
TEST = "test"
SPLITS = (TRAIN, DEV, TEST)
ALL_SPLITS = frozenset(SPLITS)


class Orientation(enum.Enum):
    """Which slot of an entity-predicate pair holds the known entity."""

    SUBJECT_KNOWN = "subject"
    OBJECT_KNOWN = "object"

    @classmethod
    def from_value(cls, value: str) -> "Orientation":
        for member in cls:
            if member.value == value:
                return member
        raise ValueError(f"unknown orientation {value!r}")


class Triplet(NamedTuple):
    head: int
    predicate: int
    tail: int


class EntityPredicatePair(NamedTuple):
    entity: int
    predicate: int
    orientation: Orientation


def pair_of_triplet(t: Triplet, orientation: Orientation) -> EntityPredicatePair:
    """The pair left when the triplet slot opposite to `orientation` is opened."""
    if orientation is Orientation.SUBJECT_KNOWN:
        return EntityPredicatePair(t.head, t.predicate, orientation)
    return EntityPredicatePair(t.tail, t.predicate, orientation)


class Vocabulary:
    """Dense string interner: labels get consecutive ids starting at 0.

    Interning is idempotent; ids are stable for the lifetime of the loaded
    dataset.  A frozen vocabulary rejects new labels instead of silently
    growing, so prediction-time typos surface as errors.
    """

    def __init__(self, labels: Iterable[str] = ()):
        self._labels: list[str] = []
        self._ids: dict[str, int] = {}
        self._frozen = False
        for label in labels:
            self.intern(label)

    def intern(self, label: str) -> int:
        if not label:
            raise ValueError("cannot intern an empty label")
        existing = self._ids.get(label)
        if existing is not None:
            return existing
        if self._frozen:
            raise KeyError(f"vocabulary is frozen; unknown label {label!r}")
        idx = len(self._labels)
        self._labels.append(label)
        self._ids[label] = idx
        return idx

    def id_of(self, label: str) -> int:
        try:
            return self._ids[label]
        except KeyError:
            raise KeyError(f"label {label!r} not in vocabulary") from None

    def resolve(self, idx: int) -> str:
        if not 0 <= idx < len(self._labels):
            raise KeyError(f"id {idx} not in vocabulary of size {len(self._labels)}")
        return self._labels[idx]

    def freeze(self) -> "Vocabulary":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def __len__(self) -> int:
        return len(self._labels)

    def __contains__(self, label: str) -> bool:
        return label in self._ids

    def __iter__(self) -> Iterator[str]:
        return iter(self._labels)

    def save(self, path) -> None:
        """Text checkpoint: one label per line, line number = id."""
        with open(path, "w", encoding="utf-8") as f:
            for label in self._labels:
                f.write(label + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, "r", encoding="utf-8") as f:
            labels = [line.rstrip("\n") for line in f]
        if labels and labels[-1] == "":
            labels.pop()
        vocab = cls(labels)
        vocab.freeze()
        return vocab


class KnowledgeGraph:
    """Triplet store over frozen vocabularies with a split partition.

    Membership tests are O(1); the canonical triplet order is insertion
    order, which downstream code relies on for reproducible iteration.
    """

    def __init__(
        self,
        entities: Vocabulary,
        predicates: Vocabulary,
        split_by_triplet: Mapping[Triplet, str],
    ):
        n_e, n_p = len(entities), len(predicates)
        for t, s in split_by_triplet.items():
            if s not in ALL_SPLITS:
                raise ValueError(f"unknown split label {s!r} for triplet {t}")
            if not (0 <= t.head < n_e and 0 <= t.tail < n_e):
                raise KeyError(f"entity id out of range in triplet {t}")
            if not 0 <= t.predicate < n_p:
                raise KeyError(f"predicate id out of range in triplet {t}")
        self.entities = entities.freeze()
        self.predicates = predicates.freeze()
        self._splits: dict[Triplet, str] = dict(split_by_triplet)

    @classmethod
    def from_label_triples(
        cls,
        label_triples: Iterable[tuple[str, str, str]],
        split: str = TRAIN,
    ) -> "KnowledgeGraph":
        """Intern labels in first-seen order; duplicate triples collapse."""
        entities = Vocabulary()
        predicates = Vocabulary()
        stored: dict[Triplet, str] = {}
        for h, r, t in label_triples:
            trip = Triplet(entities.intern(h), predicates.intern(r), entities.intern(t))
            stored.setdefault(trip, split)
        return cls(entities, predicates, stored)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_predicates(self) -> int:
        return len(self.predicates)

    def __len__(self) -> int:
        return len(self._splits)

    def __iter__(self) -> Iterator[Triplet]:
        return iter(self._splits)

    def split_of(self, t: Triplet) -> str:
        return self._splits[t]

    def split_sizes(self) -> dict[str, int]:
        sizes = {s: 0 for s in SPLITS}
        for s in self._splits.values():
            sizes[s] += 1
        return sizes

    def _check_ids(self, t: Triplet) -> None:
        if not (0 <= t.head < self.n_entities and 0 <= t.tail < self.n_entities):
            raise KeyError(f"entity id out of range in triplet {t}")
        if not 0 <= t.predicate < self.n_predicates:
            raise KeyError(f"predicate id out of range in triplet {t}")

    def contains(self, t: Triplet, scope: Iterable[str] = ALL_SPLITS) -> bool:
        """True iff `t` is stored and its split lies within `scope`."""
        t = Triplet(*t)
        self._check_ids(t)
        split = self._splits.get(t)
        return split is not None and split in set(scope)

    def triplets_in(self, scope: Iterable[str] = ALL_SPLITS) -> list[Triplet]:
        scope = set(scope)
        return [t for t, s in self._splits.items() if s in scope]

    def triplet_set(self, scope: Iterable[str] = ALL_SPLITS) -> frozenset[Triplet]:
        return frozenset(self.triplets_in(scope))

    def id_arrays(self, scope: Iterable[str] = ALL_SPLITS):
        """(heads, predicates, tails) int64 arrays for vectorized work."""
        trips = self.triplets_in(scope)
        if not trips:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty.copy(), empty.copy()
        arr = np.asarray(trips, dtype=np.int64)
        return arr[:, 0], arr[:, 1], arr[:, 2]

    def pairs_of(
        self, scope: Iterable[str], orientation: Orientation
    ) -> set[EntityPredicatePair]:
        """Distinct (entity, predicate) pairs occurring in `scope`.

        SubjectKnown keeps (head, predicate); ObjectKnown keeps
        (tail, predicate).
        """
        return {pair_of_triplet(t, orientation) for t in self.triplets_in(scope)}

    def with_split_assignment(self, assignment: Sequence[str]) -> "KnowledgeGraph":
        """New graph with per-triplet splits in canonical (insertion) order."""
        trips = list(self._splits)
        if len(assignment) != len(trips):
            raise ValueError(
                f"assignment length {len(assignment)} != triplet count {len(trips)}"
            )
        return KnowledgeGraph(
            self.entities, self.predicates, dict(zip(trips, assignment))
        )

    def label_triple(self, t: Triplet) -> tuple[str, str, str]:
        return (
            self.entities.resolve(t.head),
            self.predicates.resolve(t.predicate),
            self.entities.resolve(t.tail),
        )
