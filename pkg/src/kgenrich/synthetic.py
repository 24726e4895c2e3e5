"""Synthetic benchmark: a typed block-structured KG with matching metadata
and a query log biased toward held-out pairs.

Entities belong to one of a few types; each predicate accepts one type as
subject (domain) and one as range, and every generated triplet respects
those constraints.  The query log mixes pairs taken from test-split triplets
with off-structure noise pairs, mimicking logs that mostly ask for facts a
graph is missing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import MetadataTable, split
from .kg import (
    TEST,
    TRAIN,
    EntityPredicatePair,
    KnowledgeGraph,
    Orientation,
    Triplet,
    Vocabulary,
)
from .seeds import rng_stream

BASE_IRI = "http://example.org/kg/"


@dataclass
class SyntheticBenchmark:
    kg: KnowledgeGraph  # split applied
    metadata: MetadataTable
    query_log: list[str]
    entity_type_rows: list[tuple[str, str]]
    domain_range_rows: list[tuple[str, str, str]]


def make_kg(
    seed: int,
    n_types: int = 5,
    entities_per_type: int = 100,
    n_predicates: int = 10,
    n_triplets: int = 5000,
) -> tuple[KnowledgeGraph, MetadataTable, list[tuple[str, str]], list[tuple[str, str, str]]]:
    """Unsplit block-structured graph plus its (complete) metadata."""
    rng = rng_stream(seed, "synthetic-kg")
    n_entities = n_types * entities_per_type
    type_names = [f"type{k}" for k in range(n_types)]

    entities = Vocabulary()
    predicates = Vocabulary()
    entity_type_rows: list[tuple[str, str]] = []
    for k in range(n_types):
        for j in range(entities_per_type):
            label = f"{BASE_IRI}ent_{k}_{j}"
            entities.intern(label)
            entity_type_rows.append((label, type_names[k]))

    domain_range_rows: list[tuple[str, str, str]] = []
    domains, ranges = [], []
    for p in range(n_predicates):
        label = f"{BASE_IRI}pred_{p}"
        predicates.intern(label)
        dom = p % n_types
        rng_t = (p + 1 + p // n_types) % n_types
        domains.append(dom)
        ranges.append(rng_t)
        domain_range_rows.append((label, type_names[dom], type_names[rng_t]))

    def block(type_idx: int) -> np.ndarray:
        start = type_idx * entities_per_type
        return np.arange(start, start + entities_per_type)

    # spread triplets over every in-block (head, predicate) pair in a shuffled
    # round-robin, so pair multiplicity stays low and even
    pairs = [(h, p) for p in range(n_predicates) for h in block(domains[p])]
    rng.shuffle(pairs)
    stored: dict[Triplet, str] = {}
    while len(stored) < n_triplets:
        progress = False
        for h, p in pairs:
            if len(stored) >= n_triplets:
                break
            tails = block(ranges[p])
            t = int(tails[rng.integers(len(tails))])
            trip = Triplet(int(h), p, t)
            if trip not in stored:
                stored[trip] = TRAIN
                progress = True
        if not progress:
            raise ValueError("candidate space too small for requested triplet count")

    kg = KnowledgeGraph(entities, predicates, stored)
    metadata = MetadataTable(
        entity_types={
            kg.entities.id_of(label): frozenset({typ}) for label, typ in entity_type_rows
        },
        predicate_domains={
            kg.predicates.id_of(lbl): frozenset({d}) for lbl, d, _ in domain_range_rows
        },
        predicate_ranges={
            kg.predicates.id_of(lbl): frozenset({r}) for lbl, _, r in domain_range_rows
        },
    )
    return kg, metadata, entity_type_rows, domain_range_rows


def make_query_log(
    kg: KnowledgeGraph,
    seed: int,
    n_pairs: int = 400,
    test_fraction: float = 0.8,
    distractor_every: int = 10,
) -> list[str]:
    """One SELECT line per pair: `test_fraction` of the pairs come from
    test-split triplets, the rest are uniform noise pairs absent from the
    test split.  Occasional ASK lines are sprinkled in as non-SELECT
    distractors."""
    rng = rng_stream(seed, "synthetic-log")
    test_pairs = sorted(
        kg.pairs_of({TEST}, Orientation.SUBJECT_KNOWN),
        key=lambda p: (p.predicate, p.entity),
    )
    n_test = min(round(n_pairs * test_fraction), len(test_pairs))
    picked = [test_pairs[i] for i in rng.choice(len(test_pairs), size=n_test, replace=False)]
    test_set = set(test_pairs)

    noise: list[tuple[int, int]] = []
    noise_seen = set()
    while len(noise) < n_pairs - n_test:
        e = int(rng.integers(kg.n_entities))
        p = int(rng.integers(kg.n_predicates))
        key = (e, p)
        if key in noise_seen:
            continue
        if EntityPredicatePair(e, p, Orientation.SUBJECT_KNOWN) in test_set:
            continue
        noise_seen.add(key)
        noise.append(key)

    lines: list[str] = []
    queries = [(q.entity, q.predicate) for q in picked] + noise
    order = rng.permutation(len(queries))
    for i, qi in enumerate(order):
        e, p = queries[qi]
        el = kg.entities.resolve(e)
        pl = kg.predicates.resolve(p)
        lines.append(f"SELECT ?x WHERE {{ <{el}> <{pl}> ?x }}")
        if distractor_every and (i + 1) % distractor_every == 0:
            lines.append(f"ASK {{ <{el}> <{pl}> <{el}> }}")
    return lines


def make_benchmark(
    seed: int,
    n_types: int = 5,
    entities_per_type: int = 100,
    n_predicates: int = 10,
    n_triplets: int = 5000,
    ratios: tuple[float, float, float] = (0.70, 0.10, 0.20),
    n_log_pairs: int = 400,
    test_fraction: float = 0.8,
) -> SyntheticBenchmark:
    kg, metadata, ent_rows, dr_rows = make_kg(
        seed, n_types, entities_per_type, n_predicates, n_triplets
    )
    kg = split(kg, ratios, seed=seed)
    log_lines = make_query_log(kg, seed, n_pairs=n_log_pairs, test_fraction=test_fraction)
    return SyntheticBenchmark(kg, metadata, log_lines, ent_rows, dr_rows)


def write_benchmark_files(bench: SyntheticBenchmark, out_dir) -> dict[str, str]:
    """Materialize the benchmark as pipeline inputs: kg.nt, queries.txt, and
    the two metadata TSVs.  Returns the written paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "kg": os.path.join(out_dir, "kg.nt"),
        "log": os.path.join(out_dir, "queries.txt"),
        "entity_types": os.path.join(out_dir, "entity_types.tsv"),
        "domain_range": os.path.join(out_dir, "domain_range.tsv"),
    }
    with open(paths["kg"], "w", encoding="utf-8") as f:
        for trip in bench.kg:
            h, r, t = bench.kg.label_triple(trip)
            f.write(f"<{h}> <{r}> <{t}> .\n")
    with open(paths["log"], "w", encoding="utf-8") as f:
        f.write("".join(line + "\n" for line in bench.query_log))
    with open(paths["entity_types"], "w", encoding="utf-8") as f:
        f.write("".join(f"{e}\t{t}\n" for e, t in bench.entity_type_rows))
    with open(paths["domain_range"], "w", encoding="utf-8") as f:
        f.write("".join(f"{p}\t{d}\t{r}\n" for p, d, r in bench.domain_range_rows))
    return paths
