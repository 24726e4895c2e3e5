"""Loading, sanitization, splitting, and metadata for knowledge graphs.

Input formats: N-Triples (`<s> <p> <o> .` per line, literal objects skipped)
and 3-column TSV.  Sanitization drops URL-only / number-only / list-style
entities and, when a mined query-pair table is supplied, triplets whose
predicate and entities are all absent from the query logs.
"""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence
from urllib.parse import urlparse

import numpy as np

from .kg import SPLITS, KnowledgeGraph, Triplet, Vocabulary
from .seeds import rng_stream

log = logging.getLogger(__name__)

_NT_LINE = re.compile(r"^<([^<>\"\s]+)>\s+<([^<>\"\s]+)>\s+(\S.*?)\s*\.\s*$")
_DIGITS_ONLY = re.compile(r"[0-9]+")


@dataclass
class LoadReport:
    path: str
    lines: int = 0
    triplets: int = 0
    literal_skips: int = 0
    malformed: int = 0
    duplicates: int = 0

    def as_text(self) -> str:
        return "".join(
            f"{k}={v}\n"
            for k, v in (
                ("path", self.path),
                ("lines", self.lines),
                ("triplets", self.triplets),
                ("literal_skips", self.literal_skips),
                ("malformed", self.malformed),
                ("duplicates", self.duplicates),
            )
        )


@dataclass
class RawGraph:
    """Label-level triples as parsed from disk, before interning."""

    triples: list[tuple[str, str, str]]
    report: LoadReport

    def entity_labels(self) -> set[str]:
        out = set()
        for h, _, t in self.triples:
            out.add(h)
            out.add(t)
        return out

    def predicate_labels(self) -> set[str]:
        return {r for _, r, _ in self.triples}


def _finish(raw: list[tuple[str, str, str]], report: LoadReport) -> RawGraph:
    seen: dict[tuple[str, str, str], None] = {}
    for trip in raw:
        if trip in seen:
            report.duplicates += 1
        else:
            seen[trip] = None
    report.triplets = len(seen)
    return RawGraph(list(seen), report)


def load_ntriples(path, strict: bool = False) -> RawGraph:
    """Parse an N-Triples file.

    Literal objects are excluded by design and counted; malformed lines are
    skipped (lenient, default) or abort the load (`strict=True`).
    """
    report = LoadReport(path=str(path))
    raw: list[tuple[str, str, str]] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            report.lines += 1
            m = _NT_LINE.match(line)
            if m is None:
                if strict:
                    raise ValueError(f"{path}:{lineno}: malformed N-Triples line")
                report.malformed += 1
                continue
            s, p, o = m.groups()
            if o.startswith("<") and o.endswith(">"):
                raw.append((s, p, o[1:-1]))
            elif o.startswith('"'):
                report.literal_skips += 1
            else:
                if strict:
                    raise ValueError(f"{path}:{lineno}: malformed object term")
                report.malformed += 1
    return _finish(raw, report)


def load_tsv(path, strict: bool = False) -> RawGraph:
    """Parse `head<TAB>predicate<TAB>tail` lines; duplicates collapse."""
    report = LoadReport(path=str(path))
    raw: list[tuple[str, str, str]] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            report.lines += 1
            fields = line.split("\t")
            if len(fields) != 3 or not all(fields):
                if strict:
                    raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
                report.malformed += 1
                continue
            raw.append(tuple(fields))
    return _finish(raw, report)


def local_name(label: str) -> str:
    """Fragment after the last '/' or '#', the whole label otherwise."""
    cut = max(label.rfind("/"), label.rfind("#"))
    return label[cut + 1 :]


def is_url_or_number_entity(label: str) -> bool:
    """Digits-only local name, or an absolute URL with no local name."""
    ln = local_name(label)
    if _DIGITS_ONLY.fullmatch(ln):
        return True
    if ln == "":
        parsed = urlparse(label)
        return bool(parsed.scheme and parsed.netloc)
    return False


def is_list_entity(label: str) -> bool:
    return local_name(label).lower().startswith("list_of")


class PairSource(Protocol):
    """Anything exposing the entity/predicate labels seen in query logs."""

    def entity_labels(self) -> set[str]: ...

    def predicate_labels(self) -> set[str]: ...


@dataclass
class SanitizationReport:
    input_triplets: int = 0
    kept_triplets: int = 0
    removed_url_number: int = 0
    removed_list_entity: int = 0
    removed_query_irrelevant: int = 0

    @property
    def removed_total(self) -> int:
        return (
            self.removed_url_number
            + self.removed_list_entity
            + self.removed_query_irrelevant
        )

    def as_text(self) -> str:
        return "".join(
            f"{k}={v}\n"
            for k, v in (
                ("input_triplets", self.input_triplets),
                ("kept_triplets", self.kept_triplets),
                ("removed_url_number", self.removed_url_number),
                ("removed_list_entity", self.removed_list_entity),
                ("removed_query_irrelevant", self.removed_query_irrelevant),
            )
        )


def sanitize(
    raw: RawGraph | Iterable[tuple[str, str, str]],
    query_pairs: PairSource | None = None,
) -> tuple[KnowledgeGraph, SanitizationReport]:
    """Drop bad-entity triplets, then query-irrelevant ones; intern the rest.

    A triplet survives the query-relevance rule iff its predicate occurs in
    the query logs or at least one of its entities does.  Rules fire in
    order, so each removal is counted once.  The result is an unsplit graph
    (everything in train) with frozen vocabularies covering only kept labels.
    """
    triples = raw.triples if isinstance(raw, RawGraph) else list(raw)
    report = SanitizationReport(input_triplets=len(triples))

    bad_entity_cache: dict[str, str | None] = {}

    def entity_rule(label: str) -> str | None:
        verdict = bad_entity_cache.get(label, "?")
        if verdict != "?":
            return verdict
        if is_url_or_number_entity(label):
            verdict = "url_number"
        elif is_list_entity(label):
            verdict = "list"
        else:
            verdict = None
        bad_entity_cache[label] = verdict
        return verdict

    if query_pairs is not None:
        log_entities = query_pairs.entity_labels()
        log_predicates = query_pairs.predicate_labels()

    kept: list[tuple[str, str, str]] = []
    for h, r, t in triples:
        rule = entity_rule(h) or entity_rule(t)
        if rule == "url_number":
            report.removed_url_number += 1
            continue
        if rule == "list":
            report.removed_list_entity += 1
            continue
        if query_pairs is not None:
            if r not in log_predicates and h not in log_entities and t not in log_entities:
                report.removed_query_irrelevant += 1
                continue
        kept.append((h, r, t))

    report.kept_triplets = len(kept)
    return KnowledgeGraph.from_label_triples(kept), report


def _apportion(n: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder split sizes; positive ratios never round to zero
    when there is enough to go around."""
    quotas = [n * r for r in ratios]
    sizes = [int(q) for q in quotas]
    remainders = [q - s for q, s in zip(quotas, sizes)]
    for _ in range(n - sum(sizes)):
        i = max(range(len(ratios)), key=lambda j: (remainders[j], -j))
        sizes[i] += 1
        remainders[i] = -1.0
    positive = [i for i, r in enumerate(ratios) if r > 0]
    if n >= max(10, len(positive)):
        for i in positive:
            if sizes[i] == 0:
                donor = max(range(len(sizes)), key=lambda j: sizes[j])
                sizes[donor] -= 1
                sizes[i] += 1
    return sizes


def split(
    kg: KnowledgeGraph,
    ratios: tuple[float, float, float] = (0.70, 0.10, 0.20),
    seed: int | None = None,
) -> KnowledgeGraph:
    """Uniform random train/dev/test partition, deterministic under `seed`."""
    if seed is None:
        raise ValueError("split requires an explicit seed")
    if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must be non-negative and sum to 1, got {ratios}")
    n = len(kg)
    sizes = _apportion(n, ratios)
    labels = np.repeat(SPLITS, sizes)
    perm = rng_stream(seed, "split").permutation(n)
    assignment = [""] * n
    for pos, lab in zip(perm, labels):
        assignment[pos] = lab
    return kg.with_split_assignment(assignment)


@dataclass
class MetadataTable:
    """Entity types plus predicate domain/range constraints, by vocab id."""

    entity_types: dict[int, frozenset[str]] = field(default_factory=dict)
    predicate_domains: dict[int, frozenset[str]] = field(default_factory=dict)
    predicate_ranges: dict[int, frozenset[str]] = field(default_factory=dict)

    def types_of(self, entity_id: int) -> frozenset[str]:
        return self.entity_types.get(entity_id, frozenset())

    def domain_of(self, predicate_id: int) -> frozenset[str]:
        return self.predicate_domains.get(predicate_id, frozenset())

    def range_of(self, predicate_id: int) -> frozenset[str]:
        return self.predicate_ranges.get(predicate_id, frozenset())


def load_metadata(entity_type_path, domain_range_path, kg: KnowledgeGraph) -> MetadataTable:
    """TSV metadata: `entity<TAB>type` rows and `predicate<TAB>domain<TAB>range`
    rows.  Labels unknown to the graph are warned about and skipped."""
    table = MetadataTable()
    ent_acc: dict[int, set[str]] = {}
    dom_acc: dict[int, set[str]] = {}
    rng_acc: dict[int, set[str]] = {}
    skipped = 0

    with open(entity_type_path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2 or not all(fields):
                log.warning("%s:%d: expected entity<TAB>type, skipped", entity_type_path, lineno)
                skipped += 1
                continue
            label, typ = fields
            if label not in kg.entities:
                log.warning("%s:%d: entity %r not in graph, skipped", entity_type_path, lineno, label)
                skipped += 1
                continue
            ent_acc.setdefault(kg.entities.id_of(label), set()).add(typ)

    with open(domain_range_path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3 or not all(fields):
                log.warning(
                    "%s:%d: expected predicate<TAB>domain<TAB>range, skipped",
                    domain_range_path,
                    lineno,
                )
                skipped += 1
                continue
            label, dom, rng = fields
            if label not in kg.predicates:
                log.warning("%s:%d: predicate %r not in graph, skipped", domain_range_path, lineno, label)
                skipped += 1
                continue
            pid = kg.predicates.id_of(label)
            dom_acc.setdefault(pid, set()).add(dom)
            rng_acc.setdefault(pid, set()).add(rng)

    if skipped:
        log.warning("metadata: %d rows skipped", skipped)
    table.entity_types = {k: frozenset(v) for k, v in ent_acc.items()}
    table.predicate_domains = {k: frozenset(v) for k, v in dom_acc.items()}
    table.predicate_ranges = {k: frozenset(v) for k, v in rng_acc.items()}
    return table


# ---------------------------------------------------------------------------
# on-disk graph directory: vocab checkpoints + a split-labeled triple TSV


def save_kg_dir(kg: KnowledgeGraph, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    kg.entities.save(os.path.join(out_dir, "entities.txt"))
    kg.predicates.save(os.path.join(out_dir, "predicates.txt"))
    with open(os.path.join(out_dir, "triplets.tsv"), "w", encoding="utf-8") as f:
        for trip in kg:
            h, r, t = kg.label_triple(trip)
            f.write(f"{h}\t{r}\t{t}\t{kg.split_of(trip)}\n")


def load_kg_dir(in_dir) -> KnowledgeGraph:
    entities = Vocabulary.load(os.path.join(in_dir, "entities.txt"))
    predicates = Vocabulary.load(os.path.join(in_dir, "predicates.txt"))
    stored: dict[Triplet, str] = {}
    path = os.path.join(in_dir, "triplets.tsv")
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
            h, r, t, s = fields
            stored[Triplet(entities.id_of(h), predicates.id_of(r), entities.id_of(t))] = s
    return KnowledgeGraph(entities, predicates, stored)
