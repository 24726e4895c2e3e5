"""SPARQL query-log mining: classify queries, extract entity-predicate pairs.

The grammar is a deliberate subset — PREFIX/BASE declarations, SELECT with a
variable list or `*`, WHERE groups of basic graph patterns with OPTIONAL,
UNION and the `;` / `,` abbreviations.  FILTER bodies and trailing solution
modifiers (LIMIT, ORDER BY, ...) are skipped.  Non-SELECT forms are
classified but never mined.  A SELECT whose WHERE body defeats the grammar
keeps its form and is counted as unextractable.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple
from urllib.parse import unquote_plus

from .kg import EntityPredicatePair, KnowledgeGraph, Orientation

log = logging.getLogger(__name__)

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"


class QueryForm(Enum):
    SELECT = "select"
    CONSTRUCT = "construct"
    ASK = "ask"
    DESCRIBE = "describe"
    OTHER = "other"


class Iri(NamedTuple):
    value: str


class Var(NamedTuple):
    name: str


class TriplePattern(NamedTuple):
    s: Iri | Var
    p: Iri | Var
    o: Iri | Var


@dataclass
class SparqlQuery:
    form: QueryForm
    prefixes: dict[str, str] = field(default_factory=dict)
    patterns: list[TriplePattern] = field(default_factory=list)
    extractable: bool = True


class LabelPair(NamedTuple):
    """Entity-predicate pair at label level (no vocabulary fixed yet)."""

    entity: str
    predicate: str
    orientation: Orientation


class _ParseError(Exception):
    pass


# ---------------------------------------------------------------------------
# tokenizer


_PUNCT = set("{}();,.")
_WORD_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_WORD_BODY = _WORD_START | set("0123456789-")
_LOCAL_BODY = _WORD_BODY | set(".")


def _tokenize(text: str) -> list[tuple[str, str]]:
    """Tagged tokens: iri, pname, var, word, lit, num, punct, op."""
    tokens: list[tuple[str, str]] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c == "#":
            j = text.find("\n", i)
            i = n if j < 0 else j + 1
        elif c == "<":
            j = text.find(">", i + 1)
            body = text[i + 1 : j] if j >= 0 else ""
            if j < 0 or any(ch.isspace() or ch in '<"{}|^`' for ch in body):
                tokens.append(("op", c))  # comparison operator, not an IRI
                i += 1
            else:
                tokens.append(("iri", body))
                i = j + 1
        elif c in "\"'":
            quote = c
            j = i + 1
            while j < n:
                if text[j] == "\\":
                    j += 2
                elif text[j] == quote:
                    break
                else:
                    j += 1
            if j >= n:
                raise _ParseError("unterminated string literal")
            i = j + 1
            # optional @lang or ^^datatype suffix belongs to the literal
            if i < n and text[i] == "@":
                i += 1
                while i < n and (text[i].isalnum() or text[i] == "-"):
                    i += 1
            elif text.startswith("^^", i):
                i += 2
                if i < n and text[i] == "<":
                    j = text.find(">", i)
                    if j < 0:
                        raise _ParseError("unterminated datatype IRI")
                    i = j + 1
                else:
                    while i < n and (text[i] in _LOCAL_BODY or text[i] == ":"):
                        i += 1
            tokens.append(("lit", ""))
        elif c in "?$":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            if j == i + 1:
                tokens.append(("op", c))
                i += 1
            else:
                tokens.append(("var", text[i + 1 : j]))
                i = j
        elif c.isdigit() or (c in "+-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            while j < n and (text[j].isdigit() or text[j] in ".eE+-"):
                j += 1
            tokens.append(("num", text[i:j]))
            i = j
        elif c in _PUNCT:
            tokens.append(("punct", c))
            i += 1
        elif c in _WORD_START or c == ":":
            j = i
            while j < n and text[j] in _WORD_BODY:
                j += 1
            if j < n and text[j] == ":":
                prefix = text[i:j]
                j += 1
                k = j
                while k < n and text[k] in _LOCAL_BODY:
                    k += 1
                while k > j and text[k - 1] == ".":
                    k -= 1  # a trailing dot ends the statement, not the name
                tokens.append(("pname", prefix + ":" + text[j:k]))
                i = k
            else:
                tokens.append(("word", text[i:j]))
                i = j
        else:
            tokens.append(("op", c))
            i += 1
    return tokens


# ---------------------------------------------------------------------------
# parser


_FORMS = {
    "select": QueryForm.SELECT,
    "construct": QueryForm.CONSTRUCT,
    "ask": QueryForm.ASK,
    "describe": QueryForm.DESCRIBE,
}

_KEYWORDS = {"optional", "union", "filter", "where", "a"}


def _classify_fallback(text: str) -> QueryForm:
    lowered = text.lower()
    best: tuple[int, QueryForm] | None = None
    for kw, form in _FORMS.items():
        pos = lowered.find(kw)
        if pos >= 0 and (best is None or pos < best[0]):
            best = (pos, form)
    return best[1] if best else QueryForm.OTHER


def _expand_pname(pname: str, prefixes: dict[str, str]) -> str:
    prefix, _, local = pname.partition(":")
    if prefix not in prefixes:
        raise _ParseError(f"undeclared prefix {prefix!r}")
    return prefixes[prefix] + local


def _term(tok: tuple[str, str], prefixes: dict[str, str], predicate_position: bool):
    kind, value = tok
    if kind == "iri":
        return Iri(value)
    if kind == "pname":
        return Iri(_expand_pname(value, prefixes))
    if kind == "var":
        return Var(value)
    if kind == "word":
        if predicate_position and value == "a":
            return Iri(RDF_TYPE)
        if value.lower() in _KEYWORDS or value.lower() in _FORMS:
            raise _ParseError(f"keyword {value!r} where a term was expected")
        return Iri(value)
    if kind in ("lit", "num"):
        return None  # literal slot: pattern cannot yield a pair
    raise _ParseError(f"unexpected token {tok}")


def _skip_parens(tokens: list[tuple[str, str]], i: int) -> int:
    if tokens[i] != ("punct", "("):
        raise _ParseError("expected '(' after FILTER")
    depth = 0
    while i < len(tokens):
        if tokens[i] == ("punct", "("):
            depth += 1
        elif tokens[i] == ("punct", ")"):
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    raise _ParseError("unbalanced parentheses")


def _parse_group(
    tokens: list[tuple[str, str]], i: int, prefixes: dict[str, str]
) -> tuple[list[TriplePattern], int]:
    if i >= len(tokens) or tokens[i] != ("punct", "{"):
        raise _ParseError("expected '{'")
    i += 1
    patterns: list[TriplePattern] = []
    while True:
        if i >= len(tokens):
            raise _ParseError("unterminated group")
        kind, value = tokens[i]
        if (kind, value) == ("punct", "}"):
            return patterns, i + 1
        if (kind, value) == ("punct", "{"):
            inner, i = _parse_group(tokens, i, prefixes)
            patterns.extend(inner)
            continue
        if kind == "word" and value.lower() == "optional":
            inner, i = _parse_group(tokens, i + 1, prefixes)
            patterns.extend(inner)
            continue
        if kind == "word" and value.lower() == "union":
            i += 1
            continue
        if kind == "word" and value.lower() == "filter":
            i = _skip_parens(tokens, i + 1)
            continue
        if (kind, value) == ("punct", "."):
            i += 1
            continue
        # triples block: subject, then `pred obj (, obj)* (; pred obj ...)* .`
        subject = _term(tokens[i], prefixes, predicate_position=False)
        i += 1
        while True:
            if i >= len(tokens):
                raise _ParseError("unterminated triple")
            if tokens[i][0] == "punct" and tokens[i][1] in ".}":
                break  # dangling ';'
            predicate = _term(tokens[i], prefixes, predicate_position=True)
            i += 1
            while True:
                if i >= len(tokens):
                    raise _ParseError("unterminated triple")
                obj = _term(tokens[i], prefixes, predicate_position=False)
                i += 1
                if subject is not None and predicate is not None and obj is not None:
                    patterns.append(TriplePattern(subject, predicate, obj))
                if i < len(tokens) and tokens[i] == ("punct", ","):
                    i += 1
                    continue
                break
            if i < len(tokens) and tokens[i] == ("punct", ";"):
                i += 1
                continue
            break
        if i < len(tokens) and tokens[i] == ("punct", "."):
            i += 1


def parse_query(text: str) -> SparqlQuery:
    """Classify a query and, for SELECT, pull triple patterns out of WHERE."""
    try:
        tokens = _tokenize(text)
    except _ParseError:
        return SparqlQuery(form=_classify_fallback(text), extractable=False)

    prefixes: dict[str, str] = {}
    i = 0
    try:
        while i < len(tokens):
            kind, value = tokens[i]
            if kind == "word" and value.lower() == "prefix":
                if i + 2 >= len(tokens) or tokens[i + 1][0] != "pname" or tokens[i + 2][0] != "iri":
                    raise _ParseError("malformed PREFIX declaration")
                name = tokens[i + 1][1].rsplit(":", 1)[0]
                prefixes[name] = tokens[i + 2][1]
                i += 3
                continue
            if kind == "word" and value.lower() == "base":
                if i + 1 >= len(tokens) or tokens[i + 1][0] != "iri":
                    raise _ParseError("malformed BASE declaration")
                i += 2
                continue
            break
    except _ParseError:
        return SparqlQuery(form=_classify_fallback(text), extractable=False)

    if i >= len(tokens) or tokens[i][0] != "word" or tokens[i][1].lower() not in _FORMS:
        return SparqlQuery(form=QueryForm.OTHER, prefixes=prefixes, extractable=False)
    form = _FORMS[tokens[i][1].lower()]
    i += 1
    if form is not QueryForm.SELECT:
        return SparqlQuery(form=form, prefixes=prefixes)

    # skip the projection (variable list, '*', DISTINCT/REDUCED) up to the group
    while i < len(tokens) and tokens[i] != ("punct", "{"):
        if tokens[i][0] == "word" and tokens[i][1].lower() == "where":
            i += 1
            break
        i += 1
    while i < len(tokens) and tokens[i] != ("punct", "{"):
        i += 1
    try:
        patterns, _ = _parse_group(tokens, i, prefixes)
    except _ParseError:
        return SparqlQuery(form=form, prefixes=prefixes, extractable=False)
    return SparqlQuery(form=form, prefixes=prefixes, patterns=patterns)


def extract_pairs(query: SparqlQuery) -> list[LabelPair]:
    """Oriented pairs from patterns with a concrete predicate and exactly one
    concrete entity; deterministic, in pattern order."""
    if query.form is not QueryForm.SELECT:
        raise ValueError("pair extraction is defined for SELECT queries only")
    pairs: list[LabelPair] = []
    for s, p, o in query.patterns:
        if not isinstance(p, Iri):
            continue
        if isinstance(s, Iri) and isinstance(o, Var):
            pairs.append(LabelPair(s.value, p.value, Orientation.SUBJECT_KNOWN))
        elif isinstance(s, Var) and isinstance(o, Iri):
            pairs.append(LabelPair(o.value, p.value, Orientation.OBJECT_KNOWN))
    return pairs


# ---------------------------------------------------------------------------
# log-level aggregation


@dataclass
class LogStats:
    total_queries: int = 0
    form_counts: dict[QueryForm, int] = field(default_factory=dict)
    unextractable_selects: int = 0
    dropped_pairs: int = 0

    @property
    def select_fraction(self) -> float:
        if self.total_queries == 0:
            return 0.0
        return self.form_counts.get(QueryForm.SELECT, 0) / self.total_queries

    def as_text(self) -> str:
        lines = [f"total_queries={self.total_queries}"]
        for form in QueryForm:
            lines.append(f"form_{form.value}={self.form_counts.get(form, 0)}")
        lines.append(f"select_fraction={self.select_fraction:.6f}")
        lines.append(f"unextractable_selects={self.unextractable_selects}")
        lines.append(f"dropped_pairs={self.dropped_pairs}")
        return "".join(line + "\n" for line in lines)


@dataclass
class MinedPairs:
    """Label-level pair frequencies mined from a log, before any KG is fixed.

    Occurrence sets are term-level: every concrete IRI in a parsed SELECT
    pattern counts as seen, whether or not it forms an extractable pair.
    Sanitization keys on these, the pair table on `counts`.
    """

    counts: Counter[LabelPair] = field(default_factory=Counter)
    stats: LogStats = field(default_factory=LogStats)
    entity_occurrences: set[str] = field(default_factory=set)
    predicate_occurrences: set[str] = field(default_factory=set)

    def entity_labels(self) -> set[str]:
        return self.entity_occurrences

    def predicate_labels(self) -> set[str]:
        return self.predicate_occurrences


def mine_lines(lines: Iterable[str], decode: bool = True) -> MinedPairs:
    """One query per line; blank lines are ignored, everything else counts."""
    mined = MinedPairs()
    counts = mined.counts
    stats = mined.stats
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if decode:
            line = unquote_plus(line)
        stats.total_queries += 1
        query = parse_query(line)
        stats.form_counts[query.form] = stats.form_counts.get(query.form, 0) + 1
        if query.form is QueryForm.SELECT:
            if not query.extractable:
                stats.unextractable_selects += 1
                continue
            for s, p, o in query.patterns:
                if isinstance(s, Iri):
                    mined.entity_occurrences.add(s.value)
                if isinstance(o, Iri):
                    mined.entity_occurrences.add(o.value)
                if isinstance(p, Iri):
                    mined.predicate_occurrences.add(p.value)
            for pair in extract_pairs(query):
                counts[pair] += 1
    return mined


def mine_log(path, decode: bool = True) -> MinedPairs:
    with open(path, "r", encoding="utf-8") as f:
        return mine_lines(f, decode=decode)


class QueryPairTable:
    """Id-resolved pair frequencies; every key resolves in the KG vocabularies.

    Pairs are held in a canonical order (orientation, predicate id, entity id)
    so sampling and serialization do not depend on mining order.
    """

    def __init__(self, counts: dict[EntityPredicatePair, int]):
        for pair, freq in counts.items():
            if freq < 1:
                raise ValueError(f"pair {pair} has non-positive frequency {freq}")
        ordered = sorted(
            counts.items(), key=lambda kv: (kv[0].orientation.value, kv[0].predicate, kv[0].entity)
        )
        self._counts: dict[EntityPredicatePair, int] = dict(ordered)
        self._by_orientation: dict[Orientation, list[EntityPredicatePair]] = {
            o: [p for p in self._counts if p.orientation is o] for o in Orientation
        }

    @classmethod
    def from_mined(
        cls, mined: MinedPairs, kg: KnowledgeGraph
    ) -> tuple["QueryPairTable", int]:
        """Resolve labels against the graph; pairs that do not resolve are
        dropped and counted."""
        counts: dict[EntityPredicatePair, int] = {}
        dropped = 0
        for pair, freq in mined.counts.items():
            if pair.entity not in kg.entities or pair.predicate not in kg.predicates:
                dropped += 1
                continue
            key = EntityPredicatePair(
                kg.entities.id_of(pair.entity),
                kg.predicates.id_of(pair.predicate),
                pair.orientation,
            )
            counts[key] = counts.get(key, 0) + freq
        return cls(counts), dropped

    def __len__(self) -> int:
        return len(self._counts)

    def __contains__(self, pair: EntityPredicatePair) -> bool:
        return pair in self._counts

    def frequency(self, pair: EntityPredicatePair) -> int:
        return self._counts[pair]

    def items(self):
        return self._counts.items()

    def pairs(self, orientation: Orientation | None = None) -> list[EntityPredicatePair]:
        if orientation is None:
            return list(self._counts)
        return list(self._by_orientation[orientation])

    def orientation_totals(self) -> dict[Orientation, int]:
        totals = {o: 0 for o in Orientation}
        for pair, freq in self._counts.items():
            totals[pair.orientation] += freq
        return totals

    def save_tsv(self, path, kg: KnowledgeGraph) -> None:
        """`entity<TAB>predicate<TAB>orientation<TAB>frequency` rows."""
        with open(path, "w", encoding="utf-8") as f:
            for pair, freq in self._counts.items():
                f.write(
                    f"{kg.entities.resolve(pair.entity)}\t"
                    f"{kg.predicates.resolve(pair.predicate)}\t"
                    f"{pair.orientation.value}\t{freq}\n"
                )

    @classmethod
    def load_tsv(cls, path, kg: KnowledgeGraph) -> "QueryPairTable":
        counts: dict[EntityPredicatePair, int] = {}
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                fields = line.split("\t")
                if len(fields) != 4:
                    raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
                entity, predicate, orientation, freq = fields
                try:
                    pair = EntityPredicatePair(
                        kg.entities.id_of(entity),
                        kg.predicates.id_of(predicate),
                        Orientation.from_value(orientation),
                    )
                except KeyError as e:
                    raise ValueError(f"{path}:{lineno}: {e}") from None
                counts[pair] = counts.get(pair, 0) + int(freq)
        return cls(counts)


def build_pair_table(
    log_path, kg: KnowledgeGraph, decode: bool = True
) -> tuple[QueryPairTable, LogStats]:
    """Mine a query log and keep only pairs whose entity and predicate both
    exist in the processed graph."""
    mined = mine_log(log_path, decode=decode)
    table, dropped = QueryPairTable.from_mined(mined, kg)
    mined.stats.dropped_pairs = dropped
    return table, mined.stats
