"""Bundled hand-labeled SPARQL corpus pinning the parser's behaviour.

25 one-line queries (SELECT with prefixes, `;`/`,` abbreviations, OPTIONAL,
UNION, FILTER, one percent-encoded line, plus ASK/CONSTRUCT/DESCRIBE and
other-form distractors) and the exact pair multiset they must yield.
"""

from __future__ import annotations

from collections import Counter
from importlib import resources

from .kg import Orientation
from .query_log import LabelPair


def corpus_lines() -> list[str]:
    text = resources.files("kgenrich.data").joinpath("sparql_corpus.txt").read_text("utf-8")
    return [line for line in text.splitlines() if line]


def gold_pairs() -> Counter[LabelPair]:
    text = resources.files("kgenrich.data").joinpath("sparql_corpus_gold.tsv").read_text("utf-8")
    gold: Counter[LabelPair] = Counter()
    for line in text.splitlines():
        if not line:
            continue
        entity, predicate, orientation, freq = line.split("\t")
        gold[LabelPair(entity, predicate, Orientation.from_value(orientation))] += int(freq)
    return gold
