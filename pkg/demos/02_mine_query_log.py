"""
Mining entity-predicate pairs from a SPARQL log
===============================================

Classify query forms, pull oriented pairs out of SELECT patterns, and
aggregate them into a frequency table filtered against a graph.
"""

from kgenrich import corpus, query_log
from kgenrich.kg import KnowledgeGraph, Orientation

# One query per line, exactly how endpoint logs arrive.
lines = corpus.corpus_lines()
mined = query_log.mine_lines(lines)

print(f"{mined.stats.total_queries} queries, "
      f"{mined.stats.select_fraction:.0%} SELECT")
for form, count in sorted(mined.stats.form_counts.items(), key=lambda kv: -kv[1]):
    print(f"  {form.value:10s} {count}")

print()
print("most frequent mined pairs:")
for pair, freq in mined.counts.most_common(5):
    slot = "subject" if pair.orientation is Orientation.SUBJECT_KNOWN else "object"
    print(f"  ({pair.entity}, {pair.predicate}) known {slot}, seen {freq}x")

# A single query in detail: the pair ends up oriented by which slot holds
# the concrete entity.
q = query_log.parse_query("SELECT ?place WHERE{MarieCurie BirthPlace ?place}")
print()
print("patterns:", q.patterns)
print("pairs:", query_log.extract_pairs(q))

# Against a graph, pairs that do not resolve are dropped and counted.
kg = KnowledgeGraph.from_label_triples([
    ("MarieCurie", "BirthPlace", "Warsaw"),
    ("Warsaw", "country", "Poland"),
])
table, dropped = query_log.QueryPairTable.from_mined(mined, kg)
print()
print(f"pairs resolving in the graph: {len(table)} (dropped {dropped})")
