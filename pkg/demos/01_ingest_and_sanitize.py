"""
Loading and sanitizing a knowledge graph
========================================

Parse N-Triples, drop junk entities, keep only query-relevant triplets,
and split the survivors into train/dev/test.
"""

import tempfile
from pathlib import Path

from kgenrich import ingest, query_log

workdir = Path(tempfile.mkdtemp(prefix="kgenrich-demo-"))

# A small graph: two good facts, one digits-only entity, one list entity,
# and one fact nobody ever queries for.
nt = """\
<http://ex.org/MarieCurie> <http://ex.org/birthplace> <http://ex.org/Warsaw> .
<http://ex.org/Warsaw> <http://ex.org/country> <http://ex.org/Poland> .
<http://ex.org/12345> <http://ex.org/country> <http://ex.org/Poland> .
<http://ex.org/List_of_rivers> <http://ex.org/length> <http://ex.org/Vistula> .
<http://ex.org/Obscure> <http://ex.org/trivia> <http://ex.org/Nowhere> .
<http://ex.org/MarieCurie> <http://ex.org/born> "1867" .
"""
kg_path = workdir / "demo.nt"
kg_path.write_text(nt)

raw = ingest.load_ntriples(kg_path)
print("parsed triples:", raw.report.triplets)
print("literal objects skipped:", raw.report.literal_skips)

# The query log decides relevance: birthplace and country are asked about,
# trivia is not.
log_lines = [
    "SELECT ?place WHERE { <http://ex.org/MarieCurie> <http://ex.org/birthplace> ?place }",
    "SELECT ?c WHERE { ?city <http://ex.org/country> ?c }",
]
mined = query_log.mine_lines(log_lines)

kg, report = ingest.sanitize(raw, mined)
print()
print("sanitization report:")
print(report.as_text())

# 70/10/20 split, reproducible under the seed
kg = ingest.split(kg, seed=42)
print("split sizes:", kg.split_sizes())
for triplet in kg:
    print(" ", kg.label_triple(triplet), "->", kg.split_of(triplet))
