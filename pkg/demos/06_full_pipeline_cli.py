"""
The full pipeline through the command line
===========================================

Every stage is also a `kgenrich` subcommand writing interchange files, so
experiments are reproducible from a config file and a seed.  This script
drives the same entry points the installed console script uses.
"""

import tempfile
from pathlib import Path

from kgenrich import cli, synthetic

workdir = Path(tempfile.mkdtemp(prefix="kgenrich-demo-"))
inputs = workdir / "inputs"
out = workdir / "out"
out.mkdir()

# Materialize a benchmark as real files: kg.nt, queries.txt, metadata TSVs.
bench = synthetic.make_benchmark(seed=9, n_types=3, entities_per_type=40,
                                 n_predicates=6, n_triplets=900, n_log_pairs=80)
paths = synthetic.write_benchmark_files(bench, inputs)
print("inputs under", inputs)

kgdir = str(out / "kg")
model = str(out / "model.txt")
pairs = str(out / "pairs.tsv")
preds = str(out / "preds.tsv")

steps = [
    ["ingest", "--kg", paths["kg"], "--query-log", paths["log"],
     "--out", kgdir, "--seed", "9"],
    ["mine", "--log", paths["log"], "--kg", kgdir, "--out", pairs],
    ["train", "--kg", kgdir, "--out", model, "--seed", "9",
     "--dim", "12", "--gamma", "6", "--epochs", "12", "--lr", "0.05",
     "--batch-size", "256"],
    ["predict", "--kg", kgdir, "--model", model, "--method", "qg",
     "--pairs", pairs, "--n", "200", "--seed", "9", "--out", preds],
    ["guide", "--km", "--predictions", preds, "--kg", kgdir,
     "--entity-types", paths["entity_types"], "--domain-range", paths["domain_range"],
     "--out", str(out / "km.tsv")],
    ["guide", "--es", "--predictions", preds, "--kg", kgdir, "--bins", "10",
     "--out", str(out / "es.tsv")],
    ["eval", "--predictions", preds, "--kg", kgdir, "--km", str(out / "km.tsv"),
     "--out", str(out / "eval.txt")],
    ["export", "--predictions", preds, "--kg", kgdir, "--n", "25", "--seed", "9",
     "--out", str(out / "sample.tsv")],
]
for step in steps:
    print("\n$ kgenrich", " ".join(step))
    rc = cli.main(step)
    assert rc == 0, f"exit {rc}"

print("\nevaluation report:")
print((out / "eval.txt").read_text())
