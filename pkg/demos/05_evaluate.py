"""
Evaluating predictions against the held-out split
==================================================

Hit triplets and pair precision on the test split, per-group precision for
KM and ES guidance, and the annotation-sample workflow for human evaluation.
Test-split absence does not mean a prediction is wrong, so these scores are
lower bounds.
"""

import tempfile
from pathlib import Path

from scipy.stats import spearmanr

from kgenrich import evaluator, guidance, predictor, query_log, rotate, synthetic

bench = synthetic.make_benchmark(seed=2)
kg = bench.kg
mined = query_log.mine_lines(bench.query_log)
table, _ = query_log.QueryPairTable.from_mined(mined, kg)
config = rotate.TrainConfig(seed=2, dim=16, gamma=7.0, negatives=4,
                            learning_rate=0.05, epochs=20, batch_size=512)
model, _ = rotate.train(kg, config)

N = 2000
rs = predictor.predict_rs(model, kg, N, seed=21, batch_size=1 << 15)
qg = predictor.predict_qg(model, kg, table, N, seed=22, batch_size=1 << 15)

print(f"{'':8s} {'#hits':>6s} {'pairs':>6s} {'pair precision':>15s}")
for name, preds in (("rs", rs), ("qg", qg)):
    report = evaluator.evaluate(preds, kg, name)
    print(f"{name:8s} {report.hit_triplets:6d} {report.predicted_pair_count:6d} "
          f"{report.pair_precision:15.4f}")

# Guidance re-ranks the RS output; precision should track the grouping.
pairs = sorted(evaluator.as_pairs(rs), key=lambda p: (p.predicate, p.entity))
km = evaluator.group_precision(
    guidance.km_groups(guidance.km_classify_all(pairs, bench.metadata)), kg
)
print("\nKM group precision:", {k: (None if v is None else round(v, 4)) for k, v in km.items()})

per_bin = evaluator.group_precision(guidance.es_bin(rs).bins(), kg)
xs = [b for b in sorted(per_bin) if per_bin[b] is not None]
rho = spearmanr(xs, [per_bin[b] for b in xs]).statistic
print(f"ES: spearman(bin index, precision) = {rho:.2f} over {len(xs)} bins")

# Human-evaluation support: export a sample, fill it in, compute R/C.
workdir = Path(tempfile.mkdtemp(prefix="kgenrich-demo-"))
sample_path = workdir / "sample.tsv"
sample = evaluator.export_annotation_sample(
    evaluator.as_pairs(qg), kg, sample_path, n=20, seed=3
)
print(f"\nexported {len(sample)} pairs for annotation -> {sample_path}")

# Simulate an annotator: pairs with a matching test triplet are "correct",
# and we call four out of five of those "relevant".
test_pairs = kg.pairs_of({"test"}, sample[0].orientation)
rows = [l for l in sample_path.read_text().splitlines() if not l.startswith("#")]
annotated = []
for i, (pair, row) in enumerate(zip(sample, rows)):
    correct = pair in test_pairs
    relevant = correct and (i % 5 != 0)
    entity, pred, orient = row.split("\t")[:3]
    annotated.append(f"{entity}\t{pred}\t{orient}\t{int(correct)}\t{int(relevant)}")
annotated_path = workdir / "annotated.tsv"
annotated_path.write_text("\n".join(annotated) + "\n")
try:
    print(f"R/C ratio of the simulated annotation: {evaluator.rc_ratio(annotated_path):.2f}")
except ValueError as e:
    print("R/C undefined:", e)
