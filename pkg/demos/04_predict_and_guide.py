"""
Predicting missing triplets: RS, QG, top-k, and post-hoc guidance
=================================================================

The rejection-sampling baseline proposes uniformly over the whole
|E| x |P| x |E| space; query guidance fixes an (entity, predicate) pair from
the logs and only samples the missing entity.  KM and ES re-rank what RS
produced.
"""

from kgenrich import evaluator, guidance, predictor, query_log, rotate, synthetic

bench = synthetic.make_benchmark(seed=1)
kg = bench.kg
mined = query_log.mine_lines(bench.query_log)
table, _ = query_log.QueryPairTable.from_mined(mined, kg)

config = rotate.TrainConfig(seed=1, dim=16, gamma=7.0, negatives=4,
                            learning_rate=0.05, epochs=20, batch_size=512)
model, _ = rotate.train(kg, config)

print("candidate spaces:")
print("  rs  ", predictor.proposal_space("rs", kg))
print("  qg  ", predictor.proposal_space("qg", kg), "per guiding pair")

N = 1500
rs = predictor.predict_rs(model, kg, N, seed=11, batch_size=1 << 15)
qg = predictor.predict_qg(model, kg, table, N, seed=12, batch_size=1 << 15)
topk = predictor.predict_topk(model, kg, table, k=50, per_pair_m=10)

for name, preds in (("rs", rs), ("qg", qg), ("topk", topk)):
    print(f"\n{name}: {len(preds)} predictions, first three:")
    for p in preds[:3]:
        h, r, t = kg.label_triple(p.triplet)
        print(f"  ({h.rsplit('/', 1)[-1]}, {r.rsplit('/', 1)[-1]}, {t.rsplit('/', 1)[-1]})"
              f"  score {p.score:.2f}")

# KM: does the pair even typecheck against entity types and predicate domains?
pairs = sorted(evaluator.as_pairs(rs), key=lambda p: (p.predicate, p.entity))
verdicts = guidance.km_classify_all(pairs, bench.metadata)
compatible = sum(v.compatible for v in verdicts)
print(f"\nKM over RS pairs: {compatible} compatible / {len(verdicts) - compatible} incompatible")

# ES: rank pairs by their best score and cut into equal-count bins.
binning = guidance.es_bin(rs, n_bins=10)
sizes = [len(v) for _, v in sorted(binning.bins().items())]
print("ES bin sizes:", sizes)
top_pair, top_score, _ = binning.entries[0]
print(f"best pair: entity {top_pair.entity}, predicate {top_pair.predicate}, "
      f"max score {top_score:.2f}")
