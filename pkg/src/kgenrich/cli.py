"""Pipeline driver: ingest -> mine -> train -> predict -> guide -> eval -> export.

Each stage reads the artifacts of earlier stages from disk, writes its own
interchange file plus a small key=value report (including the digest of the
resolved configuration), and is a pure function of (inputs, config, seed):
rerunning with the same arguments reproduces every output byte for byte.

Exit codes: 0 success, 1 internal error, 2 usage error or missing input.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys

from . import evaluator, guidance, ingest, predictor, query_log, rotate
from .kg import EntityPredicatePair, Orientation

log = logging.getLogger("kgenrich")


class UsageError(Exception):
    """Bad invocation or missing upstream artifact (exit code 2)."""


def _read_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise UsageError(f"{path}:{lineno}: expected key=value")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config_defaults(subparser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Config-file values become subparser defaults, so explicit flags win."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return
    if not os.path.exists(known.config):
        raise UsageError(f"config file not found: {known.config}")
    raw = _read_config_file(known.config)
    coerced = {}
    for action in subparser._actions:
        if action.dest in raw:
            value = raw[action.dest]
            if action.type is not None:
                value = action.type(value)
            elif isinstance(action.const, bool) or isinstance(action.default, bool):
                value = value.lower() in ("1", "true", "yes")
            coerced[action.dest] = value
    subparser.set_defaults(**coerced)


def _config_digest(args: argparse.Namespace, keys: list[str]) -> str:
    lines = sorted(f"{k}={getattr(args, k)}" for k in keys if hasattr(args, k))
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()[:16]


def _require(path, what: str, prior_command: str) -> None:
    if path is None or not os.path.exists(path):
        raise UsageError(
            f"missing {what}: {path!r}; run `kgenrich {prior_command}` first"
        )


def _require_seed(args) -> None:
    if getattr(args, "seed", None) is None:
        raise UsageError("--seed is mandatory (no wall-clock default)")


def _write_report(path, command: str, digest: str, body: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"command={command}\nconfig_digest={digest}\n{body}")
    print(f"[{command}] config_digest={digest} report={path}")


def _report_path(args, main_output: str) -> str:
    if getattr(args, "report", None):
        return args.report
    return main_output.rstrip("/") + ".report.txt"


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(args) -> int:
    _require_seed(args)
    _require(args.kg, "knowledge-graph file", "ingest --kg <file>")
    ratios = tuple(float(x) for x in args.ratios.split(","))
    if len(ratios) != 3:
        raise UsageError("--ratios needs three comma-separated values")

    fmt = args.format
    if fmt == "auto":
        fmt = "tsv" if args.kg.endswith(".tsv") else "nt"
    loader = ingest.load_tsv if fmt == "tsv" else ingest.load_ntriples
    raw = loader(args.kg, strict=args.strict)

    mined = None
    if args.query_log:
        _require(args.query_log, "query log", "ingest --query-log <file>")
        mined = query_log.mine_log(args.query_log, decode=not args.no_decode)
    kg, san_report = ingest.sanitize(raw, mined)
    kg = ingest.split(kg, ratios, seed=args.seed)
    ingest.save_kg_dir(kg, args.out)

    digest = _config_digest(args, ["kg", "query_log", "out", "seed", "ratios", "strict", "no_decode", "format"])
    sizes = kg.split_sizes()
    body = (
        raw.report.as_text()
        + san_report.as_text()
        + "".join(f"split_{k}={v}\n" for k, v in sizes.items())
    )
    _write_report(os.path.join(args.out, "ingest_report.txt"), "ingest", digest, body)
    return 0


def cmd_mine(args) -> int:
    _require(args.log, "query log", "mine --log <file>")
    _require(os.path.join(args.kg, "entities.txt"), "ingested graph", "ingest")
    kg = ingest.load_kg_dir(args.kg)
    table, stats = query_log.build_pair_table(args.log, kg, decode=not args.no_decode)
    table.save_tsv(args.out, kg)
    digest = _config_digest(args, ["log", "kg", "out", "no_decode"])
    body = stats.as_text() + f"pairs={len(table)}\n"
    _write_report(_report_path(args, args.out), "mine", digest, body)
    return 0


def cmd_train(args) -> int:
    _require_seed(args)
    _require(os.path.join(args.kg, "entities.txt"), "ingested graph", "ingest")
    kg = ingest.load_kg_dir(args.kg)
    config = rotate.TrainConfig(
        seed=args.seed,
        dim=args.dim,
        gamma=args.gamma,
        negatives=args.negatives,
        neg_weight=args.neg_weight,
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        norm=args.norm,
    )
    model, losses = rotate.train(kg, config)
    rotate.save_model(model, args.out)
    digest = _config_digest(
        args, ["kg", "out", "seed", "dim", "gamma", "negatives", "neg_weight", "lr", "epochs", "batch_size", "norm"]
    )
    body = "".join(f"epoch_{i}_loss={l:.17g}\n" for i, l in enumerate(losses))
    body += f"final_loss={losses[-1]:.17g}\n"
    _write_report(_report_path(args, args.out), "train", digest, body)
    return 0


def _orientation(args) -> Orientation:
    return (
        Orientation.SUBJECT_KNOWN
        if args.orientation == "subject"
        else Orientation.OBJECT_KNOWN
    )


def cmd_predict(args) -> int:
    _require_seed(args)
    _require(os.path.join(args.kg, "entities.txt"), "ingested graph", "ingest")
    _require(args.model, "model checkpoint", "train")
    kg = ingest.load_kg_dir(args.kg)
    model = rotate.load_model(
        args.model,
        norm=args.norm,
        expect_entities=kg.n_entities,
        expect_predicates=kg.n_predicates,
    )
    if args.method == "rs":
        preds = predictor.predict_rs(
            model, kg, args.n, args.seed,
            batch_size=args.batch_size,
            starvation_batches=args.starvation_batches,
            threads=args.threads,
        )
    else:
        _require(args.pairs, "pair table", "mine")
        table = query_log.QueryPairTable.load_tsv(args.pairs, kg)
        if args.method == "qg":
            preds = predictor.predict_qg(
                model, kg, table, args.n, args.seed,
                orientation=_orientation(args),
                frequency_weighted=args.freq_weighted,
                batch_size=args.batch_size,
                starvation_batches=args.starvation_batches,
                threads=args.threads,
            )
        else:
            preds = predictor.predict_topk(
                model, kg, table, args.k, args.per_pair_m,
                orientation=_orientation(args),
                threads=args.threads,
            )
    predictor.save_predictions(preds, kg, args.out)
    digest = _config_digest(
        args,
        ["kg", "model", "method", "n", "seed", "pairs", "orientation",
         "freq_weighted", "k", "per_pair_m", "batch_size", "starvation_batches", "norm"],
    )
    body = f"method={args.method}\npredictions={len(preds)}\n"
    _write_report(_report_path(args, args.out), "predict", digest, body)
    return 0


def cmd_guide(args) -> int:
    _require(os.path.join(args.kg, "entities.txt"), "ingested graph", "ingest")
    _require(args.predictions, "predictions file", "predict")
    kg = ingest.load_kg_dir(args.kg)
    preds = predictor.load_predictions(args.predictions, kg)
    pairs = sorted(
        evaluator.as_pairs(preds, _orientation(args)),
        key=lambda p: (p.orientation.value, p.predicate, p.entity),
    )
    if args.km:
        _require(args.entity_types, "entity-type metadata", "guide --entity-types <file>")
        _require(args.domain_range, "domain/range metadata", "guide --domain-range <file>")
        metadata = ingest.load_metadata(args.entity_types, args.domain_range, kg)
        verdicts = guidance.km_classify_all(pairs, metadata)
        guidance.save_km_tsv(verdicts, kg, args.out)
        compatible = sum(v.compatible for v in verdicts)
        body = f"mode=km\npairs={len(pairs)}\ncompatible={compatible}\nincompatible={len(pairs) - compatible}\n"
    else:
        binning = guidance.es_bin(preds, n_bins=args.bins, orientation=_orientation(args))
        guidance.save_es_tsv(binning, kg, args.out)
        body = f"mode=es\npairs={len(binning.entries)}\nbins={binning.n_bins}\n"
    digest = _config_digest(
        args, ["kg", "predictions", "km", "es", "entity_types", "domain_range", "bins", "orientation", "out"]
    )
    _write_report(_report_path(args, args.out), "guide", digest, body)
    return 0


def cmd_eval(args) -> int:
    _require(os.path.join(args.kg, "entities.txt"), "ingested graph", "ingest")
    kg = ingest.load_kg_dir(args.kg)
    digest = _config_digest(
        args, ["kg", "predictions", "km", "es", "annotated", "out", "orientation"]
    )
    if args.annotated:
        _require(args.annotated, "annotated sample", "export (then annotate it)")
        ratio = evaluator.rc_ratio(args.annotated)
        _write_report(args.out, "eval", digest, f"rc_ratio={ratio:.6f}\n")
        return 0

    _require(args.predictions, "predictions file", "predict")
    preds = predictor.load_predictions(args.predictions, kg)
    orientation = _orientation(args)
    groups = None
    bins_body = ""
    if args.km:
        _require(args.km, "KM verdict file", "guide --km")
        groups = _km_groups_from_tsv(args.km, kg)
    elif args.es:
        _require(args.es, "ES bin file", "guide --es")
        groups = _es_groups_from_tsv(args.es, kg)
    report = evaluator.evaluate(
        preds, kg, preds[0].method if preds else "unknown",
        orientation=orientation, groups=groups,
    )
    if args.es and args.bins_out:
        evaluator.save_bin_precisions(
            {b: report.group_precision.get(b) for b in sorted(report.group_precision)},
            args.bins_out,
        )
        bins_body = f"bins_out={args.bins_out}\n"
    _write_report(args.out, "eval", digest, report.as_text() + bins_body)
    return 0


def _km_groups_from_tsv(path, kg):
    groups = {"compatible": [], "incompatible": []}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            entity, pred, compatible, _reason = line.split("\t")
            pair = EntityPredicatePair(
                kg.entities.id_of(entity), kg.predicates.id_of(pred), Orientation.SUBJECT_KNOWN
            )
            groups["compatible" if compatible == "1" else "incompatible"].append(pair)
    return groups


def _es_groups_from_tsv(path, kg):
    groups: dict[int, list] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            entity, pred, _score, b = line.split("\t")
            pair = EntityPredicatePair(
                kg.entities.id_of(entity), kg.predicates.id_of(pred), Orientation.SUBJECT_KNOWN
            )
            groups.setdefault(int(b), []).append(pair)
    return groups


def cmd_export(args) -> int:
    _require_seed(args)
    _require(os.path.join(args.kg, "entities.txt"), "ingested graph", "ingest")
    _require(args.predictions, "predictions file", "predict")
    kg = ingest.load_kg_dir(args.kg)
    preds = predictor.load_predictions(args.predictions, kg)
    pairs = evaluator.as_pairs(preds, _orientation(args))
    sample = evaluator.export_annotation_sample(pairs, kg, args.out, n=args.n, seed=args.seed)
    digest = _config_digest(args, ["kg", "predictions", "out", "n", "seed", "orientation"])
    _write_report(_report_path(args, args.out), "export", digest, f"sampled={len(sample)}\n")
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; explicit flags win")
    p.add_argument("--report", help="report path (default: derived from --out)")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="kgenrich",
        description="Knowledge-graph completion with rejection sampling and query guidance",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("ingest", help="load, sanitize, and split a KG")
    p.add_argument("--kg", required=True, help=".nt or .tsv triple file")
    p.add_argument("--out", required=True, help="output graph directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--query-log", help="query log for query-aware filtering")
    p.add_argument("--ratios", default="0.70,0.10,0.20")
    p.add_argument("--format", choices=["auto", "nt", "tsv"], default="auto")
    p.add_argument("--strict", action="store_true", help="abort on malformed lines")
    p.add_argument("--no-decode", action="store_true", help="skip percent-decoding of log lines")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)
    commands["ingest"] = p

    p = sub.add_parser("mine", help="extract entity-predicate pairs from a query log")
    p.add_argument("--log", required=True)
    p.add_argument("--kg", required=True, help="ingested graph directory")
    p.add_argument("--out", required=True, help="pair table TSV")
    p.add_argument("--no-decode", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_mine)
    commands["mine"] = p

    p = sub.add_parser("train", help="train RotatE embeddings")
    p.add_argument("--kg", required=True)
    p.add_argument("--out", required=True, help="model checkpoint path")
    p.add_argument("--seed", type=int)
    p.add_argument("--dim", type=int, default=200)
    p.add_argument("--gamma", type=float, default=12.0)
    p.add_argument("--negatives", type=int, default=4)
    p.add_argument("--neg-weight", type=float, default=None)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--norm", choices=["l1", "l2"], default="l1")
    p.add_argument("--threads", type=int, default=1, help="accepted for symmetry; training is vectorized")
    _add_common(p)
    p.set_defaults(func=cmd_train)
    commands["train"] = p

    p = sub.add_parser("predict", help="predict novel triplets")
    p.add_argument("--kg", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--method", choices=["rs", "qg", "topk"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--pairs", help="pair table TSV (qg/topk)")
    p.add_argument("--orientation", choices=["subject", "object"], default="subject")
    p.add_argument("--freq-weighted", action="store_true", help="weight guiding pairs by log frequency")
    p.add_argument("--k", type=int, default=100, help="top-k pair count (topk)")
    p.add_argument("--per-pair-m", type=int, default=10, help="completions per pair (topk)")
    p.add_argument("--batch-size", type=int, default=65536)
    p.add_argument("--starvation-batches", type=int, default=10000)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--norm", choices=["l1", "l2"], default="l1")
    _add_common(p)
    p.set_defaults(func=cmd_predict)
    commands["predict"] = p

    p = sub.add_parser("guide", help="KM/ES guidance over predictions")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--km", action="store_true", help="metadata compatibility partition")
    mode.add_argument("--es", action="store_true", help="embedding-score binning")
    p.add_argument("--predictions", required=True)
    p.add_argument("--kg", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--entity-types", help="entity<TAB>type TSV (km)")
    p.add_argument("--domain-range", help="predicate<TAB>domain<TAB>range TSV (km)")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--orientation", choices=["subject", "object"], default="subject")
    _add_common(p)
    p.set_defaults(func=cmd_guide)
    commands["guide"] = p

    p = sub.add_parser("eval", help="automatic evaluation against the test split")
    p.add_argument("--predictions")
    p.add_argument("--kg", required=True)
    p.add_argument("--out", required=True, help="evaluation report path")
    p.add_argument("--km", help="KM verdict TSV for group precision")
    p.add_argument("--es", help="ES bin TSV for per-bin precision")
    p.add_argument("--bins-out", help="bin<TAB>precision TSV output (with --es)")
    p.add_argument("--annotated", help="filled annotation sample; reports the R/C ratio")
    p.add_argument("--orientation", choices=["subject", "object"], default="subject")
    _add_common(p)
    p.set_defaults(func=cmd_eval)
    commands["eval"] = p

    p = sub.add_parser("export", help="export an annotation sample of predicted pairs")
    p.add_argument("--predictions", required=True)
    p.add_argument("--kg", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int)
    p.add_argument("--orientation", choices=["subject", "object"], default="subject")
    _add_common(p)
    p.set_defaults(func=cmd_export)
    commands["export"] = p

    return parser, commands


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser, commands = build_parser()
    try:
        if argv and argv[0] in commands:
            _apply_config_defaults(commands[argv[0]], argv[1:])
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError, predictor.StarvationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
