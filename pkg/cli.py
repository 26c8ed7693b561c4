# cli.py
"""Command line driver: workload generation, ingestion, streaming, benchmarks."""

import argparse
import csv
import json
import logging
import sys
from typing import Dict, List, Optional, Sequence

import config
from engines import bench, costmodel
from engines.common import DnfQuery, FastError, OracleMismatch
from engines.fast_index import FastIndex, IndexConfig
from engines.oracle import QueryCorpus, compare, oracle_match
from engines.workload import WorkloadSpec, gen_objects, gen_queries, load_tsv, save_tsv

logger = logging.getLogger("cli")

EXIT_ERROR = 1
EXIT_ORACLE_MISMATCH = 2


def _add_index_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=int, default=config.FAST_THETA)
    p.add_argument("--gran-max", type=int, default=config.FAST_GRAN_MAX)
    p.add_argument("--clean-interval", type=int, default=config.FAST_CLEAN_INTERVAL)
    p.add_argument("--descent-factor", type=int, default=config.FAST_DESCENT_FACTOR)


def _add_workload_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=config.BENCH_SEED)
    p.add_argument("--dist", choices=["uniform", "gaussian", "shifted"], default="uniform")
    p.add_argument("--queries", type=int, default=5000, dest="n_queries")
    p.add_argument("--objects", type=int, default=1000, dest="n_objects")
    p.add_argument("--zipf", type=float, default=1.0)
    p.add_argument("--vocab", type=int, default=10000)
    p.add_argument("--keywords", type=int, default=3)
    p.add_argument("--object-keywords", type=int, default=10)
    p.add_argument("--range", type=float, default=0.01, dest="range_fraction")
    p.add_argument("--rect-fraction", type=float, default=0.0)
    p.add_argument("--dnf-fraction", type=float, default=0.0)
    p.add_argument("--lifetime-min", type=int, default=100_000)
    p.add_argument("--lifetime-max", type=int, default=1_000_000)


def _index_config(args) -> IndexConfig:
    return IndexConfig(
        theta=args.theta,
        gran_max=args.gran_max,
        clean_interval=args.clean_interval,
        descent_factor=args.descent_factor,
    )


def _workload(args) -> WorkloadSpec:
    return WorkloadSpec(
        n_queries=args.n_queries,
        n_objects=args.n_objects,
        zipf_exponent=args.zipf,
        vocabulary_size=args.vocab,
        keywords_per_query=args.keywords,
        keywords_per_object=args.object_keywords,
        spatial_dist=args.dist,
        range_fraction=args.range_fraction,
        rect_fraction=args.rect_fraction,
        dnf_fraction=args.dnf_fraction,
        lifetime_min=args.lifetime_min,
        lifetime_max=args.lifetime_max,
        rng_seed=args.seed,
    )


def _parse_sweeps(items: Optional[List[str]]) -> Optional[Dict[str, list]]:
    """``name=v1,v2`` pairs; integers stay integers."""
    if not items:
        return None
    sweeps: Dict[str, list] = {}
    for item in items:
        name, _, raw = item.partition("=")
        if not raw:
            raise ValueError(f"sweep {item!r} must look like name=v1,v2")
        values = []
        for v in raw.split(","):
            values.append(float(v) if any(c in v for c in ".eE") else int(v))
        sweeps[name.replace("-", "_")] = values
    return sweeps


def _build_index(path: str, index_config: IndexConfig):
    records = load_tsv(path, "queries")
    index = FastIndex(index_config)
    corpus = QueryCorpus()
    for r in records:
        if isinstance(r, DnfQuery):
            index.insert_dnf(r)
            corpus.add_dnf(r)
        else:
            index.insert(r)
            corpus.add(r)
    return index, corpus


# =========================
# Commands
# =========================


def cmd_gen(args) -> int:
    spec = _workload(args)
    n_q = save_tsv(args.out_queries, gen_queries(spec))
    n_o = save_tsv(args.out_objects, gen_objects(spec))
    logger.info("Wrote %d queries to %s and %d objects to %s", n_q, args.out_queries, n_o, args.out_objects)
    return 0


def cmd_ingest_queries(args) -> int:
    index, _ = _build_index(args.input, _index_config(args))
    print(json.dumps(index.stats(), indent=2, default=str))
    return 0


def cmd_stream_objects(args) -> int:
    index, corpus = _build_index(args.queries_file, _index_config(args))
    objects = load_tsv(args.objects_file, "objects")
    rows = []
    for o in objects:
        index.advance(1)
        result = index.match(o)
        if args.check:
            diff = compare(oracle_match(corpus, o, index.clock), result, o.oid)
            if diff is not None:
                raise OracleMismatch(f"stream disagrees with the oracle: {diff}")
        rows.append({"oid": o.oid, "clock": index.clock, "qids": " ".join(sorted(result.qids))})
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=["oid", "clock", "qids"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            out.close()
    return 0


def cmd_bench(args) -> int:
    rows = bench.run_bench(
        _workload(args),
        index_kind=args.index,
        sweeps=_parse_sweeps(args.sweep),
        base=_index_config(args),
        oracle_sample=args.oracle_sample,
        out=args.out,
    )
    if not args.out:
        writer = csv.DictWriter(sys.stdout, fieldnames=bench.BENCH_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return 0


def cmd_costmodel(args) -> int:
    rows = costmodel.model_rows(theta=args.theta, gran_max=args.gran_max, levels=args.levels)
    if args.simulate:
        value = costmodel.simulate_replication(args.simulate, seed=args.seed, gran_max=args.gran_max)
        rows.append({"metric": "simulated_replication", "arg": args.simulate, "value": value})
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=["metric", "arg", "value"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            out.close()
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("app:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fast", description="Spatio-textual continuous query matching")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a query and an object TSV")
    _add_workload_flags(p)
    p.add_argument("--out-queries", required=True)
    p.add_argument("--out-objects", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("ingest-queries", help="index a query TSV and print structure stats")
    p.add_argument("input")
    _add_index_flags(p)
    p.set_defaults(func=cmd_ingest_queries)

    p = sub.add_parser("stream-objects", help="match an object TSV against a query TSV")
    p.add_argument("queries_file")
    p.add_argument("objects_file")
    _add_index_flags(p)
    p.add_argument("--check", action="store_true", help="verify every result with the brute-force matcher")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stream_objects)

    p = sub.add_parser("bench", help="run benchmark sweeps and emit CSV")
    _add_workload_flags(p)
    _add_index_flags(p)
    p.add_argument("--index", choices=list(bench.INDEX_KINDS), default="fast")
    p.add_argument("--sweep", action="append", help="name=v1,v2 (repeatable)")
    p.add_argument("--oracle-sample", type=float, default=config.BENCH_ORACLE_SAMPLE)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("costmodel", help="print cost-model and replication values as CSV")
    p.add_argument("--theta", type=int, default=config.FAST_THETA)
    p.add_argument("--gran-max", type=int, default=config.FAST_GRAN_MAX)
    p.add_argument("--levels", type=int)
    p.add_argument("--simulate", type=int, default=0, help="Monte-Carlo samples for replication")
    p.add_argument("--seed", type=int, default=config.BENCH_SEED)
    p.add_argument("--out")
    p.set_defaults(func=cmd_costmodel)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=config.LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OracleMismatch as exc:
        logger.error("%s", exc)
        return EXIT_ORACLE_MISMATCH
    except (FastError, ValueError) as exc:
        logger.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
