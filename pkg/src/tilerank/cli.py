"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error. All output facts are
line-oriented `key value` pairs; files written by a command with the
same flags and seed are byte-identical across runs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np

from . import _kernels as kernels
from .compressor import CompressionConfig
from .core import GranularitySpec, QueryEmbedding, TokenMatrix
from .encoder import ToyEncoder, ToyEncoderConfig, encode_page, ingest_external
from .errors import EmptyCorpus, TileRankError
from .evalkit import (
    OracleTable,
    budget_sweep,
    combined_selector,
    ndcg_at_k,
    read_qrels,
    read_run,
    write_qrels,
    write_sweep_csv,
)
from .index import build_index, load_index, storage_report
from .mvtx import read_mvtx, write_mvtx
from .rng import SplitMix64
from .scorer import contribution, search, write_run
from .synth import SynthConfig, gen_corpus, gen_images
from .tiler import TilerConfig, read_image, sample_multires, write_image
from .trainer import (
    ProjectionHead,
    TrainingConfig,
    gradient_check,
    train_toy,
    write_loss_trace,
)

_IMAGE_SUFFIXES = (".pgm", ".ppm")


def _parse_target(text: str):
    h, sep, w = text.lower().partition("x")
    if not sep or not h.isdigit() or not w.isdigit():
        raise ValueError(f"bad target {text!r}; expected HxW like 64x64")
    return int(h), int(w)


def _parse_budgets(text: str):
    return [int(b) for b in text.split(",") if b.strip()]


def _load_queries(path: Path):
    files = sorted(p for p in path.iterdir() if p.suffix == ".mvtx")
    if not files:
        raise EmptyCorpus(f"no .mvtx query files under {path}")
    return [QueryEmbedding(p.stem, read_mvtx(p)) for p in files]


def _dataclass_from_json(cls, payload: dict):
    names = {f.name for f in dataclass_fields(cls)}
    unknown = set(payload) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    coerced = {
        k: tuple(v) if isinstance(v, list) else v for k, v in payload.items()
    }
    return cls(**coerced)


def cmd_tile(args) -> int:
    image = read_image(args.image)
    grids = GranularitySpec.parse(args.grids)
    th, tw = _parse_target(args.target)
    cfg = TilerConfig(target_h=th, target_w=tw, grids=grids)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = ".pgm" if image.channels == 1 else ".ppm"
    total = 0
    for batch, (h_k, w_k) in zip(sample_multires(image, cfg), grids.levels):
        for pos, region in enumerate(batch.regions):
            i, j = divmod(pos, w_k)
            write_image(out / f"level{batch.level_index}_r{i}c{j}{ext}", region)
            total += 1
    print(f"levels {grids.num_levels}")
    print(f"regions {total}")
    return 0


def cmd_encode(args) -> int:
    grids = GranularitySpec.parse(args.grids)
    if (args.images is None) == (args.ingest is None):
        raise ValueError("pass exactly one of --images or --ingest")

    if args.images is not None:
        th, tw = _parse_target(args.target)
        tiler_cfg = TilerConfig(target_h=th, target_w=tw, grids=grids)
        enc_cfg = ToyEncoderConfig(
            patch_grid=args.patch_grid, dim=args.toy_dim, seed=args.seed
        )
        backend = ToyEncoder(enc_cfg)
        root = Path(args.images)
        files = sorted(
            p for p in root.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES
        )
        if not files:
            raise EmptyCorpus(f"no .pgm/.ppm images under {root}")
        pages = [
            encode_page(read_image(p), tiler_cfg, backend, page_id=p.stem)
            for p in files
        ]
        encoder_desc = {
            "kind": "toy",
            "patch_grid": enc_cfg.patch_grid,
            "dim": enc_cfg.dim,
            "seed": enc_cfg.seed,
        }
    else:
        root = Path(args.ingest)
        by_page: dict = {}
        for p in sorted(root.iterdir()):
            if p.suffix != ".mvtx" or ".level" not in p.stem:
                continue
            page_id, _, level = p.stem.rpartition(".level")
            by_page.setdefault(page_id, {})[int(level)] = p
        if not by_page:
            raise EmptyCorpus(f"no <page>.level<k>.mvtx files under {root}")
        pages = []
        for page_id in sorted(by_page):
            levels = by_page[page_id]
            files = [levels[k] for k in sorted(levels)]
            pages.append(ingest_external(page_id, files, grids))
        encoder_desc = {"kind": "external"}

    manifest = build_index(
        pages, args.out, cfg=None, grids=grids, encoder=encoder_desc
    )
    print(f"pages {len(manifest.pages)}")
    print(f"dim {manifest.dim}")
    print(f"tokens_per_page {manifest.pages[0].rows if manifest.pages else 0}")
    return 0


def cmd_index(args) -> int:
    source = load_index(args.embeddings)
    pages = source.nested_pages()
    cfg = None
    if args.budget != "full":
        cfg = CompressionConfig(budget=int(args.budget), scope=args.scope)
    manifest = build_index(
        pages,
        args.out,
        cfg=cfg,
        grids=None if source.manifest.grids is None
        else GranularitySpec.parse(source.manifest.grids),
        encoder=source.manifest.encoder,
        threads=args.threads,
    )
    report = storage_report(load_index(args.out))
    print(f"pages {report.pages}")
    print(f"budget {manifest.budget}")
    print(f"data_bytes {report.data_bytes}")
    print(f"total_bytes {report.total_bytes}")
    return 0


def cmd_search(args) -> int:
    idx = load_index(args.index)
    if not idx.pages:
        raise EmptyCorpus("search over an empty index")
    queries = _load_queries(Path(args.queries))
    results = {
        q.query_id: idx.search(q, k=args.k, level=args.level, threads=args.threads)
        for q in queries
    }
    write_run(args.out, results)
    print(f"queries {len(queries)}")
    print(f"k {args.k}")
    print(f"run {args.out}")
    return 0


def cmd_eval(args) -> int:
    run = read_run(args.run)
    qrels = read_qrels(args.qrels)
    result = ndcg_at_k(run, qrels, k=args.k)
    print(f"mean_ndcg@{args.k} {result.mean:.6f}")
    print(f"queries_evaluated {result.evaluated}")
    print(f"queries_excluded {result.excluded}")
    return 0


def cmd_sweep(args) -> int:
    idx = load_index(args.embeddings)
    corpus = idx.nested_pages()
    queries = _load_queries(Path(args.queries))
    qrels = read_qrels(args.qrels)
    rows = budget_sweep(
        corpus, queries, qrels, _parse_budgets(args.budgets), k=args.k,
        threads=args.threads,
    )
    if args.out:
        write_sweep_csv(args.out, rows)
    print("budget,mean_ndcg,queries_evaluated")
    for row in rows:
        print(f"{row.budget},{row.mean_ndcg:.6f},{row.queries_evaluated}")
    return 0


def _read_table_column(path: Path) -> dict:
    column = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            qid, sep, value = line.partition(",")
            if not sep:
                raise ValueError(f"{path}:{line_no}: want query_id,value")
            if line_no == 1 and not _is_float(value):
                continue  # header row
            column[qid] = float(value)
    return column


def _is_float(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def cmd_oracle(args) -> int:
    paths = [Path(p) for p in args.tables.split(",") if p.strip()]
    columns = {p.stem: _read_table_column(p) for p in paths}
    table = OracleTable.from_columns(columns)
    result = combined_selector(table)
    for system in table.systems:
        print(f"mean_{system} {result.system_means[system]:.6f}")
    print(f"mean_combined {result.mean:.6f}")
    print(f"queries {len(table.query_ids)}")
    return 0


def cmd_contrib(args) -> int:
    idx = load_index(args.embeddings)
    reps = {rep.page_id: rep for rep in idx.nested_pages()}
    queries = {q.query_id: q for q in _load_queries(Path(args.queries))}
    qrels = read_qrels(args.qrels)

    eligible = []
    for qid in qrels.query_ids:
        if qid not in queries:
            continue
        judged = qrels.for_query(qid)
        positives = sorted(
            (pid for pid, rel in judged.items() if rel > 0 and pid in reps),
            key=lambda pid: (-judged[pid], pid),
        )
        if positives:
            eligible.append((qid, positives[0]))
    if not eligible:
        raise EmptyCorpus("no judged queries with an indexed relevant page")

    stream = SplitMix64(args.seed)
    stream.shuffle(eligible)
    sample = sorted(eligible[: args.sample])

    n_levels = next(iter(reps.values())).num_levels
    sums = np.zeros(n_levels, dtype=np.float64)
    used = 0
    for qid, pid in sample:
        report = contribution(queries[qid], reps[pid])
        if report.normalized:
            sums += np.asarray(report.ratios)
            used += 1
    if used == 0:
        raise EmptyCorpus("no query produced a normalizable contribution")
    for k in range(n_levels):
        print(f"level{k + 1}_ratio {sums[k] / used:.6f}")
    print(f"queries_sampled {used}")
    return 0


def cmd_train_toy(args) -> int:
    payload = json.loads(Path(args.config).read_text(encoding="utf-8"))
    synth_cfg = _dataclass_from_json(SynthConfig, payload.get("synth", {}))
    train_cfg = _dataclass_from_json(TrainingConfig, payload.get("training", {}))
    d_out = payload.get("d_out")

    corpus = gen_corpus(synth_cfg)
    by_id = {rep.page_id: rep for rep in corpus.pages}
    dataset = [
        (q, by_id[corpus.page_of_query[q.query_id]]) for q in corpus.queries
    ]
    result = train_toy(dataset, train_cfg, d_out=d_out)

    write_mvtx(args.out, TokenMatrix(result.head.weight.astype(np.float32)))
    if args.trace:
        write_loss_trace(args.trace, result.loss_trace)
    print(f"steps {len(result.loss_trace)}")
    print(f"initial_loss {result.initial_loss:.6f}")
    print(f"final_loss {result.final_loss:.6f}")
    print(f"heldout_ndcg@5 {result.heldout_ndcg:.6f}")
    print(f"head {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    synth_cfg = SynthConfig(
        seed=args.seed,
        n_pages=4,
        n_queries=4,
        dim=8,
        tokens_per_level=(2, 3, 4, 5),
        n_clusters=2,
        noise=0.3,
        query_tokens=3,
    )
    corpus = gen_corpus(synth_cfg)
    by_id = {rep.page_id: rep for rep in corpus.pages}
    batch = [(q, by_id[corpus.page_of_query[q.query_id]]) for q in corpus.queries]
    cfg = TrainingConfig(batch_size=4, seed=args.seed)
    head = ProjectionHead.init(8, 4, args.seed)
    worst = gradient_check(batch, cfg, head, h=1e-4)
    print(f"max_rel_error {worst:.3e}")
    print("threshold 1e-04")
    return 0 if worst < 1e-4 else 2


def cmd_synth(args) -> int:
    payload = {}
    if args.config:
        payload = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if "synth" in payload:
        synth_fields = payload["synth"]
    else:
        synth_fields = {k: v for k, v in payload.items() if k != "images"}
    synth_cfg = _dataclass_from_json(SynthConfig, synth_fields)
    out = Path(args.out)
    corpus = gen_corpus(synth_cfg)

    build_index(
        corpus.pages,
        out / "embeddings",
        cfg=None,
        encoder={"kind": "synthetic", "seed": synth_cfg.seed},
    )
    (out / "queries").mkdir(parents=True, exist_ok=True)
    for q in corpus.queries:
        write_mvtx(out / "queries" / f"{q.query_id}.mvtx", q.tokens)
    write_qrels(out / "qrels.tsv", corpus.qrels)

    if payload.get("images"):
        img_cfg = payload["images"]
        sets = gen_images(
            seed=img_cfg.get("seed", synth_cfg.seed),
            count=img_cfg.get("count", 4),
            height=img_cfg.get("height", 60),
            width=img_cfg.get("width", 72),
        )
        (out / "images").mkdir(parents=True, exist_ok=True)
        for i, img in enumerate(sets.quadrant):
            write_image(out / "images" / f"quadrant{i:02d}.ppm", img)
        for i, img in enumerate(sets.legend):
            write_image(out / "images" / f"legend{i:02d}.ppm", img)

    print(f"pages {len(corpus.pages)}")
    print(f"queries {len(corpus.queries)}")
    print(f"out {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tilerank",
        description="Multi-resolution page retrieval pipeline "
        f"(kernel backend: {kernels.BACKEND})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--seed", type=int, default=0)
        return p

    p = add("tile", cmd_tile, help="partition an image into resized grid regions")
    p.add_argument("--image", required=True)
    p.add_argument("--grids", default="1x1,1x2,2x2,2x3")
    p.add_argument("--target", default="64x64")
    p.add_argument("--out", required=True)

    p = add("encode", cmd_encode, help="encode images (toy) or ingest external embeddings")
    p.add_argument("--images")
    p.add_argument("--ingest")
    p.add_argument("--grids", default="1x1,1x2,2x2,2x3")
    p.add_argument("--target", default="64x64")
    p.add_argument("--toy-dim", type=int, default=128)
    p.add_argument("--patch-grid", type=int, default=4)
    p.add_argument("--out", required=True)

    p = add("index", cmd_index, help="build a (possibly budgeted) index")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--budget", default="full")
    p.add_argument("--scope", default="whole-sequence",
                   choices=["whole-sequence", "per-level"])
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)

    p = add("search", cmd_search, help="top-K MaxSim search over an index")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--level", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, help="NDCG@K of a run against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--k", type=int, default=5)

    p = add("sweep", cmd_sweep, help="compress/search/evaluate over token budgets")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--budgets", default="64,128,256,512,768,1024,1280,1536")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")

    p = add("oracle", cmd_oracle, help="combined per-query best over system tables")
    p.add_argument("--tables", required=True)

    p = add("contrib", cmd_contrib, help="per-granularity MaxSim contribution")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--sample", type=int, default=100)

    p = add("train-toy", cmd_train_toy, help="SGD on the projection head (toy scale)")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")

    add("gradcheck", cmd_gradcheck, help="finite-difference check of the loss gradient")

    p = add("synth", cmd_synth, help="generate a synthetic corpus (and images)")
    p.add_argument("--config")
    p.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.fn(args)
    except (TileRankError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
