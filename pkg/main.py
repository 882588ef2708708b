# -*- coding: utf-8 -*-
import os
import sys
import argparse
import time
import concurrent.futures
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import config
from index.embeddings import EmbeddingStore
from index.indexer import build_df
from index.storage import DfTable
from preprocess.tokenizer import Tokenizer
from search.distinctiveness import (DistinctivenessScorer, RewardParams, WeightParams, WeightTable,
                                    build_weight_table, weights_from_scores)
from search.retriever import SimilarSet, build_similar_sets, median_rank, rank_queries, recall_from_ranks
from search.reward_server import RewardServer, serve
from search.scorer import CiderParams, CiderVariant, TfIdfVector
from utils.errors import MissingCandidate, MissingSimilarSet, ValidationError
from utils.file_loader import (Candidate, ImageRecord, load_candidates, load_dataset, load_embeddings,
                               load_similar_sets, load_weight_table, select_split, similar_sets_to_text,
                               weight_table_to_text, write_similar_sets, write_weight_table)
from utils.fixtures import write_fixture
from utils.parallel import resolve_workers
from utils.progress import report, warn
from utils.report import EvalReport, ImageRow, ReportFormat, SystemResult, write_report

SPLITS = ["train", "val", "test"]
EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2


def setup_argparse() -> argparse.ArgumentParser:

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="不输出进度信息")
    common.add_argument("--threads", type=int, default=config.MAX_THREADS, help="处理线程数，0表示自动选择")

    metric = argparse.ArgumentParser(add_help=False)
    metric.add_argument("--sigma", type=float, default=config.SIGMA, help="CIDEr-D长度惩罚宽度")
    metric.add_argument("--variant", choices=[v.value for v in CiderVariant], default=config.CIDER_VARIANT,
                        help="CIDEr变体")
    metric.add_argument("--df", default=None, help="预先计算的文档频率文件（build-df输出）")
    metric.add_argument("--df-split", choices=SPLITS, default=None,
                        help="构建文档频率使用的数据划分，默认与--split相同")

    parser = argparse.ArgumentParser(description="区分度图像描述评测工具（CIDEr / CIDErBtw / R@K）")
    subparsers = parser.add_subparsers(dest="command", help="子命令")

    fixture_parser = subparsers.add_parser("make-fixture", parents=[common], help="生成合成测试语料")
    fixture_parser.add_argument("--output-dir", required=True, help="输出目录")
    fixture_parser.add_argument("--images", type=int, default=60, help="图像数量")
    fixture_parser.add_argument("--captions", type=int, default=5, help="每张图像的描述数量")
    fixture_parser.add_argument("--dim", type=int, default=16, help="向量维度")
    fixture_parser.add_argument("--seed", type=int, default=0, help="随机种子")

    df_parser = subparsers.add_parser("build-df", parents=[common], help="统计文档频率")
    df_parser.add_argument("--dataset", default=config.DATASET_PATH, help="数据集路径")
    df_parser.add_argument("--split", choices=SPLITS, default=config.DF_SPLIT, help="数据划分")
    df_parser.add_argument("--max-order", type=int, default=config.MAX_ORDER, help="最大n-gram阶数")
    df_parser.add_argument("--output", default=config.DF_PATH, help="输出路径")

    sets_parser = subparsers.add_parser("build-sets", parents=[common], help="构建相似图像集")
    sets_parser.add_argument("--dataset", default=config.DATASET_PATH, help="数据集路径")
    sets_parser.add_argument("--embeddings", default=config.EMBEDDINGS_PATH, help="向量文件路径")
    sets_parser.add_argument("--split", choices=SPLITS, default=config.DEFAULT_SPLIT, help="数据划分")
    sets_parser.add_argument("--k", type=int, default=config.DEFAULT_K, help="相似图像数量K")
    sets_parser.add_argument("--output", default=config.SIMILAR_SETS_PATH, help="输出路径，-表示stdout")

    weights_parser = subparsers.add_parser("weights", parents=[common, metric], help="计算真值权重")
    weights_parser.add_argument("--dataset", default=config.DATASET_PATH, help="数据集路径")
    weights_parser.add_argument("--similar-sets", default=config.SIMILAR_SETS_PATH, help="相似图像集路径")
    weights_parser.add_argument("--split", choices=SPLITS, default=config.DF_SPLIT, help="数据划分")
    weights_parser.add_argument("--lambda-w", type=float, default=config.LAMBDA_W, help="lambda_w")
    weights_parser.add_argument("--alpha-w", type=float, default=config.ALPHA_W, help="alpha_w")
    weights_parser.add_argument("--output", default=config.WEIGHTS_PATH, help="输出路径，-表示stdout")

    eval_parser = subparsers.add_parser("eval", parents=[common, metric], help="评测生成描述")
    eval_parser.add_argument("--dataset", default=config.DATASET_PATH, help="数据集路径")
    eval_parser.add_argument("--similar-sets", default=config.SIMILAR_SETS_PATH, help="相似图像集路径")
    eval_parser.add_argument("--candidates", action="append", required=True,
                             help="候选描述文件，可重复指定以评测多个系统")
    eval_parser.add_argument("--embeddings", default=None, help="向量文件（用于R@K），缺省则跳过检索评测")
    eval_parser.add_argument("--split", choices=SPLITS, default=config.DEFAULT_SPLIT, help="数据划分")
    eval_parser.add_argument("--ks", type=int, nargs="+", default=list(config.RECALL_KS), help="R@K中的K")
    eval_parser.add_argument("--format", choices=[f.value for f in ReportFormat], default=config.REPORT_FORMAT,
                             help="报告格式")
    eval_parser.add_argument("--timestamp", default=None, help="写入报告元数据的时间戳")
    eval_parser.add_argument("--output", default="-", help="输出路径，-表示stdout")

    serve_parser = subparsers.add_parser("reward-serve", parents=[common, metric],
                                         help="从stdin读取请求，向stdout输出奖励")
    serve_parser.add_argument("--dataset", default=config.DATASET_PATH, help="数据集路径")
    serve_parser.add_argument("--similar-sets", default=config.SIMILAR_SETS_PATH, help="相似图像集路径")
    serve_parser.add_argument("--weights", default=None, help="真值权重表，缺省时所有权重为1")
    serve_parser.add_argument("--split", choices=SPLITS, default=config.DF_SPLIT, help="数据划分")
    serve_parser.add_argument("--alpha-r", type=float, default=config.ALPHA_R, help="alpha_r")
    serve_parser.add_argument("--workers", type=int, default=config.SERVE_WORKERS, help="并发评分线程数")

    return parser


def cider_params_from(args: argparse.Namespace) -> CiderParams:

    return CiderParams(sigma=args.sigma, variant=CiderVariant.parse(args.variant))


def resolve_df(records: Sequence[ImageRecord], df_split: str, cparams: CiderParams,
               df_path: Optional[str] = None, threads: int = 0) -> DfTable:
    """读取缓存的文档频率，或用指定划分的参考描述现场统计"""
    if df_path:
        table = DfTable.load(df_path)
        if table.max_order < cparams.max_order:
            raise ValidationError(f"文档频率文件的最大阶数{table.max_order}小于{cparams.max_order}")
        return table
    references = select_split(records, df_split)
    return build_df(references, cparams, split_tag=df_split, threads=threads)


def _write_output(data: bytes, output: str) -> None:

    if output == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    directory = os.path.dirname(output)
    if directory and not os.path.exists(directory):
        os.makedirs(directory)
    with open(output, 'wb') as f:
        f.write(data)
    report(f"结果已保存到 {output}")


def _split_records(records: Sequence[ImageRecord], split: str) -> List[ImageRecord]:

    selected = select_split(records, split)
    if not selected:
        raise ValidationError(f"数据集中没有{split}划分的图像")
    return selected


def run_build_sets(records: Sequence[ImageRecord], store: EmbeddingStore, split: str, k: int,
                   threads: int = 0) -> List[SimilarSet]:

    split_records = _split_records(records, split)
    for record in split_records:
        if record.id not in store.images:
            raise ValidationError(f"图像 {record.id} 没有图像向量")
        if not store.has_captions(record.id):
            raise ValidationError(f"图像 {record.id} 没有描述向量")
    ids = [record.id for record in split_records]
    n = max(len(record.captions) for record in split_records)
    # 同一划分内检索
    return build_similar_sets(store, ids, ids, k, n, threads=threads)


class _CorpusVectors:
    """按需向量化并缓存每张图像的真值描述"""

    def __init__(self, records: Sequence[ImageRecord], scorer: DistinctivenessScorer):

        self.scorer = scorer
        self.tokenizer = Tokenizer()
        self.by_id = {record.id: record for record in records}
        self._cache: Dict[str, List[TfIdfVector]] = {}

    def get(self, image_id: str) -> List[TfIdfVector]:

        vectors = self._cache.get(image_id)
        if vectors is None:
            record = self.by_id.get(image_id)
            if record is None:
                raise ValidationError(f"相似图像 {image_id} 不在数据集中")
            vectors = self.scorer.vectorize_all(self.tokenizer.tokenize_all(record.captions))
            self._cache[image_id] = vectors
        return vectors

    def warm(self, image_ids) -> None:
        # 预先填满缓存，之后多线程只读
        for image_id in image_ids:
            self.get(image_id)

    def similar(self, similar_set: SimilarSet) -> List[List[TfIdfVector]]:

        return [self.get(n) for n in similar_set.neighbor_ids]


def _require_similar_set(similar_sets: Mapping[str, SimilarSet], image_id: str) -> SimilarSet:

    similar_set = similar_sets.get(image_id)
    if similar_set is None:
        raise MissingSimilarSet(f"图像 {image_id} 没有相似图像集")
    return similar_set


def run_weights(records: Sequence[ImageRecord], similar_sets: Mapping[str, SimilarSet], split: str,
                df_table: DfTable, wparams: WeightParams = WeightParams(),
                cparams: CiderParams = CiderParams(), threads: int = 0) -> WeightTable:

    start_time = time.time()
    split_records = _split_records(records, split)
    sets = [_require_similar_set(similar_sets, record.id) for record in split_records]

    scorer = DistinctivenessScorer(df_table, cparams)
    vectors = _CorpusVectors(records, scorer)
    vectors.warm(record.id for record in split_records)
    vectors.warm(n for s in sets for n in s.neighbor_ids)

    def image_weights(item: Tuple[ImageRecord, SimilarSet]) -> List[Tuple[float, float]]:
        record, similar_set = item
        similar = vectors.similar(similar_set)
        scores = [scorer.ciderbtw_vectors(gt, similar) for gt in vectors.get(record.id)]
        return list(zip(scores, weights_from_scores(scores, wparams)))

    workers = max(1, min(resolve_workers(threads), len(split_records)))
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        entries = list(executor.map(image_weights, zip(split_records, sets)))

    table = build_weight_table({record.id: pairs for record, pairs in zip(split_records, entries)})
    report(f"真值权重计算完成，共{len(table)}张图像，用时{time.time() - start_time:.2f}秒")
    return table


def run_eval(records: Sequence[ImageRecord], similar_sets: Mapping[str, SimilarSet], split: str,
             systems: Sequence[Tuple[str, Mapping[str, Candidate]]], df_table: DfTable,
             cparams: CiderParams = CiderParams(), store: Optional[EmbeddingStore] = None,
             ks: Sequence[int] = config.RECALL_KS, timestamp: Optional[str] = None,
             threads: int = 0) -> EvalReport:

    split_records = _split_records(records, split)
    sets = [_require_similar_set(similar_sets, record.id) for record in split_records]

    scorer = DistinctivenessScorer(df_table, cparams)
    tokenizer = Tokenizer()
    vectors = _CorpusVectors(records, scorer)
    vectors.warm(record.id for record in split_records)
    vectors.warm(n for s in sets for n in s.neighbor_ids)
    workers = max(1, min(resolve_workers(threads), len(split_records)))

    results = []
    for name, candidates in systems:
        if not candidates:
            raise MissingCandidate(f"系统 {name} 的候选描述为空")
        for record in split_records:
            if record.id not in candidates:
                raise MissingCandidate(f"系统 {name} 缺少图像 {record.id} 的候选描述")
        extra = set(candidates) - {record.id for record in split_records}
        if extra:
            warn(f"系统 {name} 有{len(extra)}条候选描述不属于{split}划分，已忽略")

        def image_row(item: Tuple[ImageRecord, SimilarSet]) -> ImageRow:
            record, similar_set = item
            caption = candidates[record.id].caption
            hyp = scorer.cider.vectorize(tokenizer.tokenize(caption))
            return ImageRow(record.id, caption,
                            scorer.cider.score_vectors(hyp, vectors.get(record.id)),
                            scorer.ciderbtw_vectors(hyp, vectors.similar(similar_set)))

        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(image_row, zip(split_records, sets)))
        system = SystemResult(name, rows)

        queries = []
        for record in split_records:
            vector = candidates[record.id].vector
            if vector is None and store is not None:
                vector = store.query_vector(record.id)
            if vector is None:
                break
            queries.append((record.id, vector, record.id))
        if store is None:
            warn(f"未提供向量文件，跳过系统 {name} 的R@K评测")
        elif len(queries) < len(split_records):
            warn(f"系统 {name} 缺少部分查询向量，跳过R@K评测")
        else:
            ranks = rank_queries(store, queries)
            system.recall = recall_from_ranks(ranks, ks)
            system.median_rank = median_rank(ranks)

        report(f"系统 {name}: CIDEr={system.cider_mean:.4f}，CIDErBtw={system.ciderbtw_mean:.4f}")
        results.append(system)

    metadata = {
        "split": split,
        "num_images": len(split_records),
        "k": max(s.k for s in sets),
        "n": max(len(record.captions) for record in split_records),
        "variant": cparams.variant.value,
        "sigma": cparams.sigma,
        "scale": cparams.scale,
        "max_order": cparams.max_order,
        "df_split": df_table.split_tag,
    }
    if timestamp:
        metadata["timestamp"] = timestamp
    return EvalReport(results, metadata)


def cmd_make_fixture(args: argparse.Namespace) -> int:

    write_fixture(args.output_dir, args.images, args.captions, args.dim, args.seed)
    return EXIT_OK


def cmd_build_df(args: argparse.Namespace) -> int:

    records = load_dataset(args.dataset)
    cparams = CiderParams(max_order=args.max_order)
    table = build_df(_split_records(records, args.split), cparams, split_tag=args.split,
                     threads=args.threads)
    table.save(args.output)
    return EXIT_OK


def cmd_build_sets(args: argparse.Namespace) -> int:

    records = load_dataset(args.dataset)
    store = load_embeddings(args.embeddings)
    sets = run_build_sets(records, store, args.split, args.k, threads=args.threads)
    if args.output == "-":
        _write_output(similar_sets_to_text(sets).encode("utf-8"), args.output)
    else:
        write_similar_sets(sets, args.output)
    return EXIT_OK


def cmd_weights(args: argparse.Namespace) -> int:

    records = load_dataset(args.dataset)
    similar_sets = load_similar_sets(args.similar_sets)
    cparams = cider_params_from(args)
    wparams = WeightParams(lambda_w=args.lambda_w, alpha_w=args.alpha_w)
    df_split = args.df_split or args.split
    df_table = resolve_df(records, df_split, cparams, args.df, threads=args.threads)
    table = run_weights(records, similar_sets, args.split, df_table, wparams, cparams, threads=args.threads)
    metadata = {
        "lambda_w": wparams.lambda_w,
        "alpha_w": wparams.alpha_w,
        "split": args.split,
        "df_split": df_table.split_tag,
        "variant": cparams.variant.value,
        "sigma": cparams.sigma,
    }
    if args.output == "-":
        _write_output(weight_table_to_text(table, metadata).encode("utf-8"), args.output)
    else:
        write_weight_table(table, metadata, args.output)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:

    records = load_dataset(args.dataset)
    similar_sets = load_similar_sets(args.similar_sets)
    cparams = cider_params_from(args)
    df_table = resolve_df(records, args.df_split or args.split, cparams, args.df, threads=args.threads)
    systems = [(os.path.splitext(os.path.basename(path))[0], load_candidates(path))
               for path in args.candidates]
    store = load_embeddings(args.embeddings) if args.embeddings else None
    timestamp = args.timestamp or os.environ.get("SOURCE_DATE_EPOCH")

    eval_report = run_eval(records, similar_sets, args.split, systems, df_table, cparams,
                           store=store, ks=args.ks, timestamp=timestamp, threads=args.threads)
    _write_output(write_report(eval_report, ReportFormat(args.format)), args.output)
    return EXIT_OK


def cmd_reward_serve(args: argparse.Namespace, in_stream=None, out_stream=None) -> int:

    records = load_dataset(args.dataset)
    similar_sets = load_similar_sets(args.similar_sets)
    weight_table = load_weight_table(args.weights)[0] if args.weights else None
    cparams = cider_params_from(args)
    rparams = RewardParams(alpha_r=args.alpha_r)
    df_table = resolve_df(records, args.df_split or args.split, cparams, args.df, threads=args.threads)

    split_records = _split_records(records, args.split)
    server = RewardServer(split_records, similar_sets, df_table, weight_table, cparams, rparams)
    unserved = [record.id for record in split_records if record.id not in server]
    if unserved:
        warn(f"{len(unserved)}张图像缺少相似图像集或权重，请求这些图像将返回错误，例如 {unserved[0]}")
    if in_stream is None:
        # 按字节读取，非法UTF-8只影响所在的那一行
        in_stream = getattr(sys.stdin, "buffer", sys.stdin)
    serve(server, in_stream, out_stream or sys.stdout, workers=args.workers)
    return EXIT_OK


COMMANDS = {
    "make-fixture": cmd_make_fixture,
    "build-df": cmd_build_df,
    "build-sets": cmd_build_sets,
    "weights": cmd_weights,
    "eval": cmd_eval,
    "reward-serve": cmd_reward_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:

    parser = setup_argparse()
    args = parser.parse_args(argv)

    command = COMMANDS.get(args.command)
    if command is None:
        parser.print_help()
        return EXIT_VALIDATION

    verbose = config.VERBOSE
    config.VERBOSE = verbose and not args.quiet
    try:
        return command(args)
    except (ValidationError, FileNotFoundError) as e:
        print(f"错误: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:
        print(f"内部错误: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    finally:
        config.VERBOSE = verbose


if __name__ == "__main__":
    sys.exit(main())
