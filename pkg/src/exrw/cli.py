"""Operator surface: one subcommand per pipeline stage.

Exit codes: 0 success, 1 usage error, 2 runtime error. Flags beat config
file values (with a warning on conflict); EXRW_ENDPOINT supplies the
default endpoint. Every subcommand runs offline with the fallback
embedder and the identity rewriter.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .coherence import build_triplets, export_triplets, train_coherence
from .config import ControlConfig
from .corpus import content_hash, load_cluster_dataset, split_sentences
from .embedding import EmbeddingProviderConfig, make_provider, write_cache_file
from .metrics import cluster_report, corpus_means
from .neural import load_checkpoint, save_checkpoint
from .policy import PolicyModels, dump_trajectories, extract_trajectory, init_policy_models
from .rewrite import RewriteRequest, RewriterConfig, make_rewriter
from .trainer import grid_search, pretrain_policy, train_rl

SUBCOMMANDS = (
    "train-coherence",
    "pretrain",
    "train-rl",
    "summarize",
    "evaluate",
    "grid-search",
    "embed-cache",
)

ENDPOINT_ENV = "EXRW_ENDPOINT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the CLI contract wants 1.
    def error(self, message):
        raise UsageError(f"{message}\n\n{self.format_help()}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="exrw", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, add_help=True)
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--cl1", type=float, default=None)
        p.add_argument("--cl2", type=float, default=None)
        p.add_argument("--k", type=float, default=None)
        p.add_argument("--c", type=float, default=None)
        p.add_argument("--lambda", dest="lambda_", type=float, default=None)
        p.add_argument("--embedder", choices=("cache", "remote", "fallback"), default=None)
        p.add_argument("--rewriter", choices=("identity", "remote"), default=None)
        p.add_argument("--endpoint", type=str, default=None)
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--mode", choices=("greedy", "sample"), default=None)
        p.add_argument("--dim", type=int, default=None)
        p.add_argument("--cache", type=str, default=None, help="embedding cache file (embedder=cache)")
        p.add_argument("--ckpt", type=str, default=None, help="checkpoint to load")
        p.add_argument("--train", type=str, default=None, help="training dataset (JSONL)")
        p.add_argument("--dev", type=str, default=None, help="development dataset (JSONL)")
        p.add_argument("--test", type=str, default=None, help="test dataset (JSONL)")
        p.add_argument("--dataset", type=str, default=None, help="dataset to process (JSONL)")
    return parser


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    if not Path(path).exists():
        raise UsageError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _resolve(flag_value, config_value, default, name: str):
    """Flag beats config file; emit a warning when both are set and differ."""
    if flag_value is not None:
        if config_value is not None and config_value != flag_value:
            print(
                f"warning: flag --{name} ({flag_value}) overrides config value ({config_value})",
                file=sys.stderr,
            )
        return flag_value
    if config_value is not None:
        return config_value
    return default


class RunContext:
    """Resolved configuration for one CLI invocation."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file_cfg = _load_config_file(args.config)
        control_raw = dict(self.file_cfg.get("control", {}))
        control = ControlConfig.from_json(control_raw)
        overrides = {}
        for name in ("cl1", "cl2", "k", "c", "lambda_", "seed"):
            flag_value = getattr(args, name)
            key = "lambda" if name == "lambda_" else name
            if flag_value is not None:
                if key in control_raw and control_raw[key] != flag_value:
                    print(
                        f"warning: flag --{key} ({flag_value}) overrides config value "
                        f"({control_raw[key]})",
                        file=sys.stderr,
                    )
                overrides[name] = flag_value
        self.control = control.replace(**overrides) if overrides else control

        emb_raw = dict(self.file_cfg.get("embedding", {}))
        endpoint_default = os.environ.get(ENDPOINT_ENV)
        self.endpoint = _resolve(
            args.endpoint, emb_raw.get("endpoint_url"), endpoint_default, "endpoint"
        )
        self.embedding = EmbeddingProviderConfig(
            kind=_resolve(args.embedder, emb_raw.get("kind"), "fallback", "embedder"),
            dim=int(_resolve(args.dim, emb_raw.get("dim"), 64, "dim")),
            cache_path=_resolve(args.cache, emb_raw.get("cache_path"), None, "cache"),
            endpoint_url=self.endpoint,
            timeout_ms=int(emb_raw.get("timeout_ms", 10_000)),
        )
        rw_raw = dict(self.file_cfg.get("rewrite", {}))
        self.rewriter_config = RewriterConfig(
            kind=_resolve(args.rewriter, rw_raw.get("kind"), "identity", "rewriter"),
            endpoint_url=rw_raw.get("endpoint_url") or self.endpoint,
            timeout_ms=int(rw_raw.get("timeout_ms", 30_000)),
        )
        self.mode = _resolve(args.mode, self.file_cfg.get("mode"), "greedy", "mode")
        self.out = Path(_resolve(args.out, self.file_cfg.get("out"), "exrw-out", "out"))
        self.ckpt = _resolve(args.ckpt, self.file_cfg.get("ckpt"), None, "ckpt")
        self.grids = self.file_cfg.get("grid")

    def dataset_path(self, which: str) -> str:
        value = _resolve(getattr(self.args, which), self.file_cfg.get(which), None, which)
        if value is None:
            raise UsageError(f"{self.args.command} requires --{which} (or {which!r} in the config)")
        if not Path(value).exists():
            raise UsageError(f"{which} dataset path not found: {value}")
        return value

    def provider(self):
        return make_provider(self.embedding)

    def rewriter(self):
        return make_rewriter(self.rewriter_config)

    def models(self, provider) -> PolicyModels:
        if self.ckpt:
            if not Path(self.ckpt).exists():
                raise UsageError(f"checkpoint path not found: {self.ckpt}")
            expected = provider.dim if provider.dim else None
            models, meta = load_checkpoint(self.ckpt, expected_dim=expected)
            return PolicyModels.from_dict(models)
        dim = provider.dim if provider.dim else self.embedding.dim
        return init_policy_models(dim, self.control.seed)

    def ensure_out(self) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out


def _summarize_cluster(ctx: RunContext, models, cfg, cluster, provider, rewriter):
    traj = extract_trajectory(models, cfg, cluster, provider, mode=ctx.mode, seed=cfg.seed)
    texts = [cluster.sentences[i].text for i in traj.indices]
    result = rewriter.rewrite(RewriteRequest(sentences=texts))
    return traj, result.text


def _cmd_train_coherence(ctx: RunContext) -> int:
    clusters = load_cluster_dataset(ctx.dataset_path("train"))
    provider = ctx.provider()
    out = ctx.ensure_out()
    triplets = build_triplets(clusters, provider, seed=ctx.control.seed)
    if not triplets:
        raise ValueError("no triplets could be built: check reference summaries")
    model, report = train_coherence(triplets, ctx.control)
    export_triplets(triplets, out / "triplets.jsonl")
    dim = provider.dim if provider.dim else ctx.embedding.dim
    models = init_policy_models(dim, ctx.control.seed)
    models.coherence = model
    save_checkpoint(out / "checkpoint.json", models.to_dict(), ctx.control, dim)
    with open(out / "coherence_report.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "precision": report.precision,
                "recall": report.recall,
                "f1": report.f1,
                "threshold": report.threshold,
                "epochs": report.epochs,
            },
            fh,
            indent=1,
        )
    print(
        f"coherence pre-training done: P={report.precision:.4f} R={report.recall:.4f} "
        f"F={report.f1:.4f} threshold={report.threshold:.2f}"
    )
    print(f"checkpoint written to {out / 'checkpoint.json'}")
    return 0


def _train_command(ctx: RunContext, phase: str) -> int:
    clusters = load_cluster_dataset(ctx.dataset_path("train"))
    provider = ctx.provider()
    rewriter = ctx.rewriter()
    out = ctx.ensure_out()
    if not ctx.ckpt:
        raise UsageError(f"{phase} requires --ckpt (run train-coherence first)")
    models = ctx.models(provider)
    runner = pretrain_policy if phase == "pretrain" else train_rl
    report = runner(
        clusters,
        models,
        ctx.control,
        provider,
        rewriter,
        checkpoint_path=out / "checkpoint.json",
        log_path=out / "train_log.jsonl",
    )
    last_loss = report.mean_loss[-1] if report.mean_loss else float("nan")
    last_reward = report.mean_reward[-1] if report.mean_reward else float("nan")
    print(
        f"{phase} done: epochs={report.epochs} final mean_loss={last_loss:.6f} "
        f"final mean_reward={last_reward:.6f}"
    )
    print(f"checkpoint written to {report.checkpoint_path}")
    return 0


def _cmd_summarize(ctx: RunContext) -> int:
    clusters = load_cluster_dataset(ctx.dataset_path("dataset"))
    provider = ctx.provider()
    rewriter = ctx.rewriter()
    models = ctx.models(provider)
    out = ctx.ensure_out()
    trajectories = []
    for cluster in clusters:
        traj, text = _summarize_cluster(ctx, models, ctx.control, cluster, provider, rewriter)
        trajectories.append(traj)
        print(f"{cluster.id}\t{text}")
    dump_trajectories(trajectories, out / "trajectories.jsonl")
    return 0


def _cmd_evaluate(ctx: RunContext) -> int:
    clusters = load_cluster_dataset(ctx.dataset_path("dataset"))
    provider = ctx.provider()
    rewriter = ctx.rewriter()
    models = ctx.models(provider)
    out = ctx.ensure_out()
    reports = []
    for cluster in clusters:
        if not cluster.reference_summary:
            raise ValueError(f"cluster {cluster.id!r} has no reference summary to evaluate against")
        _, text = _summarize_cluster(ctx, models, ctx.control, cluster, provider, rewriter)
        reports.append(cluster_report(cluster.id, text, cluster.reference_summary, provider))
    means = corpus_means(reports)
    with open(out / "evaluation.jsonl", "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(json.dumps(report) + "\n")
    with open(out / "evaluation_means.json", "w", encoding="utf-8") as fh:
        json.dump(means, fh, indent=1)
    table = _format_table(means)
    with open(out / "table.txt", "w", encoding="utf-8") as fh:
        fh.write(table + "\n")
    print(table)
    return 0


def _format_table(means: dict) -> str:
    header = f"{'Model':<22}{'ROUGE-1':>9}{'ROUGE-2':>9}{'ROUGE-L':>9}"
    row = (
        f"{'exrw':<22}"
        f"{100 * means['rouge1']['f1']:>9.2f}"
        f"{100 * means['rouge2']['f1']:>9.2f}"
        f"{100 * means['rougeL']['f1']:>9.2f}"
    )
    return header + "\n" + row


def _cmd_grid_search(ctx: RunContext) -> int:
    clusters = load_cluster_dataset(ctx.dataset_path("dev"))
    if not ctx.grids:
        raise UsageError("grid-search requires a 'grid' object in the config file")
    grids = {("lambda_" if key == "lambda" else key): values for key, values in ctx.grids.items()}
    provider = ctx.provider()
    rewriter = ctx.rewriter()
    models = ctx.models(provider)
    out = ctx.ensure_out()
    best, table = grid_search(clusters, grids, models, ctx.control, provider, rewriter)
    with open(out / "grid.json", "w", encoding="utf-8") as fh:
        json.dump({"best": best.to_json(), "table": table}, fh, indent=1)
    print(
        "best config: "
        + json.dumps({key: best.to_json()[key] for key in ("cl1", "cl2", "k", "c", "lambda")})
    )
    print(f"grid table written to {out / 'grid.json'} ({len(table)} points)")
    return 0


def _cmd_embed_cache(ctx: RunContext) -> int:
    clusters = load_cluster_dataset(ctx.dataset_path("dataset"))
    if ctx.embedding.kind == "cache":
        raise UsageError("embed-cache needs a source embedder (fallback or remote), not cache")
    provider = ctx.provider()
    out = ctx.ensure_out()
    texts: dict[str, str] = {}
    for cluster in clusters:
        for sentence in cluster.sentences:
            texts[sentence.content_hash] = sentence.text
        if cluster.reference_summary:
            for ref_sentence in split_sentences(cluster.reference_summary):
                texts[content_hash(ref_sentence)] = ref_sentence
    keys = sorted(texts)
    vectors = provider.embed([texts[key] for key in keys])
    entries = {key: vec.tolist() for key, vec in zip(keys, vectors)}
    dim = provider.dim if provider.dim else len(next(iter(entries.values())))
    cache_path = ctx.out / "embcache.jsonl"
    write_cache_file(cache_path, dim, entries)
    print(f"wrote {len(entries)} vectors (dim={dim}) to {cache_path}")
    return 0


_HANDLERS = {
    "train-coherence": _cmd_train_coherence,
    "pretrain": lambda ctx: _train_command(ctx, "pretrain"),
    "train-rl": lambda ctx: _train_command(ctx, "train-rl"),
    "summarize": _cmd_summarize,
    "evaluate": _cmd_evaluate,
    "grid-search": _cmd_grid_search,
    "embed-cache": _cmd_embed_cache,
}


def run(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        ctx = RunContext(args)
        return _HANDLERS[args.command](ctx)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
