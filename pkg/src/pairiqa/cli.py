"""Command line entry point: ``pairiqa <subcommand> ...``.

Backbone options (``--config``, ``--checkpoint``, ``--vocab``, ``--variant``,
``--backbone-mode``) are shared by every subcommand that embeds images.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import degrade, prompts
from .backbone.adapter import POS_MODES, VARIANTS, load_backbone
from .errors import ConfigurationError, InputError, PairIQAError
from .harness import cache as cache_mod
from .harness import studies
from .harness.config import RunConfig, load_config
from .harness.evaluate import EvalReport, eval_dataset, make_image_scorer, native_crop_for
from .harness.manifest import ingest_manifest, load_record_image
from .imageio import load_image
from .scoring import score_attributes, score_image
from .tuning import export_context, import_context, tune


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    for attr, key in (("checkpoint", "checkpoint"), ("vocab", "vocab"), ("model_card", "model_card"),
                      ("variant", "variant"), ("backbone_mode", "pos_embedding_mode"), ("cache_dir", "cache_dir"),
                      ("workers", "workers"), ("registry", "registry"), ("seed", "seed")):
        v = getattr(args, attr, None)
        if v is not None:
            setattr(cfg, key, v)
    if getattr(args, "seed", None) is not None:
        cfg.tune.seed = args.seed
    cfg.apply_determinism()
    return cfg


def _backbone(cfg: RunConfig, **overrides):
    return load_backbone(cfg.backbone_config(**overrides))


def _registry(cfg: RunConfig) -> prompts.PromptRegistry:
    if cfg.registry and Path(cfg.registry).exists():
        return prompts.PromptRegistry.load(cfg.registry)
    return prompts.PromptRegistry.default()


def _emit(obj, out=None):
    text = json.dumps(obj, indent=1)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _pair_from_args(args, registry):
    if getattr(args, "context", None):
        return None, import_context(args.context)
    if getattr(args, "pair", None):
        return prompts.make_pair(args.attribute or "custom", *args.pair, args.template or "T1"), None
    if getattr(args, "preset", None):
        return prompts.preset_pair(args.preset, args.template or "T1"), None
    return registry.get_pair(args.attribute or "quality", args.template), None


def _score_input(backbone, path):
    img = load_image(path)
    crop = native_crop_for(backbone)
    if crop:
        from .imageio import from_pil, resize_center_crop, to_pil
        img = from_pil(resize_center_crop(to_pil(img), crop))
    return backbone.embed_image(img)


def cmd_score(args):
    cfg = _config(args)
    registry = _registry(cfg)
    pair, _ = _pair_from_args(args, registry)
    backbone = _backbone(cfg)
    x = _score_input(backbone, args.image)
    res = score_image(x, pair, (backbone.embed_text(pair.positive_text), backbone.embed_text(pair.negative_text)))
    _emit(res.__dict__ | {"image": str(args.image)}, args.out)


def cmd_score_attrs(args):
    cfg = _config(args)
    registry = _registry(cfg)
    names = [a.strip() for a in args.attributes.split(",") if a.strip()] if args.attributes else registry.names()
    pairs = [registry.get_pair(a) for a in names]
    backbone = _backbone(cfg)
    x = _score_input(backbone, args.image)
    res = score_attributes(x, pairs, lambda p: (backbone.embed_text(p.positive_text),
                                                 backbone.embed_text(p.negative_text)))
    _emit({"image": str(args.image), "scores": [r.__dict__ for r in res]}, args.out)


def cmd_eval_dataset(args):
    cfg = _config(args)
    registry = _registry(cfg)
    pair, context = _pair_from_args(args, registry)
    manifest = ingest_manifest(args.manifest)
    if args.short_side:
        manifest.resize_short_side = args.short_side
    backbone = _backbone(cfg)
    report = eval_dataset(manifest, backbone, pair, context, split=args.split, cache_dir=cfg.cache_dir,
                          workers=cfg.workers, method=args.method)
    report.extra["pos_embedding_mode"] = cfg.pos_embedding_mode
    report.extra["variant"] = cfg.variant
    if args.out:
        report.save(args.out)
    print(f"{report.dataset}: n={report.n} SROCC={report.srocc:.3f} PLCC={report.plcc:.3f}", file=sys.stderr)
    if not args.out:
        _emit(report.to_dict())


def cmd_degrade_sweep(args):
    cfg = _config(args)
    registry = _registry(cfg)
    levels = [float(v) for v in args.levels.split(",")] if args.levels else ()
    spec = degrade.DegradationSpec(args.attribute, levels, seed=cfg.seed)
    manifest = ingest_manifest(args.manifest)
    records = manifest.eval_records(args.split)
    if not records:
        raise InputError(f"{manifest.name}: no records to sweep")
    rng = np.random.default_rng(cfg.seed)
    if args.n_images and args.n_images < len(records):
        idx = sorted(rng.choice(len(records), size=args.n_images, replace=False))
        records = [records[i] for i in idx]
    backbone = _backbone(cfg)
    images = [load_record_image(manifest, r) for r in records]
    scorer = make_image_scorer(backbone, native_crop=native_crop_for(backbone))
    pair = registry.get_pair(args.attribute)
    report = degrade.run_sweep(images, spec, scorer, pair, names=[r.image_path for r in records])
    _emit(report.to_dict(), args.out)
    if report.level_correlation is not None:
        print(f"{args.attribute}: level_correlation={report.level_correlation:.3f}", file=sys.stderr)


def cmd_tune_prompts(args):
    cfg = _config(args)
    registry = _registry(cfg)
    tc = cfg.tune
    for attr in ("iterations", "learning_rate", "batch_size"):
        v = getattr(args, attr)
        if v is not None:
            setattr(tc, attr, v)
    tc.__post_init__()
    manifest = ingest_manifest(args.manifest)
    backbone = _backbone(cfg)
    h0 = backbone.weights_hash()
    pair = registry.get_pair(args.attribute)
    log_path = args.log or str(Path(args.out).with_suffix(".log.jsonl"))
    ctx, log = tune(manifest, backbone, tc, pair, log_path=log_path)
    if backbone.weights_hash() != h0:
        raise PairIQAError("backbone weights changed during tuning")
    export_context(ctx, args.out)
    print(f"wrote {args.out}; final loss {log[-1]['loss']:.6g}; log {log_path}", file=sys.stderr)


def _parse_axes(items, default_backbone=("residual-attnpool", "removed")):
    axes = {"templates": ["T1"], "presets": ["a"], "backbones": [tuple(default_backbone)]}
    for item in items or []:
        key, sep, value = item.partition("=")
        vals = [v.strip() for v in value.split(",") if v.strip()]
        if not sep or key not in axes or not vals:
            raise ConfigurationError(f"bad axis {item!r}; use templates=T1,T2 presets=a,b "
                                     f"backbones=residual-attnpool:removed,patch-transformer:vanilla")
        if key == "backbones":
            pairs = []
            for v in vals:
                variant, _, mode = v.partition(":")
                if variant not in VARIANTS or mode not in POS_MODES:
                    raise ConfigurationError(f"bad backbone axis value {v!r}")
                pairs.append((variant, mode))
            vals = pairs
        axes[key] = vals
    for t in axes["templates"]:
        prompts.get_template(t)
    for p in axes["presets"]:
        prompts.preset_pair(p)
    return axes


def cmd_ablate(args):
    cfg = _config(args)
    axes = _parse_axes(args.axes, (cfg.variant, cfg.pos_embedding_mode))
    weights = {}
    for item in args.weights or []:
        variant, _, path = item.partition("=")
        weights[variant] = path
    datasets = {}
    for item in args.manifest:
        name, sep, path = item.partition("=")
        m = ingest_manifest(path if sep else name)
        datasets[name if sep else m.name] = m

    def factory(variant, mode):
        if variant in weights:
            ckpt = weights[variant]
            return _backbone(cfg, checkpoint_path=ckpt, variant=variant, pos_embedding_mode=mode,
                             model_card_path=str(Path(ckpt).with_name(Path(ckpt).stem + ".card.json")))
        if variant != cfg.variant:
            raise ConfigurationError(f"no checkpoint for {variant}; pass --weights {variant}=PATH")
        return _backbone(cfg, pos_embedding_mode=mode)

    table = studies.ablation_matrix(datasets, axes["templates"], axes["presets"], axes["backbones"], factory,
                                    cache_dir=cfg.cache_dir, workers=cfg.workers)
    text = table.to_csv()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_report(args):
    report = EvalReport.load(args.input)
    if args.extremes:
        _emit(studies.rank_extremes(report, args.extremes))
        return
    if args.format == "json":
        _emit(report.to_dict())
    elif args.per_image:
        sys.stdout.write(report.to_csv())
    else:
        prompt = " / ".join(str(report.prompt.get(k, "")) for k in ("positive", "negative"))
        print("dataset,prompt,method,n,srocc,plcc")
        print(f"{report.dataset},{prompt},{report.method},{report.n},{report.srocc:.3f},{report.plcc:.3f}")


def cmd_prompts(args):
    cfg = _config(args)
    path = cfg.registry
    registry = _registry(cfg)
    if args.action == "list":
        for name in registry.names():
            p = registry.get_pair(name)
            print(f"{name}\t{p.positive_text}\t{p.negative_text}")
        return
    if not path:
        raise ConfigurationError("prompts add needs --registry FILE (or 'registry' in the config) to persist to")
    registry.register_pair(args.name, args.positive, args.negative, args.template or "T1",
                           overwrite=args.overwrite, persist_to=path)
    print(f"registered {args.name} in {path}", file=sys.stderr)


def cmd_cache_purge(args):
    cfg = _config(args)
    if not cfg.cache_dir:
        raise ConfigurationError("no cache directory given")
    cache_mod.purge(cfg.cache_dir)
    print(f"purged {cfg.cache_dir}", file=sys.stderr)


def cmd_compare_benchmark(args):
    cfg = _config(args)
    low, high = ingest_manifest(args.low), ingest_manifest(args.high)
    res = studies.paired_benchmark_compare(low, high, args.attribute, _backbone(cfg), _registry(cfg),
                                           workers=cfg.workers)
    _emit(res, args.out)


def cmd_abstract_study(args):
    cfg = _config(args)
    res = studies.abstract_pair_study(args.pairs, args.votes, _backbone(cfg), _registry(cfg))
    _emit(res, args.out)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("backbone / run")
    g.add_argument("--config", help="key = value run config file")
    g.add_argument("--checkpoint", help="converted weight archive (.npz)")
    g.add_argument("--vocab", help="BPE merges file (.txt or .txt.gz)")
    g.add_argument("--model-card", dest="model_card")
    g.add_argument("--variant", choices=VARIANTS)
    g.add_argument("--backbone-mode", dest="backbone_mode", choices=POS_MODES)
    g.add_argument("--cache-dir", dest="cache_dir")
    g.add_argument("--workers", type=int)
    g.add_argument("--registry", help="prompt registry file")
    g.add_argument("--seed", type=int)

    def prompt_opts(p):
        p.add_argument("--attribute")
        p.add_argument("--pair", nargs=2, metavar=("POS", "NEG"), help="custom antonym adjectives")
        p.add_argument("--template", choices=sorted(prompts.TEMPLATES))

    ap = argparse.ArgumentParser(prog="pairiqa", description="Antonym-prompt image quality and look assessment")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", parents=[common], help="score one image on one attribute")
    p.add_argument("image")
    prompt_opts(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("score-attrs", parents=[common], help="score one image on several attributes")
    p.add_argument("image")
    p.add_argument("--attributes", help="comma separated; default all registered")
    p.add_argument("--out")
    p.set_defaults(func=cmd_score_attrs)

    p = sub.add_parser("eval-dataset", parents=[common], help="SROCC/PLCC of a manifest against MOS")
    p.add_argument("--manifest", required=True)
    prompt_opts(p)
    p.add_argument("--preset", choices=sorted(prompts.ADJECTIVE_PRESETS))
    p.add_argument("--context", help="tuned prompt context file")
    p.add_argument("--split", choices=("train", "test", "all"))
    p.add_argument("--method", choices=("pair", "single"), default="pair")
    p.add_argument("--short-side", dest="short_side", type=int, help="override the manifest's resize")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_dataset)

    p = sub.add_parser("degrade-sweep", parents=[common], help="synthetic attribute sweep")
    p.add_argument("--attribute", required=True, choices=degrade.ATTRIBUTES)
    p.add_argument("--levels", help="comma separated, increasing; default grid when omitted")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=("train", "test", "all"))
    p.add_argument("--n-images", dest="n_images", type=int, default=200)
    p.add_argument("--out")
    p.set_defaults(func=cmd_degrade_sweep)

    p = sub.add_parser("tune-prompts", parents=[common], help="learn the prompt context against MOS")
    p.add_argument("--manifest", required=True)
    p.add_argument("--attribute", default="quality")
    p.add_argument("--iterations", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--log")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune_prompts)

    p = sub.add_parser("ablate", parents=[common], help="template/adjective/backbone grid")
    p.add_argument("--manifest", action="append", required=True, help="[NAME=]PATH, repeatable")
    p.add_argument("--axes", nargs="*", help="templates=T1,T2,T3 presets=a,b,c backbones=VARIANT:MODE,...")
    p.add_argument("--weights", action="append", help="VARIANT=ARCHIVE for variants other than the config's")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="render an EvalReport")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--per-image", dest="per_image", action="store_true")
    p.add_argument("--extremes", type=int, metavar="K", help="k best and k worst images")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("prompts", parents=[common], help="list or add prompt pairs")
    p.add_argument("action", choices=("list", "add"))
    p.add_argument("name", nargs="?")
    p.add_argument("positive", nargs="?")
    p.add_argument("negative", nargs="?")
    p.add_argument("--template")
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_prompts)

    p = sub.add_parser("cache-purge", parents=[common], help="delete a score cache")
    p.set_defaults(func=cmd_cache_purge)

    p = sub.add_parser("compare-benchmark", parents=[common], help="low vs high quality manifests")
    p.add_argument("--low", required=True)
    p.add_argument("--high", required=True)
    p.add_argument("--attribute", default="quality")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare_benchmark)

    p = sub.add_parser("abstract-study", parents=[common], help="pairwise accuracy against human votes")
    p.add_argument("--pairs", required=True)
    p.add_argument("--votes", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_abstract_study)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "prompts" and args.action == "add" and not (args.name and args.positive and args.negative):
        ap.error("prompts add needs NAME POSITIVE NEGATIVE")
    try:
        args.func(args)
    except (PairIQAError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
