"""Learn the prompt context on a manifest's training split and evaluate it on the test split.

    python scripts/tune_context.py --config run.cfg --manifest manifests/koniq.csv --out results/koniq_ctx.npz

Hyper-parameters (learning_rate, iterations, batch_size, ...) come from the
config file. Defaults: plain SGD, lr 0.002, 100k iterations, batch 64.
"""
import argparse
import sys
from pathlib import Path

from pairiqa.backbone.adapter import load_backbone
from pairiqa.harness.config import load_config
from pairiqa.harness.evaluate import eval_dataset
from pairiqa.harness.manifest import ingest_manifest
from pairiqa.prompts import get_pair
from pairiqa.tuning import export_context, tune


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", required=True)
    ap.add_argument("--manifest", required=True)
    ap.add_argument("--attribute", default="quality")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    cfg = load_config(args.config)
    cfg.apply_determinism()
    backbone = load_backbone(cfg.backbone_config())
    manifest = ingest_manifest(args.manifest)
    out = Path(args.out)
    h0 = backbone.weights_hash()
    ctx, log = tune(manifest, backbone, cfg.tune, get_pair(args.attribute), log_path=out.with_suffix(".log.jsonl"))
    assert backbone.weights_hash() == h0, "backbone weights changed during tuning"
    export_context(ctx, out)
    rep = eval_dataset(manifest, backbone, context=ctx, split="test", workers=cfg.workers)
    rep.save(out.with_suffix(".eval.json"))
    print(f"tuned context: test SROCC={rep.srocc:.3f} PLCC={rep.plcc:.3f} (n={rep.n})", file=sys.stderr)


if __name__ == "__main__":
    main()
