"""Score-vs-level sweeps for brightness, noisiness, colorfulness and sharpness.

    python scripts/attribute_sweeps.py --config run.cfg --manifest manifests/koniq.csv --n-images 200 --out results/sweeps

Images are drawn from the manifest's test split with the config seed; the
chosen file names are stored in each sweep report.
"""
import argparse
import json
import sys
from pathlib import Path

import numpy as np

from pairiqa.backbone.adapter import load_backbone
from pairiqa.degrade import ATTRIBUTES, DegradationSpec, run_sweep
from pairiqa.harness.config import load_config
from pairiqa.harness.evaluate import make_image_scorer, native_crop_for
from pairiqa.harness.manifest import ingest_manifest, load_record_image


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", required=True)
    ap.add_argument("--manifest", required=True)
    ap.add_argument("--n-images", type=int, default=200)
    ap.add_argument("--attributes", default=",".join(ATTRIBUTES))
    ap.add_argument("--out", default="sweeps")
    args = ap.parse_args()

    cfg = load_config(args.config)
    cfg.apply_determinism()
    backbone = load_backbone(cfg.backbone_config())
    manifest = ingest_manifest(args.manifest)
    records = manifest.eval_records()
    rng = np.random.default_rng(cfg.seed)
    if args.n_images < len(records):
        records = [records[i] for i in sorted(rng.choice(len(records), size=args.n_images, replace=False))]
    images = [load_record_image(manifest, r) for r in records]
    scorer = make_image_scorer(backbone, native_crop=native_crop_for(backbone))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for attr in args.attributes.split(","):
        rep = run_sweep(images, DegradationSpec(attr, seed=cfg.seed), scorer, names=[r.image_path for r in records])
        (out / f"{attr}.json").write_text(json.dumps(rep.to_dict(), indent=1) + "\n")
        means = [float(np.mean(rep.per_level_scores[lv])) for lv in rep.levels]
        print(f"{attr:12s} level_correlation={rep.level_correlation:.3f} mean scores "
              + " ".join(f"{m:.3f}" for m in means), file=sys.stderr)


if __name__ == "__main__":
    main()
