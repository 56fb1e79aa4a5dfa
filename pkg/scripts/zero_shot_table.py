"""Zero-shot SROCC/PLCC of the antonym pair and the single-prompt baseline on several datasets.

    python scripts/zero_shot_table.py --config run.cfg \
        --manifest koniq=manifests/koniq.csv --manifest livec=manifests/livec.csv --out results/zero_shot.csv

Reports are saved next to the table as ``<dataset>-<method>.json``.
"""
import argparse
import csv
import sys
from pathlib import Path

from pairiqa.backbone.adapter import load_backbone
from pairiqa.harness.config import load_config
from pairiqa.harness.evaluate import eval_dataset
from pairiqa.harness.manifest import ingest_manifest
from pairiqa.prompts import get_pair


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", required=True)
    ap.add_argument("--manifest", action="append", required=True, help="NAME=PATH")
    ap.add_argument("--attribute", default="quality")
    ap.add_argument("--out", default="zero_shot.csv")
    args = ap.parse_args()

    cfg = load_config(args.config)
    cfg.apply_determinism()
    backbone = load_backbone(cfg.backbone_config())
    pair = get_pair(args.attribute)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for item in args.manifest:
        name, _, path = item.partition("=")
        manifest = ingest_manifest(path)
        for method in ("single", "pair"):
            rep = eval_dataset(manifest, backbone, pair, cache_dir=cfg.cache_dir, workers=cfg.workers, method=method)
            rep.save(out.with_name(f"{name}-{method}.json"))
            rows.append([name, method, rep.n, f"{rep.srocc:.3f}", f"{rep.plcc:.3f}"])
            print(f"{name:12s} {method:6s} n={rep.n:5d} SROCC={rep.srocc:.3f} PLCC={rep.plcc:.3f}", file=sys.stderr)
    with open(out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["dataset", "method", "n", "srocc", "plcc"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
