"""Template x adjective x backbone/positional-embedding grid.

    python scripts/ablation_grid.py --config run.cfg --vit-checkpoint weights/ViT-B-32.npz \
        --manifest koniq=manifests/koniq.csv --manifest livec=manifests/livec.csv --out results/ablation.csv

Rows follow the usual layout: the three templates with adjective set a, then
adjective sets b and c with T1, then the positional-embedding modes of each
backbone. A cell whose backbone cannot be loaded records the error.
"""
import argparse
import json
from pathlib import Path

from pairiqa.backbone.adapter import load_backbone
from pairiqa.harness.config import load_config
from pairiqa.harness.manifest import ingest_manifest
from pairiqa.harness.studies import AblationTable, ablation_matrix

RN, VIT = "residual-attnpool", "patch-transformer"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", required=True, help="residual-attnpool checkpoint and run settings")
    ap.add_argument("--vit-checkpoint", help="converted patch-transformer archive")
    ap.add_argument("--manifest", action="append", required=True, help="NAME=PATH")
    ap.add_argument("--out", default="ablation.csv")
    args = ap.parse_args()

    cfg = load_config(args.config)
    cfg.apply_determinism()
    datasets = {}
    for item in args.manifest:
        name, _, path = item.partition("=")
        datasets[name] = ingest_manifest(path)

    def factory(variant, mode):
        if variant == VIT:
            if not args.vit_checkpoint:
                raise FileNotFoundError("no --vit-checkpoint given")
            ckpt = Path(args.vit_checkpoint)
            return load_backbone(cfg.backbone_config(checkpoint_path=str(ckpt), variant=VIT, pos_embedding_mode=mode,
                                                     model_card_path=str(ckpt.with_name(ckpt.stem + ".card.json"))))
        return load_backbone(cfg.backbone_config(variant=RN, pos_embedding_mode=mode))

    kw = dict(backbone_factory=factory, cache_dir=cfg.cache_dir, workers=cfg.workers)
    blocks = [
        ablation_matrix(datasets, ["T1", "T2", "T3"], ["a"], [(RN, "removed")], **kw),
        ablation_matrix(datasets, ["T1"], ["b", "c"], [(RN, "removed")], **kw),
        ablation_matrix(datasets, ["T1"], ["a"], [(RN, "vanilla"), (RN, "interpolated"), (VIT, "vanilla"),
                                                  (VIT, "interpolated"), (VIT, "removed")], **kw),
    ]
    table = AblationTable(list(datasets), [c for b in blocks for c in b.cells])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(table.to_csv())
    out.with_suffix(".json").write_text(json.dumps(table.to_dict(), indent=1) + "\n")
    print(table.to_csv(), end="")


if __name__ == "__main__":
    main()
