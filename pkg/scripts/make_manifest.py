"""Write ``image_path,mos,split`` manifests from raw dataset layouts.

MOS datasets::

    python scripts/make_manifest.py koniq    ROOT  OUT.csv   # koniq10k_scores_and_distributions.csv + 1024x768/
    python scripts/make_manifest.py livec    ROOT  OUT.csv   # Data/AllImages_release.mat, Data/AllMOS_release.mat, Images/
    python scripts/make_manifest.py spaq     ROOT  OUT.csv   # MOS csv (exported from the xlsx) + TestImage/
    python scripts/make_manifest.py tid2013  ROOT  OUT.csv   # mos_with_names.txt + distorted_images/
    python scripts/make_manifest.py ava      ROOT  OUT.csv   # AVA.txt + images/

Paired low/high benchmarks write two manifests (OUT_low.csv, OUT_high.csv)
aligned by row, for ``pairiqa compare-benchmark``::

    python scripts/make_manifest.py lol      ROOT  OUT      # {low,high}/ with matching names
    python scripts/make_manifest.py polyu    ROOT  OUT      # *_real.JPG / *_mean.JPG
    python scripts/make_manifest.py realblur ROOT  OUT      # RealBlur_J_test_list.txt (gt blur per line)
    python scripts/make_manifest.py paired   ROOT  OUT --low DIR --high DIR   # e.g. FiveK input vs expert C

Paths in the manifest are relative to the manifest's directory when possible.
"""
import argparse
import csv
import os
from pathlib import Path

import numpy as np

IMAGE_EXT = {".jpg", ".jpeg", ".png", ".bmp", ".tif", ".tiff"}


def rel(path, out):
    try:
        return os.path.relpath(path, Path(out).resolve().parent)
    except ValueError:
        return str(path)


def write(out, rows, name, mos_scale=None, short_side=None, note=None):
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as f:
        f.write(f"# name: {name}\n")
        if mos_scale:
            f.write(f"# mos_scale: {mos_scale[0]}, {mos_scale[1]}\n")
        if short_side:
            f.write(f"# resize_short_side: {short_side}\n")
        if note:
            f.write(f"# note: {note}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["image_path", "mos", "split"])
        for path, mos, split in rows:
            w.writerow([rel(Path(path).resolve(), out), "" if mos is None else repr(float(mos)), split])
    print(f"{out}: {len(rows)} rows")


def random_split(n, test_fraction, seed):
    idx = np.random.default_rng(seed).permutation(n)
    test = set(idx[:int(round(test_fraction * n))].tolist())
    return ["test" if i in test else "train" for i in range(n)]


def koniq(root, out, args):
    root = Path(root)
    rows = list(csv.DictReader(open(root / "koniq10k_scores_and_distributions.csv", newline="")))
    sets = {}
    set_file = root / "koniq10k_distributions_sets.csv"
    if set_file.exists():
        # official split; "validation" images are kept out of training and testing
        for r in csv.DictReader(open(set_file, newline="")):
            sets[r["image_name"]] = {"training": "train", "test": "test"}.get(r["set"], "val")
    img_dir = root / "1024x768"
    recs = []
    for r in rows:
        split = sets.get(r["image_name"], "all")
        if split == "val":
            continue
        recs.append((img_dir / r["image_name"], float(r["MOS"]), split))
    write(out, recs, "koniq10k", mos_scale=(1, 5))


def livec(root, out, args):
    from scipy.io import loadmat
    root = Path(root)
    names = loadmat(root / "Data" / "AllImages_release.mat")["AllImages_release"]
    mos = loadmat(root / "Data" / "AllMOS_release.mat")["AllMOS_release"][0]
    # the first 7 entries are the training images shown to subjects
    recs = [(root / "Images" / str(names[i][0][0]), float(mos[i]), "test") for i in range(7, len(mos))]
    write(out, recs, "live-itw", mos_scale=(0, 100))


def spaq(root, out, args):
    root = Path(root)
    table = Path(args.scores) if args.scores else root / "mos.csv"
    rows = list(csv.DictReader(open(table, newline="")))
    name_key = next(k for k in rows[0] if k.lower().replace(" ", "_") in ("image_name", "image"))
    mos_key = next(k for k in rows[0] if k.strip().upper() == "MOS")
    splits = random_split(len(rows), 0.2, args.seed)
    recs = [(root / "TestImage" / r[name_key], float(r[mos_key]), s) for r, s in zip(rows, splits)]
    write(out, recs, "spaq", mos_scale=(0, 100), short_side=512,
          note=f"random 20% test split, seed {args.seed}; numbers depend on this draw")


def tid2013(root, out, args):
    root = Path(root)
    recs = []
    for line in open(root / "mos_with_names.txt"):
        parts = line.split()
        if len(parts) == 2:
            recs.append((root / "distorted_images" / parts[1], float(parts[0]), "test"))
    write(out, recs, "tid2013", mos_scale=(0, 9))


def ava(root, out, args):
    root = Path(root)
    recs = []
    for line in open(root / "AVA.txt"):
        f = line.split()
        votes = np.array([int(v) for v in f[2:12]], dtype=float)
        path = root / "images" / f"{f[1]}.jpg"
        if votes.sum() > 0 and path.exists():
            recs.append((path, float(votes @ np.arange(1, 11) / votes.sum()), "test"))
    write(out, recs, "ava", mos_scale=(1, 10))


def write_pairs(out, name, pairs):
    out = Path(out)
    write(out.with_name(out.name + "_low.csv"), [(lo, None, "test") for lo, _ in pairs], f"{name}-low")
    write(out.with_name(out.name + "_high.csv"), [(hi, None, "test") for _, hi in pairs], f"{name}-high")


def images_by_stem(d):
    return {p.stem: p for p in sorted(Path(d).iterdir()) if p.suffix.lower() in IMAGE_EXT}


def paired_dirs(low_dir, high_dir):
    low, high = images_by_stem(low_dir), images_by_stem(high_dir)
    common = sorted(set(low) & set(high))
    if not common:
        raise SystemExit(f"no matching file names between {low_dir} and {high_dir}")
    return [(low[k], high[k]) for k in common]


def lol(root, out, args):
    root = Path(root)
    base = root / "eval15" if (root / "eval15").exists() else root
    write_pairs(out, "lol", paired_dirs(base / "low", base / "high"))


def polyu(root, out, args):
    root = Path(root)
    pairs = []
    for real in sorted(root.rglob("*_real.*")):
        mean = real.with_name(real.name.replace("_real", "_mean"))
        if mean.exists():
            pairs.append((real, mean))
    write_pairs(out, "polyu", pairs)


def realblur(root, out, args):
    root = Path(root)
    lst = Path(args.list) if args.list else root / "RealBlur_J_test_list.txt"
    pairs = []
    for line in open(lst):
        parts = line.split()
        if len(parts) >= 2:
            pairs.append((root / parts[1], root / parts[0]))  # (blur, gt)
    write_pairs(out, "realblur", pairs)


def paired(root, out, args):
    root = Path(root)
    if not (args.low and args.high):
        raise SystemExit("paired needs --low DIR and --high DIR")
    write_pairs(out, args.name or root.name, paired_dirs(root / args.low, root / args.high))


ADAPTERS = {f.__name__: f for f in (koniq, livec, spaq, tid2013, ava, lol, polyu, realblur, paired)}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("dataset", choices=sorted(ADAPTERS))
    ap.add_argument("root")
    ap.add_argument("out")
    ap.add_argument("--seed", type=int, default=0, help="split seed (SPAQ)")
    ap.add_argument("--scores", help="SPAQ score table as CSV")
    ap.add_argument("--list", help="RealBlur pair list")
    ap.add_argument("--low")
    ap.add_argument("--high")
    ap.add_argument("--name")
    args = ap.parse_args()
    ADAPTERS[args.dataset](args.root, args.out, args)


if __name__ == "__main__":
    main()
