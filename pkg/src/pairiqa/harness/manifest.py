"""Dataset manifests.

CSV with header ``image_path,mos,split`` (``mos`` may be blank, ``split`` is one
of train/test/all and defaults to all). Optional ``# key: value`` lines before
the header carry dataset metadata::

    # name: koniq10k
    # mos_scale: 1, 5
    # resize_short_side: 512
    # root: /data/koniq/1024x768
    image_path,mos,split
    826373.jpg,3.47,test

Relative image paths resolve against ``root`` (itself relative to the
manifest file), or the manifest's directory when ``root`` is absent.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import IngestionError
from ..imageio import load_image, resize_center_crop, from_pil, to_pil

SPLITS = ("train", "test", "all")


@dataclass(frozen=True)
class ManifestRecord:
    image_path: str
    mos: float | None = None
    split: str = "all"


@dataclass
class DatasetManifest:
    name: str
    records: list
    mos_scale: tuple | None = None
    root: str = "."
    resize_short_side: int | None = None
    source: str | None = None
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def resolve(self, record: ManifestRecord) -> Path:
        p = Path(record.image_path)
        return p if p.is_absolute() else Path(self.root) / p

    def split(self, name: str) -> list:
        return [r for r in self.records if r.split == name]

    def eval_records(self, split: str | None = None) -> list:
        """Records to evaluate: the named split ("all" means every record), else test records if any,
        else all of them."""
        if split == "all":
            return list(self.records)
        if split is not None:
            return [r for r in self.records if r.split == split]
        test = self.split("test")
        return test if test else list(self.records)


def _parse_meta(key, value, problems, lineno):
    try:
        if key == "mos_scale":
            lo, hi = (float(v) for v in value.split(","))
            return (lo, hi)
        if key == "resize_short_side":
            return int(value)
    except ValueError:
        problems.append(f"line {lineno}: bad value for {key}: {value!r}")
        return None
    return value


def parse_manifest(text: str, base_dir=".", source="<string>", check_files=True) -> DatasetManifest:
    meta = {}
    body = []
    problems = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if stripped.startswith("#") and not body:
            key, sep, value = stripped[1:].partition(":")
            if sep:
                meta[key.strip()] = (lineno, value.strip())
            continue
        body.append((lineno, line))
    if not body:
        raise IngestionError(["no header row"], source)
    header_lineno = body[0][0]
    reader = csv.reader(io.StringIO("\n".join(line for _, line in body)))
    rows = list(reader)
    header = [h.strip() for h in rows[0]]
    if "image_path" not in header:
        raise IngestionError([f"line {header_lineno}: header must contain image_path (got {','.join(header)})"], source)
    col = {h: i for i, h in enumerate(header)}
    parsed_meta = {k: _parse_meta(k, v, problems, ln) for k, (ln, v) in meta.items()}
    root = Path(base_dir) / parsed_meta.get("root", ".")
    records, seen = [], {}
    for (lineno, _), row in zip(body[1:], rows[1:]):
        if not any(c.strip() for c in row):
            continue
        if len(row) != len(header):
            problems.append(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            continue
        path = row[col["image_path"]].strip()
        if not path:
            problems.append(f"line {lineno}: empty image_path")
            continue
        mos = None
        if "mos" in col and row[col["mos"]].strip():
            raw = row[col["mos"]].strip()
            try:
                mos = float(raw)
            except ValueError:
                problems.append(f"line {lineno}: mos {raw!r} is not a number")
                continue
            if not math.isfinite(mos):
                problems.append(f"line {lineno}: mos {raw!r} is not finite")
                continue
        split = row[col["split"]].strip() if "split" in col else "all"
        split = split or "all"
        if split not in SPLITS:
            problems.append(f"line {lineno}: split {split!r} not one of {', '.join(SPLITS)}")
            continue
        if path in seen:
            problems.append(f"line {lineno}: duplicate image_path {path!r} (first on line {seen[path]})")
            continue
        seen[path] = lineno
        records.append(ManifestRecord(path, mos, split))
    manifest = DatasetManifest(
        name=parsed_meta.get("name") or Path(source).stem,
        records=records,
        mos_scale=parsed_meta.get("mos_scale"),
        root=str(root),
        resize_short_side=parsed_meta.get("resize_short_side"),
        source=source,
        extra={k: v for k, v in parsed_meta.items() if k not in ("name", "mos_scale", "root", "resize_short_side")},
    )
    if check_files:
        for r in records:
            if not manifest.resolve(r).is_file():
                problems.append(f"{r.image_path}: file not found at {manifest.resolve(r)}")
    if problems:
        raise IngestionError(problems, source)
    return manifest


def ingest_manifest(path, check_files=True) -> DatasetManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise IngestionError([f"cannot read manifest: {e}"], str(path)) from e
    return parse_manifest(text, base_dir=path.parent, source=str(path), check_files=check_files)


def write_manifest(manifest: DatasetManifest, path, root: str | None = None) -> None:
    lines = [f"# name: {manifest.name}"]
    if manifest.mos_scale:
        lines.append(f"# mos_scale: {manifest.mos_scale[0]!r}, {manifest.mos_scale[1]!r}")
    if manifest.resize_short_side:
        lines.append(f"# resize_short_side: {manifest.resize_short_side}")
    if root:
        lines.append(f"# root: {root}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["image_path", "mos", "split"])
    for r in manifest.records:
        w.writerow([r.image_path, "" if r.mos is None else repr(float(r.mos)), r.split])
    Path(path).write_text("\n".join(lines) + "\n" + buf.getvalue(), encoding="utf-8")


def load_record_image(manifest: DatasetManifest, record: ManifestRecord, native_crop: int | None = None):
    """Load a record's image with the manifest's preprocessing.

    ``native_crop`` additionally resizes/centre-crops to a square input, which
    fixed-size (vanilla positional embedding) backbones require.
    """
    img = load_image(manifest.resolve(record), short_side=manifest.resize_short_side)
    if native_crop:
        img = from_pil(resize_center_crop(to_pil(img), native_crop))
    return img
