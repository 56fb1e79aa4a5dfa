"""Content-addressed store of per-image similarities.

Layout::

    <cache_dir>/CACHE_INFO.json         {"backbone": <fingerprint>}
    <cache_dir>/entries/<k[:2]>/<k>.json {"s1": ..., "s2": ...}

with ``k = sha256(image bytes hash, prompt key, backbone fingerprint,
preprocessing)``. A cache directory belongs to a single backbone
fingerprint; opening it with another one raises StaleCacheError.
Writes go through a temp file + rename, so concurrent readers never see a
partial entry.
"""
from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
from pathlib import Path

from ..errors import StaleCacheError

INFO = "CACHE_INFO.json"


def bytes_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class ScoreCache:
    def __init__(self, cache_dir, backbone_fingerprint: str):
        self.dir = Path(cache_dir)
        self.backbone = backbone_fingerprint
        self.hits = 0
        self.misses = 0
        info = self.dir / INFO
        if info.exists():
            try:
                recorded = json.loads(info.read_text())["backbone"]
            except (OSError, ValueError, KeyError):
                recorded = None
            if recorded != backbone_fingerprint:
                raise StaleCacheError(
                    f"score cache {self.dir} was written for backbone {recorded!r}, current backbone is "
                    f"{backbone_fingerprint!r}. Purge it with `pairiqa cache-purge --cache-dir {self.dir}` "
                    f"(or delete the directory) or point --cache-dir elsewhere.")
        else:
            self.dir.mkdir(parents=True, exist_ok=True)
            self._atomic_write(info, {"backbone": backbone_fingerprint})

    def key(self, image_hash: str, prompt_key: str, preprocessing: str) -> str:
        blob = "\0".join([image_hash, prompt_key, self.backbone, preprocessing])
        return hashlib.sha256(blob.encode()).hexdigest()

    def _path(self, key: str) -> Path:
        return self.dir / "entries" / key[:2] / f"{key}.json"

    def get(self, key: str):
        try:
            value = json.loads(self._path(key).read_text())
        except (OSError, ValueError):
            self.misses += 1
            return None
        self.hits += 1
        return value

    def put(self, key: str, value: dict) -> None:
        self._atomic_write(self._path(key), value)

    @staticmethod
    def _atomic_write(path: Path, value) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        with os.fdopen(fd, "w") as f:
            json.dump(value, f)
        os.replace(tmp, path)


def purge(cache_dir) -> None:
    d = Path(cache_dir)
    if (d / INFO).exists() or (d / "entries").exists():
        shutil.rmtree(d)
