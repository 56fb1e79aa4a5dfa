"""Dataset evaluation: score every image, correlate with MOS, emit a report."""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .. import metrics
from ..errors import InputError
from ..prompts import PromptPair
from ..scoring import cosine_similarity, pair_score
from ..tuning import LearnableContext, context_text_embeddings
from .cache import ScoreCache, bytes_sha256
from .manifest import DatasetManifest, load_record_image


@dataclass
class EvalReport:
    dataset: str
    prompt: dict
    method: str
    srocc: float
    plcc: float
    n: int
    per_image: list
    config_fingerprint: str
    backbone: str = ""
    extra: dict = field(default_factory=dict)

    def recompute(self) -> tuple[float, float]:
        """(SROCC, PLCC) recomputed from the per-image rows."""
        scores = [row["score"] for row in self.per_image]
        mos = [row["mos"] for row in self.per_image]
        return metrics.srocc(scores, mos), metrics.plcc(scores, mos)

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(**d)

    @classmethod
    def load(cls, path) -> "EvalReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_csv(self) -> str:
        lines = ["path,score,mos,s1,s2"]
        lines += [f"{r['path']},{r['score']!r},{r['mos']!r},{r['s1']!r},{r['s2']!r}" for r in self.per_image]
        return "\n".join(lines) + "\n"


def prompt_key(pair: PromptPair | None = None, context: LearnableContext | None = None) -> tuple[str, dict]:
    if context is not None:
        digest = context.digest()
        return "ctx:" + digest, {"context": digest, "positive": context.positive_text,
                                 "negative": context.negative_text}
    if pair is None:
        raise InputError("need a prompt pair or a tuned context")
    return "pair:" + pair.positive_text + "\0" + pair.negative_text, {
        "attribute": pair.attribute, "positive": pair.positive_text, "negative": pair.negative_text,
        "template": pair.template_id}


def text_embeddings_for(backbone, pair=None, context=None):
    if context is not None:
        return context_text_embeddings(context, backbone)
    return backbone.embed_text(pair.positive_text), backbone.embed_text(pair.negative_text)


def native_crop_for(backbone):
    return getattr(backbone, "native_size", None) if getattr(backbone, "mode", None) == "vanilla" else None


class ManifestScorer:
    """Cosines (s1, s2) for manifest records under one prompt pair/context, with optional caching."""

    def __init__(self, manifest: DatasetManifest, backbone, pair=None, context=None, cache: ScoreCache | None = None):
        self.manifest = manifest
        self.backbone = backbone
        self.key, self.prompt = prompt_key(pair, context)
        self.text = text_embeddings_for(backbone, pair, context)
        self.cache = cache
        self.native_crop = native_crop_for(backbone)
        self.preprocessing = json.dumps({"short_side": manifest.resize_short_side, "native_crop": self.native_crop})

    def similarities(self, record) -> tuple[float, float]:
        key = None
        if self.cache is not None:
            key = self.cache.key(bytes_sha256(self.manifest.resolve(record)), self.key, self.preprocessing)
            hit = self.cache.get(key)
            if hit is not None:
                return hit["s1"], hit["s2"]
        x = self.backbone.embed_image(load_record_image(self.manifest, record, self.native_crop))
        s1 = cosine_similarity(x, self.text[0])
        s2 = cosine_similarity(x, self.text[1])
        if key is not None:
            self.cache.put(key, {"s1": s1, "s2": s2})
        return s1, s2

    def score_all(self, records, workers: int = 1) -> list[tuple[float, float]]:
        if workers <= 1:
            return [self.similarities(r) for r in records]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self.similarities, records))


def eval_dataset(manifest: DatasetManifest, backbone, pair: PromptPair | None = None,
                 context: LearnableContext | None = None, split: str | None = None, cache_dir=None,
                 workers: int = 1, method: str = "pair", scale: float = 1.0) -> EvalReport:
    """Score a manifest split and correlate with MOS.

    ``method="pair"`` is the softmax antonym score; ``method="single"`` uses
    the raw cosine to the positive prompt alone. Both cosines are kept in the
    per-image rows either way.
    """
    if method not in ("pair", "single"):
        raise InputError(f"method must be 'pair' or 'single', got {method!r}")
    records = manifest.eval_records(split)
    if len(records) < 2:
        raise InputError(f"{manifest.name}: need at least 2 records to evaluate, got {len(records)}")
    missing = [r.image_path for r in records if r.mos is None]
    if missing:
        raise InputError(f"{manifest.name}: {len(missing)} evaluated records lack MOS, e.g. {missing[0]}")
    cache = ScoreCache(cache_dir, backbone.fingerprint) if cache_dir else None
    scorer = ManifestScorer(manifest, backbone, pair, context, cache)
    sims = scorer.score_all(records, workers)
    rows = []
    for r, (s1, s2) in zip(records, sims):
        score = pair_score(s1, s2, scale) if method == "pair" else s1
        rows.append({"path": r.image_path, "score": score, "mos": r.mos, "s1": s1, "s2": s2})
    scores = [row["score"] for row in rows]
    mos = [row["mos"] for row in rows]
    fp_src = {
        "dataset": manifest.name,
        "records": [[r.image_path, r.mos] for r in records],
        "prompt": scorer.key,
        "backbone": backbone.fingerprint,
        "method": method,
        "scale": scale,
        "preprocessing": scorer.preprocessing,
    }
    fingerprint = hashlib.sha256(json.dumps(fp_src, sort_keys=True).encode()).hexdigest()
    return EvalReport(
        dataset=manifest.name,
        prompt=scorer.prompt,
        method=method,
        srocc=metrics.srocc(scores, mos),
        plcc=metrics.plcc(scores, mos),
        n=len(rows),
        per_image=rows,
        config_fingerprint=fingerprint,
        backbone=backbone.fingerprint,
    )


def make_image_scorer(backbone, scale: float = 1.0, native_crop=None):
    """``scorer(image, pair) -> float`` for degradation sweeps; text embeddings memoised per pair."""
    from ..imageio import from_pil, resize_center_crop, to_pil
    from ..scoring import score_image

    texts = {}

    def scorer(image, pair):
        if pair.texts not in texts:
            texts[pair.texts] = (backbone.embed_text(pair.positive_text), backbone.embed_text(pair.negative_text))
        if native_crop:
            image = from_pil(resize_center_crop(to_pil(image), native_crop))
        return score_image(backbone.embed_image(image), pair, texts[pair.texts], scale).score

    return scorer
