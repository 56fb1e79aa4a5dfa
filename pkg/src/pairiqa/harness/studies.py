"""Studies built on top of dataset scoring: extremes, low/high benchmark
separation, the template/adjective/backbone ablation grid, and pairwise
agreement with human votes."""
from __future__ import annotations

import csv
import io
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .. import metrics
from ..errors import ConfigurationError, IngestionError, InputError, RegistryLookupError
from ..imageio import load_image
from ..prompts import PromptRegistry, preset_pair
from ..scoring import compare_images, pair_score
from .evaluate import EvalReport, ManifestScorer, eval_dataset
from .manifest import DatasetManifest


def rank_extremes(report: EvalReport, k: int) -> dict:
    """The k best- and k worst-scored images (best first / worst first)."""
    n = len(report.per_image)
    if n == 0:
        raise InputError("report has no images")
    if not 1 <= k <= n // 2:
        raise InputError(f"k must be in [1, {n // 2}] for {n} images, got {k}")
    rows = sorted(report.per_image, key=lambda r: (-r["score"], r["path"]))
    top = [{"path": r["path"], "score": r["score"]} for r in rows[:k]]
    bottom = [{"path": r["path"], "score": r["score"]} for r in reversed(rows[-k:])]
    return {"top": top, "bottom": bottom}


def _quartiles(scores) -> list:
    return [float(q) for q in np.quantile(np.asarray(scores, dtype=np.float64), [0.0, 0.25, 0.5, 0.75, 1.0])]


def paired_benchmark_compare(low: DatasetManifest, high: DatasetManifest, attribute: str, backbone,
                             registry: PromptRegistry | None = None, scale: float = 1.0, workers: int = 1) -> dict:
    """Score low- and high-quality versions of the same scenes with one attribute pair.

    Records pair up by position. Reports (min, q1, median, q3, max) per group
    and the fraction of pairs where the high-quality image scores higher
    (ties count one half).
    """
    registry = registry or PromptRegistry.default()
    try:
        pair = registry.get_pair(attribute)
    except RegistryLookupError as e:
        raise ConfigurationError(str(e)) from None
    if not low.records or not high.records:
        raise InputError("both manifests must be non-empty")
    if len(low.records) != len(high.records):
        raise InputError(f"low/high manifests differ in length: {len(low.records)} vs {len(high.records)}")

    def scores(manifest):
        sims = ManifestScorer(manifest, backbone, pair).score_all(manifest.records, workers)
        return [pair_score(s1, s2, scale) for s1, s2 in sims]

    lo, hi = scores(low), scores(high)
    wins = sum(1.0 if h > l else 0.5 if h == l else 0.0 for l, h in zip(lo, hi))
    return {
        "attribute": pair.attribute,
        "prompt": list(pair.texts),
        "n_pairs": len(lo),
        "low_quartiles": _quartiles(lo),
        "high_quartiles": _quartiles(hi),
        "win_fraction": wins / len(lo),
        "low_scores": lo,
        "high_scores": hi,
    }


@dataclass
class AblationCell:
    template: str
    preset: str
    variant: str
    mode: str
    results: dict = field(default_factory=dict)  # dataset -> {"srocc", "plcc"} or {"error"}


@dataclass
class AblationTable:
    datasets: list
    cells: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["Template", "Adjective", "Backbone", "Pos. Embedding"]
        for d in self.datasets:
            head += [f"{d} SROCC", f"{d} PLCC"]
        w.writerow(head)
        for c in self.cells:
            row = [c.template, c.preset, c.variant, c.mode]
            for d in self.datasets:
                r = c.results.get(d, {})
                if "error" in r:
                    row += [f"error: {r['error']}", ""]
                else:
                    row += [f"{r['srocc']:.3f}", f"{r['plcc']:.3f}"]
            w.writerow(row)
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"datasets": self.datasets, "cells": [c.__dict__ for c in self.cells]}


def ablation_matrix(datasets: Mapping[str, DatasetManifest], templates: Sequence[str], presets: Sequence[str],
                    backbone_modes: Sequence[tuple], backbone_factory: Callable, cache_dir=None,
                    workers: int = 1) -> AblationTable:
    """Evaluate every (template, adjective preset, variant/mode) combination on every dataset.

    ``backbone_factory(variant, mode)`` returns an encoder. A failing cell
    records its error and the run moves on.
    """
    cells = []
    for variant, mode in backbone_modes:
        try:
            backbone = backbone_factory(variant, mode)
            backbone_error = None
        except Exception as e:  # recorded per cell
            backbone, backbone_error = None, f"{type(e).__name__}: {e}"
        for template in templates:
            for preset in presets:
                cell = AblationCell(template, preset, variant, mode)
                for name, manifest in datasets.items():
                    if backbone_error:
                        cell.results[name] = {"error": backbone_error}
                        continue
                    try:
                        sub = Path(cache_dir) / f"{variant}-{mode}" if cache_dir else None
                        rep = eval_dataset(manifest, backbone, preset_pair(preset, template), cache_dir=sub,
                                           workers=workers)
                        cell.results[name] = {"srocc": rep.srocc, "plcc": rep.plcc, "n": rep.n}
                    except Exception as e:
                        cell.results[name] = {"error": f"{type(e).__name__}: {e}"}
                cells.append(cell)
    return AblationTable(list(datasets), cells)


def _read_csv(path, required):
    path = Path(path)
    try:
        rows = list(csv.DictReader(io.StringIO(path.read_text(encoding="utf-8"))))
    except OSError as e:
        raise IngestionError([f"cannot read: {e}"], str(path)) from e
    if rows and not set(required) <= set(rows[0]):
        raise IngestionError([f"header must contain {', '.join(required)}"], str(path))
    return rows


def read_votes(path) -> dict:
    """pair_id -> majority choice. One row per pair (the majority) or one per subject."""
    counts = defaultdict(Counter)
    problems = []
    for i, row in enumerate(_read_csv(path, ("pair_id", "choice")), 2):
        c = row["choice"].strip().upper()
        if c not in ("A", "B"):
            problems.append(f"line {i}: choice {row['choice']!r} must be A or B")
            continue
        counts[row["pair_id"].strip()][c] += 1
    out = {}
    for pid, cnt in counts.items():
        if cnt["A"] == cnt["B"]:
            problems.append(f"pair {pid}: no majority ({cnt['A']} A vs {cnt['B']} B)")
        else:
            out[pid] = "A" if cnt["A"] > cnt["B"] else "B"
    if problems:
        raise IngestionError(problems, str(path))
    return out


def abstract_pair_study(pairs_file, votes_file, backbone, registry: PromptRegistry | None = None,
                        tie_credit: float = 0.5, scale: float = 1.0) -> dict:
    """Agreement between model choices and human majorities, per attribute.

    ``pairs_file``: CSV ``pair_id,attribute,image_a,image_b`` (paths relative
    to the file). ``votes_file``: CSV ``pair_id,choice`` with A/B choices.
    """
    registry = registry or PromptRegistry.default()
    pairs_file = Path(pairs_file)
    rows = _read_csv(pairs_file, ("pair_id", "attribute", "image_a", "image_b"))
    votes = read_votes(votes_file)
    ids = [r["pair_id"].strip() for r in rows]
    problems = [f"pair {p}: no votes" for p in ids if p not in votes]
    problems += [f"votes for unknown pair {p}" for p in votes if p not in set(ids)]
    problems += [f"pair {p}: listed more than once" for p, c in Counter(ids).items() if c > 1]
    if problems:
        raise IngestionError(problems, f"{pairs_file} / {votes_file}")

    base = pairs_file.parent
    embed_cache = {}

    def embed(p):
        path = Path(p) if Path(p).is_absolute() else base / p
        if path not in embed_cache:
            embed_cache[path] = backbone.embed_image(load_image(path))
        return embed_cache[path]

    texts = {}
    decisions, humans = defaultdict(list), defaultdict(list)
    details = []
    for r in rows:
        try:
            pair = registry.get_pair(r["attribute"].strip())
        except RegistryLookupError as e:
            raise ConfigurationError(str(e)) from None
        if pair.texts not in texts:
            texts[pair.texts] = (backbone.embed_text(pair.positive_text), backbone.embed_text(pair.negative_text))
        cmp = compare_images(embed(r["image_a"].strip()), embed(r["image_b"].strip()), pair, texts[pair.texts], scale)
        pid = r["pair_id"].strip()
        decisions[pair.attribute].append(cmp.decision)
        humans[pair.attribute].append(votes[pid])
        details.append({"pair_id": pid, "attribute": pair.attribute, "model": cmp.decision, "human": votes[pid],
                        "score_a": cmp.score_a, "score_b": cmp.score_b})
    accuracy = {a: metrics.pairwise_accuracy(decisions[a], humans[a], tie_credit) for a in decisions}
    return {"accuracy": accuracy, "pairs": details}
