"""Acceptance criteria.

Criteria 1-7 run at desk scale with mock encoders and synthetic data. 8-11
need converted pretrained weights and dataset manifests and are marked
``integration`` (run with ``pytest -m integration``). They read paths from:

    PAIRIQA_RN50       converted residual-attnpool archive (.npz, card next to it)
    PAIRIQA_VITB32     converted patch-transformer archive
    PAIRIQA_VOCAB      BPE merges file
    PAIRIQA_KONIQ      KonIQ-10k manifest (test split marked)
    PAIRIQA_LIVEITW    LIVE-itW manifest
    PAIRIQA_CONTEXT    tuned prompt context for the KonIQ training split
"""
import math
import os
import random
import time
from pathlib import Path

import numpy as np
import pytest
import torch

import conftest
from conftest import write_synthetic_dataset
from oracles import brute_average_ranks, brute_pearson, brute_spearman
from pairiqa import metrics
from pairiqa.backbone.mock import MockEncoder, TinyTextEncoder, brightness_mock
from pairiqa.degrade import (DEFAULT_LEVELS, DegradationSpec, adjust_brightness, adjust_colorfulness, adjust_noise,
                             adjust_sharpness, run_sweep)
from pairiqa.harness.evaluate import eval_dataset
from pairiqa.harness.manifest import ingest_manifest
from pairiqa.prompts import PromptRegistry, get_pair, make_pair, render
from pairiqa.scoring import pair_score, score_image
from pairiqa.tuning import TuneConfig, fit_context, forward_score, init_context

TESTS = Path(__file__).parent


def record(n, checks):
    """Log one PASS/FAIL line for criterion ``n`` and fail on the first failing check."""
    failed = [name for name, ok in checks if not ok]
    line = f"criterion {n:>2}: {'FAIL' if failed else 'PASS'}"
    if failed:
        line += " (" + "; ".join(failed) + ")"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert not failed, line


def test_criterion_1_pair_score_algebra():
    rng = np.random.default_rng(1)
    s = rng.uniform(-1, 1, (10_000, 2))
    t0 = time.perf_counter()
    worst_sum, mono, rng_ok = 0.0, True, True
    for s1, s2 in s:
        a, b = pair_score(s1, s2), pair_score(s2, s1)
        worst_sum = max(worst_sum, abs(a + b - 1.0))
        rng_ok &= 0.0 < a < 1.0
        mono &= pair_score(s1 + 1e-3, s2) > a and pair_score(s1, s2 + 1e-3) < a
    elapsed = time.perf_counter() - t0
    record(1, [(f"complement {worst_sum:.2e}", worst_sum <= 1e-12), ("strict monotonicity", mono),
               ("range (0,1)", rng_ok), (f"runtime {elapsed:.2f}s", elapsed < 5)])


def test_criterion_2_scale_invariance():
    rng = np.random.default_rng(2)
    pair = get_pair("quality")
    worst = 0.0
    for _ in range(1000):
        dim = int(rng.integers(2, 64))
        x, t1, t2 = rng.standard_normal((3, dim))
        c = float(np.exp(rng.uniform(-6, 6)))
        worst = max(worst, abs(score_image(c * x, pair, (t1, t2)).score - score_image(x, pair, (t1, t2)).score))
    record(2, [(f"max deviation {worst:.2e}", worst < 1e-9)])


def test_criterion_3_correlation_oracles():
    rng = np.random.default_rng(3)
    worst, ranks_ok, inv_ok, checked = 0.0, True, True, 0
    while checked < 1000:
        n = int(rng.integers(2, 21))
        x = rng.integers(0, 5, n).astype(float) if rng.random() < 0.5 else rng.normal(size=n)
        y = rng.integers(0, 5, n).astype(float) if rng.random() < 0.5 else rng.normal(size=n)
        if len(set(x)) < 2 or len(set(y)) < 2:
            continue
        ranks_ok &= list(metrics.average_ranks(x)) == [float(r) for r in brute_average_ranks(list(x))]
        sr, pl = metrics.srocc(x, y), metrics.plcc(x, y)
        worst = max(worst, abs(sr - brute_spearman(list(x), list(y))), abs(pl - brute_pearson(list(x), list(y))))
        a, b = float(np.exp(rng.uniform(-3, 3))), float(rng.normal())
        inv_ok &= abs(metrics.plcc(a * x + b, y) - pl) < 1e-12
        inv_ok &= metrics.srocc(np.exp(x), y) == sr and metrics.srocc(x ** 3, y) == sr
        inv_ok &= metrics.srocc(x, y) == metrics.srocc(y, x)
        checked += 1
    record(3, [(f"oracle deviation {worst:.2e}", worst < 1e-10), ("average ranks", ranks_ok),
               ("affine/monotone invariance", inv_ok)])


def test_criterion_4_degradations():
    rng = np.random.default_rng(4)
    imgs = [rng.random((int(rng.integers(1, 40)), int(rng.integers(1, 40)), 3)) for _ in range(20)]
    identity = all(f(im).tobytes() == im.tobytes() for im in imgs for f in (
        lambda a: adjust_brightness(a, 1.0), lambda a: adjust_noise(a, 0.0, 7),
        lambda a: adjust_colorfulness(a, 1.0), lambda a: adjust_sharpness(a, 1.0)))
    noise_det = all(adjust_noise(im, 0.1, 3).tobytes() == adjust_noise(im, 0.1, 3).tobytes() for im in imgs)

    # monotone mock scorers, one per attribute
    def detail(img, pair):
        return float(np.mean(np.abs(np.diff(img, axis=0))) + np.mean(np.abs(np.diff(img, axis=1))))

    scorers = {
        "brightness": lambda img, pair: float(img.mean()),
        "colorfulness": lambda img, pair: float(np.mean(np.abs(img - img.mean(axis=2, keepdims=True)))),
        "sharpness": detail,
        "noisiness": lambda img, pair: -detail(img, pair),
    }
    yy, xx = np.mgrid[0:32, 0:32] / 31.0
    base = [np.stack([0.3 + 0.2 * xx, 0.4 + 0.1 * yy, 0.45 - 0.1 * xx], axis=2) + 0.02 * k for k in range(3)]
    corr = {}
    for attr, scorer in scorers.items():
        levels = DEFAULT_LEVELS[attr] if attr != "brightness" else tuple(np.linspace(0.2, 1.5, 8))
        corr[attr] = run_sweep(base, DegradationSpec(attr, levels, seed=1), scorer).level_correlation
    checks = [("identity levels bit-identical", identity), ("noise determinism", noise_det)]
    checks += [(f"{a} level_correlation {c}", c == 1.0) for a, c in corr.items()]
    record(4, checks)


def test_criterion_5_prompt_tuning():
    enc = MockEncoder(lambda im: np.asarray(im).reshape(-1)[:8], text_encoder=TinyTextEncoder(dim=8, width=6, seed=5),
                      name="tiny-text")
    pair = get_pair("quality")
    ctx0 = init_context(pair, enc)
    frozen_t = (enc.embed_text(pair.positive_text), enc.embed_text(pair.negative_text))
    rng = np.random.default_rng(5)
    x_init = rng.standard_normal((20, 8))
    init_dev = max(abs(float(forward_score(x, ctx0, enc)) - score_image(x, pair, frozen_t).score) for x in x_init)

    # planted target
    g = torch.Generator().manual_seed(0)
    target = ctx0.clone()
    target.positive += 0.3 * torch.randn(target.positive.shape, generator=g, dtype=target.positive.dtype)
    target.negative += 0.3 * torch.randn(target.negative.shape, generator=g, dtype=target.negative.dtype)
    x = np.random.default_rng(0).standard_normal((50, 8))
    with torch.no_grad():
        y = forward_score(torch.as_tensor(x), target, enc).numpy()

    # (b) autograd vs central differences on a 12-sample loss
    xt, yt = torch.as_tensor(x[:12]), torch.as_tensor(y[:12])
    c = ctx0.clone()
    for p in c.parameters():
        p.requires_grad_(True)
    torch.mean((forward_score(xt, c, enc) - yt) ** 2).backward()
    h, worst = 1e-6, 0.0
    for which in ("positive", "negative"):
        for idx in np.ndindex(*getattr(ctx0, which).shape):
            plus, minus = ctx0.clone(), ctx0.clone()
            getattr(plus, which)[idx] += h
            getattr(minus, which)[idx] -= h
            with torch.no_grad():
                fd = float(torch.mean((forward_score(xt, plus, enc) - yt) ** 2)
                           - torch.mean((forward_score(xt, minus, enc) - yt) ** 2)) / (2 * h)
            an = float(getattr(c, which).grad[idx])
            worst = max(worst, abs(an - fd) / max(abs(an), abs(fd), 1e-8))

    # (c) planted recovery
    cfg = TuneConfig(learning_rate=5.0, iterations=2000, batch_size=16, log_every=100, eval_every=1000, seed=0)
    t0 = time.perf_counter()
    fitted, log = fit_context(x, y, enc, cfg, ctx0)
    elapsed = time.perf_counter() - t0
    with torch.no_grad():
        mse = float(np.mean((forward_score(torch.as_tensor(x), fitted, enc).numpy() - y) ** 2))
    record(5, [(f"(a) init deviation {init_dev:.2e}", init_dev < 1e-6),
               (f"(b) gradient rel. error {worst:.2e}", worst < 1e-3),
               (f"(c) planted MSE {mse:.2e}", mse < 1e-4 and log[-1]["iteration"] <= 2000),
               (f"(c) runtime {elapsed:.1f}s", elapsed < 60)])


def test_criterion_6_registry_golden():
    reg = PromptRegistry.default()
    rows = [line.split("\t") for line in (TESTS / "golden" / "prompt_pairs.tsv").read_bytes().decode().splitlines()
            if not line.startswith("#")]
    golden = all(reg.get_pair(label).positive_text.encode() == pos.encode()
                 and reg.get_pair(label).negative_text.encode() == neg.encode() for label, pos, neg in rows)
    record(6, [(f"golden pairs ({len(rows)})", golden and len(rows) == len(reg) == 16),
               ("Good photo.", render("T1", "Good") == "Good photo."),
               ("High contrast photo.", get_pair("contrast").positive_text == "High contrast photo."),
               ("Happy photo.", make_pair("happy", "Happy", "Sad").positive_text == "Happy photo.")])


def test_criterion_7_harness(tmp_path):
    manifest = ingest_manifest(write_synthetic_dataset(tmp_path / "data", n=20))
    pair = get_pair("quality")
    a = eval_dataset(manifest, brightness_mock(), pair)
    b = eval_dataset(manifest, brightness_mock(), pair, cache_dir=tmp_path / "cache", workers=4)
    c = eval_dataset(manifest, brightness_mock(), pair, cache_dir=tmp_path / "cache", workers=4)
    record(7, [("n = 20 = per-image rows", a.n == len(a.per_image) == 20),
               ("recompute == header", a.recompute() == (a.srocc, a.plcc)),
               ("repeat runs identical", a.to_dict() == b.to_dict() == c.to_dict()),
               (f"monotone mock SROCC {a.srocc}", a.srocc == 1.0)])


# --- integration ---------------------------------------------------------------------

def _env(*names):
    missing = [n for n in names if not os.environ.get(n)]
    if missing:
        pytest.skip("set " + ", ".join(missing) + " to run")
    return [os.environ[n] for n in names]


def _backbone(archive, vocab, variant="residual-attnpool", mode="removed"):
    from pairiqa.backbone.adapter import BackboneConfig, load_backbone
    card = Path(archive).with_name(Path(archive).stem + ".card.json")
    return load_backbone(BackboneConfig(archive, vocab, str(card) if card.exists() else None, variant, mode))


@pytest.mark.integration
def test_criterion_8_zero_shot_table():
    rn, vocab, koniq, livec = _env("PAIRIQA_RN50", "PAIRIQA_VOCAB", "PAIRIQA_KONIQ", "PAIRIQA_LIVEITW")
    bb = _backbone(rn, vocab)
    k = eval_dataset(ingest_manifest(koniq), bb, get_pair("quality"), workers=4)
    l = eval_dataset(ingest_manifest(livec), bb, get_pair("quality"), workers=4)
    record(8, [(f"KonIQ SROCC {k.srocc:.3f}", abs(k.srocc - 0.695) <= 0.03),
               (f"KonIQ PLCC {k.plcc:.3f}", abs(k.plcc - 0.727) <= 0.03),
               (f"LIVE-itW SROCC {l.srocc:.3f}", abs(l.srocc - 0.612) <= 0.03),
               (f"LIVE-itW PLCC {l.plcc:.3f}", abs(l.plcc - 0.594) <= 0.03)])


@pytest.mark.integration
def test_criterion_9_ablation_orderings():
    rn, vit, vocab, koniq = _env("PAIRIQA_RN50", "PAIRIQA_VITB32", "PAIRIQA_VOCAB", "PAIRIQA_KONIQ")
    from pairiqa.prompts import preset_pair
    m = ingest_manifest(koniq)

    def srocc(archive, variant, mode, template="T1"):
        return eval_dataset(m, _backbone(archive, vocab, variant, mode), preset_pair("a", template), workers=4).srocc

    t1, t2, t3 = (srocc(rn, "residual-attnpool", "removed", t) for t in ("T1", "T2", "T3"))
    rem, itp, van = (srocc(rn, "residual-attnpool", mode) for mode in ("removed", "interpolated", "vanilla"))
    vit_rem, vit_itp, vit_van = (srocc(vit, "patch-transformer", mode)
                                 for mode in ("removed", "interpolated", "vanilla"))
    record(9, [(f"T1 {t1:.3f} > T2 {t2:.3f}, T3 {t3:.3f}", t1 > t2 and t1 > t3),
               (f"removed {rem:.3f} >= interpolated {itp:.3f} >= vanilla {van:.3f}", rem >= itp >= van),
               (f"patch-transformer removed {vit_rem:.3f} < vanilla {vit_van:.3f}, interpolated {vit_itp:.3f}",
                vit_rem < vit_van and vit_rem < vit_itp)])


@pytest.mark.integration
def test_criterion_10_attribute_sweeps():
    from pairiqa.harness.evaluate import make_image_scorer
    from pairiqa.harness.manifest import load_record_image
    rn, vocab, koniq = _env("PAIRIQA_RN50", "PAIRIQA_VOCAB", "PAIRIQA_KONIQ")
    m = ingest_manifest(koniq)
    recs = m.eval_records()
    idx = sorted(np.random.default_rng(0).choice(len(recs), size=min(200, len(recs)), replace=False))
    images = [load_record_image(m, recs[i]) for i in idx]
    scorer = make_image_scorer(_backbone(rn, vocab))
    corr = {a: run_sweep(images, DegradationSpec(a, seed=0), scorer).level_correlation
            for a in ("brightness", "noisiness", "colorfulness", "sharpness")}
    record(10, [(f"{a} {c:.3f}", c > 0) for a, c in corr.items()])


@pytest.mark.integration
def test_criterion_11_tuned_context():
    from pairiqa.tuning import import_context
    rn, vocab, koniq, ctx = _env("PAIRIQA_RN50", "PAIRIQA_VOCAB", "PAIRIQA_KONIQ", "PAIRIQA_CONTEXT")
    rep = eval_dataset(ingest_manifest(koniq), _backbone(rn, vocab), context=import_context(ctx), workers=4)
    record(11, [(f"KonIQ SROCC {rep.srocc:.3f}", abs(rep.srocc - 0.895) <= 0.03)])
