"""Smoke runs of the scripts in scripts/ on fake dataset layouts and a tiny random backbone."""
import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import torch

from conftest import write_synthetic_dataset
from pairiqa.backbone.adapter import BackboneConfig, load_backbone
from pairiqa.backbone.convert import random_model, tiny_spec, write_tiny_vocab
from pairiqa.harness.manifest import ingest_manifest, load_record_image
from pairiqa.imageio import save_image

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"


def run(script, *args):
    proc = subprocess.run([sys.executable, str(SCRIPTS / script), *map(str, args)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


def img(path, level=0.5, size=(40, 48)):
    path.parent.mkdir(parents=True, exist_ok=True)
    save_image(np.full(size + (3,), level), path)


def test_convert_checkpoint(tmp_path):
    vocab_size = write_tiny_vocab(tmp_path / "vocab.txt.gz")
    model = random_model(tiny_spec("residual-attnpool", vocab_size, 64), seed=1)
    torch.save(model.state_dict(), tmp_path / "tiny.pt")
    run("convert_checkpoint.py", tmp_path / "tiny.pt", tmp_path / "w" / "tiny.npz", "--vocab", tmp_path / "vocab.txt.gz",
        "--card-field", "text_heads=2", "--card-field", "vision_heads=4")
    archive = tmp_path / "w" / "tiny.npz"
    card = json.loads((tmp_path / "w" / "tiny.card.json").read_text())
    assert card["variant"] == "residual-attnpool" and card["image_size"] == 64
    bb = load_backbone(BackboneConfig(str(archive), str(tmp_path / "w" / "bpe_vocab.txt.gz"),
                                      model_card_path=str(tmp_path / "w" / "tiny.card.json"), pos_embedding_mode="vanilla"))
    x = np.random.default_rng(0).random((64, 64, 3))
    with torch.no_grad():
        ref = model.eval().encode_image(bb.pixels(x)).numpy().ravel()
    assert np.allclose(bb.embed_image(x), ref, atol=1e-5)


def test_make_manifest_koniq(tmp_path):
    root = tmp_path / "koniq"
    names = [f"{i}.jpg" for i in range(4)]
    for n in names:
        img(root / "1024x768" / n)
    with open(root / "koniq10k_scores_and_distributions.csv", "w") as f:
        f.write("image_name,c1,MOS,MOS_zscore\n" + "".join(f"{n},1,{2 + i * 0.5},0\n" for i, n in enumerate(names)))
    with open(root / "koniq10k_distributions_sets.csv", "w") as f:
        f.write("image_name,set\n0.jpg,training\n1.jpg,validation\n2.jpg,test\n3.jpg,test\n")
    run("make_manifest.py", "koniq", root, tmp_path / "m" / "koniq.csv")
    m = ingest_manifest(tmp_path / "m" / "koniq.csv")
    assert [(r.mos, r.split) for r in m.records] == [(2.0, "train"), (3.0, "test"), (3.5, "test")]
    assert m.mos_scale == (1.0, 5.0)


def test_make_manifest_livec(tmp_path):
    from scipy.io import savemat
    root = tmp_path / "livec"
    names = [f"t{i}.bmp" for i in range(7)] + ["a.bmp", "b.bmp"]
    for n in names:
        img(root / "Images" / n)
    (root / "Data").mkdir()
    arr = np.empty((len(names), 1), dtype=object)
    for i, n in enumerate(names):
        arr[i, 0] = np.array([n])
    savemat(root / "Data" / "AllImages_release.mat", {"AllImages_release": arr})
    savemat(root / "Data" / "AllMOS_release.mat", {"AllMOS_release": np.arange(len(names), dtype=float)[None]})
    run("make_manifest.py", "livec", root, tmp_path / "livec.csv")
    m = ingest_manifest(tmp_path / "livec.csv")
    assert [(Path(r.image_path).name, r.mos) for r in m.records] == [("a.bmp", 7.0), ("b.bmp", 8.0)]


def test_make_manifest_spaq(tmp_path):
    root = tmp_path / "spaq"
    for i in range(10):
        img(root / "TestImage" / f"{i:05d}.jpg", size=(60, 80))
    with open(root / "mos.csv", "w") as f:
        f.write("Image name,MOS,Brightness\n" + "".join(f"{i:05d}.jpg,{10 * i},0\n" for i in range(10)))
    run("make_manifest.py", "spaq", root, tmp_path / "spaq.csv", "--seed", "3")
    m = ingest_manifest(tmp_path / "spaq.csv")
    assert sum(r.split == "test" for r in m.records) == 2 and m.resize_short_side == 512
    assert load_record_image(m, m.records[0]).shape == (512, 683, 3)
    run("make_manifest.py", "spaq", root, tmp_path / "spaq2.csv", "--seed", "3")
    assert (tmp_path / "spaq.csv").read_text() == (tmp_path / "spaq2.csv").read_text()


def test_make_manifest_tid_and_pairs(tmp_path):
    root = tmp_path / "tid"
    img(root / "distorted_images" / "i01_01_1.bmp")
    (root / "mos_with_names.txt").write_text("5.51 i01_01_1.bmp\n")
    run("make_manifest.py", "tid2013", root, tmp_path / "tid.csv")
    assert ingest_manifest(tmp_path / "tid.csv").records[0].mos == 5.51

    lol = tmp_path / "lol" / "eval15"
    for n in ("1.png", "2.png"):
        img(lol / "low" / n, 0.05)
        img(lol / "high" / n, 0.6)
    img(lol / "low" / "3.png", 0.05)  # unmatched, dropped
    run("make_manifest.py", "lol", tmp_path / "lol", tmp_path / "lol")
    low, high = ingest_manifest(tmp_path / "lol_low.csv"), ingest_manifest(tmp_path / "lol_high.csv")
    assert [Path(r.image_path).name for r in low.records] == [Path(r.image_path).name for r in high.records] == \
        ["1.png", "2.png"]


@pytest.fixture
def cfg(tmp_path, tiny_backbone_files):
    archive, card, vocab = tiny_backbone_files
    path = tmp_path / "run.cfg"
    path.write_text(f"checkpoint = {archive}\nvocab = {vocab}\nmodel_card = {card}\nworkers = 2\n"
                    f"iterations = 3\nbatch_size = 4\neval_every = 2\nlog_every = 1\n")
    return path


def test_experiment_runners(tmp_path, cfg):
    data = write_synthetic_dataset(tmp_path / "data", n=12, test_from=8, height=40)
    out = tmp_path / "res"
    run("zero_shot_table.py", "--config", cfg, "--manifest", f"syn={data}", "--out", out / "zs.csv")
    rows = list(csv.reader(open(out / "zs.csv")))
    assert rows[0] == ["dataset", "method", "n", "srocc", "plcc"] and len(rows) == 3
    assert (out / "syn-pair.json").exists()

    run("attribute_sweeps.py", "--config", cfg, "--manifest", data, "--n-images", "2", "--attributes",
        "brightness,sharpness", "--out", out / "sweeps")
    rep = json.loads((out / "sweeps" / "brightness.json").read_text())
    assert len(rep["images"]) == 2

    run("ablation_grid.py", "--config", cfg, "--manifest", f"syn={data}", "--out", out / "abl.csv")
    lines = (out / "abl.csv").read_text().splitlines()
    assert len(lines) == 1 + 3 + 2 + 5
    assert "error: FileNotFoundError" in lines[-1]

    run("tune_context.py", "--config", cfg, "--manifest", data, "--out", out / "ctx.npz")
    assert json.loads((out / "ctx.eval.json").read_text())["n"] == 4
