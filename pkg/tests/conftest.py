import numpy as np
import pytest

from pairiqa.backbone.convert import write_random_backbone
from pairiqa.backbone.mock import MockEncoder, TinyTextEncoder, brightness_mock
from pairiqa.harness.manifest import ingest_manifest
from pairiqa.imageio import save_image


@pytest.fixture(scope="session")
def tiny_backbone_files(tmp_path_factory):
    """(archive, card, vocab) for a random residual-attnpool backbone."""
    return write_random_backbone(tmp_path_factory.mktemp("rn"), "residual-attnpool", seed=3)


@pytest.fixture(scope="session")
def tiny_vit_files(tmp_path_factory):
    return write_random_backbone(tmp_path_factory.mktemp("vit"), "patch-transformer", seed=4)


def write_synthetic_dataset(root, n=20, seed=0, test_from=None, height=24):
    """n flat-ish images whose mean brightness is increasing in MOS, plus a manifest."""
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    mos = rng.permutation(n).astype(float) + 1.0
    lines = ["# name: synthetic", f"# mos_scale: 1, {n}", "image_path,mos,split"]
    for i in range(n):
        level = 0.1 + 0.8 * (mos[i] - 1) / (n - 1)
        img = np.clip(level + 0.02 * rng.standard_normal((height + i % 5, 32, 3)), 0, 1)
        save_image(img, root / f"img_{i:02d}.png")
        split = "test" if test_from is not None and i >= test_from else ("train" if test_from is not None else "all")
        lines.append(f"img_{i:02d}.png,{float(mos[i])!r},{split}")
    path = root / "manifest.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def synthetic_manifest(tmp_path):
    return ingest_manifest(write_synthetic_dataset(tmp_path / "data"))


@pytest.fixture
def bright_mock():
    return brightness_mock()


@pytest.fixture
def tunable_mock():
    rng = np.random.default_rng(11)

    def image_features(img):
        # fixed random projection of a few image statistics
        stats = np.array([img.mean(), img.std(), img[..., 0].mean(), img[..., 2].mean(), 1.0])
        return stats @ proj

    proj = rng.standard_normal((5, 8))
    return MockEncoder(image_features, text_encoder=TinyTextEncoder(dim=8, width=6, seed=5), name="tunable")


# acceptance criteria report one line each in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
