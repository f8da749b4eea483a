"""Contract tests against the exporter package.

The exporter is a separate component; these tests only run when it is
installed (the rest of this suite never needs it). They check the wire
contract: exported files parse with this package's tensor reader, shapes
match the manifest, rows are unit-norm, and prompt strings survive the trip
into the dataset unchanged.
"""

import json

import numpy as np
import pytest

from agssp import scoring, tensorio
from agssp.cli import main

exporter_cli = pytest.importorskip(
    "agssp_exporter.cli", reason="exporter component not installed"
)


@pytest.fixture(scope="module")
def exported(tmp_path_factory):
    root = tmp_path_factory.mktemp("export")
    images = root / "images"
    images.mkdir()
    rng = np.random.default_rng(3)
    from PIL import Image

    for i in range(3):
        Image.fromarray(rng.integers(0, 255, (20, 26, 3), dtype=np.uint8)).save(
            images / f"img_{i}.png"
        )

    anomaly_prompts = [
        scoring.build_prompt(scoring.PromptSpec("steel pipe", "scratch", "a thin bright line")),
        scoring.build_prompt(scoring.PromptSpec("steel pipe", "wrinkle", "a wavy ridge")),
    ]
    normal_prompts = ["A photo of steel pipe without defect."]
    prompts = root / "prompts.json"
    prompts.write_text(
        json.dumps(
            {
                "categories": [
                    {
                        "id": 1,
                        "name": "pipe",
                        "object": "steel pipe",
                        "normal_prompts": normal_prompts,
                        "anomaly_prompts": anomaly_prompts,
                    }
                ]
            }
        )
    )
    out = root / "dataset"
    rc = exporter_cli.main(
        [
            "--images",
            str(images),
            "--prompts",
            str(prompts),
            "--out",
            str(out),
            "--preset",
            "tiny",
        ]
    )
    assert rc == 0
    return out, normal_prompts, anomaly_prompts


def test_exported_files_parse_and_match_manifest(exported):
    out, _, _ = exported
    manifest = tensorio.load_manifest(out / "manifest.json")
    dim = manifest.extra["exporter"]["embedding_dim"]
    assert len(manifest.images) == 3
    for record in manifest.images:
        tokens = tensorio.read_tensor(manifest.resolve(record.patch_tokens))
        cls = tensorio.read_tensor(manifest.resolve(record.cls_token))
        rows, cols = record.extra["grid"]
        assert tokens.shape == (4, rows * cols, dim)
        assert cls.shape == (dim,)
        assert np.all(np.abs(np.linalg.norm(tokens, axis=-1) - 1.0) < 1e-3)
        assert abs(np.linalg.norm(cls) - 1.0) < 1e-3


def test_text_embeddings_parse_with_unit_rows(exported):
    out, normal_prompts, anomaly_prompts = exported
    manifest = tensorio.load_manifest(out / "manifest.json")
    paths = manifest.text_embeddings[1]
    normal = tensorio.read_tensor(manifest.resolve(paths.normal))
    anomaly = tensorio.read_tensor(manifest.resolve(paths.anomaly))
    assert normal.shape[0] == len(normal_prompts)
    assert anomaly.shape[0] == len(anomaly_prompts)
    for mat in (normal, anomaly):
        assert np.all(np.abs(np.linalg.norm(mat, axis=1) - 1.0) < 1e-3)


def test_prompt_strings_round_trip_unchanged(exported):
    out, normal_prompts, anomaly_prompts = exported
    manifest = tensorio.load_manifest(out / "manifest.json")
    recorded = manifest.text_embeddings[1].extra
    assert recorded["normal_prompts"] == normal_prompts
    assert recorded["anomaly_prompts"] == anomaly_prompts


def test_primary_scores_the_exported_dataset(exported, tmp_path):
    out, _, _ = exported
    scored = tmp_path / "scored"
    rc = main(["score", "--manifest", str(out / "manifest.json"), "--out", str(scored)])
    assert rc == 0
    scores = json.loads((scored / "scores.json").read_text())
    assert len(scores["images"]) == 3
    for entry in scores["images"]:
        assert 0.0 <= entry["as_x"] <= 1.0
        values = tensorio.read_tensor(scored / entry["anomaly_map"])
        assert values.shape == (20, 26)
        assert values.min() >= 0.0 and values.max() <= 1.0
