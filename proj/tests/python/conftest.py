import json
import os
import subprocess

import pytest


def _tool(var):
    path = os.environ.get(var)
    if not path:
        pytest.skip(f"{var} not set")
    return path


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("ws")
    subprocess.run(
        [_tool("RADFUSE_SYNTH_PATH"), "--out", str(root / "data"), "--per-class", "6", "--size", "96",
         "--deep-out", str(root / "deep.rff")],
        check=True, capture_output=True,
    )
    return root


@pytest.fixture(scope="session")
def trained_model(workspace):
    cfg = {
        "name": "fused",
        "kpca": {"k": 8},
        "split": {"train_fraction": 0.5, "seed": 3},
        "features": {"groups": "all",
                     "deep": {"backend": "precomputed", "feature_path": "deep.rff", "width": 4096}},
        "paths": {"manifest": "data/manifest.csv", "model_out": "fused.model", "report_out": "fused.report.json"},
    }
    (workspace / "fused.json").write_text(json.dumps(cfg))
    subprocess.run(
        [_tool("RADFUSE_CLI_PATH"), "train", "--config", "fused.json", "--quiet"],
        cwd=workspace, check=True, capture_output=True,
    )
    return workspace / "fused.model"
