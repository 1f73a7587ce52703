import json
import shutil

import numpy as np
import pytest
from pydantic import ValidationError

from chromalight.cli import main, parse_strategy_estimators
from chromalight.config import Settings
from chromalight.image_io import MedianMode, write_pfm
from chromalight.models import EstimatorKind, SceneConfig, StrategyId
from chromalight.raster import Panorama

SCENE = SceneConfig(render_size=8, env_width=32, env_height=16)


@pytest.fixture
def scene_file(tmp_path):
    path = tmp_path / "scene.json"
    path.write_text(SCENE.model_dump_json())
    return str(path)


def test_eval_and_report(tiny_dataset, tmp_path, scene_file, capsys):
    root, _ = tiny_dataset
    out = tmp_path / "eval"
    code = main([
        "eval", "-m", str(root), "-o", str(out), "--scene-cfg", scene_file,
        "--cache-dir", str(tmp_path / "cache"), "-e", "ambient", "-s", "baseline,wbtest,angloss",
        "--strategy-estimator", "angloss=tintblind:beta=0.5",
    ])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "Evaluation Summary" in stdout and "angloss" in stdout
    assert json.loads((out / "aggregate.json").read_text())["record_count"] == 54
    assert main(["report", str(out / "records.csv"), "-o", str(tmp_path / "report"), "--bin-width", "10"]) == 0
    assert (tmp_path / "report" / "curves.csv").exists()


def test_synth_transport_and_pairs(tmp_path, scene_file, capsys):
    assert main(["synth", "-o", str(tmp_path / "data"), "--scenes", "1", "--tints", "2"]) == 0
    assert (tmp_path / "data" / "manifest.json").exists()
    assert main(["transport", "--scene-cfg", scene_file, "--cache-dir", str(tmp_path / "cache")]) == 0
    assert "64 x 512" in capsys.readouterr().out
    pano = tmp_path / "pano.pfm"
    write_pfm(pano, Panorama(np.full((16, 32, 3), 0.7)))
    assert main(["pairs", str(pano), "-o", str(tmp_path / "pairs"), "--count", "2", "--size", "8", "--augment"]) == 0
    assert len(list((tmp_path / "pairs").glob("*.png"))) == 2


def test_errors_exit_nonzero(tmp_path, capsys):
    assert main(["eval", "-m", str(tmp_path / "missing"), "-o", str(tmp_path / "out")]) == 1
    assert "Error:" in capsys.readouterr().err
    empty = tmp_path / "records.csv"
    empty.write_text("")
    assert main(["report", str(empty)]) == 1
    assert "empty" in capsys.readouterr().err
    assert main(["eval", "-m", str(tmp_path), "-o", str(tmp_path), "-s", "nonsense"]) == 1


@pytest.mark.parametrize("target", ["scene001/auto/crop1.png", "scene000/auto/pano.pfm"])
def test_eval_rejects_corrupt_files_before_running(tiny_dataset, tmp_path, scene_file, capsys, target):
    root, _ = tiny_dataset
    data = tmp_path / "data"
    shutil.copytree(root, data)
    (data / target).write_bytes(b"\x00not an image")
    out = tmp_path / "eval"
    code = main(["eval", "-m", str(data), "-o", str(out), "--scene-cfg", scene_file, "--cache-dir", str(tmp_path / "cache")])
    assert code == 1
    err = capsys.readouterr().err
    assert "Error:" in err and "unreadable" in err and target in err
    assert not (out / "records.csv").exists()



def test_parse_strategy_estimators():
    parsed = parse_strategy_estimators(["wbtrain=ambient", "AngLoss=tintblind:beta=2"])
    assert parsed[StrategyId.WB_TRAIN].kind is EstimatorKind.CONSTANT_AMBIENT
    assert parsed[StrategyId.ANG_LOSS].beta == 2.0
    assert parse_strategy_estimators(None) == {}
    with pytest.raises(ValueError):
        parse_strategy_estimators(["wbtrain"])


def test_settings_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("CHROMALIGHT_CACHE_DIR", str(tmp_path))
    monkeypatch.setenv("CHROMALIGHT_JOBS", "4")
    monkeypatch.setenv("CHROMALIGHT_MEDIAN_MODE", "luminance")
    settings = Settings.from_env(dotenv=False)
    assert settings.cache_dir == tmp_path
    assert settings.jobs == 4
    assert settings.median_mode is MedianMode.LUMINANCE
    monkeypatch.setenv("CHROMALIGHT_JOBS", "0")
    with pytest.raises(ValidationError):
        Settings.from_env(dotenv=False)
