import pytest
from pydantic import ValidationError

from chromalight.models import (
    EstimatorSpec,
    EvalRecord,
    MetricReport,
    SceneConfig,
    StrategyId,
    WhiteBalancer,
)
from chromalight.utils import run_parallel


def test_strategy_ids():
    assert StrategyId.parse_list("Baseline, wbtest,") == [StrategyId.BASELINE, StrategyId.WB_TEST]
    assert StrategyId.WB_TRAIN.wraps_white_balance and not StrategyId.AUGMENT.wraps_white_balance
    with pytest.raises(ValueError):
        StrategyId.parse_list("baseline,magic")


def test_scene_config_layout_checks():
    SceneConfig()
    with pytest.raises(ValidationError):
        SceneConfig(camera_footprint=1.0)
    with pytest.raises(ValidationError):
        SceneConfig(camera_footprint=6.0)
    with pytest.raises(ValidationError):
        SceneConfig(sphere_radius=0.8, camera_footprint=2.5)
    assert len(SceneConfig().sphere_centers) == 9


def test_config_hash_tracks_every_field():
    base = SceneConfig()
    assert base.config_hash() == SceneConfig().config_hash()
    assert base.config_hash() != SceneConfig(env_width=64, env_height=32).config_hash()
    assert len(base.config_hash()) == 64


def test_metric_report_ranges():
    MetricReport(delta_e=1.0, rgb_angular_deg=180.0, render_l1=0.0, ang_loss=2.0)
    with pytest.raises(ValidationError):
        MetricReport(delta_e=1.0, rgb_angular_deg=181.0, render_l1=0.0, ang_loss=0.0)
    with pytest.raises(ValidationError):
        MetricReport(delta_e=float("inf"), rgb_angular_deg=1.0, render_l1=0.0, ang_loss=0.0)


def test_record_order_follows_strategy_order():
    a = EvalRecord(scene_id="s", setting_name="auto", crop_index=0, strategy=StrategyId.WB_TRAIN)
    b = EvalRecord(scene_id="s", setting_name="auto", crop_index=0, strategy=StrategyId.BASELINE)
    assert sorted([a, b], key=lambda r: r.sort_key) == [b, a]
    assert not a.failed


def test_spec_parsing_and_labels():
    assert EstimatorSpec.parse("external:python model.py --fast").command == "python model.py --fast"
    assert EstimatorSpec.parse("tintblind:beta=0.5").label() == "tintblind:beta=0.5"
    assert WhiteBalancer.parse("shades_of_gray:p=4").label() == "shades_of_gray:p=4"
    with pytest.raises(ValueError):
        EstimatorSpec.parse("tintblind:beta")
    with pytest.raises(ValidationError):
        WhiteBalancer(kind="fixed_matrix", matrix=[1.0, 2.0])


def test_run_parallel_keeps_input_order():
    items = list(range(50))
    assert run_parallel(lambda x: x * x, items, jobs=1) == [x * x for x in items]
    assert run_parallel(lambda x: x * x, items, jobs=8) == [x * x for x in items]
