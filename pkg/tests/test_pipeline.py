import json

import numpy as np
import pytest

from gradfeat import data, pipeline
from gradfeat.errors import FingerprintMismatchError
from gradfeat.features import ForwardFeature, GradientFeature


@pytest.fixture(scope="module")
def task():
    return data.make_synthetic_task(3, 60, (16, 20, 12, 4), 4)


def test_default_blocks():
    assert pipeline.default_blocks("forward", 2, 3) == ["x2"]
    assert pipeline.default_blocks("forward", 3, 3) == ["y3"]
    assert pipeline.default_blocks("concat", 3, 3) == ["x2", "y3"]
    assert pipeline.default_blocks("concat", 1, 3) == ["x0", "x1"]


def test_config_validation(task):
    net = task[0]
    assert pipeline.PipelineConfig(layer=2).kernel == "trace"
    assert pipeline.PipelineConfig(layer=2, mode="forward").kernel == "dot"
    with pytest.raises(ValueError):
        pipeline.PipelineConfig(layer=2, mode="backward")
    with pytest.raises(ValueError):
        pipeline.PipelineConfig(layer=2, tau=0.0)
    with pytest.raises(ValueError):
        pipeline.PipelineConfig(layer=4).validate_for(net)
    with pytest.raises(ValueError):
        pipeline.PipelineConfig(layer=2, kernel="dot").validate_for(net)


def test_extract_modes(task):
    net, train, _ = task
    g = pipeline.extract(net, train.samples[:3], pipeline.PipelineConfig(layer=2))
    assert all(isinstance(f, GradientFeature) and f.shape == (20, 12) for f in g)
    c = pipeline.extract(net, train.samples[:3], pipeline.PipelineConfig(layer=2, mode="concat"))
    assert all(isinstance(f, ForwardFeature) and f.block_sizes == (20, 12) for f in c)


def test_run_reaches_perfect_map(task):
    net, train, test = task
    result = pipeline.run(net, train, test, pipeline.PipelineConfig(layer=2))
    assert result.report["map"] == 1.0
    assert result.report["ap_variant"] == "non-interpolated"
    assert len(result.report["classes"]) == 4


def test_evaluate_refuses_other_features(task):
    net, train, test = task
    result = pipeline.run(net, train, test, pipeline.PipelineConfig(layer=2))
    other = pipeline.extract(net, train.samples, pipeline.PipelineConfig(layer=2, tau=1.0))
    with pytest.raises(FingerprintMismatchError):
        pipeline.evaluate(result.model, other, result.test_features, test.labels)


def test_report_text_is_stable(task):
    net, train, test = task
    cfg = pipeline.PipelineConfig(layer=2, mode="forward")
    a = pipeline.report_to_text(pipeline.run(net, train, test, cfg).report)
    b = pipeline.report_to_text(pipeline.run(net, train, test, cfg).report)
    assert a == b
    assert json.loads(a)["blocks"] == ["x2"]


def test_comparison_rows():
    labels = [row[0] for row in pipeline.comparison_rows(3)]
    assert labels == ["x0", "x1", "x2", "y3", "x3 (prob)", "x0;x1", "dE/dW1", "x1;x2",
                      "dE/dW2", "x2;y3", "dE/dW3"]


def test_compare_table(task):
    net, train, test = task
    rows = pipeline.compare(net, train, test)
    text = pipeline.format_comparison(rows)
    assert len(text.splitlines()) == 12
    assert all(0.0 <= rep["map"] <= 1.0 for _, rep in rows)
    assert np.isfinite([rep["map"] for _, rep in rows]).all()
