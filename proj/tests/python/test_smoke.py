import json
import math

import numpy as np
import pytest

import pime


def test_pearson_fc_fixture():
    series = np.array([[1.0, 2, 3, 4], [2, 4, 6, 8], [4, 3, 2, 1]])
    fc = pime.pearson_fc(series)
    assert fc.shape == (3, 3)
    assert fc[0, 1] == pytest.approx(1.0)
    assert fc[0, 2] == pytest.approx(-1.0)
    assert np.all(np.diag(fc) == 0.0)


def test_pearson_fc_rejects_constant_row():
    with pytest.raises(pime.DataError):
        pime.pearson_fc(np.ones((2, 5)))


def test_threshold_topk():
    fc = pime.pearson_fc(np.random.default_rng(0).normal(size=(6, 40)))
    out = pime.threshold_topk(fc, 0.3)
    assert np.all(np.abs(out) <= np.abs(fc) + 1e-15)
    assert np.count_nonzero(out) < np.count_nonzero(fc)


def test_kl_and_activations():
    assert pime.kl_diag_gaussian(np.zeros(3), np.zeros(3)) == 0.0
    assert pime.kl_diag_gaussian(np.array([1.0]), np.array([0.0])) == pytest.approx(0.5)
    s = pime.activations_from_distances(np.array([0.0, math.log(3.0)]))
    assert s == pytest.approx([0.75, 0.25], abs=1e-12)


def test_score_and_stability():
    assert pime.score_from_distance(0.0) == pytest.approx(6 * math.log(10.0))
    jac, dice = pime.stability([1, 2, 3], [2, 3, 4])
    assert jac == pytest.approx(0.5)
    assert dice == pytest.approx(2 / 3)
    assert pime.default_target_size(116) == 10


def test_gradcheck_small():
    report = pime.run_gradcheck(n_graphs=2)
    assert report["all_pass"]
    assert len(report) == 8  # 7 terms + all_pass


def test_cli_pipeline(tmp_path):
    data = str(tmp_path / "data")
    run = str(tmp_path / "run")
    n = pime.synth_dataset_to_dir(data, n_per_class=4, regions=8, timepoints=30,
                                  planted=[1, 5], seed=3)
    assert n == 8
    code = pime.run_cli(["train", "--dataset", data, "--out", run, "--tiny",
                         "--epochs", "1", "--batch-size", "4", "--seed", "2"])
    assert code == 0
    metrics = str(tmp_path / "metrics.json")
    code = pime.run_cli(["eval", "--checkpoint", run + "/checkpoint.json",
                         "--dataset", data, "--out", metrics])
    assert code == 0
    with open(metrics) as fh:
        m = json.load(fh)
    assert 0.0 <= m["accuracy"] <= 1.0


def test_cli_usage_error():
    assert pime.run_cli(["no-such-command"]) == 1
