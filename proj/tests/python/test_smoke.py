import math

import numpy as np
import pytest

import xmdistill as xm


def test_eer_hand_case():
    assert xm.compute_eer([0.9, 0.8, 0.3], [0.7, 0.2, 0.1]) == pytest.approx(1 / 3, abs=1e-15)
    assert xm.compute_min_dcf([0.5, 0.5, 0.5], [0.5, 0.5]) == pytest.approx(0.01, abs=1e-15)


def test_quality_weights():
    assert xm.adaptive_weights([2.0, 2.0], mu=2.0, sigma=0.5) == [1.0, 1.0]
    w = xm.adaptive_weights([2.5], mu=2.0, sigma=0.5, w_base=1.0, h=1 / 3)
    assert w[0] == pytest.approx(1 + 1 / 3, abs=1e-12)


def test_cosine_margin():
    assert xm.cosine_margin_from_degrees(30) == pytest.approx(1 - math.cos(math.pi / 6))


def test_generate_shapes():
    d = xm.generate({"num_classes": 5, "samples_per_class": 4, "seed": 3})
    assert d["x_teacher"].shape == (20, 32)
    assert d["x_student"].shape == (20, 32)
    assert sorted(set(d["labels"])) == list(range(5))
    again = xm.generate({"num_classes": 5, "samples_per_class": 4, "seed": 3})
    assert np.array_equal(d["x_student"], again["x_student"])


def test_config_errors():
    cfg = xm.resolve_config(overrides=["distill.margin_deg=20"])
    assert cfg["distill"]["margin_deg"] == 20
    with pytest.raises(xm.ConfigError):
        xm.resolve_config(overrides=["distill.no_such_key=1"])
    with pytest.raises(xm.ConfigError):
        xm.resolve_config({"train": {"epochs": 0}})


def test_gradcheck_suite():
    for c in xm.gradcheck_suite(2):
        assert c["worst_relative_error"] <= 1e-4, c


def test_tiny_run(tmp_path):
    cfg = {
        "out_dir": str(tmp_path / "run"),
        "data": {"num_classes": 6, "samples_per_class": 8},
        "suite": {"open_classes": 4, "open_per_class": 4, "val_per_class": 3, "test_closed_per_class": 3,
                  "teacher_multiplier": 2},
        "teacher": {"epochs": 2},
        "train": {"epochs": 2, "batch": {"classes_per_batch": 3, "samples_per_class": 2}},
        "eval": {"matching_trials": 50},
    }
    m = xm.run_distill(cfg)
    assert 0.0 <= m["eer"] <= 1.0
    assert {e["delta_db"] for e in m["noisy_eer"]} == {5.0, 10.0, 15.0}
    assert (tmp_path / "run" / "config.resolved.json").exists()
