import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gmfilter.config import RunConfig
from gmfilter.errors import InputError
from gmfilter.increments import increment_ratio
from gmfilter.validate import fixture_path, load_fixture

BASE = {"spec": {"patterns": [{"s": 1}]}, "signal": {"type": "white", "variance": 1.0},
        "noise": {"type": "white", "variance": 0.25}, "coefficients": [1.0, 0.5], "grid": 256}


def test_white_increments_become_structural():
    f, g, _ = RunConfig.from_dict(BASE).densities()
    ratio = increment_ratio(RunConfig.from_dict(BASE).spec, f.lambdas)
    assert_allclose(f.values[:, 0, 0].real * ratio, 1 / (2 * np.pi))
    assert_allclose(g.values, 0.25 / (2 * np.pi))


def test_rejects_unknown_keys():
    with pytest.raises(InputError):
        RunConfig.from_dict({**BASE, "gird": 12})
    with pytest.raises(InputError):
        RunConfig.from_dict({**BASE, "minimax": {"clas_g": {}}})
    with pytest.raises(InputError):
        RunConfig.from_dict({**BASE, "signal": {"type": "white", "var": 1}}).densities()
    with pytest.raises(InputError):
        RunConfig.from_dict({**BASE, "tol": 0.0})
    with pytest.raises(InputError):
        RunConfig.from_dict({**BASE, "minimax": {"gap_tol": -1.0}})


def test_noise_in_increment_form_rejected():
    cfg = RunConfig.from_dict({**BASE, "noise": {"type": "white", "form": "increment"}})
    with pytest.raises(InputError):
        cfg.densities()


def test_file_source(tmp_path):
    f, g, _ = RunConfig.from_dict(BASE).densities()
    g.save(str(tmp_path / "g.json"))
    cfg = RunConfig.from_dict({**BASE, "noise": {"type": "file", "path": "g.json"}}, base_dir=str(tmp_path))
    assert_allclose(cfg.densities()[1].values, g.values)
    (tmp_path / "g.json").write_text("{broken")
    with pytest.raises(InputError):
        cfg.densities()
    missing = RunConfig.from_dict({**BASE, "noise": {"type": "file", "path": "nope.json"}}, base_dir=str(tmp_path))
    with pytest.raises(InputError):
        missing.densities()


def test_classes_from_json():
    cfg = load_fixture("minimax_t1")
    f, g, res = cfg.densities()
    cls_g = res.density_class(cfg.minimax["class_g"])
    assert_allclose(cls_g.params["q"], np.mean(g.values.real))
    assert_allclose(cls_g.params["U"].values, 2.0 * g.values)
    cls_f = res.density_class(cfg.minimax["class_f"])
    ratio = increment_ratio(cfg.spec, f.lambdas)
    assert_allclose(cls_f.params["p"], np.mean(ratio * f.values[:, 0, 0].real))
    with pytest.raises(InputError):
        res.density_class({"kind": "DVU_2", "V": "noise", "U": "noise", "q": 1.0, "extra": 1})


def test_functional_and_override():
    cfg = RunConfig.from_dict({**BASE, "spec": {"patterns": [{"s": 1}], "period": 2}})
    assert_allclose(cfg.functional().blocks, [[1.0, 0.5]])
    sv = cfg.override(single_value=3).functional()
    assert_allclose(sv.blocks, [[0, 0], [0, 1]])
    assert cfg.override(grid=None).grid == 256


def test_fixtures_load():
    for name in ("toy_t1", "psarima_t2", "minimax_t1", "minimax_t2", "semi_t1", "singleton_t1"):
        with open(fixture_path(name)) as fh:
            json.load(fh)
        load_fixture(name).densities()
