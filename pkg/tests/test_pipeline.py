import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from throatfind.medial import MedialAxisPath
from throatfind.pipeline import (
    AnalysisConfig,
    analyze,
    emit_distributions,
    partition_pores,
    result_to_json,
    write_table,
    _pdf,
)
from throatfind.synth import gen_hourglass, gen_tube
from throatfind.voxgrid import InputError

SMALL = AnalysisConfig(polar_max=10, polar_step=5, azimuth_steps=8, worker_count=1)


@pytest.fixture(scope="module")
def hourglass_run():
    vol = gen_hourglass(r_max=9, r_min=5, slope=1.0)
    res = analyze(vol.image, vol.paths, SMALL)
    return vol, res, partition_pores(vol.image, res.throats)


def test_default_search_parameters():
    cfg = AnalysisConfig()
    assert (cfg.polar_max, cfg.polar_step, cfg.azimuth_steps, cfg.theta_count) == (45, 1, 45, 360)
    assert cfg.roi_pads == (4, 5, 6, 7, 8)
    assert cfg.algorithm_mask == frozenset({1, 2, 3, 4, 5})


@pytest.mark.parametrize("kw", [dict(cascade="some"), dict(algorithm_mask={6}), dict(algorithm_mask=set())])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        AnalysisConfig(**kw)


def test_tube_one_throat():
    vol = gen_tube(5.0, half_path=3)
    res = analyze(vol.image, vol.paths, SMALL)
    assert len(res.throats) == 1 and res.unresolved == []
    assert res.detection_ratio == 1.0


def test_empty_paths():
    vol = gen_tube(4.0, half_path=2)
    res = analyze(vol.image, [], SMALL)
    assert res.throats == [] and res.detection_ratio == 1.0
    net = partition_pores(vol.image, [])
    assert len(net.volumes) == 1


def test_grain_path_rejected():
    vol = gen_tube(4.0, half_path=2)
    with pytest.raises(InputError, match="grain"):
        analyze(vol.image, [MedialAxisPath(7, [[0, 0, 0]])], SMALL)


def test_hourglass_two_pores(hourglass_run):
    vol, res, net = hourglass_run
    assert len(net.volumes) == 2
    assert net.coordination == {1: 1, 2: 1}
    assert net.degenerate == []


def test_void_conserved(hourglass_run):
    _, _, net = hourglass_run
    assert sum(net.volumes.values()) + net.barrier_count == net.void_count


@settings(max_examples=4)
@given(st.floats(4, 7), st.sampled_from([(0, 0, 1), (1, 0, 2), (1, 1, 3)]))
def test_void_conserved_property(r, d):
    vol = gen_tube(r, direction=d, half_path=2)
    res = analyze(vol.image, vol.paths, SMALL)
    net = partition_pores(vol.image, res.throats)
    assert sum(net.volumes.values()) + net.barrier_count == net.void_count
    assert all(len(inc) in (1, 2) for inc in net.incidence)


def test_single_area_one_bin(hourglass_run):
    _, _, net = hourglass_run
    t = emit_distributions(net)["areas"]
    assert len(t.centers) == 1
    assert t.density[0] == pytest.approx(1.0 / t.widths[0])


def test_uniform_pdf_is_flat():
    v = np.random.default_rng(3).uniform(0, 10, 20000)
    t = _pdf("x", v, bins=10)
    assert np.allclose(t.density, 0.1, rtol=0.1)
    assert (t.density * t.widths).sum() == pytest.approx(1.0)


def test_coordination_histogram_sums_to_one(hourglass_run):
    _, _, net = hourglass_run
    t = emit_distributions(net)["coordination"]
    assert (t.density * t.widths).sum() == pytest.approx(1.0)


def test_table_and_json(tmp_path, hourglass_run):
    _, res, net = hourglass_run
    tables = emit_distributions(net)
    write_table(tables["volumes"], tmp_path / "v.csv")
    rows = list(csv.reader(open(tmp_path / "v.csv")))
    assert rows[0] == ["bin_center", "density"] and len(rows) == len(tables["volumes"].centers) + 1
    doc = json.loads(result_to_json(res, net))
    assert doc["throats"][0]["type"] in ("simply_planar", "simply_nonplanar", "nonsimply_nonplanar")
    assert doc["degenerate"] == []


def test_worker_count_does_not_change_output():
    vol = gen_hourglass(r_max=8, r_min=5, slope=1.0)
    p = vol.paths[0]
    paths = [p, MedialAxisPath(3, p.voxels[2:-2])]
    one = result_to_json(analyze(vol.image, paths, SMALL))
    two = result_to_json(analyze(vol.image, paths, AnalysisConfig(polar_max=10, polar_step=5, azimuth_steps=8, worker_count=2)))
    assert one == two
