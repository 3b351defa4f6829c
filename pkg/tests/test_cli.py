import csv
import io
import json

import numpy as np
import pytest

from throatfind.cli import EXIT_INPUT, EXIT_NO_THROAT, EXIT_OK, main
from throatfind.medial import MedialAxisPath, write_paths
from throatfind.voxgrid import SegmentedImage, save_image

FAST = ["--polar-max", "10", "--polar-step", "5", "--azimuth-steps", "8"]


@pytest.fixture(scope="module")
def hourglass_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("hg")
    assert main(["synth", "hourglass", "--r-max", "9", "--r-min", "5", "--out", str(d / "h.img")]) == EXIT_OK
    return d


def test_synth_writes_image_and_paths(tmp_path, capsys):
    assert main(["synth", "crossed-cylinders", "--r1", "5", "--r2", "5", "--out", str(tmp_path / "x.img")]) == EXIT_OK
    assert (tmp_path / "x.img").exists() and (tmp_path / "x.ma").exists()
    assert "2 paths" in capsys.readouterr().out


def test_analyze_outputs(hourglass_files, capsys):
    d = hourglass_files
    out = d / "out"
    code = main(["analyze", "--image", str(d / "h.img"), "--ma", str(d / "h.ma"), "--out", str(out), "--report", *FAST])
    assert code == EXIT_OK
    for name in ("throats.json", "areas.csv", "volumes.csv", "coordination.csv", "areas.png", "volumes.png", "coordination.png"):
        assert (out / name).exists(), name
    doc = json.loads((out / "throats.json").read_text())
    assert len(doc["throats"]) == 1
    assert "detection_ratio=1.0000" in capsys.readouterr().out


def test_inspect_prints_perimeter(hourglass_files, capsys):
    d = hourglass_files
    assert main(["inspect", "--image", str(d / "h.img"), "--ma", str(d / "h.ma"), "--path-id", "0", *FAST]) == EXIT_OK
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0][0] == "# path"
    assert any(r[0] == "perimeter26" for r in rows)
    assert "np." not in "".join(",".join(r) for r in rows)


def test_bench_line_rows(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bench-length", "--kind", "line", "--scale", "500", "--out", str(out), "--report", str(tmp_path / "b.png")]) == EXIT_OK
    rows = list(csv.reader(open(out)))
    assert len(rows) == 90
    assert (tmp_path / "b.png").exists()


def test_missing_file_is_input_error(tmp_path, capsys):
    code = main(["analyze", "--image", str(tmp_path / "nope.img"), "--ma", str(tmp_path / "nope.ma"), "--out", str(tmp_path)])
    assert code == EXIT_INPUT
    assert "error" in capsys.readouterr().err


def test_unknown_path_id(hourglass_files):
    d = hourglass_files
    assert main(["inspect", "--image", str(d / "h.img"), "--ma", str(d / "h.ma"), "--path-id", "9"]) == EXIT_INPUT


def test_no_throat_exit_code(tmp_path):
    # all void: every ray leaves the image, so no plane closes a perimeter
    save_image(SegmentedImage.from_void_mask(np.ones((9, 9, 9), bool)), tmp_path / "v.img")
    write_paths([MedialAxisPath(0, [[4, 4, z] for z in range(2, 7)])], tmp_path / "v.ma")
    code = main(["analyze", "--image", str(tmp_path / "v.img"), "--ma", str(tmp_path / "v.ma"), "--out", str(tmp_path / "o"), *FAST])
    assert code == EXIT_NO_THROAT
    assert (tmp_path / "o" / "areas.csv").read_text() == "bin_center,density\n"
