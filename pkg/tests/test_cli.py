import numpy as np
import pytest

from graspkit.cli import main, read_report
from graspkit.formats import read_cloud, read_grasps, read_groups

PLATE = """seed = 0
table = none

[primitive]
kind = box
dims = 0.08, 0.06, 0.012
position = 0, 0, 0.1
label = 0
density = 20000
"""

TABLE_ONLY = "seed = 0\ntable.size = 0.2, 0.2\ntable.density = 10000\n"

FAST = ["--views", "20", "--angles", "6", "--quiet"]


@pytest.fixture(scope="module")
def plate(tmp_path_factory):
    d = tmp_path_factory.mktemp("plate")
    (d / "plate.scene").write_text(PLATE)
    assert main(["gen", str(d / "plate.scene"), str(d / "plate.cloud"), "--quiet"]) == 0
    assert main(["detect", str(d / "plate.cloud"), str(d / "plate.grasps"), "--num-samples", "32", *FAST]) == 0
    return d


def test_gen_clutter_and_determinism(tmp_path):
    from pathlib import Path
    spec = Path(__file__).resolve().parents[1] / "demos" / "clutter.scene"
    a, b = tmp_path / "a.cloud", tmp_path / "b.cloud"
    assert main(["gen", str(spec), str(a), "--quiet"]) == 0
    assert main(["gen", str(spec), str(b), "--quiet"]) == 0
    assert a.read_bytes() == b.read_bytes()
    cloud, meta = read_cloud(a)
    assert len(np.unique(cloud.labels)) == 7
    c = tmp_path / "c.cloud"
    assert main(["gen", str(spec), str(c), "--seed", "5", "--quiet"]) == 0
    assert c.read_bytes() != a.read_bytes()


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.scene"
    bad.write_text("[primitive]\nkind = sphere\ndims = oops\nlabel = 0\n")
    assert main(["gen", str(bad), str(tmp_path / "x"), "--quiet"]) == 2
    assert "line 3" in capsys.readouterr().err
    assert main(["gen"]) == 2
    assert main(["gen", str(tmp_path / "missing.scene"), str(tmp_path / "x")]) == 3
    assert main(["detect", str(tmp_path / "missing"), str(tmp_path / "y"), "--top-k", "0"]) == 3


def test_detect_plate(plate):
    grasps, gripper, meta = read_grasps(plate / "plate.grasps")
    assert 0 < len(grasps) <= 50
    assert grasps[0].score == pytest.approx(0.9)
    assert meta["config.sampling"] == "gbs" and "config.threads" not in meta
    ints, _, _ = read_groups(plate / "plate.grasps.groups")
    assert set(np.unique(ints[:, 0])) == set(range(len(grasps)))
    # cache hit reproduces the file
    out = plate / "again.grasps"
    assert main(["detect", str(plate / "plate.cloud"), str(out), "--num-samples", "32", *FAST]) == 0
    assert out.read_bytes() == (plate / "plate.grasps").read_bytes()
    assert list(plate.glob("plate.cloud.graspness.*.npy"))


def test_fps_header_differs(plate):
    out = plate / "fps.grasps"
    assert main(["detect", str(plate / "plate.cloud"), str(out), "--sampling", "fps", "--num-samples", "32", *FAST]) == 0
    _, _, meta = read_grasps(out)
    assert meta["config.sampling"] == "fps"
    assert out.read_bytes() != (plate / "plate.grasps").read_bytes()


def test_eval_plate_round_trip(plate):
    rep = plate / "plate.report"
    assert main(["eval", str(plate / "plate.grasps"), str(plate / "plate.cloud"), str(rep), "--quiet"]) == 0
    kv = read_report(str(rep) + ".kv")
    assert float(kv["AP_0.8"]) >= 0.9
    assert "AP_0.8" in rep.read_text()
    tab = plate / "table.txt"
    assert main(["report", str(rep) + ".kv", str(rep) + ".kv", "--out", str(tab)]) == 0
    lines = tab.read_text().splitlines()
    assert len(lines) == 3 and "AP_0.8" in lines[0]


def test_eval_gripper_mismatch(plate, tmp_path):
    g = tmp_path / "g.txt"
    g.write_text("max_width = 0.08\n")
    rc = main(["eval", str(plate / "plate.grasps"), str(plate / "plate.cloud"), str(tmp_path / "r"), "--gripper", str(g)])
    assert rc == 4


def test_fps_without_graspable_points(tmp_path, capsys):
    (tmp_path / "t.scene").write_text(TABLE_ONLY)
    cloud, out = tmp_path / "t.cloud", tmp_path / "t.grasps"
    assert main(["gen", str(tmp_path / "t.scene"), str(cloud), "--quiet"]) == 0
    assert main(["detect", str(cloud), str(out), "--sampling", "fps", "--no-cache", *FAST]) == 0
    assert "warning" in capsys.readouterr().err
    grasps, _, _ = read_grasps(out)
    assert len(grasps) == 0
    assert not list(tmp_path.glob("*.npy"))
    rep = tmp_path / "t.report"
    assert main(["eval", str(out), str(cloud), str(rep), "--quiet"]) == 0
    kv = read_report(str(rep) + ".kv")
    assert float(kv["AP"]) == 0.0 and kv["AP_S_empty"] == kv["AP_M_empty"] == kv["AP_L_empty"] == "1"


def test_gbs_needs_labels(plate, tmp_path):
    text = (plate / "plate.cloud").read_text().splitlines()
    n = int(text[0].split("N=")[1].split()[0])
    head = text[0].replace(",label", "")
    body = [l for l in text[1:] if not l.startswith("#")]
    (tmp_path / "nl.cloud").write_text(head + "\n" + "\n".join(" ".join(l.split()[:6]) for l in body[:n]) + "\n")
    assert main(["detect", str(tmp_path / "nl.cloud"), str(tmp_path / "o"), *FAST]) == 3


def test_annotate_writes_graspness(plate, tmp_path):
    out = tmp_path / "a.cloud"
    assert main(["annotate", str(plate / "plate.cloud"), str(out), *FAST]) == 0
    cloud, meta = read_cloud(out)
    assert cloud.graspness is not None and cloud.graspness.max() > 0
    # detect on the annotated cloud reuses its graspness and matches
    o2 = tmp_path / "o.grasps"
    assert main(["detect", str(out), str(o2), "--num-samples", "32", "--no-cache", *FAST]) == 0
    assert read_grasps(o2)[0].scores.tolist() == read_grasps(plate / "plate.grasps")[0].scores.tolist()
