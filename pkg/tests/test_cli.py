import json
import re
import xml.etree.ElementTree as ET

import cv2
import numpy as np
import pytest
from PIL import Image

from sketchvec import cli, thin
from sketchvec import evalgen as eg

SVG_NS = "{http://www.w3.org/2000/svg}"


# -- helpers and oracles ----------------------------------------------------------

def render(gt: np.ndarray, width: float = 3.0) -> np.ndarray:
    """Clean Gaussian-profile rendering of a 1-px drawing."""
    gray, _ = eg.corrupt(gt, eg.CorruptionConfig.clean(width=width))
    return gray


def save_gray(path, gray):
    Image.fromarray(np.rint(gray * 255).astype(np.uint8), mode="L").save(path)


def hline(shape=(100, 160)):
    gt = np.zeros(shape, bool)
    gt[50, 20:140] = True
    return gt


def plus(shape=(140, 140)):
    gt = np.zeros(shape, bool)
    gt[70, 20:121] = True
    gt[20:121, 70] = True
    return gt


def svg_paths(text: str) -> list[str]:
    root = ET.fromstring(text)
    return [p.get("d") for p in root.iter(f"{SVG_NS}path")]


def parse_d(d: str):
    """Absolute M/C/Z path data to a list of (4, 2) cubic control arrays."""
    toks = re.findall(r"[MCZ]|-?\d+(?:\.\d+)?", d)
    assert toks[0] == "M"
    cur = np.array([float(toks[1]), float(toks[2])])
    i, segs = 3, []
    while i < len(toks):
        if toks[i] == "Z":
            i += 1
            continue
        assert toks[i] == "C"
        vals = np.array([float(v) for v in toks[i + 1:i + 7]]).reshape(3, 2)
        segs.append(np.vstack([cur, vals]))
        cur = vals[-1]
        i += 7
    return segs


def bernstein(ctrl, t):
    t = t[:, None]
    return ((1 - t) ** 3 * ctrl[0] + 3 * t * (1 - t) ** 2 * ctrl[1]
            + 3 * t * t * (1 - t) * ctrl[2] + t ** 3 * ctrl[3])


def rasterize_svg(text: str, shape) -> np.ndarray:
    """Draw every cubic as a 1-px polyline in pixel coordinates."""
    img = np.zeros(shape, np.uint8)
    for d in svg_paths(text):
        for seg in parse_d(d):
            n = max(8, int(np.hypot(*np.diff(seg, axis=0).T).sum() * 2))
            pts = bernstein(seg, np.linspace(0, 1, n)) - 0.5
            cv2.polylines(img, [np.rint(pts).astype(np.int32)], False, 1, 1)
    return img.astype(bool)


def run(argv):
    return cli.main([str(a) for a in argv])


# -- vectorize ---------------------------------------------------------------------------

def test_blank_page_has_no_paths(tmp_path):
    save_gray(tmp_path / "blank.png", np.ones((100, 100)))
    assert run(["vectorize", tmp_path / "blank.png", "-o", tmp_path]) == 0
    text = (tmp_path / "blank.paths.svg").read_text()
    assert svg_paths(text) == []
    assert ET.fromstring(text).get("width") == "100"


def test_straight_line_is_one_cubic(tmp_path):
    save_gray(tmp_path / "line.png", render(hline()))
    assert run(["vectorize", tmp_path / "line.png", "-o", tmp_path]) == 0
    paths = svg_paths((tmp_path / "line.paths.svg").read_text())
    assert len(paths) == 1
    assert paths[0].count("C") == 1
    seg = parse_d(paths[0])[0]
    # the curve runs along row 50 between the line ends
    assert np.all(np.abs(seg[:, 1] - 50.5) < 1.0)
    assert abs(min(seg[0, 0], seg[3, 0]) - 20.5) <= 3 and abs(max(seg[0, 0], seg[3, 0]) - 139.5) <= 3


def test_plus_is_four_paths_meeting_at_centre(tmp_path):
    save_gray(tmp_path / "plus.png", render(plus()))
    assert run(["vectorize", tmp_path / "plus.png", "-o", tmp_path]) == 0
    paths = svg_paths((tmp_path / "plus.paths.svg").read_text())
    assert len(paths) == 4
    centre = np.array([70.5, 70.5])
    for d in paths:
        segs = parse_d(d)
        ends = [segs[0][0], segs[-1][3]]
        assert min(np.hypot(*(e - centre)) for e in ends) <= 5.0


def test_svg_uses_absolute_cubic_commands_only(tmp_path):
    gt = eg.synthetic_drawing(2, (300, 300))
    save_gray(tmp_path / "s.png", eg.corrupt(gt, eg.CorruptionConfig(seed=2))[0])
    assert run(["vectorize", tmp_path / "s.png", "-o", tmp_path]) == 0
    text = (tmp_path / "s.paths.svg").read_text()
    root = ET.fromstring(text)
    assert root.tag == f"{SVG_NS}svg" and root.get("viewBox") == "0 0 300 300"
    paths = svg_paths(text)
    assert paths
    for d in paths:
        assert set(re.findall(r"[A-Za-z]", d)) <= {"M", "C", "Z"}
        assert d.startswith("M ")
    group = root.find(f"{SVG_NS}g")
    assert group.get("fill") == "none" and group.get("stroke-width") == "1"


def test_round_trip_centreline(tmp_path):
    gt = eg.synthetic_drawing(7, (300, 300))
    save_gray(tmp_path / "r.png", eg.corrupt(gt, eg.CorruptionConfig(seed=7))[0])
    assert run(["vectorize", tmp_path / "r.png", "-o", tmp_path, "--emit", "svg", "skeleton"]) == 0
    own = cli.read_mask(tmp_path / "r.skeleton.png")
    drawn = rasterize_svg((tmp_path / "r.paths.svg").read_text(), own.shape)
    back = thin.zhang_suen_thin(drawn)
    fit_err = cli.PipelineConfig().fit.desired_err
    assert eg.centerline_distance(back, own) <= fit_err + 1.0


def test_all_artifacts_and_config_echo(tmp_path):
    gt = eg.synthetic_drawing(3, (250, 250))
    save_gray(tmp_path / "a.png", eg.corrupt(gt, eg.CorruptionConfig(seed=3))[0])
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    argv = ["vectorize", tmp_path / "a.png", "--emit", "svg", "json", "mask", "skeleton", "metrics",
            "--fit-err", "2", "--prune-len", "8", "--link-angle", "25"]
    assert run(argv + ["-o", out1]) == 0
    names = sorted(p.name for p in out1.iterdir())
    assert names == ["a.config.json", "a.graph.json", "a.mask.png", "a.metrics.json",
                     "a.paths.svg", "a.skeleton.png"]
    echo = json.loads((out1 / "a.config.json").read_text())
    assert echo["fit"]["desired_err"] == 2 and echo["graph"]["prune_len"] == 8
    assert echo["graph"]["link_angle_deg"] == 25
    # re-running from the echo alone reproduces every artifact
    assert run(["vectorize", tmp_path / "a.png", "--config", out1 / "a.config.json", "-o", out2]) == 0
    for name in names:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name
    m = json.loads((out1 / "a.metrics.json").read_text())
    assert m["max_fit_error"] <= 2.0 + 1e-6
    doc = json.loads((out1 / "a.graph.json").read_text())
    assert len(doc["splines"]) == len(doc["paths"]) == m["paths"]


def test_vectorize_deterministic(tmp_path):
    gt = eg.synthetic_drawing(4, (250, 250))
    save_gray(tmp_path / "d.png", eg.corrupt(gt, eg.CorruptionConfig(seed=4))[0])
    for out in ("x", "y"):
        assert run(["vectorize", tmp_path / "d.png", "-o", tmp_path / out, "--emit", "svg", "json"]) == 0
    for name in ("d.paths.svg", "d.graph.json"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()


def test_input_formats(tmp_path):
    gray = render(hline())
    u8 = np.rint(gray * 255).astype(np.uint8)
    Image.fromarray(u8, "L").save(tmp_path / "g.pgm")
    Image.fromarray(u8, "L").save(tmp_path / "g.tif")
    Image.fromarray(np.stack([u8] * 3, -1), "RGB").save(tmp_path / "g_rgb.png")
    for name in ("g.pgm", "g.tif", "g_rgb.png"):
        assert np.allclose(cli.read_gray(tmp_path / name), u8 / 255.0, atol=1 / 255)
    assert run(["vectorize", tmp_path / "g.pgm", tmp_path / "g.tif", "-o", tmp_path / "o"]) == 0
    a = (tmp_path / "o" / "g.paths.svg").read_text()
    assert len(svg_paths(a)) == 1


# -- exit codes --------------------------------------------------------------------------

def test_missing_input_is_io_error(tmp_path):
    assert run(["vectorize", tmp_path / "nope.png", "-o", tmp_path]) == 1


def test_unreadable_input_is_io_error(tmp_path):
    (tmp_path / "bad.png").write_text("not an image")
    assert run(["vectorize", tmp_path / "bad.png", "-o", tmp_path]) == 1


@pytest.mark.parametrize("flags", [
    ["--fit-err", "0"], ["--wmin", "5", "--wmax", "2"], ["--pcc-threshold", "1.5"],
    ["--early-stop-fraction", "1"], ["--prune-len", "-1"], ["--link-angle", "400"],
])
def test_bad_config_exit_code(tmp_path, flags):
    save_gray(tmp_path / "l.png", render(hline()))
    assert run(["vectorize", tmp_path / "l.png", "-o", tmp_path] + flags) == 2


def test_bad_config_file(tmp_path):
    save_gray(tmp_path / "l.png", render(hline()))
    (tmp_path / "c.json").write_text('{"fit": {"nonsense": 1}}')
    assert run(["vectorize", tmp_path / "l.png", "--config", tmp_path / "c.json"]) == 2
    (tmp_path / "c.json").write_text("{")
    assert run(["vectorize", tmp_path / "l.png", "--config", tmp_path / "c.json"]) == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as e:
        cli.main(["vectorize"])
    assert e.value.code == 2


def test_eval_empty_directory(tmp_path):
    (tmp_path / "gt").mkdir()
    assert run(["eval", tmp_path / "gt", "-o", tmp_path]) == 1


# -- eval, corrupt, thin ------------------------------------------------------------------

def make_gt_dir(path, n, size=300):
    path.mkdir()
    for k in range(n):
        cli.write_mask(path / f"d{k}.png", eg.synthetic_drawing(100 + k, (size, size)))
    return path


def test_eval_clean_single_image(tmp_path):
    gt = make_gt_dir(tmp_path / "gt", 1)
    assert run(["eval", gt, "-o", tmp_path, "--clean"]) == 0
    summary = json.loads((tmp_path / "gt.eval.json").read_text())["summary"]
    assert summary["precision"] > 0.95 and summary["recall"] > 0.95


def test_eval_deterministic(tmp_path):
    gt = make_gt_dir(tmp_path / "gt", 2)
    for out in ("a", "b"):
        assert run(["eval", gt, "-o", tmp_path / out, "--seed", "5"]) == 0
    for name in ("gt.eval.csv", "gt.eval.json", "gt.config.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    csv = (tmp_path / "a" / "gt.eval.csv").read_text().splitlines()
    assert csv[0] == "image,precision,recall,f_measure,centerline_distance"
    assert [r.split(",")[0] for r in csv[1:]] == ["d0", "d1"]


def test_eval_parallel_matches_serial(tmp_path):
    gt = make_gt_dir(tmp_path / "gt", 2, size=200)
    assert run(["eval", gt, "-o", tmp_path / "a"]) == 0
    assert run(["eval", gt, "-o", tmp_path / "b", "--jobs", "2"]) == 0
    assert (tmp_path / "a" / "gt.eval.csv").read_bytes() == (tmp_path / "b" / "gt.eval.csv").read_bytes()


def test_corrupt_subcommand(tmp_path):
    assert run(["corrupt", "--synthetic", "2", "--size", "200", "-o", tmp_path, "--seed", "3"]) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["synthetic000.corrupt.png", "synthetic000.gt.png", "synthetic000.png",
                     "synthetic001.corrupt.png", "synthetic001.gt.png", "synthetic001.png"]
    with Image.open(tmp_path / "synthetic000.corrupt.png") as im:
        assert im.mode == "L" and im.size == (200, 200)
    gt = cli.read_mask(tmp_path / "synthetic000.png")
    assert np.array_equal(gt, eg.synthetic_drawing(3, (200, 200)))
    assert run(["corrupt", "-o", tmp_path]) == 2


def test_thin_subcommand(tmp_path):
    mask = np.zeros((40, 60), bool)
    mask[15:22, 5:55] = True
    cli.write_mask(tmp_path / "bar.png", mask)
    assert run(["thin", tmp_path / "bar.png", "-o", tmp_path]) == 0
    skel = cli.read_mask(tmp_path / "bar.skeleton.png")
    assert np.array_equal(skel, thin.unbiased_thin(mask))
    assert run(["thin", tmp_path / "bar.png", "-o", tmp_path / "z", "--no-unbias"]) == 0
    assert np.array_equal(cli.read_mask(tmp_path / "z" / "bar.skeleton.png"), thin.zhang_suen_thin(mask))


def test_pipeline_config_round_trip():
    cfg = cli.PipelineConfig()
    cfg.fit.desired_err = 1.5
    cfg.emit = ("svg", "mask")
    again = cli.PipelineConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
