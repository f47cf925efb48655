import json
import subprocess
import sys

import numpy as np
import pytest

from lacircle import SceneSpec, error_score, generate_scene, load_edge_map, save_gray_image
from lacircle.cli import main

TUNED = ["--r-min", "15", "--r-max", "100", "--k-max", "2000", "--beta-accept", "0.25"]


@pytest.fixture(scope="module")
def circle_img(tmp_path_factory):
    d = tmp_path_factory.mktemp("img")
    scene = generate_scene(SceneSpec(256, 256, circles=((130.0, 125.0, 60.0),)))
    path = d / "one.pgm"
    save_gray_image(path, scene.image)
    return path, scene


def blank(tmp_path, value=255):
    path = tmp_path / "blank.pgm"
    path.write_bytes(b"P5\n32 32\n255\n" + bytes([value] * 1024))
    return path


class TestEdges:
    def test_happy(self, circle_img, tmp_path, capsys):
        out = tmp_path / "e.pbm"
        assert main(["edges", str(circle_img[0]), str(out)]) == 0
        e = load_edge_map(out)
        assert e.count > 0 and str(e.count) in capsys.readouterr().out

    def test_missing(self, tmp_path, capsys):
        assert main(["edges", str(tmp_path / "nope.pgm"), str(tmp_path / "e.pbm")]) == 1
        err = capsys.readouterr().err
        assert "nope.pgm" in err and len(err.strip().splitlines()) == 1

    def test_constant(self, tmp_path):
        assert main(["edges", str(blank(tmp_path)), str(tmp_path / "e.pbm")]) == 0
        assert json.loads((tmp_path / "e.json").read_text())["count"] == 0

    def test_bad_threshold(self, tmp_path):
        code = main(["edges", str(blank(tmp_path)), str(tmp_path / "e.pbm"),
                     "--low-thresh", "0.5", "--high-thresh", "0.2"])
        assert code == 1 and not (tmp_path / "e.pbm").exists()


class TestDetect:
    def test_seeded_repeat(self, circle_img, tmp_path):
        outs = []
        for n in range(2):
            out = tmp_path / f"r{n}.json"
            assert main(["detect", str(circle_img[0]), "--seed", "7", "--no-timing",
                         "--out", str(out)] + TUNED) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_finds_circle(self, circle_img, tmp_path):
        out = tmp_path / "r.json"
        assert main(["detect", str(circle_img[0]), "--seed", "1", "--out", str(out)] + TUNED) == 0
        d = json.loads(out.read_text())
        assert len(d["circles"]) == 1 and "elapsed_s" in d
        c = d["circles"][0]
        assert error_score((c["x0"], c["y0"], c["r"]), circle_img[1].circles[0]) < 1

    def test_blank_exit_2(self, tmp_path):
        assert main(["detect", str(blank(tmp_path)), "--seed", "0"]) == 2

    def test_edge_map_input_and_overlay(self, circle_img, tmp_path):
        pbm = tmp_path / "e.pbm"
        main(["edges", str(circle_img[0]), str(pbm)])
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["detect", str(pbm), "--seed", "3", "--no-timing", "--out", str(a),
                     "--overlay", str(tmp_path / "o.ppm")] + TUNED) == 0
        assert main(["detect", str(circle_img[0]), "--seed", "3", "--no-timing",
                     "--out", str(b)] + TUNED) == 0
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "o.ppm").read_bytes().startswith(b"P6")

    def test_config_precedence(self, circle_img, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"r-min": 15, "r-max": 100, "k-max": 2000,
                                   "beta-accept": 0.25, "seed": 5}))
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["detect", str(circle_img[0]), "--config", str(cfg), "--no-timing",
                     "--out", str(a)]) == 0
        assert main(["detect", str(circle_img[0]), "--seed", "5", "--no-timing",
                     "--out", str(b)] + TUNED) == 0
        assert a.read_bytes() == b.read_bytes()
        # a flag overrides the file: r-max 50 excludes the r=60 circle
        c = tmp_path / "c2.json"
        assert main(["detect", str(circle_img[0]), "--config", str(cfg), "--r-max", "50",
                     "--no-timing", "--out", str(c)]) in (0, 2)
        if c.exists():
            assert all(x["r"] <= 50 for x in json.loads(c.read_text())["circles"])

    @pytest.mark.parametrize("flags", [["--theta", "0"], ["--theta", "1.5"], ["--fraction", "0"],
                                       ["--sensitivity", "-1"], ["--r-min", "80", "--r-max", "60"],
                                       ["--r-min", "0.5"], ["--theta", "abc"]])
    def test_validation_before_work(self, tmp_path, flags, capsys):
        # the input does not exist: validation must fail first, without touching it
        code = main(["detect", str(tmp_path / "absent.pgm"), "--out", str(tmp_path / "o.json")]
                    + flags)
        assert code == 1
        assert "absent.pgm" not in capsys.readouterr().err
        assert not (tmp_path / "o.json").exists()

    def test_unknown_config_key(self, circle_img, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"colour": 3}')
        assert main(["detect", str(circle_img[0]), "--config", str(cfg)]) == 1

    def test_malformed_config(self, circle_img, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text("{oops")
        assert main(["detect", str(circle_img[0]), "--config", str(cfg)]) == 1
        assert "c.json" in capsys.readouterr().err


class TestSynth:
    def test_truth(self, tmp_path):
        img = tmp_path / "s.pgm"
        assert main(["synth", str(img), "--circles", "3", "--noise", "0.05", "--seed", "1",
                     "--radius-min", "20", "--radius-max", "40"]) == 0
        t = json.loads((tmp_path / "s.json").read_text())
        assert len(t["circles"]) == 3 and t["noise"] == 0.05
        assert set(t["circles"][0]) >= {"x", "y", "r"}

    def test_noise_free_exact(self, tmp_path):
        img = tmp_path / "s.pgm"
        assert main(["synth", str(img), "--width", "120", "--height", "100", "--seed", "4",
                     "--radius-min", "20", "--radius-max", "30", "--noise", "0"]) == 0
        from lacircle import load_gray_image
        from lacircle.bench import draw_circles, load_truth
        data = load_gray_image(img).data
        assert np.array_equal(data, draw_circles(120, 100, load_truth(tmp_path / "s.json")))

    def test_repeatable(self, tmp_path):
        args = ["--circles", "2", "--noise", "0.03", "--seed", "9", "--radius-max", "50"]
        main(["synth", str(tmp_path / "a.png")] + args)
        main(["synth", str(tmp_path / "b.png")] + args)
        assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
        assert (tmp_path / "a.json").read_text() == (tmp_path / "b.json").read_text()

    def test_placement_failure(self, tmp_path):
        assert main(["synth", str(tmp_path / "x.pgm"), "--width", "60", "--height", "60",
                     "--circles", "6", "--radius-min", "20", "--radius-max", "25"]) == 1


class TestBench:
    def test_ladder_rows(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        assert main(["bench", "noise_ladder", "--trials", "1", "--out", str(out)]) == 0
        d = json.loads(out.read_text())
        assert len(d["rows"]) == 10 and d["trials"] == 1
        assert "noise_0.10" in capsys.readouterr().out

    def test_assert_thresholds(self, tmp_path):
        suite = tmp_path / "s.json"
        suite.write_text(json.dumps({
            "detector": {"r_min": 15, "r_max": 100, "k_max": 2000, "beta_accept": 0.25},
            "entries": [{"name": "one", "scene": {"width": 160, "height": 160,
                                                  "circles": [[80, 80, 40]]}}]}))
        table = tmp_path / "t.txt"
        assert main(["bench", str(suite), "--trials", "2", "--assert-sr", "90",
                     "--table", str(table)]) == 0
        assert table.read_text().splitlines()[2].startswith("one")
        assert main(["bench", str(suite), "--trials", "2", "--assert-me", "-1"]) == 3

    def test_low_sr_still_exit_0(self, tmp_path):
        suite = tmp_path / "s.json"
        suite.write_text(json.dumps({"entries": [
            {"name": "empty", "scene": {"width": 40, "height": 40, "circles": [[-99, -99, 5]]}}]}))
        assert main(["bench", str(suite), "--trials", "1"]) == 0

    def test_malformed(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("[1, 2")
        assert main(["bench", str(bad)]) == 1
        assert main(["bench", str(tmp_path / "none.json")]) == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "lacircle", "--version"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and r.stdout.startswith("lacircle")


def test_usage_error_exit_1(capsys):
    assert main(["detect"]) == 1
    assert main([]) == 1
