import csv
import json

import pytest

from elslab.cli import main, read_config


def _run(tmp_path, *argv):
    return main(["--out-dir", str(tmp_path), *argv])


def _sidecar(path):
    data = json.loads(path.read_text())
    return data[-1] if isinstance(data, list) else data


def test_els_find_writes_csv_and_sidecar(tmp_path):
    assert _run(tmp_path, "els-find", "--u1", "6", "--rmax", "100") == 0
    with open(tmp_path / "els.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["r", "u", "du"]
    r, u = float(rows[-1]["r"]), float(rows[-1]["u"])
    assert u == pytest.approx(6 * r * r, rel=1e-4)
    side = _sidecar(tmp_path / "els.json")
    assert {"experiment", "theorem_ref", "pass", "margin", "tolerance"} <= set(side)
    assert side["pass"] and side["b_star"] == pytest.approx(12.0, rel=1e-6)


def test_outputs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["--out-dir", str(d), "bbup", "--nl", "power:p=2"]) == 0
    assert (a / "bbup.csv").read_bytes() == (b / "bbup.csv").read_bytes()
    assert (a / "bbup.json").read_bytes() == (b / "bbup.json").read_bytes()


def test_exit_codes(tmp_path):
    assert _run(tmp_path, "ko-check", "--nl", "power:p=2") == 0
    assert _run(tmp_path, "ko-check", "--nl", "power:p=1") == 4       # check failed
    assert _run(tmp_path, "shoot", "--nl", "bogus", "--u0", "1") == 2  # validation
    assert _run(tmp_path, "bounds", "energy", "--pot", "model:alpha=5", "--u1", "1",
                "--rmax", "50") == 3                                   # inapplicable
    with pytest.raises(SystemExit) as exc:
        _run(tmp_path, "no-such-experiment")
    assert exc.value.code == 2


def test_transform_and_gap_from_csv(tmp_path):
    assert _run(tmp_path, "els-find", "--u1", "2", "--rmax", "100", "--out", "a.csv") == 0
    assert _run(tmp_path, "els-find", "--u1", "5", "--rmax", "100", "--out", "b.csv") == 0
    assert _run(tmp_path, "transform", "--in", str(tmp_path / "a.csv"), "--alpha", "4") == 0
    assert _sidecar(tmp_path / "vt.json")["K"] == 0.0
    assert _run(tmp_path, "uniq-gap", "--a", str(tmp_path / "a.csv"),
                "--b", str(tmp_path / "b.csv"), "--alpha", "4") == 0
    with open(tmp_path / "gap.csv") as fh:
        assert next(csv.reader(fh)) == ["r", "gap", "envelope", "ratio"]


def test_run_config_directory(tmp_path):
    cfg = tmp_path / "cfg"
    cfg.mkdir()
    (cfg / "a.cfg").write_text("# comment\nkind = ko-check\nnl = power:p=3\nout = ko3.json\n")
    (cfg / "b.cfg").write_text("kind = bounds:fiddgr\nnl = power:p=2\nuhi = 1e4\n")
    summary = tmp_path / "summary.json"
    code = main(["--out-dir", str(tmp_path / "out"), "--json-summary", str(summary),
                 "run", str(cfg)])
    assert code == 0
    recs = json.loads(summary.read_text())
    assert [r["experiment"] for r in recs] == ["ko-check", "bounds:fiddgr"]
    assert (tmp_path / "out" / "fiddgr.csv").exists()


def test_read_config_translation(tmp_path):
    p = tmp_path / "x.cfg"
    p.write_text("kind = bounds:gamma\nrmax = 100\nu1 = 6\nc = 0.9\n")
    assert read_config(str(p)) == ["--rmax", "100", "bounds", "gamma", "--u1", "6", "--c", "0.9"]
    p.write_text("nl = power:p=2\n")
    assert main(["run", str(p)]) == 2


def test_ellipsoid_sweep_default_triples(tmp_path):
    assert _run(tmp_path, "ellipsoid-sweep", "--samples", "200") == 0
    with open(tmp_path / "ellipsoid.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12
    assert list(rows[0]) == ["a", "alpha", "D", "margin_min", "meanc_holds"]
