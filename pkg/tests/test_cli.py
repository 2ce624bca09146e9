import json
import subprocess
import sys

import pytest

from pdlab.cli import main

CFG = "model.arch = double\nmodel.activation = relu\nstream.T = 2^11\nharness.pairs = 2\ndata.eval_size = 256\n"


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.setenv("PDLAB_OUTPUT_ROOT", str(tmp_path / "runs"))
    (tmp_path / "c.cfg").write_text(CFG)
    return tmp_path


def _only_run_dir(root):
    (d,) = list((root / "runs").iterdir())
    return d


def test_run_twice_identical(workdir, capsys):
    cfg = str(workdir / "c.cfg")
    assert main(["run", "--config", cfg, "--seed", "7"]) == 0
    d = _only_run_dir(workdir)
    assert d.name.endswith("-seed7")
    first = {p.name: p.read_bytes() for p in d.iterdir()}
    assert main(["run", "--config", cfg, "--seed", "7"]) == 0
    second = {p.name: p.read_bytes() for p in d.iterdir()}
    manifest = json.loads(first.pop("manifest.json"))
    again = json.loads(second.pop("manifest.json"))
    assert first == second
    for m in (manifest, again):
        del m["started"], m["finished"]
    assert manifest == again
    assert d.name.startswith(manifest["config_hash"][:12])
    assert len(first["pairs.csv"].decode().splitlines()) == 3


def test_sweep_rows_per_variant(workdir):
    out = workdir / "sw"
    code = main(
        ["sweep", "--config", str(workdir / "c.cfg"), "--log2z", "0,10,20", "--out", str(out),
         "--set", "harness.pairs=1", "--variant", "model.arch=linear", "--variant", "model.activation=identity"]
    )
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 3
    assert {l.split(",")[0] for l in lines[1:]} == {"linear", "identity2"}
    assert (out / "pd_vs_logz.svg").exists() and (out / "pd_vs_loss.svg").exists()


def test_plot_from_sweep(workdir):
    out = workdir / "sw"
    main(["sweep", "--config", str(workdir / "c.cfg"), "--log2z", "0,3", "--out", str(out)])
    assert main(["plot", "--sweep", str(out / "sweep.csv"), "--out", str(workdir / "figs")]) == 0
    assert (workdir / "figs" / "pd_vs_logz.svg").read_bytes() != b""


def test_truth_and_inspect_weights(workdir, capsys):
    truth = workdir / "t.txt"
    assert main(["truth", "--kind", "linear", "--seed", "3", "--out", str(truth)]) == 0
    out = workdir / "r"
    cfg = workdir / "lin.cfg"
    cfg.write_text(f"model.arch = linear\ndata.truth_file = {truth}\nstream.T = 2^10\nstream.log2_z = 2\nharness.pairs = 1\n")
    assert main(["run", "--config", str(cfg), "--out", str(out), "--save-checkpoints"]) == 0
    ck = out / "checkpoints"
    code = main(["inspect-weights", "--a", str(ck / "z2-pair0-a.ckpt"), "--b", str(ck / "z2-pair0-b.ckpt"),
                 "--out", str(workdir / "w.csv"), "--truth", str(truth)])
    assert code == 0
    assert "diff_cosine" in capsys.readouterr().out
    lines = (workdir / "w.csv").read_text().splitlines()
    assert lines[0] == "layer_id,param_index,value_a,value_b" and len(lines) == 34


def test_warmstart(workdir):
    out = workdir / "ws"
    assert main(["warmstart", "--config", str(workdir / "c.cfg"), "--log2z", "0,4", "--ratio", "0.1", "--out", str(out)]) == 0
    rows = (out / "sweep.csv").read_text().splitlines()[1:]
    assert [r.split(",")[:2] for r in rows] == [["relu2 TL", "0"], ["relu2 TL", "4"]]
    assert (out / "teacher.ckpt").exists()
    # reuse the saved teacher
    assert main(["warmstart", "--config", str(workdir / "c.cfg"), "--teacher", str(out / "teacher.ckpt"),
                 "--out", str(workdir / "ws2")]) == 0


def test_bad_config_exits_nonzero(workdir, capsys):
    (workdir / "bad.cfg").write_text("foo.bar = 1\n")
    assert main(["run", "--config", str(workdir / "bad.cfg")]) == 1
    assert "unknown key" in capsys.readouterr().err
    assert main(["run", "--config", str(workdir / "missing.cfg")]) == 1


def test_unknown_subcommand_exits_2():
    proc = subprocess.run([sys.executable, "-m", "pdlab.cli", "frobnicate"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "usage:" in proc.stderr


def test_bad_log2z_list():
    with pytest.raises(SystemExit) as info:
        main(["sweep", "--log2z", "a,b"])
    assert info.value.code == 2
