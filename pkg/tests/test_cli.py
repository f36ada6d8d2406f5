import json
import subprocess
import sys

import pytest

from gradfeat.cli import main


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["make-synthetic", "--seed", "2", "--n", "40", "--dims", "10,12,8,3",
                 "-P", "3", "--out", str(d)]) == 0
    return d


def _flow(d, threads, tag):
    out = d / tag
    out.mkdir()
    common = ["--threads", str(threads)]
    for split in ("train", "test"):
        assert main(common + ["extract", "--net", str(d / "net.dfn"), "--data",
                              str(d / f"{split}.dfs"), "--out", str(out / f"{split}.dff")]) == 0
    assert main(common + ["gram", "--features", str(out / "train.dff"),
                          "--out", str(out / "train.dfg")]) == 0
    assert main(common + ["train", "--features", str(out / "train.dff"), "--data",
                          str(d / "train.dfs"), "--gram", str(out / "train.dfg"),
                          "--out", str(out / "model.json")]) == 0
    assert main(common + ["eval", "--model", str(out / "model.json"), "--train-features",
                          str(out / "train.dff"), "--features", str(out / "test.dff"),
                          "--data", str(d / "test.dfs"), "--out", str(out / "report.json")]) == 0
    return out


def test_full_flow(workdir, capsys):
    out = _flow(workdir, 1, "flow")
    report = json.loads((out / "report.json").read_text())
    assert 0.5 < report["map"] <= 1.0
    assert report["mode"] == "gradient" and report["layer"] == 2
    assert json.loads((out / "train.dff.json").read_text())["kernel"] == "trace"
    assert '"map":' in capsys.readouterr().out


def test_threads_give_identical_files(workdir):
    a = _flow(workdir, 1, "t1")
    b = _flow(workdir, 3, "t3")
    for name in ("train.dff", "test.dff", "train.dfg", "model.json", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_eval_refuses_wrong_train_features(workdir, capsys):
    out = _flow(workdir, 1, "fp")
    code = main(["eval", "--model", str(out / "model.json"), "--train-features",
                 str(out / "test.dff"), "--features", str(out / "test.dff"),
                 "--data", str(workdir / "test.dfs")])
    assert code == 2
    assert "trained on features" in capsys.readouterr().err


def test_run_and_compare(workdir, capsys):
    assert main(["run", "--net", str(workdir / "net.dfn"), "--train", str(workdir / "train.dfs"),
                 "--test", str(workdir / "test.dfs"), "--mode", "concat", "--layer", "3",
                 "--interpolated-ap", "--out", str(workdir / "run")]) == 0
    report = json.loads((workdir / "run" / "report.json").read_text())
    assert report["blocks"] == ["x2", "y3"] and report["ap_variant"] == "11-point"
    assert main(["compare", "--net", str(workdir / "net.dfn"), "--train",
                 str(workdir / "train.dfs"), "--test", str(workdir / "test.dfs")]) == 0
    assert "dE/dW3" in capsys.readouterr().out


def test_info(workdir, capsys):
    out = _flow(workdir, 1, "info")
    for path, needle in [(workdir / "net.dfn", "network  layers=3"),
                         (out / "train.dff", "kind=0 (gradient)"),
                         (workdir / "train.dfs", "dataset  n=40"),
                         (out / "train.dfg", "min eigenvalue")]:
        assert main(["info", str(path)]) == 0
        assert needle in capsys.readouterr().out


def test_info_bad_magic(tmp_path, capsys):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"JUNK0000")
    assert main(["info", str(path)]) == 2
    assert "magic" in capsys.readouterr().err


def test_truncated_file_is_data_error(workdir, tmp_path, capsys):
    raw = (workdir / "net.dfn").read_bytes()
    path = tmp_path / "cut.dfn"
    path.write_bytes(raw[:50])
    assert main(["info", str(path)]) == 2
    assert "offset" in capsys.readouterr().err


def test_missing_file_is_data_error(tmp_path):
    assert main(["info", str(tmp_path / "absent.dfn")]) == 2


def test_usage_errors():
    with pytest.raises(SystemExit) as info:
        main(["extract", "--net", "x"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 1


def test_bad_layer_is_data_error(workdir):
    assert main(["extract", "--net", str(workdir / "net.dfn"), "--data",
                 str(workdir / "train.dfs"), "--layer", "9", "--out",
                 str(workdir / "bad.dff")]) == 2


def test_check_subcommand(capsys):
    assert main(["check"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 8 and "8/8 suites passed" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gradfeat", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and "make-synthetic" in proc.stdout
