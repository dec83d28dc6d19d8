import json
import subprocess
import sys

import numpy as np
import pytest

from tvselect.cli import build_parser, config_from_args, main
from tvselect.imageio import load_image

SMALL = ["--image", "phantom", "--size", "32", "--seed", "1", "--tol", "1e-6"]


def _run(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_synth_writes_image(tmp_path, capsys):
    out = tmp_path / "p.pgm"
    rc, _, _ = _run(capsys, "synth", "--size", "32", "--bits", "16", str(out))
    assert rc == 0 and load_image(out).shape == (32, 32)


def test_denoise_fixed_reports_json(tmp_path, capsys):
    rc, out, _ = _run(capsys, "denoise", *SMALL, "--alpha", "0.05", "--out-dir", str(tmp_path / "o"))
    assert rc == 0
    rep = json.loads(out)
    assert rep["alpha"]["mean"] == 0.05 and rep["solves"] == 1
    assert (tmp_path / "o" / "restored.png").exists()


def test_select_scalar_with_trace_csv(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    rc, out, _ = _run(capsys, "select-scalar", *SMALL, "--method", "paps", "--out-dir", str(tmp_path / "o"),
                      "--trace-csv", str(trace))
    assert rc == 0 and json.loads(out)["termination"] == "DiscrepancyMet"
    assert trace.read_text().splitlines()[0] == "n,alpha,H,B,p"


def test_select_local_writes_alpha_field(tmp_path, capsys):
    rc, out, _ = _run(capsys, "select-local", *SMALL, "--window", "5", "--boundary", "mirror", "--alpha0", "1e-3",
                      "--out-dir", str(tmp_path / "o"))
    assert rc == 0
    alpha = np.loadtxt(tmp_path / "o" / "alpha.csv", delimiter=",")
    assert alpha.shape == (32, 32)
    assert json.loads(out)["alpha"]["max"] == pytest.approx(alpha.max())


def test_deblur_uses_blur_operator(tmp_path, capsys):
    args = build_parser().parse_args(["deblur", *SMALL, "--alpha", "0.01", "--blur-size", "3", "--blur-std", "1"])
    cfg = config_from_args(args)
    assert cfg.operator == {"kind": "gaussian", "size": 3, "std": 1.0} and cfg.method == "fixed"


def test_config_file_overridden_by_flags(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"image": "checkerboard", "size": 64, "noise": {"kind": "gaussian", "sigma": 0.2},
                             "select": {"p0": 8}}))
    args = build_parser().parse_args(["select-scalar", "--config", str(p), "--size", "32", "--sigma", "0.05"])
    cfg = config_from_args(args)
    assert cfg.image == "checkerboard" and cfg.size == 32
    assert cfg.noise == {"kind": "gaussian", "sigma": 0.05} and cfg.select == {"p0": 8}


def test_impulse_defaults():
    args = build_parser().parse_args(["select-local", "--noise", "salt_pepper", "--r1", "0.2"])
    cfg = config_from_args(args)
    assert cfg.noise == {"kind": "salt_pepper", "r1": 0.2, "r2": 0.2} and cfg.method == "platv"


@pytest.mark.parametrize("argv", [
    ["denoise", "--noise", "salt_pepper", "--method", "cps"],
    ["denoise", "--tau", "1"],
    ["denoise", "--image", "missing.png"],
    ["denoise", "--size", "8"],
])
def test_configuration_errors_exit_2(argv, capsys):
    rc, _, err = _run(capsys, *argv)
    assert rc == 2 and err.startswith("tvselect denoise:")


def test_run_table_missing_corpus_exit_2(tmp_path, capsys):
    rc, _, err = _run(capsys, "run-table", "--table", "5", "--images", "lena", "--corpus", str(tmp_path),
                      str(tmp_path / "t.csv"))
    assert rc == 2 and "no corpus image" in err


def test_unknown_verb_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["smooth"])
    assert info.value.code == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "x.png"
    res = subprocess.run([sys.executable, "-m", "tvselect", "synth", "--name", "checkerboard", "--size", "32", str(out)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and out.exists()


def test_output_dir_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("TVSELECT_OUT", str(tmp_path))
    rc, out, _ = _run(capsys, "denoise", *SMALL, "--alpha", "0.05")
    rep = json.loads(out)
    assert rc == 0 and (tmp_path / rep["config_hash"][:12] / "record.json").exists()
