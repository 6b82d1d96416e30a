import io
import os
import subprocess
import sys

import numpy as np
import pytest

from apml import ApmlConfig, PointCloud
from apml.cli import build_parser, config_from_args, format_config_flags, main
from apml.scaling import CSV_HEADER, read_csv
from apml.xyz import XyzFormatError, format_xyz, parse_xyz, read_xyz, write_xyz


def run(argv):
    out = io.StringIO()
    code = main(argv, out=out)
    text = out.getvalue()
    report = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
    return code, report, text


@pytest.fixture
def unit_pair(tmp_path):
    a, b = tmp_path / "a.xyz", tmp_path / "b.xyz"
    a.write_text("# origin\n0 0 0\n")
    b.write_text("1 0 0\n")
    return str(a), str(b)


def test_xyz_roundtrip(tmp_path):
    cloud = PointCloud(np.random.default_rng(0).standard_normal((20, 3)) * 1e3)
    path = tmp_path / "c.xyz"
    write_xyz(cloud, path)
    back = read_xyz(path)
    np.testing.assert_allclose(back.points, cloud.points, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(back.points, cloud.points)


def test_xyz_parse_rules():
    cloud = parse_xyz("# comment\n\n1 2\n  3 4  \n# more\n5 6\n")
    assert cloud.points.shape == (3, 2)
    with pytest.raises(XyzFormatError):
        parse_xyz("1 2 3\n1 2\n")
    with pytest.raises(XyzFormatError):
        parse_xyz("# nothing\n")
    with pytest.raises(XyzFormatError):
        parse_xyz("1 two 3\n")


def test_loss_sparse_and_dense(unit_pair):
    for backend in ("sparse", "dense"):
        code, rep, _ = run(["loss", *unit_pair, "--backend", backend])
        assert code == 0
        assert float(rep["loss"]) == pytest.approx(1.0, abs=1e-7)
        assert rep["backend"] == backend
    code, rep, _ = run(["loss", *unit_pair, "--l-iter", "0"])
    assert rep["loss"] == "1.0"
    assert rep["nnz"] == "1"


def test_loss_malformed_file(tmp_path, unit_pair, capsys):
    bad = tmp_path / "bad.xyz"
    bad.write_text("0 0 0\n1 2\n")
    code, _, _ = run(["loss", str(bad), unit_pair[1]])
    assert code == 2
    assert "expected 3 values" in capsys.readouterr().err


def test_loss_missing_file(unit_pair):
    assert run(["loss", "/nonexistent.xyz", unit_pair[1]])[0] == 2


def test_loss_dimension_mismatch(tmp_path, unit_pair):
    flat = tmp_path / "flat.xyz"
    flat.write_text("0 0\n")
    assert run(["loss", str(flat), unit_pair[1]])[0] == 2


def test_unknown_flag_rejected(unit_pair):
    with pytest.raises(SystemExit) as exc:
        run(["loss", *unit_pair, "--bogus", "1"])
    assert exc.value.code == 2


def test_invalid_config_value(unit_pair):
    assert run(["loss", *unit_pair, "--p-min", "1.5"])[0] == 2


def _gen(tmp_path, name, n, seed):
    path = tmp_path / name
    assert run(["gen", "--n", str(n), "--seed", str(seed), "--out", str(path)])[0] == 0
    return str(path)


def test_compare(tmp_path):
    x, y = _gen(tmp_path, "x.xyz", 60, 1), _gen(tmp_path, "y.xyz", 60, 2)
    code, rep, _ = run(["compare", x, y, "--tau", "0"])
    assert code == 0 and rep["result"] == "PASS"
    assert float(rep["rel_diff"]) <= 1e-9
    code, rep, _ = run(["compare", x, y, "--tau", "0.5", "--tol", "1e-12"])
    assert code == 0 and rep["result"] == "FAIL"
    code, rep, _ = run(["compare", x, y, "--tau", "0.5", "--tol", "1e-12", "--strict"])
    assert code == 1


def test_gradcheck():
    code, rep, _ = run(["gradcheck", "--n", "8", "--m", "8", "--d", "3", "--seed", "1"])
    assert code == 0 and rep["result"] == "PASS"
    assert float(rep["max_rel_error"]) <= 1e-4
    code, rep, _ = run(["gradcheck", "--grad-mode", "plan_detached"])
    assert code == 0 and rep["mode"] == "envelope mode" and rep["result"] == "INFO"


def test_gradcheck_tiny_step_warns(capsys):
    run(["gradcheck", "--n", "4", "--h", "1e-12"])
    assert "cancellation" in capsys.readouterr().err


def test_gen_format(tmp_path):
    code, _, text = run(["gen", "--n", "3", "--d", "3", "--seed", "4"])
    assert code == 0
    lines = text.splitlines()
    assert len(lines) == 3
    assert all(len(line.split()) == 3 for line in lines)
    a = _gen(tmp_path, "a.xyz", 25, 7)
    b = _gen(tmp_path, "b.xyz", 25, 7)
    assert open(a, "rb").read() == open(b, "rb").read()
    assert run(["gen", "--n", "0"])[0] == 2


def test_gen_read_roundtrip(tmp_path):
    from apml import generate_cloud
    path = _gen(tmp_path, "g.xyz", 40, 3)
    np.testing.assert_allclose(read_xyz(path).points, generate_cloud(40, 3, 3).points, atol=1e-12)


def test_bench_nnz(tmp_path):
    out_csv = tmp_path / "nnz.csv"
    code, rep, _ = run(["bench-nnz", "--n-list", "64,128,256", "--trials", "1", "--out", str(out_csv)])
    assert code == 0
    rows = read_csv(open(out_csv))
    assert len(rows) == 3
    assert open(out_csv).readline().strip() == ",".join(CSV_HEADER)
    assert "slope" in rep


def test_bench_nnz_unwritable(tmp_path):
    code, _, _ = run(["bench-nnz", "--n-list", "64", "--trials", "1",
                      "--out", str(tmp_path / "missing" / "x.csv")])
    assert code == 2


def test_bench_bad_grid(tmp_path):
    assert run(["bench-nnz", "--n-list", "a,b", "--out", str(tmp_path / "x.csv")])[0] == 2
    assert run(["bench-nnz", "--trials", "0", "--out", str(tmp_path / "x.csv")])[0] == 2


def test_threads_env(monkeypatch, unit_pair):
    monkeypatch.setenv("APML_THREADS", "1")
    assert run(["loss", *unit_pair])[0] == 0
    monkeypatch.setenv("APML_THREADS", "many")
    assert run(["loss", *unit_pair])[0] == 2
    assert run(["loss", *unit_pair, "--threads", "-1"])[0] == 2


def test_config_flags_roundtrip():
    cfg = ApmlConfig(p_min=0.7, delta=3e-7, eps_g=2e-9, tau=1e-5, l_iter=4, eps_stab=1e-10,
                     eps_dist=1e-12, stability_mode="uniform_fallback",
                     grad_mode="plan_detached", reduction="mean_over_batch")
    args = build_parser().parse_args(["loss", "a", "b", *format_config_flags(cfg)])
    assert config_from_args(args) == cfg
    default = build_parser().parse_args(["loss", "a", "b"])
    assert config_from_args(default) == ApmlConfig()


def test_module_entry_point(unit_pair):
    proc = subprocess.run([sys.executable, "-m", "apml", "loss", *unit_pair],
                          capture_output=True, text=True, env={**os.environ, "APML_THREADS": "1"})
    assert proc.returncode == 0
    assert "loss=" in proc.stdout
