import csv
import json

import numpy as np
import pytest

from fraclattice.cli import main
from fraclattice.series import read_samples_csv


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def data_rows(path):
    with open(path) as fh:
        return [r for r in csv.reader(line for line in fh if not line.startswith("#"))][1:]


def test_sample_row_count(tmp_path, capsys):
    out = tmp_path / "x.csv"
    code, _, _ = run(capsys, "sample", "--method", "cholesky", "--n", "64", "--hurst", "0.7",
                     "--seed", "1", "--count", "10", "--out", str(out))
    assert code == 0
    rows = data_rows(out)
    assert len(rows) == 640
    assert open(out).readline().strip() == "sample,k,t,increment,path"
    meta = json.loads((tmp_path / "x.csv.meta.json").read_text())
    assert meta["rows"] == 640 and meta["args"]["method"] == "cholesky"
    assert set(meta["versions"]) >= {"fraclattice", "numpy", "scipy"}


def test_lightcone_meta_records_rescale(tmp_path, capsys):
    out = tmp_path / "lc.csv"
    assert run(capsys, "sample", "--method", "lightcone", "--n", "8", "--depth", "32",
               "--out", str(out))[0] == 0
    meta = json.loads((tmp_path / "lc.csv.meta.json").read_text())
    assert meta["rescale"] > 0


def test_hurst_out_of_range(capsys):
    code, _, err = run(capsys, "sample", "--hurst", "1.5")
    assert code == 2 and "(0, 1)" in err


def test_lightcone_range_restriction(capsys):
    code, _, err = run(capsys, "sample", "--method", "lightcone", "--hurst", "0.3")
    assert code == 2 and "lightcone" in err


def test_tree_needs_params(capsys):
    assert run(capsys, "sample", "--method", "tree")[0] == 2


def test_stdout_output(capsys):
    code, out, _ = run(capsys, "sample", "--n", "4", "--count", "2")
    assert code == 0
    assert len(out.strip().splitlines()) == 9


def test_multifractal_header(tmp_path, capsys):
    out = tmp_path / "mf.csv"
    assert run(capsys, "sample", "--method", "multifractal", "--n", "8", "--lambda", "0.5",
               "--seed", "4", "--out", str(out))[0] == 0
    assert open(out).readline().startswith("# multiplier_seed=4")
    assert len(data_rows(out)) == 8
    out2 = tmp_path / "cascade.csv"
    assert run(capsys, "sample", "--method", "multifractal", "--multiplier", "cascade",
               "--m0", "0.7", "--n", "8", "--out", str(out2))[0] == 0


@pytest.mark.parametrize("method", ["circulant", "lightcone", "multifractal"])
def test_replay_from_meta_bit_identical(tmp_path, capsys, method):
    first = tmp_path / "a.csv"
    assert run(capsys, "sample", "--method", method, "--n", "16", "--count", "3", "--seed", "9",
               "--threads", "3", "--out", str(first))[0] == 0
    second = tmp_path / "b.csv"
    assert run(capsys, "sample", "--from-meta", str(first) + ".meta.json", "--out", str(second))[0] == 0
    assert first.read_bytes() == second.read_bytes()


def test_thread_count_does_not_change_output(tmp_path, capsys, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "sample", "--n", "16", "--count", "8", "--out", str(a), "--threads", "1")
    monkeypatch.setenv("FRACLATTICE_THREADS", "4")
    run(capsys, "sample", "--n", "16", "--count", "8", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_config_defaults_and_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nmethod = cholesky\nn = 8\ncount = 2\nhurst=0.3\n")
    out = tmp_path / "c.csv"
    assert run(capsys, "--config", str(cfg), "sample", "--out", str(out))[0] == 0
    meta = json.loads((tmp_path / "c.csv.meta.json").read_text())["args"]
    assert (meta["method"], meta["n"], meta["count"], meta["hurst"]) == ("cholesky", 8, 2, 0.3)
    assert run(capsys, "--config", str(cfg), "sample", "--n", "4", "--out", str(out))[0] == 0
    meta = json.loads((tmp_path / "c.csv.meta.json").read_text())["args"]
    assert meta["n"] == 4 and meta["method"] == "cholesky"
    assert len(data_rows(out)) == 8


def test_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("no equals sign\n")
    assert run(capsys, "--config", str(cfg), "sample")[0] == 2


def test_verify_identities(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "identities", "--gamma-depth", "1000000000000000")
    lines = out.strip().splitlines()
    assert lines[0] == "check,param,value,bound,result"
    assert lines[1].startswith("vandermonde,") and lines[1].endswith(",PASS")
    assert code == 0


def test_verify_identities_default_depth_reports_failure(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "identities")
    gamma = [r for r in out.splitlines() if r.startswith("gamma_limit")]
    assert gamma[0].endswith("PASS")  # H=0.25 converges quickly
    assert gamma[1].endswith("FAIL") and code == 1  # H=0.7 needs far more depth


def test_verify_covariance(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "covariance", "--n", "16", "--hurst", "0.7",
                       "--depth", "256")
    assert code == 0
    assert any(r.startswith("truncation_error,N=16,H=0.7,depth=256") for r in out.splitlines())


def test_verify_scaling(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "scaling", "--hurst", "0.7", "--samples", "20000")
    assert code == 0
    assert len(out.strip().splitlines()) == 5


def test_verify_multifractal(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "multifractal", "--samples", "20000")
    assert code == 0 and "cascade_masses" in out


def test_unknown_suite(capsys):
    assert run(capsys, "verify", "--suite", "bogus")[0] == 2


def test_calibrate_requires_power_of_two(capsys):
    assert run(capsys, "calibrate", "--n", "60")[0] == 2


def test_calibrate_then_sample_tree(tmp_path, capsys):
    params = tmp_path / "params.json"
    code, out, _ = run(capsys, "calibrate", "--n", "16", "--hurst", "0.7", "--max-iter", "20",
                       "--out", str(params))
    assert code == 0
    summary = json.loads(out)
    doc = json.loads(params.read_text())
    assert doc["n_leaves"] == 16 and len(doc["levels"]) == 5
    assert doc["frobenius_rel_error"] == summary["frobenius_rel_error"]
    out_csv = tmp_path / "t.csv"
    assert run(capsys, "sample", "--method", "tree", "--params", str(params), "--n", "16",
               "--count", "4", "--out", str(out_csv))[0] == 0
    assert read_samples_csv(open(out_csv)).shape == (4, 16)


def test_calibrate_strict_exit(tmp_path, capsys):
    code, _, _ = run(capsys, "calibrate", "--n", "16", "--hurst", "0.7", "--max-iter", "1",
                     "--tol", "1e-9", "--strict", "--out", str(tmp_path / "p.json"))
    assert code == 1


def test_bench_single_size(capsys):
    code, out, err = run(capsys, "bench", "--methods", "circulant,tree", "--sizes", "8", "--reps", "1")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "method,n,median_seconds" and len(lines) == 3
    # with data on stdout the slope table goes to stderr
    assert err.strip().splitlines()[-3:] == ["method,slope", "circulant,", "tree,"]


def test_bench_unknown_method(capsys):
    assert run(capsys, "bench", "--methods", "magic", "--sizes", "8")[0] == 2


def test_bench_slopes_reported(tmp_path, capsys):
    out = tmp_path / "b.csv"
    code, text, _ = run(capsys, "bench", "--methods", "circulant", "--sizes", "64,128,256",
                        "--reps", "1", "--out", str(out))
    assert code == 0
    assert len(out.read_text().strip().splitlines()) == 4
    slope_line = text.strip().splitlines()[-1]
    assert slope_line.startswith("circulant,") and np.isfinite(float(slope_line.split(",")[1]))
