import json

import numpy as np
import pytest

from spotvol.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def obs_file(tmp_path, capsys):
    code, _, _ = run(capsys, "simulate", "--scenario", "sine", "--n", 65536, "--noise-a", 0.01, "--seed", 7,
                     "--out-dir", tmp_path, "--out", "obs.csv")
    assert code == 0
    return tmp_path / "obs.csv"


def test_simulate_writes_csv_and_manifest(obs_file):
    lines = obs_file.read_text().splitlines()
    assert lines[0] == "t,z"
    assert len(lines) == 65537 + 1
    manifest = json.loads(obs_file.with_name("obs.manifest.json").read_text())
    assert manifest["format_version"] == "spotvol-1"
    assert manifest["run_config"]["seed"] == 7
    assert manifest["run_config"]["n"] == 65536


def test_simulate_is_byte_identical(tmp_path, capsys):
    snapshots = []
    for _ in range(2):
        run(capsys, "simulate", "--scenario", "ito", "--n", 4096, "--seed", 3, "--out-dir", tmp_path, "--keep-truth")
        snapshots.append([(tmp_path / name).read_bytes() for name in ("obs.csv", "obs.manifest.json")])
    assert snapshots[0] == snapshots[1]


def test_simulate_requires_n_and_seed(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--seed", "1"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--n", "100"])
    assert exc.value.code == 2


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 512, "seed": 5, "scenario": "constant", "noise_a": 0.0}))
    code, _, _ = run(capsys, "simulate", "--config", cfg, "--n", 256, "--out-dir", tmp_path)
    assert code == 0
    man = json.loads((tmp_path / "obs.manifest.json").read_text())
    assert man["run_config"]["n"] == 256
    assert man["run_config"]["scenario"] == "constant"
    assert len((tmp_path / "obs.csv").read_text().splitlines()) == 258


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 512, "seed": 5, "colour": "red"}))
    code, _, err = run(capsys, "simulate", "--config", cfg, "--out-dir", tmp_path)
    assert code == 2
    assert "colour" in err


def test_estimate_summary_and_outputs(obs_file, tmp_path, capsys):
    code, out, _ = run(capsys, "estimate", "--input", obs_file, "--out-dir", tmp_path, "--out", "est.csv")
    assert code == 0
    summary = json.loads(out)
    assert (summary["n"], summary["m"], summary["ell0"], summary["ell1"]) == (65536, 256, 4, 5)
    assert set(summary) == {"n", "m", "ell0", "ell1", "tau", "kept"}
    est = (tmp_path / "est.csv").read_text().splitlines()
    assert est[0] == "t,sigma2_hat" and len(est) == 1026
    coeffs = json.loads((tmp_path / "est.coefficients.json").read_text())
    assert coeffs["ell0"] == 4 and coeffs["tau"] == pytest.approx(summary["tau"])
    man = json.loads((tmp_path / "est.manifest.json").read_text())
    assert man["estimate"]["m"] == 256 and man["run_config"]["input"] == str(obs_file)


def test_estimate_overrides(obs_file, tmp_path, capsys):
    code, out, _ = run(capsys, "estimate", "--input", obs_file, "--out-dir", tmp_path, "--m", 128, "--ell0", 2,
                       "--ell1", 4, "--kappa", 0, "--basis", "haar", "--grid-size", 33, "--clip-nonneg")
    assert code == 0
    summary = json.loads(out)
    assert (summary["m"], summary["ell0"], summary["ell1"], summary["tau"]) == (128, 2, 4, 0.0)
    vals = np.loadtxt(tmp_path / "estimate.csv", delimiter=",", skiprows=1)
    assert vals.shape == (33, 2) and np.all(vals[:, 1] >= 0)


def test_estimate_inconsistent_config(obs_file, tmp_path, capsys):
    code, _, err = run(capsys, "estimate", "--input", obs_file, "--out-dir", tmp_path, "--m", 1000)
    assert code == 2 and "ConfigInconsistent" in err


def test_estimate_nonuniform_grid(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    t = np.sort(np.random.default_rng(0).uniform(size=200))
    np.savetxt(bad, np.column_stack([t, np.zeros_like(t)]), delimiter=",", header="t,z", comments="")
    code, _, err = run(capsys, "estimate", "--input", bad, "--out-dir", tmp_path)
    assert code == 3 and "NonUniformGrid" in err


def test_estimate_rescales_time_span(tmp_path, capsys):
    src = tmp_path / "span.csv"
    t = 10 + 2 * np.arange(1025) / 1024
    np.savetxt(src, np.column_stack([t, np.zeros_like(t)]), delimiter=",", header="t,z", comments="")
    code, _, _ = run(capsys, "estimate", "--input", src, "--out-dir", tmp_path, "--grid-size", 5)
    assert code == 0
    out = np.loadtxt(tmp_path / "estimate.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(out[:, 0], [10, 10.5, 11, 11.5, 12])


def test_estimate_missing_file(tmp_path, capsys):
    code, _, _ = run(capsys, "estimate", "--input", tmp_path / "nope.csv", "--out-dir", tmp_path)
    assert code == 3


def test_kernel_info(capsys):
    code, out, _ = run(capsys, "kernel-info", "--kernel", "step")
    assert code == 0
    assert "0.816497" in out and "||Lambda||_L2     1.000000" in out
    code, out, _ = run(capsys, "kernel-info", "--kernel", "sine")
    assert "0.551329" in out


def test_kernel_info_kappa(capsys):
    code, out, _ = run(capsys, "kernel-info", "--kernel", "step", "--cbar", 1, "--a-sup", 1)
    assert f"{4 * (4 + 6 ** 0.5):.6f}" in out


@pytest.mark.parametrize(
    "desc,name",
    [
        ({"family": "tabulated", "breakpoints": [0, 2], "values": [1, 1]}, "NotAntisymmetric"),
        ({"family": "tabulated", "breakpoints": [0, 2], "values": [0, 0]}, "DegenerateKernel"),
    ],
)
def test_kernel_file_errors(tmp_path, capsys, desc, name):
    f = tmp_path / "k.json"
    f.write_text(json.dumps(desc))
    code, _, err = run(capsys, "kernel-info", "--kernel-file", f)
    assert code == 2 and name in err


def test_mc_rate_smoke_and_outputs(tmp_path, capsys):
    code, out, _ = run(capsys, "mc-rate", "--n-grid", "2^10,2^12,2^14", "--replicates", 2, "--seed", 1,
                       "--out-dir", tmp_path, "--basis", "haar")
    assert code == 0
    assert out.startswith("slope = ") and "+/-" in out
    errs = (tmp_path / "campaign_errors.csv").read_text().splitlines()
    assert errs[0] == "n,replicate,lp_error" and len(errs) == 7
    summ = (tmp_path / "campaign_summary.csv").read_text().splitlines()
    assert summ[0] == "n,median,q25,q75" and len(summ) == 4
    res = json.loads((tmp_path / "campaign.json").read_text())
    assert res["n_grid"] == [1024, 4096, 16384]
    assert (tmp_path / "campaign.manifest.json").exists()


def test_mc_rate_p1_vs_p2(tmp_path, capsys):
    outs = {}
    for p in (1, 2):
        run(capsys, "mc-rate", "--n-grid", "2^10,2^12,2^14", "--replicates", 2, "--seed", 4, "--p", p,
            "--region", "full", "--basis", "haar", "--out-dir", tmp_path / f"p{p}")
        outs[p] = np.loadtxt(tmp_path / f"p{p}" / "campaign_errors.csv", delimiter=",", skiprows=1)[:, 2]
    assert not np.array_equal(outs[1], outs[2])
    assert np.all(outs[1] <= outs[2] + 1e-12)


def test_mc_rate_needs_three_sizes(tmp_path, capsys):
    code, _, err = run(capsys, "mc-rate", "--n-grid", "1024,4096", "--seed", 1, "--out-dir", tmp_path)
    assert code == 2


def test_mc_rate_requires_seed(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["mc-rate", "--n-grid", "1024,4096,16384"])
    assert exc.value.code == 2


def test_mc_rate_same_seed_same_slope(tmp_path, capsys):
    slopes = []
    for d in ("a", "b"):
        _, out, _ = run(capsys, "mc-rate", "--n-grid", "2^10,2^12,2^14", "--replicates", 2, "--seed", 9,
                        "--scenario", "constant", "--basis", "haar", "--out-dir", tmp_path / d)
        slopes.append(out)
    assert slopes[0] == slopes[1]
