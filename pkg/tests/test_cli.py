import json

import numpy as np
import pytest

from defectperc import cli
from defectperc.sampler import CanonicalCurve, MicrocanonicalCurve


def run_cli(args):
    return cli.main([str(a) for a in args])


def strip_created(payload):
    payload = json.loads(json.dumps(payload))
    payload.get("meta", {}).pop("created", None)
    return payload


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def test_parse_grid_forms():
    grid = cli.parse_grid("0.4:0.6:0.05")
    assert np.allclose(grid, [0.4, 0.45, 0.5, 0.55, 0.6])
    grid = cli.parse_grid("0,0.5,1")
    assert grid.tolist() == [0.0, 0.5, 1.0]
    with pytest.raises(ValueError):
        cli.parse_grid("0.6:0.4:0.1")
    with pytest.raises(ValueError):
        cli.parse_grid("0.5,0.4")
    with pytest.raises(ValueError):
        cli.parse_grid("0.5:1.5:0.25")


def test_derived_seed_stable_and_distinct():
    a = cli.derived_seed(1, 0.1, 4)
    assert a == cli.derived_seed(1, 0.1, 4)
    assert a != cli.derived_seed(1, 0.1, 5)
    assert a != cli.derived_seed(1, 0.2, 4)
    assert a != cli.derived_seed(2, 0.1, 4)
    assert 0 <= a < 2 ** 64


# ---------------------------------------------------------------------------
# sweep / homog
# ---------------------------------------------------------------------------


def test_sweep_writes_curves(tmp_path, capsys):
    rc = run_cli(["sweep", "--d", 3, "--s", 2, "--L", 2, "--p", "0.1",
                  "--realizations", 50, "--seed", 5, "--out", tmp_path])
    assert rc == 0
    out = capsys.readouterr().out
    path = tmp_path / "sweep_d3s2_p0.1_L2.json"
    assert path.exists()
    assert str(path) in out
    curve = MicrocanonicalCurve.load(path)
    assert curve.realizations == 50
    assert curve.meta["p"] == 0.1
    assert np.all(np.diff(curve.counts) >= 0)


def test_sweep_multiple_p_and_L(tmp_path):
    rc = run_cli(["sweep", "--d", 3, "--s", 2, "--L", 1, "--L", 2,
                  "--p", "0.0", "--p", "0.1", "--realizations", 20,
                  "--seed", 1, "--out", tmp_path])
    assert rc == 0
    files = {f.name for f in tmp_path.glob("*.json")}
    assert files == {
        "sweep_d3s2_p0_L1.json", "sweep_d3s2_p0_L2.json",
        "sweep_d3s2_p0.1_L1.json", "sweep_d3s2_p0.1_L2.json",
    }


def test_sweep_rerun_is_byte_stable_modulo_created(tmp_path):
    args = ["sweep", "--d", 3, "--s", 2, "--L", 2, "--p", "0.2",
            "--realizations", 30, "--seed", 9]
    assert run_cli(args + ["--out", tmp_path / "a"]) == 0
    assert run_cli(args + ["--out", tmp_path / "b"]) == 0
    pa = json.loads((tmp_path / "a" / "sweep_d3s2_p0.2_L2.json").read_text())
    pb = json.loads((tmp_path / "b" / "sweep_d3s2_p0.2_L2.json").read_text())
    assert strip_created(pa) == strip_created(pb)


def test_sweep_rejects_zero_realizations(tmp_path, capsys):
    rc = run_cli(["sweep", "--d", 3, "--s", 2, "--L", 2, "--p", "0.1",
                  "--realizations", 0, "--seed", 5, "--out", tmp_path])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("DEFECTPERC_OUT", str(tmp_path / "env_out"))
    rc = run_cli(["sweep", "--d", 3, "--s", 2, "--L", 1, "--p", "0.1",
                  "--realizations", 10, "--seed", 3])
    assert rc == 0
    assert (tmp_path / "env_out" / "sweep_d3s2_p0.1_L1.json").exists()


def test_homog_writes_curve(tmp_path):
    rc = run_cli(["homog", "--d", 2, "--L", 2, "--realizations", 40,
                  "--seed", 2, "--out", tmp_path])
    assert rc == 0
    curve = MicrocanonicalCurve.load(tmp_path / "homog_d2_L2.json")
    assert curve.meta["kind"] == "homogeneous-sweep"
    assert curve.meta["p"] is None


# ---------------------------------------------------------------------------
# convolve
# ---------------------------------------------------------------------------


@pytest.fixture()
def sweep_file(tmp_path):
    assert run_cli(["sweep", "--d", 3, "--s", 2, "--L", 2, "--p", "0.1",
                    "--realizations", 60, "--seed", 11,
                    "--out", tmp_path]) == 0
    return tmp_path / "sweep_d3s2_p0.1_L2.json"


def test_convolve_json_endpoints(tmp_path, sweep_file):
    out = tmp_path / "canon.json"
    rc = run_cli(["convolve", sweep_file, "--sigma-grid", "0,0.5,1",
                  "--out", out])
    assert rc == 0
    micro = MicrocanonicalCurve.load(sweep_file)
    canon = CanonicalCurve.load(out)
    assert canon.sigma_grid.tolist() == [0.0, 0.5, 1.0]
    assert canon.values[0] == micro.counts[0] / micro.realizations
    assert canon.values[-1] == micro.counts[-1] / micro.realizations


def test_convolve_csv_format(tmp_path, sweep_file):
    out = tmp_path / "canon.csv"
    rc = run_cli(["convolve", sweep_file, "--sigma-grid", "0:1:0.25",
                  "--format", "csv", "--out", out])
    assert rc == 0
    text = out.read_text()
    assert text.startswith("# defectperc.canonical/1")
    assert "# config_hash=" in text
    lines = [l for l in text.strip().split("\n") if not l.startswith("#")]
    assert lines[0] == "sigma,value,stderr"
    assert len(lines) == 6


def test_convolve_default_names(tmp_path, sweep_file):
    rc = run_cli(["convolve", sweep_file, "--sigma-grid", "0:1:0.5",
                  "--out", tmp_path])
    assert rc == 0
    assert (tmp_path / "sweep_d3s2_p0.1_L2_canonical.json").exists()


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


def make_family_files(tmp_path, p="0", Ls=(2, 3, 4), seed=100):
    canon = []
    for L in Ls:
        assert run_cli(["sweep", "--d", 3, "--s", 2, "--L", L, "--p", p,
                        "--realizations", 400, "--seed", seed + L,
                        "--out", tmp_path]) == 0
        micro = tmp_path / f"sweep_d3s2_p{p}_L{L}.json"
        assert run_cli(["convolve", micro, "--sigma-grid", "0.3:0.7:0.01",
                        "--out", tmp_path]) == 0
        canon.append(tmp_path / f"sweep_d3s2_p{p}_L{L}_canonical.json")
    return canon


def test_estimate_pipeline(tmp_path, capsys):
    canon = make_family_files(tmp_path)
    out = tmp_path / "est.json"
    rc = run_cli(["estimate", *canon, "--out", out])
    assert rc == 0
    text = capsys.readouterr().out
    assert "sigma_star = " in text
    payload = json.loads(out.read_text())
    assert 0.3 < payload["sigma_star"] < 0.7
    assert payload["stat_err"] >= 0
    assert payload["sys_err"] >= 0


def test_estimate_requires_three_curves(tmp_path, capsys):
    canon = make_family_files(tmp_path, Ls=(2, 3))
    rc = run_cli(["estimate", *canon])
    assert rc == 2
    assert "3 box sizes" in capsys.readouterr().err


def test_estimate_refuses_mixed_provenance(tmp_path, capsys):
    a = make_family_files(tmp_path, p="0", Ls=(2, 3), seed=100)
    b = make_family_files(tmp_path, p="0.1", Ls=(4,), seed=100)
    rc = run_cli(["estimate", *(a + b)])
    assert rc == 2
    assert "mixed" in capsys.readouterr().err


def test_estimate_csv_output(tmp_path):
    canon = make_family_files(tmp_path)
    out = tmp_path / "table.csv"
    rc = run_cli(["estimate", *canon, "--format", "csv", "--out", out])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    assert lines[1].startswith("p,sigma_star,")


# ---------------------------------------------------------------------------
# cluster-dist / meanfield / animals / audit-ineq
# ---------------------------------------------------------------------------


def test_cluster_dist_and_fit_report(tmp_path, capsys):
    fit_out = tmp_path / "fit.json"
    rc = run_cli(["cluster-dist", "--d", 3, "--s", 2, "--L", 6,
                  "--p", "0.1", "--sigma", "0.1", "--samples", 20000,
                  "--seed", 4, "--out", tmp_path, "--fit-out", fit_out])
    assert rc == 0
    out = capsys.readouterr().out
    dist_path = tmp_path / "clusterdist_d3s2_L6_p0.1_s0.1.json"
    assert dist_path.exists()
    assert "window" in out or "inconclusive" in out
    fit = json.loads(fit_out.read_text())
    assert "candidates" in fit


def test_meanfield_table_stdout(capsys):
    rc = run_cli(["meanfield", "--d", 3, "--s", 2, "--p", "0.0",
                  "--p", "0.1"])
    assert rc == 0
    out = capsys.readouterr().out
    lines = out.strip().split("\n")
    rows = [l for l in lines if not l.startswith("#")]
    assert rows[0].startswith("p,sigma_star_mf")
    assert rows[1].startswith("0,0.5")
    assert rows[2].startswith("0.1,0.498998")


def test_meanfield_grid_to_file(tmp_path):
    out = tmp_path / "mf.csv"
    rc = run_cli(["meanfield", "--d", 3, "--s", 2,
                  "--p-grid", "0:0.3:0.1", "--out", out])
    assert rc == 0
    rows = [l for l in out.read_text().strip().split("\n")
            if l and not l.startswith("#")]
    assert len(rows) == 5  # header + 4 grid points


def test_animals_command(tmp_path, capsys):
    out = tmp_path / "census.csv"
    rc = run_cli(["animals", "--d", 3, "--s", 2, "--max-edges", 3,
                  "--out", out])
    assert rc == 0
    text = capsys.readouterr().out
    assert "n=0: 1 animals" in text
    assert "identity violations=0" in text
    assert out.exists()
    from defectperc.animals import AnimalCensus
    census = AnimalCensus.load_csv(out)
    assert census.edge_count_totals() == {0: 1, 1: 6, 2: 45, 3: 380}


def test_audit_ineq_command(tmp_path, capsys):
    out = tmp_path / "audit.json"
    rc = run_cli(["audit-ineq", "--d", 3, "--s", 2, "--L", 5,
                  "--p", "0.05", "--sigma", "0.2", "--gamma", "0.1",
                  "--samples", 2000, "--seed", 6, "--out", out])
    assert rc == 0
    text = capsys.readouterr().out
    assert "gradient-vs-ghost" in text
    assert "magnetization-bound" in text
    assert "PASS" in text
    payload = json.loads(out.read_text())
    assert payload["passed"] is True


def test_unknown_command_fails():
    with pytest.raises(SystemExit):
        run_cli(["frobnicate"])
