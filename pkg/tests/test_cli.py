import json

import pytest

from ranktwo import cli


def run_cli(args):
    return cli.main(args)


def test_chain_command(tmp_path):
    cfg = tmp_path / "chain.ini"
    cfg.write_text("[chain]\nkind = harmonic\nm_max = 50\n")
    out = tmp_path / "out"
    code = run_cli(["--config", str(cfg), "--out", str(out), "chain"])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"] == "parabolic"
    assert (out / "chain_table.csv").exists()
    header = (out / "chain_table.csv").read_text().splitlines()[0]
    assert header == "m,p,A,hit_up_before_floor,expected_upcrossings"


def test_chain_transient_verdict(tmp_path):
    cfg = tmp_path / "chain.ini"
    cfg.write_text("[chain]\nkind = constant\np = 0.67\nm_max = 200\n")
    out = tmp_path / "out"
    assert run_cli(["--config", str(cfg), "--out", str(out), "chain"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"] == "transient"
    assert report["a_extrapolated"] == pytest.approx(1.0 / (1 - 0.33 / 0.67), rel=1e-6)


def test_envelope_command(tmp_path):
    cfg = tmp_path / "env.ini"
    cfg.write_text("[envelope]\nkind = f1\nc = 1.0\nm_max = 100\n")
    out = tmp_path / "out"
    assert run_cli(["--config", str(cfg), "--out", str(out), "envelope"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["min_valid_floor"] == 10
    assert report["condition_holds"] is True
    assert report["max_closed_form_error"] < 1e-12


def test_unknown_section_rejected(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[nonsense]\nfoo = 1\n")
    assert run_cli(["--config", str(cfg), "--out", str(tmp_path / "o"), "chain"]) == 2


def test_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[chain]\nbogus = 1\n")
    assert run_cli(["--config", str(cfg), "--out", str(tmp_path / "o"), "chain"]) == 2


def test_malformed_phi_rejected(tmp_path):
    cfg = tmp_path / "couple.ini"
    cfg.write_text("[coupling]\nruns = 100\np = 0.5\nphi_low = 0.7\nphi_high = 0.7\n")
    assert run_cli(["--config", str(cfg), "--out", str(tmp_path / "o"), "couple"]) == 2


def test_couple_command_and_reproducibility(tmp_path):
    cfg = tmp_path / "couple.ini"
    cfg.write_text(
        "[coupling]\nruns = 2000\nseed = 5\nmax_steps = 2000\nmin_departures = 2000\n"
    )
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_cli(["--config", str(cfg), "--out", str(out1), "couple"]) == 0
    assert run_cli(["--config", str(cfg), "--out", str(out2), "couple"]) == 0
    blob1 = (out1 / "report.json").read_bytes()
    assert blob1 == (out2 / "report.json").read_bytes()
    report = json.loads(blob1)
    assert report["domination_rate"] == 1.0
    # rerunning from the emitted report reproduces it byte for byte
    out3 = tmp_path / "c"
    assert run_cli(["--config", str(out1 / "report.json"), "--out", str(out3),
                    "couple"]) == 0
    assert blob1 == (out3 / "report.json").read_bytes()


def test_parabolicity_smoke_and_rerun(tmp_path):
    cfg = tmp_path / "para.ini"
    cfg.write_text(
        "[envelope]\nc = 1.0\n"
        "[strategy]\nkind = catenoid\na = 1.0\n"
        "[sim]\npaths = 40\nseed = 3\nmax_steps = 30000\nk_offsets = 2,3\n"
    )
    out = tmp_path / "out"
    code = run_cli(["--config", str(cfg), "--out", str(out), "parabolicity"])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["floor"] == 6
    assert (out / "dominance.csv").exists()
    out2 = tmp_path / "out2"
    assert run_cli(["--config", str(out / "report.json"), "--out", str(out2),
                    "parabolicity"]) == 0
    assert (out / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


def test_area_growth_smoke(tmp_path):
    cfg = tmp_path / "area.ini"
    cfg.write_text(
        "[sim]\npaths = 30\nexit_paths = 60\nseed = 9\nmax_steps = 60000\n"
        "rho_exponents = 2,3\nexit_ks = 2\n"
    )
    out = tmp_path / "out"
    code = run_cli(["--config", str(cfg), "--out", str(out), "area-growth"])
    assert code in (0, 4)  # tiny run: informational checks may be noisy
    report = json.loads((out / "report.json").read_text())
    assert report["catenoid_area_ratio_rho100"] == pytest.approx(1.00048, abs=1e-4)
    assert (out / "occupation.csv").exists()
    assert (out / "exit_checks.csv").exists()


def test_trace_dump(tmp_path):
    cfg = tmp_path / "para.ini"
    cfg.write_text(
        "[sim]\npaths = 10\nseed = 3\nmax_steps = 2000\nk_offsets = 2\n"
    )
    out = tmp_path / "out"
    code = run_cli(["--config", str(cfg), "--out", str(out), "--trace", "2",
                    "parabolicity"])
    assert code == 0
    trace = (out / "trace_000.csv").read_text().splitlines()
    assert trace[0] == "t,x1,x2,x3"
    assert len(trace) > 10
    assert (out / "trace_001.csv").exists()


def test_check_failure_maps_to_exit_4(monkeypatch, tmp_path):
    def fake_experiment(engine="auto", **kwargs):
        return {
            "config": {"experiment": "couple", **kwargs},
            "domination_rate": 0.5,
            "y_absorbed_fraction": 1.0,
            "x_absorbed_fraction": 1.0,
            "marginals": [],
            "marginals_all_passed": True,
        }

    monkeypatch.setattr(cli.exp, "coupling_experiment", fake_experiment)
    cfg = tmp_path / "c.ini"
    cfg.write_text("[coupling]\nruns = 10\n")
    assert run_cli(["--config", str(cfg), "--out", str(tmp_path / "o"), "couple"]) == 4
