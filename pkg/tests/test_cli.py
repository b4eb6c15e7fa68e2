import numpy as np
import pytest

from pvtol.cli import EXIT_CLF, EXIT_CONFIG, EXIT_MC, EXIT_OK, EXIT_SIM, main
from pvtol.sim import CSV_COLUMNS, read_csv


def test_simulate_hover(tmp_path):
    out = tmp_path / "o"
    code = main(["simulate", "--out", str(out), "--set", "setpoint=0,0", "--set", "sim.t_final=2",
                 "--set", "sim.dt=1e-3", "--set", "sim.decimation=10"])
    assert code == EXIT_OK
    cols, data = read_csv(out / "trajectory.csv")
    assert cols == CSV_COLUMNS
    assert data.shape[0] == 2 / 1e-3 / 10 + 1
    assert not np.any(data[:, 1:7])


def test_simulate_dt_zero_names_key(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path), "--set", "sim.dt=0"]) == EXIT_CONFIG
    assert "sim.dt" in capsys.readouterr().err


def test_simulate_unknown_key(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path), "--set", "sim.dtt=1"]) == EXIT_CONFIG
    assert "sim.dtt" in capsys.readouterr().err


def test_simulate_canonical_invopt(tmp_path):
    assert main(["simulate", "--out", str(tmp_path), "--set", "controller=invopt"]) == EXIT_OK
    _, data = read_csv(tmp_path / "trajectory.csv")
    assert data[-1, 0] == pytest.approx(30.0)


def test_simulate_diverged_exit(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path), "--set", "sim.dt=2e-3"]) == EXIT_SIM
    assert "diverged" in capsys.readouterr().err
    assert (tmp_path / "trajectory.csv").exists()


def test_simulate_singular_exit(tmp_path):
    code = main(["simulate", "--out", str(tmp_path), "--set", "controller=fbl", "--set", "initial.fhat=0",
                 "--set", "sim.t_final=1"])
    assert code == EXIT_SIM


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"controller = fbl\nsim.t_final = 1\noutput.dir = {tmp_path / 'viafile'}\n")
    assert main(["simulate", "--config", str(cfg)]) == EXIT_OK
    assert (tmp_path / "viafile" / "trajectory.csv").exists()


def test_compare_canonical(tmp_path, capsys):
    assert main(["compare", "--out", str(tmp_path)]) == EXIT_OK
    line = capsys.readouterr().out.strip()
    fields = dict(kv.split("=") for kv in line.split())
    assert set(fields) == {"J_invopt", "J_fbl", "ratio"}
    assert float(fields["J_invopt"]) < float(fields["J_fbl"])
    assert (tmp_path / "invopt.csv").exists() and (tmp_path / "fbl.csv").exists()


def test_compare_missing_config(tmp_path):
    assert main(["compare", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_compare_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    assert main(["compare", "--out", str(blocker / "sub"), "--set", "sim.t_final=0.1"]) == EXIT_CONFIG
    assert "output directory" in capsys.readouterr().err


def test_montecarlo_single_nominal_matches_simulate(tmp_path):
    a, b = tmp_path / "sim", tmp_path / "mc"
    assert main(["simulate", "--out", str(a)]) == EXIT_OK
    assert main(["montecarlo", "--out", str(b), "--set", "mc.n_runs=1", "--set", "mc.fixed_delta=1,1",
                 "--set", "mc.write_runs=true"]) == EXIT_OK
    assert (a / "trajectory.csv").read_bytes() == (b / "run_0000.csv").read_bytes()
    assert (b / "summary.csv").exists() and (b / "envelope.csv").exists()


def test_montecarlo_divergence_exit(tmp_path):
    code = main(["montecarlo", "--out", str(tmp_path), "--set", "mc.n_runs=2", "--set", "sim.dt=2e-3",
                 "--set", "sim.t_final=2", "--jobs", "1"])
    assert code == EXIT_MC
    lines = (tmp_path / "summary.csv").read_text().splitlines()
    assert len(lines) == 4 and ",diverged," in lines[2]


@pytest.mark.slow
def test_montecarlo_invopt_defaults(tmp_path):
    assert main(["montecarlo", "--out", str(tmp_path)]) == EXIT_OK


@pytest.mark.slow
def test_montecarlo_fbl_defaults_recorded(tmp_path, capsys):
    code = main(["montecarlo", "--out", str(tmp_path), "--set", "controller=fbl"])
    print(capsys.readouterr().out)
    assert code in (EXIT_OK, EXIT_MC)


def test_verify_clf_default_grid(tmp_path):
    assert main(["verify-clf", "--out", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "clf_sweep.csv").read_text().splitlines()
    assert lines[:2] == ["# schema=1", "kx,ky,negdef,margin"]
    assert len(lines) == 2 + 625


def test_verify_clf_single_point(tmp_path):
    assert main(["verify-clf", "--out", str(tmp_path), "--point", "1,1"]) == EXIT_OK
    rows = (tmp_path / "clf_sweep.csv").read_text().splitlines()[2:]
    assert len(rows) == 1 and rows[0].startswith("1,1,1,")


def test_verify_clf_out_of_claim_point_reported(tmp_path):
    assert main(["verify-clf", "--out", str(tmp_path), "--point", "1e-3,1", "--grid"]) == EXIT_OK
    rows = (tmp_path / "clf_sweep.csv").read_text().splitlines()[2:]
    assert len(rows) == 626 and rows[-1].startswith("0.001,1,0,")


def test_verify_clf_ignores_out_of_claim_failures(tmp_path):
    # the whole grid sits below the claimed range, where the inequality fails
    assert main(["verify-clf", "--out", str(tmp_path), "--set", "clf.range=0.01,0.19"]) == EXIT_OK
    rows = (tmp_path / "clf_sweep.csv").read_text().splitlines()[2:]
    assert any(r.split(",")[2] == "0" for r in rows)


def test_verify_clf_exit_on_in_claim_failure(tmp_path, monkeypatch, capsys):
    from pvtol import cli
    from pvtol.clf import GridPoint
    monkeypatch.setattr(cli, "check_gains", lambda kx, ky: GridPoint(kx, ky, False, -1.0))
    assert main(["verify-clf", "--out", str(tmp_path), "--point", "1,1"]) == EXIT_CLF
    assert "kx=1" in capsys.readouterr().err
    assert (tmp_path / "clf_sweep.csv").read_text().splitlines()[2] == "1,1,0,-1"


def test_verify_clf_bad_point():
    with pytest.raises(SystemExit):
        main(["verify-clf", "--point", "1"])


def test_zero_dynamics_cli(tmp_path, capsys):
    assert main(["zero-dynamics", "--out", str(tmp_path), "--theta0", "1e-3", "--duration", "5"]) == EXIT_OK
    cols, data = read_csv(tmp_path / "zero_dynamics.csv")
    assert cols == ("t", "theta", "thetadot")
    assert np.max(np.abs(data[:, 1])) > 0.1


def test_zero_dynamics_flat(tmp_path):
    assert main(["zero-dynamics", "--out", str(tmp_path), "--theta0", "0", "--duration", "1"]) == EXIT_OK
    _, data = read_csv(tmp_path / "zero_dynamics.csv")
    assert not np.any(data[:, 1:])


def test_zero_dynamics_bad_duration(tmp_path):
    assert main(["zero-dynamics", "--out", str(tmp_path), "--duration", "-1"]) == EXIT_CONFIG


def test_exit_code_constants():
    assert (EXIT_OK, EXIT_CONFIG, EXIT_SIM, EXIT_MC, EXIT_CLF) == (0, 1, 2, 3, 4)
