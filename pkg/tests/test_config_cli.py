import math
from pathlib import Path

import numpy as np
import pytest

from mhetd import csvio
from mhetd.cli import main
from mhetd.config import build_settings, load_settings, read_config
from mhetd.errors import ConfigError

SCALAR_CFG = """\
# first-order test model
a.coeffs=1,-0.9
b.coeffs=0,1
c.coeffs=1,-0.85
noise.nu=3
noise.sigma=1.0
seed=7
T=40
runs=25
estimator.N=3
estimator.kind=mhe_td
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "model.cfg"
    p.write_text(SCALAR_CFG)
    return p


class TestConfigParsing:
    def test_round_trip(self, cfg_path):
        s = load_settings(cfg_path)
        assert s.model.a.coeffs == (1.0, -0.9)
        assert s.model.noise.nu == 3.0
        assert s.N == 3
        assert s.estimator_kind == "mhe_td"
        assert s.seed == 7

    def test_unknown_key_is_hard_error(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text(SCALAR_CFG + "noise.sgma=0.5\n")
        with pytest.raises(ConfigError, match="noise.sgma"):
            read_config(p)

    def test_duplicate_key_rejected(self, tmp_path):
        p = tmp_path / "dup.cfg"
        p.write_text(SCALAR_CFG + "seed=9\n")
        with pytest.raises(ConfigError, match="duplicate"):
            read_config(p)

    def test_missing_model_key(self, tmp_path):
        p = tmp_path / "missing.cfg"
        p.write_text("a.coeffs=1,-0.5\nb.coeffs=0,1\nc.coeffs=1,-0.4\n"
                     "noise.nu=3\n")
        with pytest.raises(ConfigError, match="noise.sigma"):
            build_settings(read_config(p))

    def test_gaussian_mode_via_inf(self, tmp_path):
        p = tmp_path / "g.cfg"
        p.write_text(SCALAR_CFG.replace("noise.nu=3", "noise.nu=inf"))
        s = load_settings(p)
        assert math.isinf(s.model.noise.nu)

    def test_bad_estimator_kind(self, tmp_path):
        p = tmp_path / "bad2.cfg"
        p.write_text(SCALAR_CFG.replace("estimator.kind=mhe_td",
                                        "estimator.kind=ekf"))
        with pytest.raises(ConfigError, match="estimator.kind"):
            load_settings(p)

    def test_outlier_keys_must_pair(self, tmp_path):
        p = tmp_path / "o.cfg"
        p.write_text(SCALAR_CFG + "outlier.k=30\n")
        with pytest.raises(ConfigError, match="outlier"):
            load_settings(p)

    def test_spawned_seeds_deterministic(self, cfg_path):
        s = load_settings(cfg_path)
        a = [ss.generate_state(2).tolist() for ss in s.spawn_seeds(3)]
        b = [ss.generate_state(2).tolist() for ss in s.spawn_seeds(3)]
        assert a == b


class TestCliSimulate:
    def test_reruns_are_bit_identical(self, cfg_path, tmp_path):
        out1 = tmp_path / "o1"
        out2 = tmp_path / "o2"
        assert main(["simulate", "--config", str(cfg_path),
                     "--out", str(out1)]) == 0
        assert main(["simulate", "--config", str(cfg_path),
                     "--out", str(out2)]) == 0
        b1 = (out1 / "trajectory.csv").read_bytes()
        assert b1 == (out2 / "trajectory.csv").read_bytes()
        assert b1.decode().splitlines()[0] == "k,u,y,e"

    def test_row_count(self, cfg_path, tmp_path):
        main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path)])
        rows = csvio.read_table(tmp_path / "trajectory.csv")
        assert len(rows) == 40

    def test_outlier_written_exactly(self, tmp_path):
        p = tmp_path / "o.cfg"
        p.write_text(SCALAR_CFG + "outlier.k=30\noutlier.value=-10\n")
        main(["simulate", "--config", str(p), "--out", str(tmp_path)])
        rows = csvio.read_table(tmp_path / "trajectory.csv")
        assert float(rows[29]["e"]) == -10.0

    def test_config_error_exit_code(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text(SCALAR_CFG + "bogus.key=1\n")
        assert main(["simulate", "--config", str(p),
                     "--out", str(tmp_path)]) == 2

    def test_missing_file_exit_code(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.cfg"),
                     "--out", str(tmp_path)]) == 2


class TestCliEstimate:
    def _simulate_noise_free(self, tmp_path):
        # zero-noise trajectory written by hand
        T = 20
        u = np.sin(np.arange(T))
        x = np.zeros(T)
        y = np.zeros(T)
        for k in range(T - 1):
            y[k] = x[k]
            x[k + 1] = 0.9 * x[k] + u[k]
        y[T - 1] = x[T - 1]
        path = tmp_path / "traj.csv"
        from mhetd.armax import Trajectory
        csvio.write_trajectory(path, Trajectory(u=u, y=y, e=np.zeros(T),
                                                x=np.zeros((T, 1))))
        return path, y

    def test_noise_free_tracking_via_cli(self, cfg_path, tmp_path):
        traj, y = self._simulate_noise_free(tmp_path)
        assert main(["estimate", "--config", str(cfg_path),
                     "--trajectory", str(traj), "--out", str(tmp_path)]) == 0
        rows = csvio.read_table(tmp_path / "estimates.csv")
        assert rows[0]["y_hat"] == ""           # warm-up rows blank
        for r in rows[3:]:
            assert float(r["y_hat"]) == pytest.approx(float(r["y"]), abs=1e-8)
        assert rows[5]["estimator"] == "mhe_td"

    def test_gaussian_mode_mhe_equals_mwlse(self, tmp_path):
        cfg_g = SCALAR_CFG.replace("noise.nu=3", "noise.nu=inf")
        p1 = tmp_path / "m1.cfg"
        p1.write_text(cfg_g)
        p2 = tmp_path / "m2.cfg"
        p2.write_text(cfg_g.replace("estimator.kind=mhe_td",
                                    "estimator.kind=mwlse"))
        main(["simulate", "--config", str(p1), "--out", str(tmp_path)])
        traj = tmp_path / "trajectory.csv"
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        main(["estimate", "--config", str(p1), "--trajectory", str(traj),
              "--out", str(out1)])
        main(["estimate", "--config", str(p2), "--trajectory", str(traj),
              "--out", str(out2)])
        r1 = csvio.read_table(out1 / "estimates.csv")
        r2 = csvio.read_table(out2 / "estimates.csv")
        for a, b in zip(r1, r2):
            if a["y_hat"]:
                assert float(a["y_hat"]) == pytest.approx(float(b["y_hat"]),
                                                          abs=1e-10)

    def test_missing_window_key_exit_2_names_key(self, tmp_path, capsys):
        p = tmp_path / "nown.cfg"
        p.write_text(SCALAR_CFG.replace("estimator.N=3\n", ""))
        main(["simulate", "--config", str(p), "--out", str(tmp_path)])
        code = main(["estimate", "--config", str(p),
                     "--trajectory", str(tmp_path / "trajectory.csv"),
                     "--out", str(tmp_path)])
        assert code == 2
        assert "estimator.N" in capsys.readouterr().err

    def test_numerical_failure_exit_1(self, tmp_path):
        # trailing C coefficient zero: filter gains cannot be built
        p = tmp_path / "sing.cfg"
        p.write_text(SCALAR_CFG
                     .replace("a.coeffs=1,-0.9", "a.coeffs=1,-0.5,0.04")
                     .replace("c.coeffs=1,-0.85", "c.coeffs=1,-0.5,0"))
        main(["simulate", "--config", str(p), "--out", str(tmp_path)])
        code = main(["estimate", "--config", str(p),
                     "--trajectory", str(tmp_path / "trajectory.csv"),
                     "--out", str(tmp_path)])
        assert code == 1

    def test_state_trace_written(self, cfg_path, tmp_path):
        main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path)])
        main(["estimate", "--config", str(cfg_path),
              "--trajectory", str(tmp_path / "trajectory.csv"),
              "--out", str(tmp_path)])
        rows = csvio.read_table(tmp_path / "state_trace.csv")
        assert list(rows[0].keys()) == ["k", "x_hat_1", "y_hat"]
        assert rows[5]["x_hat_1"] == rows[5]["y_hat"]

    @pytest.mark.parametrize("kind", ["armax_filter", "kalman", "mle", "pf"])
    def test_other_estimators_run(self, tmp_path, kind):
        p = tmp_path / f"{kind}.cfg"
        p.write_text(SCALAR_CFG.replace("estimator.kind=mhe_td",
                                        f"estimator.kind={kind}")
                     .replace("T=40", "T=15"))
        main(["simulate", "--config", str(p), "--out", str(tmp_path)])
        assert main(["estimate", "--config", str(p),
                     "--trajectory", str(tmp_path / "trajectory.csv"),
                     "--out", str(tmp_path)]) == 0
        rows = csvio.read_table(tmp_path / "estimates.csv")
        assert any(r["y_hat"] for r in rows)


class TestCliExperiments:
    def test_table2_quick(self, tmp_path):
        p = tmp_path / "t.cfg"
        p.write_text(SCALAR_CFG + "table.N=3\ntable.k=3,10,20\n")
        code = main(["table2", "--config", str(p), "--out", str(tmp_path),
                     "--quick", "--runs", "30"])
        assert code == 0
        rows = csvio.read_table(tmp_path / "table2_mhe_td.csv")
        assert {r["k"] for r in rows} == {"3", "10", "20"}
        assert (tmp_path / "table2_kalman.csv").exists()

    def test_outlier_command(self, tmp_path):
        p = tmp_path / "o.cfg"
        p.write_text(SCALAR_CFG + "outlier.k=20\noutlier.value=-10\n")
        code = main(["outlier", "--config", str(p), "--out", str(tmp_path),
                     "--runs", "25"])
        assert code == 0
        rows = csvio.read_table(tmp_path / "outlier_trace.csv")
        assert len(rows) == 40
        deflect_mhe = max(abs(float(r["mc_mean_mhe_td"])) for r in rows
                          if r["mc_mean_mhe_td"])
        deflect_mw = max(abs(float(r["mc_mean_mwlse"])) for r in rows
                         if r["mc_mean_mwlse"])
        assert deflect_mhe < deflect_mw

    def test_pfcompare_command(self, tmp_path):
        p = tmp_path / "p.cfg"
        p.write_text(SCALAR_CFG.replace("T=40", "T=25")
                     + "pf.particles=20,200\n")
        code = main(["pfcompare", "--config", str(p), "--out", str(tmp_path),
                     "--runs", "20"])
        assert code == 0
        rows = csvio.read_table(tmp_path / "index_report.csv")
        assert [r["estimator"] for r in rows] == ["mhe_td", "pf20", "pf200"]

    def test_outlier_missing_spec_exit_2(self, cfg_path, tmp_path):
        assert main(["outlier", "--config", str(cfg_path),
                     "--out", str(tmp_path), "--runs", "5"]) == 2

    def test_experiment_csvs_bit_identical_across_reruns(self, tmp_path):
        # identical master seed -> identical bytes (timing columns are
        # the exception, so the index report is compared column-wise)
        p = tmp_path / "t.cfg"
        p.write_text(SCALAR_CFG + "table.N=3\ntable.k=3,12\n"
                     + "outlier.k=12\noutlier.value=-10\n")
        outs = []
        for d in ("r1", "r2"):
            out = tmp_path / d
            assert main(["table2", "--config", str(p), "--out", str(out),
                         "--runs", "8"]) == 0
            assert main(["outlier", "--config", str(p), "--out", str(out),
                         "--runs", "8"]) == 0
            assert main(["pfcompare", "--config", str(p), "--out", str(out),
                         "--runs", "6"]) == 0
            outs.append(out)
        for name in ("table2_mhe_td.csv", "table2_kalman.csv",
                     "outlier_trace.csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        a = csvio.read_table(outs[0] / "index_report.csv")
        b = csvio.read_table(outs[1] / "index_report.csv")
        for ra, rb in zip(a, b):
            assert ra["estimator"] == rb["estimator"]
            assert ra["I_k"] == rb["I_k"]

    def test_table2_shipped_config_theory_cell(self, tmp_path):
        # the theoretical column is run-count independent; two runs
        # suffice to exercise the shipped fifth-order configuration
        cfg = Path(__file__).resolve().parents[1] / "configs" / "variance_table.cfg"
        code = main(["table2", "--config", str(cfg), "--out", str(tmp_path),
                     "--runs", "2", "--rho-mode", "paper"])
        assert code == 0
        rows = csvio.read_table(tmp_path / "table2_mhe_td.csv")
        cell = next(r for r in rows if r["N"] == "6" and r["k"] == "9")
        assert float(cell["var_theoretical"]) == pytest.approx(0.7055,
                                                               abs=1e-3)
