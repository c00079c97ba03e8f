import itertools
import json
import math
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from submx.experiments import ExperimentConfig, derive_seed, run_experiment
from submx.experiments.cli import main
from submx.experiments.harness import splitmix64
from submx.experiments.io import read_matrix_csv, read_replicates_csv, write_matrix_csv, write_outputs
from submx.experiments.runners import (
    exact_k1_moments,
    published_k1_variance,
    run_E3_two_point_localization,
)
from submx.matrix import GaussianMatrix, sample_gaussian_matrix


def cfg(eid, **kw):
    kw.setdefault("replicates", 20)
    return ExperimentConfig(eid, **kw)


def exact_k1_distribution_moments(n):
    """Mean and variance of L_n(1) over all (n^2)! equally likely rank patterns."""
    P = np.array(list(itertools.permutations(range(n * n))), dtype=np.int8).reshape(-1, n, n)
    L = ((P == P.max(axis=2, keepdims=True)) & (P == P.max(axis=1, keepdims=True))).sum(axis=(1, 2))
    counts = np.bincount(L)
    total = int(counts.sum())
    vals = np.arange(counts.size)
    m1 = Fraction(int((vals * counts).sum()), total)
    m2 = Fraction(int((vals**2 * counts).sum()), total)
    return m1, m2 - m1 * m1


class TestSeeds:
    def test_splitmix_reference(self):
        # First outputs of SplitMix64 seeded with 0 (reference values of the generator).
        state, out = 0, []
        for _ in range(3):
            out.append(splitmix64(state))
            state = (state + 0x9E3779B97F4A7C15) & (2**64 - 1)
        assert out == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]

    def test_derive_seed_distinct(self):
        seeds = {derive_seed(0, 1, r) for r in range(10_000)}
        assert len(seeds) == 10_000
        assert derive_seed(0, 1, 5) != derive_seed(0, 2, 5) != derive_seed(1, 1, 5)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig("E8", n=5, k=1, replicates=1)
        with pytest.raises(ValueError):
            ExperimentConfig("E1", n=5, k=6, replicates=1)
        with pytest.raises(ValueError):
            ExperimentConfig("E1", n=5, k=1, replicates=0)
        with pytest.raises(ValueError):
            ExperimentConfig("E1", n=5, k=1, replicates=1, master_seed=2**64)


@pytest.mark.parametrize("eid,kw", [
    ("E1", dict(n=12, k=2)),
    ("E2", dict(n=8, k=2, options={"oracle_draws": 10_000})),
    ("E3", dict(n=10, k=1, tau=1.5)),
    ("E4", dict(n=12, k=2, options={"gtt_samples": 5000})),
    ("E5", dict(n=12, k=2, n_grid=(8, 12), options={"theta_samples": 5000})),
    ("E6", dict(n=15, k=2)),
    ("E7", dict(n=15, k=2, options={"restarts": 3})),
])
def test_determinism_and_parallel_equality(eid, kw):
    c = cfg(eid, master_seed=99, **kw)
    a = run_experiment(c, threads=1)
    b = run_experiment(c, threads=1)
    p = run_experiment(c, threads=4)
    assert a.records == b.records == p.records
    assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(p.to_dict(), sort_keys=True)


def test_replicates_csv_round_trip(tmp_path):
    report = run_experiment(cfg("E6", n=20, k=1, replicates=50, master_seed=3))
    write_outputs(report, tmp_path)
    rows = read_replicates_csv(tmp_path / "replicates.csv")
    L = np.array([r["L"] for r in rows])
    assert np.array_equal(L, [rec["L"] for rec in report.records])
    assert L.mean() == report.summary["L_mean"]
    assert L.var(ddof=1) == pytest.approx(report.summary["L_variance"], rel=1e-15)
    assert [r["seed"] for r in rows] == [rec["seed"] for rec in report.records]
    saved = json.loads((tmp_path / "report.json").read_text())
    assert saved["summary"]["ks"] == report.summary["ks"]


def test_plot_files(tmp_path):
    report = run_experiment(cfg("E6", n=30, k=2, replicates=40))
    write_outputs(report, tmp_path)
    hist = np.loadtxt(tmp_path / "hist.dat")
    qq = np.loadtxt(tmp_path / "qq.dat")
    assert hist.shape[1] == 2 and hist[:, 1].sum() == 40 and hist[-1, 1] == 0
    assert qq.shape == (40, 2) and np.all(np.diff(qq[:, 1]) >= 0)


def test_matrix_csv_round_trip(tmp_path):
    W = sample_gaussian_matrix(5, 8)
    write_matrix_csv(tmp_path / "w.csv", W)
    back = read_matrix_csv(tmp_path / "w.csv")
    assert np.array_equal(back.values, W.values) and back.seed is None
    (tmp_path / "bad.csv").write_text("1,2\n3\n")
    with pytest.raises(ValueError):
        read_matrix_csv(tmp_path / "bad.csv")


class TestE1:
    def test_monotone_improvement(self):
        ks20 = run_experiment(cfg("E1", n=20, k=1, replicates=2000, master_seed=1)).summary["gumbel_ks"]
        ks60 = run_experiment(cfg("E1", n=60, k=1, replicates=2000, master_seed=1)).summary["gumbel_ks"]
        assert ks60 <= ks20 + 0.02

    def test_k2_is_diagnostic(self):
        r = run_experiment(cfg("E1", n=14, k=2, replicates=30))
        assert r.checks == [] and math.isfinite(r.summary["gumbel_ks"])
        assert r.summary["comparison_bound_at_b_N"] > 0


class TestE2:
    def test_k1_centered_matrix_vanishes(self):
        r = run_experiment(cfg("E2", n=10, k=1, replicates=30))
        assert r.passed and r.summary["c11_max_abs"] == 0.0

    def test_oracle_covariances(self):
        r = run_experiment(cfg("E2", n=8, k=2, replicates=20, options={"oracle_draws": 200_000}))
        for key in ("cov_11_12", "cov_11_22"):
            s = r.summary[key]
            assert abs(s["oracle"] - s["exact"]) <= 4 * s["oracle_stderr"]

    @pytest.mark.slow
    @pytest.mark.xfail(strict=True, reason="global optimum still strongly conditioned at n = 12; see notes")
    def test_desk_scale_marginal(self):
        r = run_experiment(cfg("E2", n=12, k=2, replicates=3000, master_seed=0))
        assert r.check("c11_ks").passed


class TestE3:
    def test_all_ones_fixture(self):
        c = cfg("E3", n=6, k=1, tau=1.0, replicates=5, options={"k_horizon": 6})
        r = run_E3_two_point_localization(c, matrix_factory=lambda n, seed: GaussianMatrix.from_values(np.ones((n, n))))
        assert all(rec["K"] == 6 for rec in r.records)

    def test_needs_tau(self):
        with pytest.raises(ValueError):
            run_experiment(cfg("E3", n=8, k=1))


class TestE4:
    def test_k1_checks(self):
        r = run_experiment(cfg("E4", n=100, k=1, replicates=200, master_seed=4))
        assert r.check("score_ks").passed and r.check("census_mean_deviation").passed

    def test_k2_ratio_band(self):
        r = run_experiment(cfg("E4", n=60, k=2, replicates=30, options={"gtt_samples": 50_000}))
        assert r.check("average_ratio").passed
        assert "row_effect_ks" in r.summary and "score_ks" in r.summary
        assert [c.name for c in r.checks] == ["average_ratio"]


class TestE5:
    @pytest.mark.parametrize("n", [2, 3])
    def test_exact_k1_moments_by_enumeration(self, n):
        mean, var = exact_k1_distribution_moments(n)
        assert float(mean) == pytest.approx(exact_k1_moments(n)[0], rel=1e-15)
        assert float(var) == pytest.approx(exact_k1_moments(n)[1], rel=1e-15)

    @pytest.mark.parametrize("n", [2, 3])
    def test_published_variance_disagrees(self, n):
        _, var = exact_k1_distribution_moments(n)
        assert published_k1_variance(n) != pytest.approx(float(var), rel=0.05)

    def test_k1_small_run(self):
        r = run_experiment(cfg("E5", n=10, k=1, replicates=20_000, master_seed=5))
        assert r.passed, [c for c in r.checks if not c.passed]
        assert r.summary["per_n"]["10"]["published_variance"] == published_k1_variance(10)

    def test_grid_size_validation(self):
        with pytest.raises(ValueError):
            run_experiment(cfg("E5", n=10, k=4, n_grid=(3, 10)))


class TestE6:
    def test_standardization(self):
        r = run_experiment(cfg("E6", n=40, k=2, replicates=200))
        assert r.check("standardization").passed

    @pytest.mark.xfail(strict=True, reason="L_n(1) is integer-valued with SD ~3.5: atoms alone force KS > 0.05")
    def test_k1_desk_scale(self):
        r = run_experiment(cfg("E6", n=100, k=1, replicates=2000, master_seed=0))
        assert r.check("ks").passed


class TestE7:
    def test_k1_desk_scale(self):
        r = run_experiment(cfg("E7", n=400, k=1, replicates=200, master_seed=0))
        assert r.passed, [c for c in r.checks if not c.passed]
        assert 0.60 <= r.summary["ratio"]["value"] <= 0.80


class TestCli:
    def test_experiment_exit_codes(self, tmp_path, capsys):
        ok = main(["E6", "--n", "20", "--k", "1", "--replicates", "30", "--seed", "1",
                   "--out", str(tmp_path / "a"), "--threshold", "ks=1"])
        assert ok == 0
        failed = main(["E6", "--n", "20", "--k", "1", "--replicates", "30", "--seed", "1",
                       "--out", str(tmp_path / "b"), "--threshold", "ks=0"])
        assert failed == 2
        for name in ("report.json", "replicates.csv", "hist.dat", "qq.dat"):
            assert (tmp_path / "b" / name).exists()
        assert "[FAIL] ks" in capsys.readouterr().out

    def test_usage_errors(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["E1", "--n", "5"])
        assert exc.value.code == 1
        assert main(["E1", "--n", "5", "--k", "9", "--replicates", "2", "--seed", "0",
                     "--out", str(tmp_path)]) == 1
        assert main(["ktilde", "--n", "4", "--tau", "5"]) == 1
        assert main(["bound", "--n", "10", "--k", "2", "--u", "0.5"]) == 1
        assert main(["E1", "--n", "40", "--k", "10", "--replicates", "1", "--seed", "0",
                     "--budget", "10", "--out", str(tmp_path)]) == 1

    def test_numeric_commands(self, capsys):
        assert main(["ktilde", "--n", "20", "--tau", "2"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["k_star"] == 2 and out["k_tilde"] == pytest.approx(2.0296, abs=1e-4)
        assert main(["theta", "--k", "1", "--samples", "10"]) == 0
        assert json.loads(capsys.readouterr().out)["estimate"] == 0.5
        assert main(["bound", "--n", "10", "--k", "1", "--u", "2"]) == 0
        assert json.loads(capsys.readouterr().out)["total"] == 0.0

    def test_las_command(self, tmp_path, capsys):
        path = tmp_path / "w.csv"
        path.write_text("3,1,2\n0,5,1\n2,0,4\n")
        assert main(["las", "--input", str(path), "--k", "1", "--restarts", "0"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["best"] == {"rows": [2], "cols": [2], "average": 5.0, "iterations": 1}
        assert out["restarts"] == 3 and out["distinct_fixed_points"] == 3
        assert main(["las", "--input", str(path), "--k", "4", "--restarts", "2"]) == 1
        assert main(["las", "--input", str(tmp_path / "missing.csv"), "--k", "1", "--restarts", "1"]) == 1

    def test_console_script(self, tmp_path):
        out = subprocess.run([sys.executable, "-m", "submx.experiments.cli", "E3", "--n", "8", "--k", "1",
                              "--tau", "1.5", "--replicates", "5", "--seed", "2", "--out", str(tmp_path)],
                             capture_output=True, text=True)
        assert out.returncode in (0, 2)
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["config"]["master_seed"] == 2 and report["n_records"] == 5
        assert out.returncode == (0 if report["passed"] else 2)
