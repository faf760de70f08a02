import numpy as np
import pytest

from csamp.experiments import (
    GridConfig,
    SweepResult,
    extract_contour,
    read_csv,
    run_nmse_sweep,
    run_phase_transition,
    run_support_phase_transition,
    trial_rng,
    write_csv,
)
from csamp.model import RecoverySettings


def tiny_grid(**overrides) -> GridConfig:
    base = dict(
        n=48,
        m_ratios=(0.3, 0.6, 0.9),
        k_ratios=(0.1, 0.4),
        trials=3,
        base_seed=5,
        settings=RecoverySettings(t_max=40),
    )
    base.update(overrides)
    return GridConfig(**base)


class TestGridConfig:
    def test_cell_dims_rounding(self):
        cfg = tiny_grid()
        m, k = cfg.cell_dims(0.3, 0.4)
        assert m == round(0.3 * 48) and k == round(0.4 * m)
        m, k = cfg.cell_dims(0.02, 0.01)
        assert m >= 1 and k >= 0

    def test_validation(self):
        with pytest.raises(ValueError):
            tiny_grid(m_ratios=(0.0,))
        with pytest.raises(ValueError):
            tiny_grid(trials=0)
        with pytest.raises(ValueError):
            tiny_grid(algorithms=("magic",))
        with pytest.raises(ValueError):
            tiny_grid(noiseless=False)  # snr missing


class TestPhaseTransition:
    def test_row_shape_and_rates(self):
        cfg = tiny_grid()
        res = run_phase_transition(cfg)
        assert len(res.rows) == 6 * len(cfg.algorithms)
        rates = res.column("success_rate")
        assert all(0.0 <= r <= 1.0 for r in rates)
        counts = res.column("successes")
        assert all(c <= cfg.trials for c in counts)

    def test_paired_instances_across_algorithm_subsets(self):
        # the cbamp column must be identical whether or not other
        # algorithms run alongside it
        lone = run_phase_transition(tiny_grid(algorithms=("cbamp",)))
        joint = run_phase_transition(
            tiny_grid(algorithms=("amp", "cbamp", "cbossamp"))
        )
        lone_rows = {
            (r[0], r[1]): r for r in lone.rows
        }
        for row in joint.rows:
            if row[4] != "cbamp":
                continue
            assert lone_rows[(row[0], row[1])] == row

    def test_reproducible_and_worker_invariant(self, tmp_path):
        res1 = run_phase_transition(tiny_grid())
        res2 = run_phase_transition(tiny_grid())
        assert res1.rows == res2.rows
        res_par = run_phase_transition(tiny_grid(workers=2))
        assert res_par.rows == res1.rows
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        res1.to_csv(p1)
        res_par.to_csv(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_rate_monotone_in_m_ratio(self):
        # along fixed K/M, more measurements cannot hurt beyond noise
        cfg = GridConfig(
            n=64, m_ratios=(0.2, 0.4, 0.6, 0.8), k_ratios=(0.3,),
            trials=20, base_seed=2, algorithms=("cbossamp",),
            settings=RecoverySettings(t_max=60),
        )
        res = run_phase_transition(cfg)
        rates = res.column("success_rate")
        for lo, hi in zip(rates, rates[1:]):
            two_se = 2 * np.sqrt(max(lo * (1 - lo), 0.25 / 20) / 20)
            assert hi >= lo - two_se

    def test_corner_cells_at_desk_scale(self):
        # deep success corner: every algorithm at rate >= 0.95; deep failure
        # corner: every algorithm at rate <= 0.05 (N=256, 50 trials)
        easy = GridConfig(n=256, m_ratios=(0.95,), k_ratios=(0.05,),
                          trials=50, base_seed=8, workers=2)
        rates = run_phase_transition(easy).column("success_rate")
        assert all(r >= 0.95 for r in rates)
        hard = GridConfig(n=256, m_ratios=(0.05,), k_ratios=(0.95,),
                          trials=50, base_seed=8, workers=2)
        rates = run_phase_transition(hard).column("success_rate")
        assert all(r <= 0.05 for r in rates)

    def test_zero_k_cell(self):
        cfg = GridConfig(
            n=20, m_ratios=(0.05,), k_ratios=(0.1,), trials=2,
            base_seed=0, algorithms=("amp", "cbamp"),
            settings=RecoverySettings(t_max=20),
        )
        m, k = cfg.cell_dims(0.05, 0.1)
        assert k == 0
        res = run_phase_transition(cfg)  # must not raise
        assert all(r == 1.0 for r in res.column("success_rate"))


class TestSupportPhaseTransition:
    def test_default_detector_configs(self):
        cfg = tiny_grid(m_ratios=(0.6, 0.9), k_ratios=(0.1,))
        res = run_support_phase_transition(cfg)
        labels = {(r[4], r[5]) for r in res.rows}
        assert labels == {("cbamp", "em"), ("cbossamp", "em"), ("cbossamp", "prior")}
        assert len(res.rows) == 2 * 3

    def test_easy_cell_detects_support(self):
        cfg = GridConfig(
            n=64, m_ratios=(0.9,), k_ratios=(0.1,), trials=5, base_seed=1,
            settings=RecoverySettings(t_max=60),
        )
        res = run_support_phase_transition(cfg)
        assert all(r >= 0.8 for r in res.column("success_rate"))

    def test_rejects_empty_detectors(self):
        with pytest.raises(ValueError):
            run_support_phase_transition(tiny_grid(), detectors=())


class TestNmseSweep:
    def test_aggregates(self):
        res = run_nmse_sweep(
            n=48, k=4, m_list=[24], snr_db_list=[20.0], trials=4,
            base_seed=3, algorithms=("cbamp", "cbossamp"),
            settings=RecoverySettings(t_max=40),
        )
        assert len(res.rows) == 2
        for row in res.rows:
            mean, median = row[4], row[5]
            assert 0 <= median <= 10 and 0 <= mean <= 10

    def test_worker_invariance(self):
        kwargs = dict(
            n=48, k=4, m_list=[16, 24], snr_db_list=[10.0, 30.0], trials=3,
            base_seed=3, algorithms=("cbamp",), settings=RecoverySettings(t_max=30),
        )
        assert run_nmse_sweep(**kwargs).rows == run_nmse_sweep(workers=2, **kwargs).rows

    def test_validation(self):
        with pytest.raises(ValueError):
            run_nmse_sweep(n=10, k=20, m_list=[5], snr_db_list=[10], trials=2)
        with pytest.raises(ValueError):
            run_nmse_sweep(n=10, k=2, m_list=[5], snr_db_list=[10], trials=0)


class TestContour:
    @staticmethod
    def synthetic(rates_by_k, m_ratio=0.5, algorithm="cbamp"):
        rows = [
            (m_ratio, k, 1, 1, algorithm, 10, int(10 * r), r, 1.0, 0, 0)
            for k, r in rates_by_k
        ]
        return SweepResult(
            "phase-transition",
            ["m_ratio", "k_ratio", "m", "k", "algorithm", "trials", "successes",
             "success_rate", "mean_iterations", "diverged", "base_seed"],
            rows,
            {"kind": "phase-transition"},
        )

    def test_midpoint_interpolation(self):
        res = self.synthetic([(0.1, 1.0), (0.2, 1.0), (0.3, 0.0)])
        contour = extract_contour(res, 0.5)
        assert len(contour.rows) == 1
        algo, m_ratio, k_cross = contour.rows[0]
        assert (algo, m_ratio) == ("cbamp", 0.5)
        assert k_cross == pytest.approx(0.25)

    def test_all_success_column_omitted(self):
        res = self.synthetic([(0.1, 1.0), (0.2, 1.0), (0.3, 0.9)])
        assert extract_contour(res, 0.5).rows == []

    def test_monotone_column_single_crossing(self):
        res = self.synthetic([(0.1, 1.0), (0.2, 0.8), (0.3, 0.4), (0.4, 0.1)])
        contour = extract_contour(res, 0.5)
        assert len(contour.rows) == 1
        assert 0.2 < contour.rows[0][2] < 0.3

    def test_empty_rejected(self):
        empty = SweepResult("phase-transition", ["m_ratio"], [], {})
        with pytest.raises(ValueError):
            extract_contour(empty, 0.5)


class TestCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "out.csv"
        write_csv(path, ["a", "b"], [(1, 2.5), (3, -0.125)], {"kind": "test", "n": 4})
        columns, rows, meta = read_csv(path)
        assert columns == ["a", "b"]
        assert rows == [["1", "2.5"], ["3", "-0.125"]]
        assert meta["kind"] == "test" and meta["n"] == "4"

    def test_unwritable_path_raises_oserror(self):
        with pytest.raises(OSError):
            write_csv("/nonexistent-dir/x.csv", ["a"], [(1,)], {})

    def test_no_tmp_left_behind(self, tmp_path):
        write_csv(tmp_path / "ok.csv", ["a"], [(1,)], {})
        leftovers = [p for p in tmp_path.iterdir() if p.suffix == ".tmp"]
        assert leftovers == []


class TestTrialRng:
    def test_streams_independent_and_stable(self):
        a = trial_rng(1, 2, 3).standard_normal(4)
        b = trial_rng(1, 2, 3).standard_normal(4)
        c = trial_rng(1, 2, 4).standard_normal(4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
