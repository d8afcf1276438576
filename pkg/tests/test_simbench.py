import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lossrank.criteria import Criterion
from lossrank.selector import Fit
from lossrank.simbench import (
    ReplicationOutcome,
    SimDesign,
    ar1_cholesky,
    ar1_covariance,
    example1,
    example2,
    replication_rng,
    run_replication,
    run_study,
    sample_ar1_design,
    tally,
)


class TestDesign:
    def test_example1_truth(self):
        assert example1().truth == (0, 1, 4)

    def test_example2_truth(self):
        d = example2(n=100)
        assert d.truth == tuple(range(29, 300, 30))
        assert len(d.truth) == 10

    @pytest.mark.parametrize("kw", [
        dict(beta_true=(0, 0), d=2),
        dict(beta_true=(1, 0), d=3),
        dict(beta_true=(1, 0), d=2, reps=0),
        dict(beta_true=(1, 0), d=2, corr=1.0),
        dict(beta_true=(1, 0), d=2, sigma=-1.0),
    ])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            SimDesign(n=10, sigma=kw.pop("sigma", 1.0), **kw)


class TestAR1:
    def test_cholesky_identity(self):
        L = ar1_cholesky(8, 0.5)
        assert_allclose(L @ L.T, ar1_covariance(8, 0.5), atol=1e-10)

    def test_independent_columns(self):
        X = sample_ar1_design(5000, 5, 0.0, np.random.default_rng(1))
        C = np.corrcoef(X, rowvar=False)
        assert np.all(np.abs(C[~np.eye(5, dtype=bool)]) < 0.05)

    def test_correlation_decay(self):
        X = sample_ar1_design(5000, 8, 0.5, np.random.default_rng(2))
        C = np.corrcoef(X, rowvar=False)
        assert abs(C[0, 1] - 0.5) < 0.05
        assert abs(C[0, 2] - 0.25) < 0.05

    def test_streams_differ_by_role_and_rep(self):
        a = replication_rng(1, 0, 0).standard_normal(3)
        assert not np.allclose(a, replication_rng(1, 0, 1).standard_normal(3))
        assert not np.allclose(a, replication_rng(1, 1, 0).standard_normal(3))
        assert_allclose(a, replication_rng(1, 0, 0).standard_normal(3))


class TestReplication:
    def test_noiseless(self):
        design = example1(n=100, sigma=0.0, reps=3)
        for r in range(3):
            out = run_replication(design, r)
            cls, zeros, subset = out.results[Criterion.LR]
            assert cls is Fit.CORRECT
            assert zeros == 5
            assert subset == (0, 1, 4)

    def test_deterministic(self):
        design = example1(n=60, sigma=1.0, reps=2, seed=9)
        assert run_replication(design, 1) == run_replication(design, 1)

    def test_index_range(self):
        with pytest.raises(IndexError):
            run_replication(example1(reps=2), 2)

    def test_fixed_design_shares_x(self):
        from lossrank.simbench import draw_replication
        design = example1(n=20, reps=3, fixed_design=True)
        a, b = draw_replication(design, 0), draw_replication(design, 1)
        assert_allclose(a.X, b.X)
        assert not np.allclose(a.y, b.y)


class TestStudy:
    def test_single_rep_equals_outcome(self):
        design = example1(n=50, reps=1, seed=3)
        out = run_replication(design, 0)
        t = run_study(design)
        for crit, (cls, zeros, _) in out.results.items():
            cell = t.cells[crit]
            assert cell.count == 1
            assert getattr(cell, {"Correct": "correct", "Overfitted": "overfit", "Underfitted": "underfit"}[cls.value]) == 1
            assert cell.avg_zeros == zeros

    def test_worker_count_does_not_matter(self):
        design = example1(n=50, reps=20, seed=4)
        a, b = run_study(design, workers=1), run_study(design, workers=8)
        assert a.to_json() == b.to_json()

    def test_partition(self):
        design = example1(n=50, reps=10, seed=5)
        t = run_study(design)
        for cell in t.cells.values():
            assert cell.underfit + cell.correct + cell.overfit == 10
            assert 0 <= cell.avg_zeros <= 8

    def test_noiseless_zero_count(self):
        t = run_study(example1(n=40, sigma=0.0, reps=5))
        assert t.cells[Criterion.LR].avg_zeros == 5.0

    def test_failures_are_recorded(self):
        design = example1(reps=3)
        outs = [ReplicationOutcome(0, {Criterion.LR: (Fit.CORRECT, 5, (0, 1, 4))}),
                ReplicationOutcome(2, {}, "NoCandidates: none"),
                ReplicationOutcome(1, {Criterion.LR: (Fit.OVERFITTED, 4, (0, 1, 4, 6))})]
        t = tally(design, outs)
        assert t.failures == [(2, "NoCandidates: none")]
        assert t.cells[Criterion.LR].count == 2
        assert t.cells[Criterion.LR].avg_zeros == 4.5

    def test_output_formats_agree(self):
        t = run_study(example1(n=50, reps=5, seed=6))
        rows = json.loads(t.to_json())["rows"]
        lines = t.to_csv().strip().splitlines()
        header = lines[0].split(",")
        for row, line in zip(rows, lines[1:]):
            rec = dict(zip(header, line.split(",")))
            for key in ("correct_pct", "overfitted_pct", "avg_zeros"):
                assert abs(float(rec[key]) - row[key]) <= 1e-12
        table = t.to_table().splitlines()
        assert table[0].startswith("sigma\tn\tMethod")
        assert [l.split("\t")[2] for l in table[1:]] == ["GCV", "BIC~", "BIC", "LR"]

    def test_workers_validated(self):
        with pytest.raises(ValueError):
            run_study(example1(reps=1), workers=0)
