import csv

import numpy as np
import pytest

from pollbatch.builtins import builtin_model, model_b, sym2
from pollbatch.errors import ConfigError, TransformUnavailable
from pollbatch.experiments import analyze
from pollbatch.globally_gated import GloballyGated
from pollbatch.simulator import SimConfig, estimate, run
from pollbatch.transforms import TransformEngine

SMALL = SimConfig(replications=10, batches_per_replication=40_000, seed=7)


def test_estimate_interval():
    e = estimate([1.0, 2.0, 3.0])
    assert e.mean == 2.0
    # t_{0.995, 2} = 9.9248
    assert e.half_width == pytest.approx(9.924843 * 1.0 / np.sqrt(3), rel=1e-6)
    assert estimate([4.0, 4.0]).half_width == 0.0


def test_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(replications=1)
    with pytest.raises(ConfigError):
        SimConfig(warmup_fraction=1.0)
    with pytest.raises(ConfigError):
        SimConfig(lst_probe_points=(-0.1,))


def test_moments_only_cannot_be_simulated():
    from pollbatch.builtins import model_c

    with pytest.raises(TransformUnavailable):
        run(model_c(moments_only=True), config=SMALL)


def test_determinism():
    m = builtin_model("model_a", 0.5, "lg")
    a = run(m, config=SMALL)
    b = run(m, config=SMALL)
    for key in a.per_replication:
        assert np.array_equal(a.per_replication[key], b.per_replication[key], equal_nan=True)
    c = run(m, config=SimConfig(replications=10, batches_per_replication=40_000, seed=8))
    assert c.mean_T.mean != a.mean_T.mean


def test_lst_at_zero_is_exact():
    est = run(sym2(), config=SimConfig(replications=3, batches_per_replication=5_000, lst_probe_points=(0.0, 0.5)))
    assert est.empirical_lst[0.0].mean == 1.0
    assert est.empirical_lst[0.0].half_width == 0.0


def test_sym_exhaustive():
    est = run(sym2(), config=SMALL)
    assert est.mean_T.contains(6.0)
    lst = TransformEngine(sym2()).sojourn_lst_arbitrary(np.array([0.5]))[0]
    assert est.empirical_lst[0.5].contains(lst)


def test_sym_globally_gated_lst():
    m = sym2(discipline="gg")
    est = run(m, config=SMALL)
    assert est.empirical_lst[0.5].contains(GloballyGated(m).sojourn_lst_arbitrary(np.array([0.5]))[0])


def test_zero_load_limit():
    m = sym2(lam=1e-3)
    est = run(m, config=SimConfig(replications=10, batches_per_replication=2_000, seed=3))
    assert est.mean_T.contains(analyze(m).mean_T)
    assert abs(est.mean_T.mean - 4.0) < 0.15


def test_model_b_globally_gated():
    m = model_b(discipline="gg")
    est = run(m, config=SMALL)
    assert est.mean_T.contains(GloballyGated(m).mean_batch_sojourn())


def test_visit_begin_pgf_probe():
    m = sym2()
    cfg = SimConfig(replications=10, batches_per_replication=40_000, pgf_probe_points=((0.5, 0.5),))
    est = run(m, config=cfg)
    expected = TransformEngine(m).visit_begin_pgf(0, np.array([0.5, 0.5])).value
    assert est.visit_begin_pgf[(0.5, 0.5)].contains(float(expected))


@pytest.mark.parametrize("disc", ["ex", "lg", "gg"])
def test_work_conservation_and_little(disc):
    m = builtin_model("model_c", 0.6, disc)
    est = run(m, config=SMALL)
    per = est.per_replication
    for i in range(m.n):
        assert est.serving_fraction[i].contains(m.rho_i[i])
        # Little's law replication by replication: L_i - lambda_i W_i has mean zero
        gap = estimate(per["mean_L"][:, i] - m.lam_i[i] * per["mean_W"][:, i])
        assert abs(gap.mean) <= gap.half_width + 0.02 * est.mean_L[i].mean
    assert est.mean_C.contains(m.mean_cycle)


def test_single_queue():
    from pollbatch.batch import BatchSupport
    from pollbatch.distributions import Distribution
    from pollbatch.model import Discipline, PollingModel

    m = PollingModel(1.0, BatchSupport([[1], [2]], [0.5, 0.5]), (Distribution.exponential(0.5),),
                     (Distribution.exponential(1.0),), Discipline.EXHAUSTIVE).with_load(0.5)
    est = run(m, config=SMALL)
    assert est.mean_in_system[0].contains(7 / 3)


def test_trace_export(tmp_path):
    path = tmp_path / "trace.csv"
    cfg = SimConfig(replications=2, batches_per_replication=1_000, warmup_fraction=0.5)
    run(model_b(), config=cfg, trace_path=path)
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 500
    assert set(rows[0]) == {"replication", "batch_id", "arrival_time", "completion_time", "sojourn", "last_queue"}
    for r in rows[:50]:
        assert float(r["completion_time"]) - float(r["arrival_time"]) == pytest.approx(float(r["sojourn"]))
        assert r["last_queue"] in {"1", "2", "3"}
