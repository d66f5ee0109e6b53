import numpy as np
import pytest

from pollbatch.builtins import model_a, model_b, model_c, sym2
from pollbatch.globally_gated import GloballyGated
from pollbatch.numdiff import lst_mean

SYM = sym2(lam=0.2, b=1.0, s=1.0, discipline="gg")
MODELS = [SYM, model_a(), model_b(), model_c()]
IDS = ["sym", "a", "b", "c"]


def closed_sym(lam_total, b, s):
    rho = lam_total * b
    return (0.5 * rho**2 * b - 0.5 * rho**2 * s + 3 * rho * b + 5.5 * rho * s + 4 * b + 5 * s) / (
        2 * (1 + rho) * (1 - rho))


@pytest.mark.parametrize("lam_total,b,s", [(0.4, 1, 1), (0.8, 0.25, 4), (0.8, 1.1, 0.3)])
def test_sym_closed_form(lam_total, b, s):
    gg = GloballyGated(sym2(lam=lam_total / 2, b=b, s=s))
    assert gg.mean_batch_sojourn() == pytest.approx(closed_sym(lam_total, b, s), rel=1e-12)


def test_sym_value():
    assert GloballyGated(SYM).mean_batch_sojourn() == pytest.approx(155 / 21, rel=1e-12)


@pytest.mark.parametrize("model", MODELS, ids=IDS)
def test_cycle_moments_from_lst(model):
    gg = GloballyGated(model)
    cyc = gg.cycle()
    # the step must follow the tail scale E(C^R), not E(C)
    assert lst_mean(gg.cycle_lst, cyc.residual) == pytest.approx(cyc.mean_cycle, rel=1e-7)
    # second moment from the residual-cycle LST at coincident arguments
    res = lst_mean(lambda h: gg.cycle_past_residual_lst(np.zeros_like(h), h), cyc.residual)
    assert res == pytest.approx(cyc.residual, rel=1e-6)


@pytest.mark.parametrize("model", MODELS, ids=IDS)
def test_lst_mean_matches(model):
    gg = GloballyGated(model)
    t = gg.mean_batch_sojourn()
    assert lst_mean(gg.sojourn_lst_arbitrary, t) == pytest.approx(t, rel=1e-6)
    for k in model.batch.k:
        tk = gg.mean_batch_sojourn_specific(k)
        assert lst_mean(lambda w: gg.sojourn_lst(k, w), tk) == pytest.approx(tk, rel=1e-6)


@pytest.mark.parametrize("model", MODELS, ids=IDS)
def test_aggregation_and_little(model):
    gg = GloballyGated(model)
    agg = sum(p * gg.mean_batch_sojourn_specific(k) for k, p in zip(model.batch.k, model.batch.p))
    assert agg == pytest.approx(gg.mean_batch_sojourn(), rel=1e-12)
    assert gg.mean_lengths() == pytest.approx(model.lam_i * gg.waiting_times(), rel=1e-12)


def test_model_b_waits():
    # unit batches, exp(1) services and switches, rho = 0.6: E(C) = 7.5, E(C^R) = 5
    gg = GloballyGated(model_b())
    assert gg.cycle().residual == pytest.approx(5.0, rel=1e-12)
    assert gg.waiting_times() == pytest.approx([6.0, 9.0, 12.0], rel=1e-12)


def test_lst_at_zero_and_continuity():
    gg = GloballyGated(model_a())
    w = np.array([0.0, 1e-12, 1e-9, 1e-6, 1e-3])
    v = gg.sojourn_lst_arbitrary(w)
    assert v[0] == 1.0
    t = gg.mean_batch_sojourn()
    # first-order agreement; the quadratic term is below 100 w^2 here
    assert np.all(np.abs(v[1:] - (1 - w[1:] * t)) < 1e-10 + 100 * w[1:] ** 2)


def test_lst_monotone():
    gg = GloballyGated(model_c())
    v = gg.sojourn_lst_arbitrary(np.linspace(0, 5, 60))
    assert np.all(np.diff(v) < 0)
    assert np.all(v > 0)
