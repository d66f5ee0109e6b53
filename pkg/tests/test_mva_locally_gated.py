import numpy as np
import pytest

from pollbatch.builtins import model_a, model_b, model_c, sym2
from pollbatch.mva_locally_gated import LocallyGatedMVA, solve

SYM = sym2(lam=0.2, b=1.0, s=1.0, discipline="lg")


def closed_sym(lam_total, b, s):
    rho = lam_total * b
    lam = lam_total / 2
    behind = (0.5 * rho**3 + 0.25 * rho**2 + 1.5 * rho * s * lam) / ((1 + 0.5 * rho) * (1 - rho))
    other = lam * (0.5 * rho * b - 0.5 * rho * s + b + 2 * s) / (1 - rho)
    same = lam * (-0.25 * rho**2 * b + 0.25 * rho**2 * s + rho * b - 0.5 * rho * s + s) / (
        (1 + 0.5 * rho) * (1 - rho))
    t = (-0.125 * rho**3 * b + 0.125 * rho**3 * s + 0.25 * rho**2 * b - 0.5 * rho**2 * s
         + 0.5 * rho * b + rho * s + 2 * b + 2 * s) / ((1 + 0.5 * rho) * (1 - rho))
    return behind, other, same, t


def test_descendants_model_a():
    m = model_a(discipline="lg")
    assert LocallyGatedMVA(m).service_desc(0, 2) == pytest.approx(1.0 * (1 + m.rho_i[1]))


def test_sym_point():
    sol = solve(SYM).solve_stationary()
    assert sol.behind_gate[0] == pytest.approx(0.26666666666666666, rel=1e-12)


@pytest.mark.parametrize("lam_total,b,s", [(0.4, 1, 1), (0.6, 1.3, 0.5), (0.8, 0.5, 2)])
def test_sym_closed_forms(lam_total, b, s):
    behind, other, same, t = closed_sym(lam_total, b, s)
    mva = solve(sym2(lam=lam_total / 2, b=b, s=s, discipline="lg"))
    sol = mva.solve_stationary()
    assert sol.behind_gate[0] == pytest.approx(behind, rel=1e-12)
    assert sol.before_gate[0, 1] == pytest.approx(other, rel=1e-12)
    assert sol.before_gate[0, 0] == pytest.approx(same, rel=1e-12)
    assert mva.mean_batch_sojourn() == pytest.approx(t, rel=1e-12)


def test_zero_load_limit():
    sol = solve(sym2(lam=1e-9, discipline="lg")).solve_stationary()
    assert np.all(np.abs(sol.before_gate) < 1e-7)
    assert np.all(np.abs(sol.behind_gate) < 1e-7)


@pytest.mark.parametrize("model", [SYM, model_a(), model_b(), model_c()], ids=["sym", "a", "b", "c"])
def test_identities(model):
    mva = solve(model)
    sol = mva.solve_stationary()
    assert np.all(sol.cond_len >= -1e-12)
    assert model.lam_i * sol.wait == pytest.approx(sol.mean_len, rel=1e-9)
    agg = sum(p * mva.mean_batch_sojourn_specific(k) for k, p in zip(model.batch.k, model.batch.p))
    assert agg == pytest.approx(mva.mean_batch_sojourn(), rel=1e-10)


def test_model_b_waits_symmetric():
    sol = solve(model_b()).solve_stationary()
    assert np.ptp(sol.wait) < 1e-12 * sol.wait[0]


def test_model_a_locally_gated_is_best():
    from pollbatch.experiments import mean_sojourn

    for rho in (0.1, 0.5, 0.9):
        m = model_a().with_load(rho)
        lg = mean_sojourn(m, "lg")
        assert lg < mean_sojourn(m, "ex") and lg < mean_sojourn(m, "gg")
