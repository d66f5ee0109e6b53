import json

import numpy as np
import pytest

from pollbatch.builtins import builtin_model, model_a, model_b, model_c, sym2
from pollbatch.errors import InvalidModel, Unstable
from pollbatch.model import Discipline, PollingModel, load_model, mean_cycle, utilization, validate


def test_model_c_load():
    m = model_c(lam=0.5)
    assert m.rho == pytest.approx(0.48, rel=1e-14)
    assert m.lam_i == pytest.approx([0.5, 0.4, 0.3])


def test_model_a_cycle():
    m = model_a()
    assert m.rho == pytest.approx(0.5, rel=1e-14)
    assert mean_cycle(m).mean_cycle == pytest.approx(0.6, rel=1e-14)


def test_model_b_load():
    rho_i, rho = utilization(model_b(lam=0.6))
    assert rho == pytest.approx(0.6)
    assert np.allclose(rho_i, 0.2)


def test_cycle_second_moment_switch_total():
    cq = mean_cycle(sym2(lam=0.2, b=1.0, s=1.0))
    # sum of two independent exp(1): E(S^2) = 2 + 2 + 2*1*1
    assert cq.second_moment_switch_total == pytest.approx(6.0)


def test_with_load_rescales_lambda():
    m = builtin_model("model_c", rho=0.9)
    assert m.rho == pytest.approx(0.9, rel=1e-14)


def test_unstable():
    with pytest.raises(Unstable):
        sym2(lam=0.5, b=1.0)


def test_validate_idempotent():
    m = model_a()
    assert validate(validate(m)) == validate(m)


def test_zero_switch_rejected():
    m = model_b()
    from pollbatch.distributions import Distribution

    bad = PollingModel(m.lam, m.batch, m.service, (Distribution.deterministic(0.0),) * 3, m.discipline)
    with pytest.raises(InvalidModel):
        validate(bad)


def test_json_round_trip(tmp_path):
    m = model_c(discipline="lg")
    path = tmp_path / "m.json"
    path.write_text(json.dumps(m.to_dict()), encoding="utf-8")
    back = load_model(path)
    assert back.to_dict() == m.to_dict()
    assert back.discipline is Discipline.LOCALLY_GATED


def test_json_errors():
    base = model_b().to_dict()
    for broken in (
        {k: v for k, v in base.items() if k != "lambda"},
        {**base, "n": 2},
        {**base, "batch": [{"k": [1, 0, 0], "p": 0.5}]},
    ):
        with pytest.raises(InvalidModel):
            load_model(broken)


def test_discipline_aliases():
    assert Discipline.parse("exhaustive") is Discipline.EXHAUSTIVE
    assert Discipline.parse("GG") is Discipline.GLOBALLY_GATED
    with pytest.raises(InvalidModel):
        Discipline.parse("fifo")
