"""Analytic summaries and the comparison sweeps.

The symmetric two-queue family has closed forms for all three disciplines,
which double as oracles for the solvers. The three-queue sweep compares the
disciplines on the built-in Models a, b and c over a grid of loads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import globally_gated, mva_exhaustive, mva_locally_gated
from .builtins import builtin_model, sym2
from .errors import ConfigError, Unstable
from .model import Discipline, PollingModel, validate

DISCIPLINES = (Discipline.EXHAUSTIVE, Discipline.LOCALLY_GATED, Discipline.GLOBALLY_GATED)
TIE_TOL = 1e-9
MODELS_ABC = ("model_a", "model_b", "model_c")


@dataclass(frozen=True)
class AnalyticSummary:
    discipline: Discipline
    wait: np.ndarray  # E(W_i)
    mean_len: np.ndarray  # mean number waiting in Q_i
    class_T: dict  # support point -> E(T_k)
    mean_T: float
    mean_cycle: float


def solver_for(model: PollingModel, discipline=None):
    disc = model.discipline if discipline is None else Discipline.parse(discipline)
    model = validate(model).with_discipline(disc)
    if disc is Discipline.EXHAUSTIVE:
        return mva_exhaustive.solve(model)
    if disc is Discipline.LOCALLY_GATED:
        return mva_locally_gated.solve(model)
    return globally_gated.solve(model)


def mean_sojourn(model: PollingModel, discipline=None) -> float:
    return solver_for(model, discipline).mean_batch_sojourn()


def analyze(model: PollingModel, discipline=None) -> AnalyticSummary:
    solver = solver_for(model, discipline)
    m = solver.model
    if m.discipline is Discipline.GLOBALLY_GATED:
        wait, mean_len = solver.waiting_times(), solver.mean_lengths()
    else:
        sol = solver.solve_stationary()
        wait, mean_len = sol.wait, sol.mean_len
    classes = {tuple(int(x) for x in k): solver.mean_batch_sojourn_specific(k) for k in m.batch.k}
    return AnalyticSummary(m.discipline, wait, mean_len, classes, solver.mean_batch_sojourn(), m.mean_cycle)


def argmin(values: dict) -> list:
    """Every key whose value is within TIE_TOL (relative) of the minimum."""
    best = min(values.values())
    tol = TIE_TOL * max(1.0, abs(best))
    return [k for k, v in values.items() if v - best <= tol]


def argmin_label(values: dict) -> str:
    return "|".join(k.value if isinstance(k, Discipline) else str(k) for k in argmin(values))


# symmetric two-queue system; Lam is the total customer rate, rho = Lam * b


def sym2_closed_forms(Lam: float, b: float, s: float) -> dict:
    rho = Lam * b
    if rho >= 1:
        raise Unstable(rho)
    ex = (0.25 * rho**2 * b - 0.25 * rho**2 * s - rho * s + 2 * b + 2 * s) / (1 - rho)
    lg = (-0.125 * rho**3 * b + 0.125 * rho**3 * s + 0.25 * rho**2 * b - 0.5 * rho**2 * s
          + 0.5 * rho * b + rho * s + 2 * b + 2 * s) / ((1 + 0.5 * rho) * (1 - rho))
    gg = (0.5 * rho**2 * b - 0.5 * rho**2 * s + 3 * rho * b + 5.5 * rho * s + 4 * b + 5 * s) / (
        2 * (1 + rho) * (1 - rho))
    return {Discipline.EXHAUSTIVE: ex, Discipline.LOCALLY_GATED: lg, Discipline.GLOBALLY_GATED: gg}


@dataclass(frozen=True)
class Sym2Row:
    Lam: float
    b: float
    s: float
    rho: float
    stable: bool
    closed: dict
    solved: dict
    argmin: str
    mismatch: bool


def sym2_row(Lam: float, b: float, s: float) -> Sym2Row:
    rho = Lam * b
    try:
        closed = sym2_closed_forms(Lam, b, s)
        model = sym2(lam=Lam / 2, b=b, s=s)
        solved = {d: mean_sojourn(model, d) for d in DISCIPLINES}
    except Unstable:
        return Sym2Row(Lam, b, s, rho, False, {}, {}, "", False)
    mismatch = any(abs(closed[d] - solved[d]) > TIE_TOL * abs(closed[d]) for d in DISCIPLINES)
    return Sym2Row(Lam, b, s, rho, True, closed, solved, argmin_label(solved), mismatch)


def sym2_table(Lam: float, b_grid, s_grid) -> list[Sym2Row]:
    b_grid, s_grid = list(b_grid), list(s_grid)
    if not b_grid or not s_grid:
        raise ConfigError("b and s grids must be nonempty")
    if Lam <= 0:
        raise ConfigError("Lambda must be positive")
    if any(x <= 0 for x in b_grid) or any(x <= 0 for x in s_grid):
        raise ConfigError("grid values must be positive")
    return [sym2_row(Lam, b, s) for b in b_grid for s in s_grid]


@dataclass(frozen=True)
class SweepRow:
    model: str
    rho: float
    lam: float
    mean_T: dict
    argmin: str


def models_abc(rho_grid, models=MODELS_ABC) -> list[SweepRow]:
    rho_grid = list(rho_grid)
    if not rho_grid:
        raise ConfigError("rho grid must be nonempty")
    if any(not 0 < r < 1 for r in rho_grid):
        raise ConfigError("rho grid must lie in (0, 1)")
    rows = []
    for name in models:
        for rho in rho_grid:
            model = builtin_model(name, rho)
            values = {d: mean_sojourn(model, d) for d in DISCIPLINES}
            rows.append(SweepRow(name, rho, model.lam, values, argmin_label(values)))
    return rows
