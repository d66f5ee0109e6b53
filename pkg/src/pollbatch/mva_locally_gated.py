"""Mean value analysis for locally-gated service.

Here theta_j is the visit V_j followed by the switch-over S_j. Every arriving
customer is placed before the gate and moves behind it when its queue's next
visit begins. Unknowns: y[i, j], the mean number before the gate in queue i
during theta_j, and h[i], the mean number behind the gate in queue i during
theta_i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .batch import check_batch, last_queue
from .model import Discipline, PollingModel, validate
from .mva_exhaustive import solve_dense, span


@dataclass(frozen=True)
class MvaSolutionLG:
    before_gate: np.ndarray  # before_gate[i, j]
    behind_gate: np.ndarray  # behind_gate[i], during theta_i
    mean_len: np.ndarray
    wait: np.ndarray
    theta: np.ndarray
    mean_cycle: float

    @property
    def cond_len(self) -> np.ndarray:
        out = self.before_gate.copy()
        out[np.diag_indices_from(out)] += self.behind_gate
        return out


class LocallyGatedMVA:
    def __init__(self, model: PollingModel):
        self.model = m = validate(model)
        self.n = m.n
        self.ec = m.mean_cycle
        self.visit = m.visit_means
        self.theta = self.visit + m.s
        self._sol: MvaSolutionLG | None = None

    def _growth(self, j: int, i: int) -> float:
        # product of (1 + rho_l) over l = j+1 .. i-1
        return float(np.prod(1.0 + self.model.rho_i[span(j + 1, (i - j - 1) % self.n, self.n)]))

    def service_desc(self, j: int, i: int, residual: bool = False) -> float:
        """E(B_{j,i}): service in queue j plus descendants served before Q_i."""
        m = self.model
        return float((m.b_res[j] if residual else m.b[j]) * self._growth(j, i))

    def switch_desc(self, j: int, i: int, residual: bool = False) -> float:
        m = self.model
        return float((m.s_res[j] if residual else m.s[j]) * self._growth(j, i))

    def _y(self, i: int, j: int) -> int:
        return i * self.n + j

    def _h(self, i: int) -> int:
        return self.n * self.n + i

    def _residual_integral(self, c: int, start: int, length: int):
        n = self.n
        m = self.model
        coef = np.zeros(n * n + n)
        const = 0.0
        periods = span(start, length, n)
        t = (periods[-1] + 1) % n
        mates = m.batch.batch_mates(c)
        for pos, l in enumerate(periods):
            const += self.visit[l] * (self.service_desc(l, t, True) + self.switch_desc(l, t))
            const += m.s[l] * self.switch_desc(l, t, True)
            coef[self._h(l)] += self.theta[l] * self.service_desc(l, t)
            for q in periods[pos + 1 :]:
                bqt = self.service_desc(q, t)
                coef[self._y(q, l)] += self.theta[l] * bqt
                const += self.theta[l] * (mates[q] * bqt + self.switch_desc(q, t))
        return coef, const

    def solve_stationary(self) -> MvaSolutionLG:
        if self._sol is not None:
            return self._sol
        n = self.n
        m = self.model
        size = n * n + n
        a = np.zeros((size, size))
        rhs = np.zeros(size)
        row = 0
        for i in range(n):
            for j in range(n):
                length = (j - i) % n + 1
                coef, const = self._residual_integral(i, i, length)
                a[row] -= m.lam_i[i] * coef
                rhs[row] += m.lam_i[i] * const
                for l in span(i, length, n):
                    a[row, self._y(i, l)] += self.theta[l]
                row += 1
        for i in range(n):
            coef, const = self._residual_integral(i, i, n)
            a[row] -= m.lam_i[i] * coef / self.ec
            rhs[row] += m.lam_i[i] * const / self.ec + m.rho_i[i] * m.batch.batch_mates(i)[i]
            for j in range(n):
                a[row, self._y(i, j)] += (1.0 - m.rho_i[i]) * self.theta[j] / self.ec
            a[row, self._h(i)] += self.theta[i] / self.ec
            row += 1
        u = solve_dense(a, rhs)
        y = u[: n * n].reshape(n, n)
        h = u[n * n :]
        before = y @ self.theta / self.ec
        mean_len = before + self.theta * h / self.ec
        wait = np.empty(n)
        for i in range(n):
            coef, const = self._residual_integral(i, i, n)
            wait[i] = (before[i] + m.batch.batch_mates(i)[i]) * m.b[i] + (coef @ u + const) / self.ec
        self._sol = MvaSolutionLG(y, h, mean_len, wait, self.theta.copy(), self.ec)
        return self._sol

    def _period_sojourn(self, j: int, i: int, counts) -> float:
        """E(theta_{j-1}) * E(T | arrival in theta_{j-1}, last member in queue i)."""
        n = self.n
        m = self.model
        sol = self.solve_stationary()
        y, h = sol.before_gate, sol.behind_gate
        p = (j - 1) % n
        out = self.visit[p] * (self.service_desc(p, i, True) + self.switch_desc(p, i))
        out += m.s[p] * self.switch_desc(p, i, True)
        inner = h[p] * self.service_desc(p, i)
        for l in span(j, (i - j) % n, n):
            inner += (y[l, p] + counts[l]) * self.service_desc(l, i) + self.switch_desc(l, i)
        inner += (y[i, p] + counts[i]) * m.b[i]
        return out + self.theta[p] * inner

    def mean_batch_sojourn_specific(self, k) -> float:
        k = check_batch(k, self.n)
        total = sum(self._period_sojourn(j, last_queue(k, j), k) for j in range(self.n))
        return float(total / self.ec)

    def mean_batch_sojourn(self) -> float:
        b = self.model.batch
        total = 0.0
        for j in range(self.n):
            for i in range(self.n):
                if b.comp[j, i] > 0:
                    total += b.comp[j, i] * self._period_sojourn(j, i, b.cond_mean[j, i])
        return float(total / self.ec)


def solve(model: PollingModel) -> LocallyGatedMVA:
    mva = LocallyGatedMVA(model.with_discipline(Discipline.LOCALLY_GATED))
    mva.solve_stationary()
    return mva
