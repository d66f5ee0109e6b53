"""Mean value analysis for exhaustive service.

The intervisit period theta_j is the switch-over S_{j-1} followed by the visit
V_j. Unknowns x[i, j] are the mean numbers of waiting customers in queue i
while the server is in theta_j.

A tagged customer that arrives during a span of intervisit periods stays until
the span ends, so the residual span it sees also contains the services of its
own batch-mates. That term is E(K_n K_c)/E(K_c) for batch-mates in queue n of
a customer in queue c, and it enters both the age equations and the waiting
time equation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .batch import check_batch, last_queue
from .model import Discipline, PollingModel, validate
from .errors import SingularSystem


def span(start: int, length: int, n: int) -> list[int]:
    return [(start + m) % n for m in range(length)]


def solve_dense(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """LU with partial pivoting (LAPACK gesv), with a singularity check."""
    try:
        sol = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"MVA system is singular: {exc}") from None
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("MVA system produced non-finite values")
    return sol


@dataclass(frozen=True)
class MvaSolutionExh:
    cond_len: np.ndarray  # cond_len[i, j] = E(L_i | theta_j), waiting customers
    mean_len: np.ndarray
    wait: np.ndarray
    theta: np.ndarray
    mean_cycle: float


class ExhaustiveMVA:
    def __init__(self, model: PollingModel):
        self.model = m = validate(model)
        self.n = m.n
        self.ec = m.mean_cycle
        self.visit = m.visit_means
        # theta_j = (S_{j-1}, V_j)
        self.theta = np.roll(m.s, 1) + self.visit
        self._sol: MvaSolutionExh | None = None

    # descendant means

    def service_desc(self, j: int, i: int, residual: bool = False, wrap: bool = False) -> float:
        """E(B_{j,i}): service in queue j plus descendants served before Q_i.

        With i == j this is the plain service time; ``wrap`` instead takes the
        whole cycle j..j-1.
        """
        m = self.model
        base = m.b_res[j] if residual else m.b[j]
        count = self.n if (wrap and i == j) else (i - j) % self.n
        return float(base / np.prod(1.0 - m.rho_i[span(j, count, self.n)]))

    def switch_desc(self, j: int, i: int, residual: bool = False) -> float:
        """E(S_{j,i}) with descendants over queues j+1 .. i-1."""
        m = self.model
        base = m.s_res[j] if residual else m.s[j]
        count = (i - j - 1) % self.n
        return float(base / np.prod(1.0 - m.rho_i[span(j + 1, count, self.n)]))

    # linear system

    def _idx(self, i: int, j: int) -> int:
        return i * self.n + j

    def _residual_integral(self, c: int, start: int, length: int):
        """E(theta_span) * R for a customer of queue c arriving in the span.

        Returns (coefficients on x, constant).
        """
        n = self.n
        m = self.model
        coef = np.zeros(n * n)
        const = 0.0
        if length == 0:
            return coef, const
        periods = span(start, length, n)
        end = periods[-1]
        t = (end + 1) % n
        mates = m.batch.batch_mates(c)
        for pos, l in enumerate(periods):
            prev = (l - 1) % n
            const += self.visit[l] * self.service_desc(l, t, residual=True)
            const += m.s[prev] * self.switch_desc(prev, t, residual=True)
            rest = periods[pos:]
            for q in rest:
                bqt = self.service_desc(q, t)
                coef[self._idx(q, l)] += self.theta[l] * bqt
                const += self.theta[l] * mates[q] * bqt
            for q in rest[:-1]:
                const += self.theta[l] * self.switch_desc(q, t)
        return coef, const

    def _wait_parts(self, i: int):
        """Waiting time of a queue-i customer minus the L_i b_i term."""
        n = self.n
        m = self.model
        prev = (i - 1) % n
        coef, const = self._residual_integral(i, i + 1, n - 1)
        const += (self.ec - self.theta[i]) * m.s[prev]
        const += m.s[prev] * m.s_res[prev]
        coef = coef / self.ec
        const = const / self.ec
        const += m.batch.batch_mates(i)[i] * m.b[i] + m.rho_i[i] * m.b_res[i]
        return coef, const

    def solve_stationary(self) -> MvaSolutionExh:
        if self._sol is not None:
            return self._sol
        n = self.n
        m = self.model
        a = np.zeros((n * n, n * n))
        rhs = np.zeros(n * n)
        row = 0
        for i in range(n):
            for j in range(n):
                if j == i:
                    continue
                length = (j - i) % n
                coef, const = self._residual_integral(i, i + 1, length)
                a[row] -= m.lam_i[i] * coef
                rhs[row] += m.lam_i[i] * const
                for l in span(i + 1, length, n):
                    a[row, self._idx(i, l)] += self.theta[l]
                row += 1
        for i in range(n):
            coef, const = self._wait_parts(i)
            a[row] -= m.lam_i[i] * coef
            rhs[row] += m.lam_i[i] * const
            for j in range(n):
                a[row, self._idx(i, j)] += (1.0 - m.rho_i[i]) * self.theta[j] / self.ec
            row += 1
        x = solve_dense(a, rhs).reshape(n, n)
        mean_len = x @ self.theta / self.ec
        wait = np.empty(n)
        for i in range(n):
            coef, const = self._wait_parts(i)
            wait[i] = mean_len[i] * m.b[i] + coef @ x.ravel() + const
        self._sol = MvaSolutionExh(x, mean_len, wait, self.theta.copy(), self.ec)
        return self._sol

    # batch sojourn times

    def _period_sojourn(self, j: int, i: int, counts) -> float:
        """E(theta_j) * E(T | arrival in theta_j, last member in queue i).

        ``counts[l]`` is the number (or conditional mean) of batch members in
        queue l.
        """
        n = self.n
        m = self.model
        x = self.solve_stationary().cond_len
        prev = (j - 1) % n
        out = self.visit[j] * self.service_desc(j, i, residual=True)
        out += m.s[prev] * self.switch_desc(prev, i, residual=True)
        queues = span(j, (i - j) % n + 1, n)
        inner = sum((x[l, j] + counts[l]) * self.service_desc(l, i) for l in queues)
        inner += sum(self.switch_desc(l, i) for l in queues[:-1])
        return out + self.theta[j] * inner

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


def solve(model: PollingModel) -> ExhaustiveMVA:
    mva = ExhaustiveMVA(model.with_discipline(Discipline.EXHAUSTIVE))
    mva.solve_stationary()
    return mva
