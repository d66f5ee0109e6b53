"""Globally-gated service: cycle moments, mean sojourn times and LSTs.

All gates close at the visit beginning of Q_1, so a batch arriving in one
cycle is served entirely in the next. Everything follows from the cycle time
C measured between successive visit beginnings of Q_1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .batch import check_batch, last_queue
from .errors import NonConvergence
from .model import Discipline, PollingModel, mean_cycle, validate

UNROLL_TOL = 1e-14
UNROLL_CAP = 100_000
# below this |b - a| (times E(C)) the cycle divided difference is replaced by
# a fourth-order derivative stencil with step STENCIL_STEP / E(C^R)
SECANT_WIDTH = 1e-5
STENCIL_STEP = 5e-4


@dataclass(frozen=True)
class GgCycle:
    mean_cycle: float
    second_moment: float
    residual: float


def service_lst(model: PollingModel, w) -> np.ndarray:
    """(B~_1(w), ..., B~_N(w)) stacked on a trailing axis."""
    w = np.asarray(w, dtype=float)
    return np.stack([d.lst(w) for d in model.service], axis=-1)


def switch_lst(model: PollingModel, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return np.stack([d.lst(w) for d in model.switch], axis=-1)


class GloballyGated:
    def __init__(self, model: PollingModel):
        self.model = m = validate(model).with_discipline(Discipline.GLOBALLY_GATED)
        self.n = m.n
        self.ec = m.mean_cycle

    # means

    def cycle(self) -> GgCycle:
        m = self.model
        cq = mean_cycle(m)
        rho = m.rho
        batch_work = float(m.batch.mean @ m.b2 + m.b @ m.batch.factorial_moments @ m.b)
        ec2 = (cq.second_moment_switch_total + 2 * rho * cq.mean_switch_total * cq.mean_cycle
               + m.lam * cq.mean_cycle * batch_work) / (1.0 - rho * rho)
        return GgCycle(cq.mean_cycle, ec2, ec2 / (2.0 * cq.mean_cycle))

    def cycle_second_moment(self) -> float:
        return self.cycle().second_moment

    def _sojourn_given_last(self, i: int, counts) -> float:
        m = self.model
        cr = self.cycle().residual
        before = slice(0, i)
        factor = 1.0 + 2.0 * m.rho_i[before].sum() + m.rho_i[i]
        return float(factor * cr + m.s[before].sum() + np.dot(counts[: i + 1], m.b[: i + 1]))

    def mean_batch_sojourn_specific(self, k) -> float:
        k = check_batch(k, self.n)
        return self._sojourn_given_last(last_queue(k, 0), k)

    def mean_batch_sojourn(self) -> float:
        b = self.model.batch
        return float(sum(
            b.comp[0, i] * self._sojourn_given_last(i, b.cond_mean[0, i])
            for i in range(self.n) if b.comp[0, i] > 0
        ))

    def waiting_times(self) -> np.ndarray:
        """E(W_i) of an individual customer.

        A customer of Q_i waits for the residual cycle, for the work that
        arrived at Q_1..Q_{i-1} during the whole current cycle and at Q_i
        during its past part, for the switch-overs before Q_i, and for the
        batch-mates served ahead of it.
        """
        m = self.model
        cr = self.cycle().residual
        out = np.empty(self.n)
        for i in range(self.n):
            mates = m.batch.batch_mates(i)
            before = slice(0, i)
            out[i] = ((1.0 + 2.0 * m.rho_i[before].sum() + m.rho_i[i]) * cr + m.s[before].sum()
                      + np.dot(mates[before], m.b[before]) + mates[i] * m.b[i])
        return out

    def mean_lengths(self) -> np.ndarray:
        """Mean number of waiting customers per queue, by Little's law."""
        return self.model.lam_i * self.waiting_times()

    # transforms

    def cycle_lst(self, w, with_info: bool = False):
        """C~(w) = prod_n S~(f^n(w)) with f(w) = lambda (1 - K~(B~(w)))."""
        m = self.model
        w = np.array(w, dtype=float)
        value = np.ones_like(w)
        steps = 0
        while np.any(w >= UNROLL_TOL):
            if steps >= UNROLL_CAP:
                raise NonConvergence("cycle LST unrolling hit the iteration cap")
            value = value * np.prod(switch_lst(m, w), axis=-1)
            w = m.lam * m.batch.one_minus_pgf(service_lst(m, w))
            steps += 1
        if with_info:
            return value, steps, float(np.max(w, initial=0.0))
        return value

    def cycle_past_residual_lst(self, w_past, w_res):
        return self._cycle_dd(np.asarray(w_past, float), np.asarray(w_res, float)) / self.ec

    def _cycle_dd(self, a, b):
        """(C~(a) - C~(b)) / (b - a), with a secant fallback when a ~ b."""
        a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
        gap = b - a
        close = np.abs(gap) < SECANT_WIDTH / self.ec
        safe_gap = np.where(close, 1.0, gap)
        direct = (self.cycle_lst(a) - self.cycle_lst(b)) / safe_gap
        if not np.any(close):
            return direct
        d = STENCIL_STEP / self.cycle().residual
        mid = 0.5 * (a + b)
        c = self.cycle_lst
        central = (c(mid + 2 * d) - 8 * c(mid + d) + 8 * c(np.maximum(mid - d, 0.0))
                   - c(np.maximum(mid - 2 * d, 0.0))) / (12 * d)
        forward = (25 * c(mid) - 48 * c(mid + d) + 36 * c(mid + 2 * d) - 16 * c(mid + 3 * d)
                   + 3 * c(mid + 4 * d)) / (12 * d)
        secant = np.where(mid >= 2 * d, central, forward)
        return np.where(close, secant, direct)

    def _common_factor(self, i: int, w) -> np.ndarray:
        """Everything in the sojourn LST except the batch's own services."""
        m = self.model
        bw = service_lst(m, w)
        upto = bw.copy()
        upto[..., i + 1 :] = 1.0
        before = bw.copy()
        before[..., i:] = 1.0
        a = m.lam * m.batch.one_minus_pgf(upto)
        b = m.lam * m.batch.one_minus_pgf(before) + w
        sw = np.prod(switch_lst(m, w)[..., :i], axis=-1)
        return self._cycle_dd(a, b) / self.ec * sw

    def sojourn_lst(self, k, w):
        k = check_batch(k, self.n)
        w = np.asarray(w, dtype=float)
        i = last_queue(k, 0)
        own = np.prod(service_lst(self.model, w)[..., : i + 1] ** k[: i + 1], axis=-1)
        return np.where(w == 0, 1.0, self._common_factor(i, w) * own)

    def sojourn_lst_arbitrary(self, w):
        m = self.model
        w = np.asarray(w, dtype=float)
        bw = service_lst(m, w)
        total = np.zeros_like(w)
        for i in range(self.n):
            if m.batch.comp[0, i] > 0:
                own = m.batch.conditional_pgf(bw, 0, i)
                total = total + m.batch.comp[0, i] * self._common_factor(i, w) * own
        return np.where(w == 0, 1.0, total)


def solve(model: PollingModel) -> GloballyGated:
    return GloballyGated(model)
