"""Pointwise transforms for exhaustive and locally-gated service.

Stationary joint queue-length PGFs at visit beginnings are evaluated by
unrolling the laws of motion: one backward step from the visit beginning of
Q_q substitutes the arguments of the previous visit and switch-over and
multiplies in a switch-over LST factor. The arguments contract to the all-ones
vector geometrically when rho < 1, where the PGF is 1.

Batch sojourn-time LSTs are assembled from these PGFs, conditioning on the
period the server is in when the batch arrives.

Conventions (0-based queues, arrays carry the w grid on leading axes):
  D[..., j, t]  LST of a queue-j service plus its descendants served up to
                and including the next visit of Q_t.
  span_vector(D, j, length, t)  vector with entries D[l, t] for l on the
                cyclic span of ``length`` queues starting at j, 1 elsewhere.
For locally-gated service the extra gate coordinate z_G counts the customers
before the gate of the queue being visited.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .batch import check_batch, last_queue
from .errors import ConfigError, InvalidPeriod, NonConvergence, TransformUnavailable
from .model import Discipline, PollingModel, validate
from .mva_exhaustive import span

FIXED_POINT_TOL = 1e-14
FIXED_POINT_CAP = 1_000_000
UNROLL_TOL = 1e-14
UNROLL_CAP = 1_000_000
# unrolling may stop early once 1 - z stagnates below this level
STALL_TOL = 1e-12
# |B~(x) - z_q| below this triggers interpolation of the visit ratio in z_q
SINGULAR_TOL = 1e-7
INTERP_STEP = 1e-3


@dataclass(frozen=True)
class PgfEvalResult:
    value: np.ndarray
    iterations: int
    residual: float


def _ones_like_rows(shape, n):
    return np.ones(tuple(shape) + (n,))


class TransformEngine:
    def __init__(self, model: PollingModel):
        self.model = m = validate(model)
        if m.discipline is Discipline.GLOBALLY_GATED:
            raise ConfigError("use globally_gated.GloballyGated for globally-gated service")
        if not m.has_transforms:
            raise TransformUnavailable("model has moments-only distributions")
        self.gated = m.discipline is Discipline.LOCALLY_GATED
        self.n = m.n
        self.ec = m.mean_cycle

    # elementary transforms

    def _b(self, j, x):
        return self.model.service[j].lst(x)

    def _s(self, j, x):
        return self.model.switch[j].lst(x)

    def _omp(self, z):
        """lambda (1 - K~(z))."""
        return self.model.lam * self.model.batch.one_minus_pgf(z)

    def busy_period_lst(self, j: int, x, z=None):
        """Least fixed point of y = B~_j(x + lambda (1 - K~(z with z_j = y))).

        Customers arriving at Q_j during the busy period are part of it, while
        their batch-mates elsewhere are weighted by the other coordinates of
        z. With z = 1 this is the ordinary busy period of Q_j. Iterated
        monotonically from 0.
        """
        x = np.asarray(x, dtype=float)
        if z is None:
            z = np.ones(x.shape + (self.n,))
        z = np.array(np.broadcast_to(z, x.shape + (self.n,)), dtype=float)
        y = np.zeros_like(x)
        for _ in range(FIXED_POINT_CAP):
            z[..., j] = y
            nxt = self._b(j, x + self._omp(z))
            if np.all(np.abs(nxt - y) <= FIXED_POINT_TOL):
                return nxt
            y = nxt
        raise NonConvergence(f"busy-period fixed point for queue {j + 1} did not converge")

    def _own_period(self, j, x, z):
        """Busy period (exhaustive) or single service (gated) of queue j."""
        return self._b(j, x + self._omp(z)) if self.gated else self.busy_period_lst(j, x, z)

    # descendant transforms

    def descendants(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        n = self.n
        d = np.ones(w.shape + (n, n))
        for t in range(n):
            for step in range(n):
                j = (t - step) % n
                vec = self.span_vector(d, j + 1, step, t)
                d[..., j, t] = self._own_period(j, w, vec)
        return d

    def span_vector(self, d, start, length, target):
        vec = np.ones(d.shape[:-1])
        for l in span(start, length, self.n):
            vec[..., l] = d[..., l, target]
        return vec

    def descendant_vector(self, d, j, i):
        """B_{j,i}: coordinates j..i-1 from D[., i-1], i.e. everything served
        before the server next starts on Q_i; all ones when j == i."""
        return self.span_vector(d, j, (i - j) % self.n, (i - 1) % self.n)

    def starred_vector(self, d, w, j, i):
        """B*_{j,i}: B_{j,i-1} with coordinate i set to B~_i(w)."""
        vec = self.span_vector(d, j, (i - j) % self.n, (i - 1) % self.n)
        vec[..., i] = self._b(i, w)
        return vec

    def descendant_lst(self, j: int, i: int, w):
        """(B_{j,i}, B*_{j,i}) at w, as arrays with a trailing queue axis."""
        w = np.asarray(w, dtype=float)
        d = self.descendants(w)
        return self.descendant_vector(d, j, i), self.starred_vector(d, w, j, i)

    def switch_chain(self, d, w, start, length, i):
        """prod of S~_{l,i-1}(w) over the span of ``length`` switch-overs from start."""
        n = self.n
        out = np.ones(np.shape(w))
        for l in span(start, length, n):
            vec = self.span_vector(d, l + 1, (i - l - 1) % n, (i - 1) % n)
            out = out * self._s(l, w + self._omp(vec))
        return out

    # laws of motion

    def _visit_step(self, q, z):
        """Argument substitution over the visit of Q_q (one law of motion)."""
        z = z.copy()
        if self.gated:
            z[..., q] = self._b(q, self._omp(z))
        else:
            z[..., q] = self.busy_period_lst(q, np.zeros(z.shape[:-1]), z)
        return z

    def visit_begin_pgf(self, i: int, z) -> PgfEvalResult:
        """Stationary joint PGF of the queue lengths at visit beginnings of Q_i.

        The gate coordinate, if present, is ignored: nothing is before the
        gate at a visit beginning.
        """
        z = np.array(z, dtype=float)[..., : self.n]
        value = np.ones(z.shape[:-1])
        q = i
        steps = 0
        gap = np.max(1.0 - z, initial=0.0)
        cycle_gap = gap
        while gap >= UNROLL_TOL:
            if steps >= UNROLL_CAP:
                raise NonConvergence("laws-of-motion unrolling did not converge")
            p = (q - 1) % self.n
            value = value * self._s(p, self._omp(z))
            z = self._visit_step(p, z)
            q = p
            steps += 1
            gap = np.max(1.0 - z, initial=0.0)
            if steps % self.n == 0:
                # a full cycle without contraction means rounding has taken over
                if gap >= cycle_gap and gap < STALL_TOL:
                    break
                cycle_gap = gap
        return PgfEvalResult(value, steps, float(gap))

    def _gate_arg(self, q, z, zg):
        # z with coordinate q replaced by the gate coordinate
        if zg is None:
            return z
        zz = z.copy()
        zz[..., q] = zg
        return zz

    def visit_end_pgf(self, i: int, z, zg=None):
        """Joint PGF at visit completions of Q_i (zg: before-gate count, gated)."""
        z = np.array(z, dtype=float)
        if self.gated:
            zz = z.copy()
            zz[..., i] = self._b(i, self._omp(self._gate_arg(i, z, zg)))
            return self.visit_begin_pgf(i, zz).value
        return self.visit_begin_pgf(i, self._visit_step(i, z)).value

    def switch_begin_pgf(self, i: int, z):
        """Joint PGF at switch-over beginnings after Q_i."""
        return self.visit_end_pgf(i, z, None)

    def _visit_ratio_raw(self, q, z, zg):
        x = self._omp(self._gate_arg(q, z, zg))
        num = self.visit_end_pgf(q, z, zg) - self.visit_begin_pgf(q, z).value
        den = self._b(q, x) - z[..., q]
        return num, den

    def visit_ratio(self, q, z, zg=None):
        """(LC^{V_q}(z) - LB^{V_q}(z)) / (B~_q(lambda - lambda K~(z)) - z_q).

        This equals lambda_q E(C) LB^{B_q}(z) / z_q and is analytic in z_q; where
        the quotient is 0/0 or nearly so it is interpolated along z_q.
        """
        z = np.array(z, dtype=float)
        zg = None if zg is None else np.asarray(zg, dtype=float)
        num, den = self._visit_ratio_raw(q, z, zg)
        bad = np.abs(den) < SINGULAR_TOL
        out = np.where(bad, 0.0, num / np.where(bad, 1.0, den))
        if np.any(bad):
            out = np.where(bad, self._interpolated_ratio(q, z, zg), out)
        return out

    def _interpolated_ratio(self, q, z, zg):
        zq = z[..., q]
        h = INTERP_STEP
        central = (zq - 2 * h >= 0) & (zq + 2 * h <= 1)
        # central 4-point stencil, else one-sided extrapolation from below
        offsets_c, weights_c = (-2, -1, 1, 2), (-1 / 6, 2 / 3, 2 / 3, -1 / 6)
        offsets_b, weights_b = (-1, -2, -3, -4), (4.0, -6.0, 4.0, -1.0)
        result = np.zeros(zq.shape)
        for offs, wts, mask in ((offsets_c, weights_c, central), (offsets_b, weights_b, ~central)):
            if not np.any(mask):
                continue
            acc = np.zeros(zq.shape)
            for o, wt in zip(offs, wts):
                zs = z.copy()
                zs[..., q] = np.clip(zq + o * h, 0.0, 1.0)
                num, den = self._visit_ratio_raw(q, zs, zg)
                # clipped points of the other stencil can be 0/0; they are masked out
                with np.errstate(invalid="ignore", divide="ignore"):
                    acc = acc + wt * num / den
            result = np.where(mask, acc, result)
        return result

    def service_begin_pgf(self, i: int, z, zg=None):
        """Joint PGF at service beginnings in Q_i (in-service customer included)."""
        z = np.array(z, dtype=float)
        lam_i = self.model.lam_i[i]
        if lam_i == 0:
            raise InvalidPeriod(f"queue {i + 1} has no arrivals, hence no service beginnings")
        return z[..., i] * self.visit_ratio(i, z, zg) / (lam_i * self.ec)

    def service_end_pgf(self, i: int, z, zg=None):
        z = np.array(z, dtype=float)
        lam_i = self.model.lam_i[i]
        x = self._omp(self._gate_arg(i, z, zg))
        return self.visit_ratio(i, z, zg) * self._b(i, x) / (lam_i * self.ec)

    # stationary queue lengths

    def stationary_queue_pgf(self, z):
        """Joint PGF of the numbers in system at an arbitrary time.

        Sums lambda_i (1 - z_i) LC^{B_i}(z) over queues and divides by
        lambda (1 - K~(z)).
        """
        z = np.array(z, dtype=float)
        x = self._omp(z)
        at_one = x == 0
        xs = np.where(at_one, 1.0, x)
        total = np.zeros(z.shape[:-1])
        for i in range(self.n):
            if self.model.lam_i[i] == 0:
                continue
            ratio = self.visit_ratio(i, z, z[..., i] if self.gated else None)
            total = total + (1 - z[..., i]) * ratio * self._b(i, x) / self.ec
        return np.where(at_one, 1.0, total / xs)

    def stationary_queue_pgf_by_period(self, z):
        """Same PGF, conditioning on the visit or switch-over the server is in."""
        z = np.array(z, dtype=float)
        m = self.model
        x = self._omp(z)
        at_one = x == 0
        xs = np.where(at_one, 1.0, x)
        total = np.zeros(z.shape[:-1])
        for i in range(self.n):
            zg = z[..., i] if self.gated else None
            if m.lam_i[i] > 0:
                ratio = self.visit_ratio(i, z, zg)
                total = total + z[..., i] * ratio * (1 - self._b(i, xs)) / (self.ec * xs)
            if m.s[i] > 0:
                total = total + self.switch_begin_pgf(i, z) * (1 - self._s(i, xs)) / (self.ec * xs)
        return np.where(at_one, 1.0, total)

    def marginal_mean(self, i: int) -> float:
        """E(number in Q_i) including the customer in service."""
        from .numdiff import lst_mean

        def pgf_along(h):
            h = np.asarray(h, dtype=float)
            z = np.ones(h.shape + (self.n,))
            z[..., i] = 1.0 - h
            return self.stationary_queue_pgf(z)

        return lst_mean(pgf_along, scale=1.0, h0=0.02)

    # batch sojourn times

    def period_factors(self, w):
        """k-independent parts of the conditioned sojourn LSTs.

        Returns (fv, fs, stars), each with shape w.shape + (N, N) for the first
        two: fv[..., j, i] for an arrival in the visit preceding theta_j's queue
        j (V_j exhaustive, V_{j-1} gated), fs[..., j, i] for an arrival in
        S_{j-1}, both for batches in K_{j,i}; stars[..., j, i, :] is B*_{j,i}.
        """
        w = np.atleast_1d(np.asarray(w, dtype=float))
        # w = 0 is answered exactly by the callers; keep it out of the 0/0 forms
        w = np.where(w == 0, 1.0, w)
        return _cached_factors(self, w.tobytes(), w.shape)

    def _compute_factors(self, w):
        n = self.n
        m = self.model
        d = self.descendants(w)
        fv = np.zeros(w.shape + (n, n))
        fs = np.zeros(w.shape + (n, n))
        stars = np.zeros(w.shape + (n, n, n))
        for j in range(n):
            p = (j - 1) % n
            for i in range(n):
                star = self.starred_vector(d, w, j, i)
                stars[..., j, i, :] = star
                w_res = w + self._omp(self.span_vector(d, j, (i - j) % n, (i - 1) % n))
                chain = self.switch_chain(d, w, j, (i - j) % n, i)
                # arrival during the switch-over S_{j-1}
                if m.s[p] > 0:
                    lb = self.switch_begin_pgf(p, star)
                    fs[..., j, i] = lb * m.switch[p].past_residual_lst(self._omp(star), w_res) * chain
                if self.gated:
                    fv[..., j, i] = self._gated_visit_factor(d, w, j, i, w_res)
                elif m.lam_i[j] > 0:
                    lb = self.service_begin_pgf(j, star)
                    past = m.service[j].past_residual_lst(self._omp(star), w_res)
                    fv[..., j, i] = lb * past * chain / star[..., j]
        return fv, fs, stars

    def _gated_visit_factor(self, d, w, j, i, w_res):
        """Arrival during V_{j-1} with the batch in K_{j,i} (locally-gated)."""
        n = self.n
        m = self.model
        p = (j - 1) % n
        if m.lam_i[p] == 0:
            return np.zeros(np.shape(w))
        wrap = i == p
        length = n if wrap else (i - p) % n
        g = self.span_vector(d, p, length, (i - 1) % n)
        if wrap:
            zg = self._b(i, w)
        else:
            g[..., i] = self._b(i, w)
            zg = np.ones(np.shape(w))
        lb = self.service_begin_pgf(p, g, zg)
        past = m.service[p].past_residual_lst(self._omp(self._gate_arg(p, g, zg)), w_res)
        chain = self.switch_chain(d, w, p, length, i)
        return lb * past * chain / g[..., p]

    def _weights(self):
        """Weights of the visit and switch-over conditioning, indexed by j."""
        m = self.model
        prev = np.roll(np.arange(self.n), 1)
        visit = m.visit_means[prev] if self.gated else m.visit_means
        return visit / self.ec, m.s[prev] / self.ec

    def conditioned_sojourn_lst(self, k, period, w):
        """LST of T_k given the server's period at the arrival epoch.

        ``period`` is ("V", q) for visit V_q or ("S", q) for switch-over S_q,
        0-based queue q.
        """
        k = check_batch(k, self.n)
        kind, q = period
        if kind not in ("V", "S") or not 0 <= q < self.n:
            raise InvalidPeriod(f"bad period {period!r}")
        w = np.asarray(w, dtype=float)
        fv, fs, stars = self.period_factors(w)
        # the batch's service order starts at the queue after the period
        j = (q + 1) % self.n if (kind == "S" or self.gated) else q
        i = last_queue(k, j)
        f = (fv if kind == "V" else fs)[..., j, i]
        own = np.prod(stars[..., j, i, :] ** k, axis=-1)
        return np.where(w == 0, 1.0, (f * own).reshape(w.shape))

    def sojourn_lst(self, k, w):
        k = check_batch(k, self.n)
        w = np.asarray(w, dtype=float)
        fv, fs, stars = self.period_factors(w)
        wv, ws = self._weights()
        total = 0.0
        for j in range(self.n):
            i = last_queue(k, j)
            own = np.prod(stars[..., j, i, :] ** k, axis=-1)
            total = total + (wv[j] * fv[..., j, i] + ws[j] * fs[..., j, i]) * own
        return np.where(w == 0, 1.0, np.reshape(total, w.shape))

    def sojourn_lst_arbitrary(self, w):
        w = np.asarray(w, dtype=float)
        fv, fs, stars = self.period_factors(w)
        wv, ws = self._weights()
        b = self.model.batch
        total = 0.0
        for j in range(self.n):
            for i in range(self.n):
                if b.comp[j, i] == 0:
                    continue
                own = b.conditional_pgf(stars[..., j, i, :], j, i)
                total = total + b.comp[j, i] * (wv[j] * fv[..., j, i] + ws[j] * fs[..., j, i]) * own
        return np.where(w == 0, 1.0, np.reshape(total, w.shape))


@lru_cache(maxsize=64)
def _cached_factors(engine, key, shape):
    w = np.frombuffer(key, dtype=float).reshape(shape)
    return engine._compute_factors(w)


def sojourn_lst(model: PollingModel, w, k=None):
    """LST of the batch sojourn time for any discipline (arbitrary batch if k is None)."""
    if model.discipline is Discipline.GLOBALLY_GATED:
        from .globally_gated import GloballyGated

        solver = GloballyGated(model)
    else:
        solver = TransformEngine(model)
    w = np.asarray(w, dtype=float)
    return solver.sojourn_lst_arbitrary(w) if k is None else solver.sojourn_lst(k, w)
