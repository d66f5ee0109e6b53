"""Discrete-event simulation of the cyclic polling system with batch arrivals.

The server's trajectory is simulated directly: visits in cyclic order, with
the gate rule of the discipline deciding how many customers each visit
serves. Arrivals are generated up front; since every queue is FCFS, the
customers of a queue can be stored in arrival order and admitted by moving a
pointer, which keeps the event loop to a few array operations per customer.

Each replication owns four independent streams (arrivals, batch vectors,
service times, switch-over times) spawned from the master seed, so runs that
differ only in discipline share their random inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
from scipy import stats

from .errors import ConfigError, TransformUnavailable
from .model import Discipline, PollingModel, validate

_DISC_CODE = {Discipline.EXHAUSTIVE: 0, Discipline.LOCALLY_GATED: 1, Discipline.GLOBALLY_GATED: 2}
CONFIDENCE = 0.99


@dataclass(frozen=True)
class SimConfig:
    replications: int = 20
    batches_per_replication: int = 200_000
    warmup_fraction: float = 0.1
    seed: int = 20240601
    lst_probe_points: tuple[float, ...] = (0.1, 0.5, 1.0)
    pgf_probe_points: tuple[tuple[float, ...], ...] = ()
    # batches generated past the measured ones so that late measured
    # batches still see later arrivals
    tail_batches: int | None = None

    def __post_init__(self):
        if self.replications < 2:
            raise ConfigError("need at least 2 replications for a confidence interval")
        if not 0 <= self.warmup_fraction < 1:
            raise ConfigError("warmup_fraction must be in [0, 1)")
        if self.batches_per_replication < 10:
            raise ConfigError("batches_per_replication too small")
        if any(w < 0 for w in self.lst_probe_points):
            raise ConfigError("LST probe points must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class Estimate:
    mean: float
    half_width: float

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high


def estimate(samples) -> Estimate:
    """Student-t interval over independent replication means."""
    x = np.asarray(samples, dtype=float)
    r = len(x)
    sd = x.std(ddof=1)
    hw = float(stats.t.ppf(0.5 + CONFIDENCE / 2, r - 1) * sd / np.sqrt(r)) if sd > 0 else 0.0
    return Estimate(float(x.mean()), hw)


@dataclass(frozen=True)
class SimEstimate:
    mean_T: Estimate
    mean_W: tuple[Estimate, ...]
    mean_L: tuple[Estimate, ...]
    mean_in_system: tuple[Estimate, ...]
    serving_fraction: tuple[Estimate, ...]
    mean_C: Estimate
    residual_C: Estimate
    empirical_lst: dict[float, Estimate]
    cycle_lst: dict[float, Estimate]
    visit_begin_pgf: dict[tuple[float, ...], Estimate]
    class_T: dict[tuple[int, ...], Estimate]
    per_replication: dict[str, np.ndarray] = field(repr=False, default_factory=dict)


@numba.njit(cache=True)
def _admit(q, t, tail, qend, cust_t):
    i = tail[q]
    while i < qend[q] and cust_t[i] <= t:
        i += 1
    tail[q] = i


@numba.njit(cache=True)
def _run(disc, n, cust_t, cust_batch, cust_serv, qstart, qend, batch_left, batch_t,
         switch, t_lo, t_hi, meas_lo, meas_hi, cyc_w, pgf_z):
    """Event loop for one replication; returns the raw accumulators."""
    n_batches = batch_left.shape[0]
    completion = np.full(n_batches, np.nan)
    last_q = np.full(n_batches, -1, dtype=np.int64)
    head = qstart.copy()
    tail = qstart.copy()
    gate = qstart.copy()
    sw_ptr = np.zeros(n, dtype=np.int64)
    wait_sum = np.zeros(n)
    wait_cnt = np.zeros(n)
    len_area = np.zeros(n)
    serve_area = np.zeros(n)
    n_cw = cyc_w.shape[0]
    n_pz = pgf_z.shape[0]
    cyc = np.zeros(2 + n_cw)  # count, sum C, sum e^{-wC}
    cyc2 = 0.0
    pgf_acc = np.zeros(n_pz)
    pgf_cnt = 0
    remaining = meas_hi - meas_lo
    t = 0.0
    last_cycle_start = -1.0
    status = 0
    while remaining > 0 or t < t_hi:
        for q in range(n):
            if q == 0:
                if last_cycle_start >= t_lo and t <= t_hi:
                    c = t - last_cycle_start
                    cyc[0] += 1.0
                    cyc[1] += c
                    cyc2 += c * c
                    for a in range(n_cw):
                        cyc[2 + a] += np.exp(-cyc_w[a] * c)
                last_cycle_start = t
                if disc == 2 or (n_pz > 0 and t_lo <= t <= t_hi):
                    for r in range(n):
                        _admit(r, t, tail, qend, cust_t)
                    if disc == 2:
                        for r in range(n):
                            gate[r] = tail[r]
                    if n_pz > 0 and t_lo <= t <= t_hi:
                        for a in range(n_pz):
                            v = 1.0
                            for r in range(n):
                                v *= pgf_z[a, r] ** (tail[r] - head[r])
                            pgf_acc[a] += v
                        pgf_cnt += 1
            _admit(q, t, tail, qend, cust_t)
            if disc == 1:
                gate[q] = tail[q]
            while True:
                if disc == 0:
                    if head[q] >= tail[q]:
                        break
                elif head[q] >= gate[q]:
                    break
                c = head[q]
                arr = cust_t[c]
                b = cust_batch[c]
                lo = max(arr, t_lo)
                hi = min(t, t_hi)
                if hi > lo:
                    len_area[q] += hi - lo
                if meas_lo <= b < meas_hi:
                    wait_sum[q] += t - arr
                    wait_cnt[q] += 1.0
                start = t
                t += cust_serv[c]
                lo = max(start, t_lo)
                hi = min(t, t_hi)
                if hi > lo:
                    serve_area[q] += hi - lo
                head[q] += 1
                batch_left[b] -= 1
                if batch_left[b] == 0:
                    completion[b] = t
                    last_q[b] = q
                    if meas_lo <= b < meas_hi:
                        remaining -= 1
                if disc == 0:
                    _admit(q, t, tail, qend, cust_t)
            if sw_ptr[q] >= switch.shape[1]:
                status = 1
                return completion, last_q, wait_sum, wait_cnt, len_area, serve_area, cyc, cyc2, pgf_acc, pgf_cnt, status
            t += switch[q, sw_ptr[q]]
            sw_ptr[q] += 1
        if t > batch_t[n_batches - 1] and remaining > 0 and head_all_done(head, qend, n):
            status = 2
            break
    # customers still waiting at the end of the window
    for q in range(n):
        _admit(q, t_hi, tail, qend, cust_t)
        for c in range(head[q], tail[q]):
            lo = max(cust_t[c], t_lo)
            if t_hi > lo:
                len_area[q] += t_hi - lo
    return completion, last_q, wait_sum, wait_cnt, len_area, serve_area, cyc, cyc2, pgf_acc, pgf_cnt, status


@numba.njit(cache=True)
def head_all_done(head, qend, n):
    for q in range(n):
        if head[q] < qend[q]:
            return False
    return True


@dataclass
class _Replication:
    sojourn: np.ndarray
    batch_type: np.ndarray
    arrival: np.ndarray
    completion: np.ndarray
    last_queue: np.ndarray
    wait: np.ndarray
    length: np.ndarray
    serving: np.ndarray
    cycle_mean: float
    cycle_residual: float
    cycle_lst: np.ndarray
    pgf: np.ndarray


def _streams(seed: int, reps: int):
    root = np.random.SeedSequence(seed)
    return [[np.random.Generator(np.random.PCG64(s)) for s in child.spawn(4)] for child in root.spawn(reps)]


def _replicate(model: PollingModel, disc: int, cfg: SimConfig, gens, cyc_w, pgf_z) -> _Replication:
    g_arr, g_batch, g_serv, g_sw = gens
    n = model.n
    n_meas_end = cfg.batches_per_replication
    n_warm = int(cfg.warmup_fraction * n_meas_end)
    tail_extra = cfg.tail_batches if cfg.tail_batches is not None else max(1000, n_meas_end // 20)
    n_tot = n_meas_end + tail_extra
    batch_t = np.cumsum(g_arr.exponential(1.0 / model.lam, n_tot))
    btype = g_batch.choice(model.batch.size, size=n_tot, p=model.batch.p)
    kmat = model.batch.k[btype]  # (n_tot, n)
    sizes = kmat.sum(axis=1)
    # per-queue customer lists in arrival order
    cust_t, cust_b, cust_s, qstart, qend = [], [], [], [], []
    offset = 0
    for q in range(n):
        counts = kmat[:, q]
        ids = np.repeat(np.arange(n_tot), counts)
        qstart.append(offset)
        offset += ids.size
        qend.append(offset)
        cust_b.append(ids)
        cust_t.append(batch_t[ids])
        cust_s.append(model.service[q].sample(g_serv, ids.size))
    cust_t = np.concatenate(cust_t)
    cust_b = np.concatenate(cust_b).astype(np.int64)
    cust_s = np.concatenate(cust_s).astype(float)
    qstart = np.array(qstart, dtype=np.int64)
    qend = np.array(qend, dtype=np.int64)
    t_lo = batch_t[n_warm] if n_warm > 0 else 0.0
    t_hi = batch_t[n_meas_end - 1]
    horizon = batch_t[-1]
    cap = int(1.5 * horizon / model.mean_cycle) + 1000
    sw_state = g_sw.bit_generator.state
    while True:
        g_sw.bit_generator.state = sw_state
        switch = np.stack([model.switch[q].sample(g_sw, cap) for q in range(n)]).astype(float)
        out = _run(disc, n, cust_t, cust_b, cust_s, qstart, qend, sizes.copy(), batch_t,
                   switch, t_lo, t_hi, n_warm, n_meas_end, cyc_w, pgf_z)
        if out[-1] != 1:
            break
        cap *= 2
    completion, last_q, wait_sum, wait_cnt, len_area, serve_area, cyc, cyc2, pgf_acc, pgf_cnt, status = out
    if status == 2:
        raise RuntimeError("simulation ran out of arrivals before all measured batches completed")
    sel = slice(n_warm, n_meas_end)
    window = t_hi - t_lo
    with np.errstate(invalid="ignore", divide="ignore"):
        wait = np.where(wait_cnt > 0, wait_sum / np.maximum(wait_cnt, 1), np.nan)
    ncyc = max(cyc[0], 1.0)
    return _Replication(
        sojourn=completion[sel] - batch_t[sel],
        batch_type=btype[sel],
        arrival=batch_t[sel],
        completion=completion[sel],
        last_queue=last_q[sel],
        wait=wait,
        length=len_area / window,
        serving=serve_area / window,
        cycle_mean=cyc[1] / ncyc,
        cycle_residual=cyc2 / (2.0 * cyc[1]) if cyc[1] > 0 else np.nan,
        cycle_lst=cyc[2:] / ncyc,
        pgf=pgf_acc / max(pgf_cnt, 1),
    )


def run(model: PollingModel, discipline=None, config: SimConfig = SimConfig(),
        trace_path: str | Path | None = None) -> SimEstimate:
    model = validate(model)
    disc_enum = model.discipline if discipline is None else Discipline.parse(discipline)
    if not model.has_transforms:
        raise TransformUnavailable("cannot sample a moments-only distribution")
    if model.lam <= 0:
        raise ConfigError("simulation needs a positive arrival rate")
    disc = _DISC_CODE[disc_enum]
    n = model.n
    lst_w = np.asarray(config.lst_probe_points, dtype=float)
    pgf_z = np.asarray(config.pgf_probe_points, dtype=float).reshape(-1, n)
    reps = []
    for gens in _streams(config.seed, config.replications):
        reps.append(_replicate(model, disc, config, gens, lst_w, pgf_z))

    per = {
        "mean_T": np.array([r.sojourn.mean() for r in reps]),
        "mean_W": np.array([r.wait for r in reps]),
        "mean_L": np.array([r.length for r in reps]),
        "serving": np.array([r.serving for r in reps]),
        "mean_C": np.array([r.cycle_mean for r in reps]),
        "residual_C": np.array([r.cycle_residual for r in reps]),
    }
    per["in_system"] = per["mean_L"] + per["serving"]
    lst = {}
    for a, w in enumerate(lst_w):
        vals = np.array([np.exp(-w * r.sojourn).mean() for r in reps])
        per[f"lst_{w!r}"] = vals
        lst[float(w)] = estimate(vals)
    cyc_lst = {float(w): estimate([r.cycle_lst[a] for r in reps]) for a, w in enumerate(lst_w)}
    pgf = {tuple(float(x) for x in z): estimate([r.pgf[a] for r in reps]) for a, z in enumerate(pgf_z)}
    classes = {}
    for s_idx, k in enumerate(model.batch.k):
        vals = []
        for r in reps:
            hit = r.batch_type == s_idx
            if hit.any():
                vals.append(r.sojourn[hit].mean())
        if len(vals) >= 2:
            classes[tuple(int(x) for x in k)] = estimate(vals)

    if trace_path is not None:
        write_trace(trace_path, reps)

    def per_queue(key):
        return tuple(estimate(per[key][:, q]) for q in range(n))

    return SimEstimate(
        mean_T=estimate(per["mean_T"]),
        mean_W=per_queue("mean_W"),
        mean_L=per_queue("mean_L"),
        mean_in_system=per_queue("in_system"),
        serving_fraction=per_queue("serving"),
        mean_C=estimate(per["mean_C"]),
        residual_C=estimate(per["residual_C"]),
        empirical_lst=lst,
        cycle_lst=cyc_lst,
        visit_begin_pgf=pgf,
        class_T=classes,
        per_replication=per,
    )


def write_trace(path, reps) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["replication", "batch_id", "arrival_time", "completion_time", "sojourn", "last_queue"])
        for r_idx, r in enumerate(reps):
            for b in range(r.sojourn.size):
                out.writerow([r_idx, b, repr(float(r.arrival[b])), repr(float(r.completion[b])),
                              repr(float(r.sojourn[b])), int(r.last_queue[b]) + 1])
