"""Command-line front end. Every table is CSV on stdout (or --output).

Exit codes: 0 ok, 2 invalid input, 3 unstable model, 4 non-convergence.
"""

from __future__ import annotations

import csv
import sys
from contextlib import contextmanager

import click
import numpy as np

from . import experiments
from .errors import ConfigError, PollingError
from .model import Discipline, load_model
from .simulator import SimConfig
from .simulator import run as simulate_run

DISCIPLINE_CHOICE = click.Choice(["ex", "lg", "gg"])


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"not a comma-separated list of numbers: {text!r}") from None


@contextmanager
def csv_out(path):
    fh = open(path, "w", newline="", encoding="utf-8") if path else sys.stdout
    try:
        yield csv.writer(fh, lineterminator="\n")
    finally:
        if path:
            fh.close()


def write_rows(path, header, rows):
    with csv_out(path) as out:
        out.writerow(header)
        for row in rows:
            out.writerow([fmt(v) for v in row])


class Group(click.Group):
    """Maps package errors to their exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except PollingError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(exc.exit_code)
        except (OSError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(2)


def _model(source, discipline):
    model = load_model(source)
    return model.with_discipline(Discipline.parse(discipline)) if discipline else model


def _key(k) -> str:
    return "(" + " ".join(str(int(x)) for x in k) + ")"


@click.group(cls=Group)
def main():
    """Batch sojourn times in cyclic polling systems."""


@main.command()
@click.option("--model", "source", required=True, help="Built-in id or path to a model JSON file.")
@click.option("--discipline", type=DISCIPLINE_CHOICE, default=None)
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def solve(source, discipline, output):
    """Mean waiting times, queue lengths and batch sojourn times."""
    summary = experiments.analyze(_model(source, discipline))
    rows = []
    for i, (w, q) in enumerate(zip(summary.wait, summary.mean_len)):
        rows.append(("E(W)", f"Q{i + 1}", w))
        rows.append(("E(L)", f"Q{i + 1}", q))
    for k, t in summary.class_T.items():
        rows.append(("E(T_k)", _key(k), t))
    rows.append(("E(T)", "all", summary.mean_T))
    rows.append(("E(C)", "all", summary.mean_cycle))
    write_rows(output, ["quantity", "key", "value"], rows)


@main.command()
@click.option("--model", "source", required=True)
@click.option("--discipline", type=DISCIPLINE_CHOICE, default=None)
@click.option("--reps", type=int, default=20, show_default=True)
@click.option("--batches", type=int, default=200_000, show_default=True)
@click.option("--seed", type=int, default=SimConfig.seed, show_default=True)
@click.option("--warmup", type=float, default=0.1, show_default=True)
@click.option("--omega", default="0.1,0.5,1.0", show_default=True, help="LST probe points.")
@click.option("--trace", type=click.Path(dir_okay=False), default=None, help="Per-batch CSV trace.")
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def simulate(source, discipline, reps, batches, seed, warmup, omega, trace, output):
    """Simulation estimates with 99% confidence intervals."""
    model = _model(source, discipline)
    cfg = SimConfig(replications=reps, batches_per_replication=batches, warmup_fraction=warmup,
                    seed=seed, lst_probe_points=tuple(parse_floats(omega)))
    est = simulate_run(model, config=cfg, trace_path=trace)
    rows = [("E(T)", "all", est.mean_T)]
    for i in range(model.n):
        rows.append(("E(W)", f"Q{i + 1}", est.mean_W[i]))
        rows.append(("E(L)", f"Q{i + 1}", est.mean_L[i]))
    for k, e in est.class_T.items():
        rows.append(("E(T_k)", _key(k), e))
    rows.append(("E(C)", "all", est.mean_C))
    for w, e in est.empirical_lst.items():
        rows.append(("LST(T)", fmt(w), e))
    write_rows(output, ["quantity", "key", "mean", "half_width"],
               [(q, k, e.mean, e.half_width) for q, k, e in rows])


@main.command()
@click.option("--model", "source", required=True)
@click.option("--discipline", type=DISCIPLINE_CHOICE, default=None)
@click.option("--omega", required=True, help="Comma-separated points w >= 0.")
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def lst(source, discipline, omega, output):
    """LST of the sojourn time of an arbitrary batch."""
    from .transforms import sojourn_lst

    model = _model(source, discipline)
    w = np.array(parse_floats(omega))
    if w.size == 0 or np.any(w < 0):
        raise ConfigError("omega values must be >= 0")
    write_rows(output, ["omega", "lst"], zip(w, sojourn_lst(model, w)))


@main.group(cls=Group)
def experiment():
    """Discipline comparisons."""


@experiment.command("sym2")
@click.option("--lambda", "Lam", type=float, default=0.4, show_default=True, help="Total customer rate.")
@click.option("--b-grid", default="0.25,0.5,1,2,4", show_default=True)
@click.option("--s-grid", default="0.25,0.5,1,2,4", show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def exp_sym2(Lam, b_grid, s_grid, output):
    """Symmetric two-queue region table: closed forms against the solvers."""
    rows = []
    for r in experiments.sym2_table(Lam, parse_floats(b_grid), parse_floats(s_grid)):
        if not r.stable:
            rows.append((r.Lam, r.b, r.s, r.rho, "unstable", *[""] * 8))
            continue
        d = experiments.DISCIPLINES
        rows.append((r.Lam, r.b, r.s, r.rho, "ok", *(r.closed[x] for x in d), *(r.solved[x] for x in d),
                     r.argmin, int(r.mismatch)))
    write_rows(output, ["lambda", "b", "s", "rho", "status", "closed_ex", "closed_lg", "closed_gg",
                        "solved_ex", "solved_lg", "solved_gg", "argmin", "mismatch"], rows)


@experiment.command("models-abc")
@click.option("--rho-grid", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def exp_models_abc(rho_grid, output):
    """E(T) per discipline for Models a, b, c over a load grid."""
    d = experiments.DISCIPLINES
    rows = [(r.model, r.rho, r.lam, *(r.mean_T[x] for x in d), r.argmin)
            for r in experiments.models_abc(parse_floats(rho_grid))]
    write_rows(output, ["model", "rho", "lambda", "T_ex", "T_lg", "T_gg", "argmin"], rows)


if __name__ == "__main__":
    main()
