"""Built-in models: the symmetric two-queue system and Models a, b, c."""

from __future__ import annotations

from .batch import BatchSupport
from .distributions import Distribution
from .model import Discipline, PollingModel, validate

BUILTINS = ("sym2", "model_a", "model_b", "model_c")


def sym2(lam: float = 0.2, b: float = 1.0, s: float = 1.0, discipline="ex") -> PollingModel:
    """Two queues, every batch is one customer per queue, exponential times.

    ``lam`` is the batch rate; the total customer rate is 2*lam.
    """
    batch = BatchSupport([[1, 1]], [1.0])
    return validate(
        PollingModel(
            lam,
            batch,
            (Distribution.exponential(b),) * 2,
            (Distribution.exponential(s),) * 2,
            Discipline.parse(discipline),
        )
    )


def model_a(lam: float = 1 / 7, discipline="ex") -> PollingModel:
    batch = BatchSupport([[1, 1, 0], [3, 0, 1]], [0.25, 0.75])
    return validate(
        PollingModel(
            lam,
            batch,
            (Distribution.exponential(1.0),) * 3,
            (Distribution.exponential(0.1),) * 3,
            Discipline.parse(discipline),
        )
    )


def model_b(lam: float = 0.6, discipline="ex") -> PollingModel:
    batch = BatchSupport([[1, 0, 0], [0, 1, 0], [0, 0, 1]], [1 / 3, 1 / 3, 1 - 2 / 3])
    return validate(
        PollingModel(
            lam,
            batch,
            (Distribution.exponential(1.0),) * 3,
            (Distribution.exponential(1.0),) * 3,
            Discipline.parse(discipline),
        )
    )


def model_c(lam: float = 0.5, discipline="ex", moments_only: bool = False) -> PollingModel:
    """Service means 0.1/0.4/0.9, all with second moment 1.

    Those moments match no standard family, so by default each service law is
    the two-point fit on {0, 1/mean}; ``moments_only`` keeps bare moments
    (fine for mean value analysis, not for transforms or simulation).
    """
    batch = BatchSupport([[1, 1, 0], [1, 0, 3]], [0.8, 0.2])
    make = Distribution.moments if moments_only else Distribution.fit_two_point
    service = tuple(make(m, 1.0) for m in (0.1, 0.4, 0.9))
    return validate(
        PollingModel(
            lam,
            batch,
            service,
            (Distribution.deterministic(1.0),) * 3,
            Discipline.parse(discipline),
        )
    )


_FACTORIES = {"sym2": sym2, "model_a": model_a, "model_b": model_b, "model_c": model_c}


def builtin_model(name: str, rho: float | None = None, discipline="ex") -> PollingModel:
    model = _FACTORIES[name](discipline=discipline)
    return model.with_load(rho) if rho is not None else model
