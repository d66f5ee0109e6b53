"""The polling model: queues, batch arrivals, distributions and discipline.

External (JSON, CLI) queue numbers are 1-based; everything in Python is
0-based with cyclic index arithmetic done through ``batch.cyclic_span``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .batch import BatchSupport
from .distributions import Distribution
from .errors import InvalidModel, Unstable

STABILITY_MARGIN = 1e-12
MAX_QUEUES = 64


class Discipline(str, enum.Enum):
    EXHAUSTIVE = "ex"
    LOCALLY_GATED = "lg"
    GLOBALLY_GATED = "gg"

    @classmethod
    def parse(cls, value) -> "Discipline":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "ex": cls.EXHAUSTIVE,
            "exhaustive": cls.EXHAUSTIVE,
            "lg": cls.LOCALLY_GATED,
            "locally_gated": cls.LOCALLY_GATED,
            "gated": cls.LOCALLY_GATED,
            "gg": cls.GLOBALLY_GATED,
            "globally_gated": cls.GLOBALLY_GATED,
        }
        if key not in aliases:
            raise InvalidModel(f"unknown discipline {value!r}; use ex, lg or gg")
        return aliases[key]


@dataclass(frozen=True)
class CycleQuantities:
    mean_cycle: float
    mean_switch_total: float
    second_moment_switch_total: float


@dataclass(frozen=True, eq=True)
class PollingModel:
    lam: float
    batch: BatchSupport
    service: tuple[Distribution, ...]
    switch: tuple[Distribution, ...]
    discipline: Discipline = Discipline.EXHAUSTIVE
    validated: bool = field(default=False, compare=False, repr=False)

    @property
    def n(self) -> int:
        return len(self.service)

    @cached_property
    def b(self) -> np.ndarray:
        return np.array([d.mean for d in self.service])

    @cached_property
    def b2(self) -> np.ndarray:
        return np.array([d.second_moment for d in self.service])

    @cached_property
    def s(self) -> np.ndarray:
        return np.array([d.mean for d in self.switch])

    @cached_property
    def s2(self) -> np.ndarray:
        return np.array([d.second_moment for d in self.switch])

    @cached_property
    def b_res(self) -> np.ndarray:
        return np.array([d.residual_mean for d in self.service])

    @cached_property
    def s_res(self) -> np.ndarray:
        return np.array([d.residual_mean for d in self.switch])

    @cached_property
    def lam_i(self) -> np.ndarray:
        """Customer arrival rate per queue, lambda E(K_i)."""
        return self.lam * self.batch.mean

    @cached_property
    def rho_i(self) -> np.ndarray:
        return self.lam_i * self.b

    @property
    def rho(self) -> float:
        return float(self.rho_i.sum())

    @cached_property
    def mean_cycle(self) -> float:
        return float(self.s.sum() / (1.0 - self.rho))

    @cached_property
    def visit_means(self) -> np.ndarray:
        """E(V_i) = rho_i E(C)."""
        return self.rho_i * self.mean_cycle

    def with_discipline(self, discipline) -> "PollingModel":
        return replace(self, discipline=Discipline.parse(discipline))

    def with_lambda(self, lam: float) -> "PollingModel":
        return validate(replace(self, lam=float(lam), validated=False))

    def with_load(self, rho: float) -> "PollingModel":
        """Same model with lambda rescaled so the total load equals rho."""
        per_unit = float(self.batch.mean @ self.b)
        return self.with_lambda(rho / per_unit)

    @property
    def has_transforms(self) -> bool:
        return all(d.has_transform for d in self.service + self.switch)

    # JSON

    @classmethod
    def from_dict(cls, d: dict) -> "PollingModel":
        try:
            n = int(d["n"])
            queues = d["queues"]
            lam = float(d["lambda"])
            batch = BatchSupport.from_entries(d["batch"])
        except KeyError as exc:
            raise InvalidModel(f"model config missing field {exc}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidModel):
                raise
            raise InvalidModel(f"malformed model config: {exc}") from None
        if len(queues) != n:
            raise InvalidModel(f"n = {n} but {len(queues)} queues given")
        try:
            service = tuple(Distribution.from_dict(q["service"]) for q in queues)
            switch = tuple(Distribution.from_dict(q["switch"]) for q in queues)
        except (KeyError, TypeError) as exc:
            raise InvalidModel(f"malformed queue entry: {exc}") from None
        disc = Discipline.parse(d.get("discipline", "ex"))
        return validate(cls(lam, batch, service, switch, disc))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "lambda": self.lam,
            "discipline": self.discipline.value,
            "queues": [
                {"service": b.to_dict(), "switch": s.to_dict()} for b, s in zip(self.service, self.switch)
            ],
            "batch": self.batch.to_entries(),
        }


def validate(model: PollingModel) -> PollingModel:
    """Check every model invariant and return a validated copy.

    Idempotent: validating a validated model returns an equal model.
    """
    n = model.n
    if n < 1 or n > MAX_QUEUES:
        raise InvalidModel(f"queue count must be in 1..{MAX_QUEUES}, got {n}")
    if len(model.switch) != n:
        raise InvalidModel("need one switch-over distribution per queue")
    if model.batch.n != n:
        raise InvalidModel(f"batch vectors have length {model.batch.n}, expected {n}")
    if not np.isfinite(model.lam) or model.lam < 0:
        raise InvalidModel(f"lambda must be a finite nonnegative rate, got {model.lam}")
    for d in model.service:
        if d.mean <= 0:
            raise InvalidModel("service times must have a positive mean")
    if model.s.sum() <= 0:
        raise InvalidModel("total mean switch-over time must be positive")
    disc = Discipline.parse(model.discipline)
    rho = model.rho
    if rho >= 1.0 - STABILITY_MARGIN:
        raise Unstable(rho)
    if model.validated and disc is model.discipline:
        return model
    return replace(model, discipline=disc, validated=True)


def utilization(model: PollingModel) -> tuple[np.ndarray, float]:
    return model.rho_i.copy(), model.rho


def mean_cycle(model: PollingModel) -> CycleQuantities:
    if model.rho >= 1.0 - STABILITY_MARGIN:
        raise Unstable(model.rho)
    s = model.s
    es2 = float(model.s2.sum() + s.sum() ** 2 - (s**2).sum())
    return CycleQuantities(model.mean_cycle, float(s.sum()), es2)


def load_model(source: str | Path | dict) -> PollingModel:
    """Built-in id, JSON path, or an already parsed dict."""
    if isinstance(source, dict):
        return PollingModel.from_dict(source)
    from .builtins import BUILTINS, builtin_model

    if str(source) in BUILTINS:
        return builtin_model(str(source))
    path = Path(source)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InvalidModel(f"no such model file or built-in id: {source}") from None
    except json.JSONDecodeError as exc:
        raise InvalidModel(f"{path}: invalid JSON ({exc})") from None
    return PollingModel.from_dict(data)
