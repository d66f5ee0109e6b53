"""Service and switch-over time distributions.

Only families with a closed-form LST and exact sampling are supported for
transforms and simulation. A moments-only distribution is accepted for mean
value analysis, which needs nothing beyond the first two moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDistribution, TransformUnavailable

FAMILIES = ("exponential", "deterministic", "erlang", "two_point", "moments")

_MOMENT_RTOL = 1e-9


@dataclass(frozen=True)
class Distribution:
    family: str
    mean: float
    second_moment: float
    shape: int = 1
    # support and weights, only used by the two_point family
    values: tuple[float, ...] = field(default=())
    probs: tuple[float, ...] = field(default=())

    # constructors

    @classmethod
    def exponential(cls, mean: float) -> "Distribution":
        return cls._checked("exponential", mean, 2.0 * mean * mean)

    @classmethod
    def deterministic(cls, mean: float) -> "Distribution":
        return cls._checked("deterministic", mean, mean * mean)

    @classmethod
    def erlang(cls, mean: float, shape: int) -> "Distribution":
        if int(shape) != shape or shape < 1:
            raise InvalidDistribution(f"erlang shape must be a positive integer, got {shape!r}")
        shape = int(shape)
        return cls._checked("erlang", mean, mean * mean * (shape + 1) / shape, shape=shape)

    @classmethod
    def two_point(cls, values, probs) -> "Distribution":
        values = tuple(float(v) for v in values)
        probs = tuple(float(p) for p in probs)
        if len(values) != 2 or len(probs) != 2:
            raise InvalidDistribution("two_point needs exactly two values and two probabilities")
        if min(values) < 0 or min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-12:
            raise InvalidDistribution("two_point values must be >= 0 and probabilities sum to 1")
        mean = sum(v * p for v, p in zip(values, probs))
        m2 = sum(v * v * p for v, p in zip(values, probs))
        return cls._checked("two_point", mean, m2, values=values, probs=probs)

    @classmethod
    def fit_two_point(cls, mean: float, second_moment: float) -> "Distribution":
        """Two-point law on {0, m2/m} with the given first two moments.

        Among all nonnegative laws with these moments it has the smallest third
        moment, which keeps simulation variance down.
        """
        if mean <= 0 or second_moment < mean * mean:
            raise InvalidDistribution("need mean > 0 and second_moment >= mean^2")
        top = second_moment / mean
        p = mean * mean / second_moment
        return cls.two_point((0.0, top), (1.0 - p, p))

    @classmethod
    def moments(cls, mean: float, second_moment: float) -> "Distribution":
        return cls._checked("moments", mean, second_moment)

    @classmethod
    def _checked(cls, family, mean, m2, **kw) -> "Distribution":
        mean = float(mean)
        m2 = float(m2)
        if not (math.isfinite(mean) and math.isfinite(m2)):
            raise InvalidDistribution("moments must be finite")
        if mean < 0:
            raise InvalidDistribution(f"mean must be >= 0, got {mean}")
        if mean == 0 and family != "deterministic":
            raise InvalidDistribution("a zero mean is only allowed for the deterministic family")
        if m2 < mean * mean * (1 - _MOMENT_RTOL):
            raise InvalidDistribution(f"second moment {m2} < mean^2 {mean * mean}")
        return cls(family, mean, m2, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "Distribution":
        d = dict(d)
        family = d.pop("family", None)
        if family not in FAMILIES:
            raise InvalidDistribution(f"unknown family {family!r}; expected one of {FAMILIES}")
        try:
            if family == "two_point":
                dist = cls.two_point(d.pop("values"), d.pop("probs"))
            elif family == "moments":
                dist = cls.moments(d.pop("mean"), d.pop("second_moment"))
            elif family == "erlang":
                dist = cls.erlang(d.pop("mean"), d.pop("shape"))
            else:
                dist = getattr(cls, family)(d.pop("mean"))
        except KeyError as exc:
            raise InvalidDistribution(f"{family}: missing field {exc}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidDistribution):
                raise
            raise InvalidDistribution(f"{family}: {exc}") from None
        m2 = d.pop("second_moment", None)
        if m2 is not None and abs(float(m2) - dist.second_moment) > 1e-9 * max(1.0, dist.second_moment):
            raise InvalidDistribution(
                f"{family} with mean {dist.mean} has second moment {dist.second_moment}, not {m2}"
            )
        if d:
            raise InvalidDistribution(f"unexpected fields {sorted(d)}")
        return dist

    def to_dict(self) -> dict:
        if self.family == "two_point":
            return {"family": self.family, "values": list(self.values), "probs": list(self.probs)}
        if self.family == "moments":
            return {"family": self.family, "mean": self.mean, "second_moment": self.second_moment}
        out = {"family": self.family, "mean": self.mean}
        if self.family == "erlang":
            out["shape"] = self.shape
        return out

    # moments

    @property
    def residual_mean(self) -> float:
        """E(X^2)/2E(X); zero for the degenerate zero distribution."""
        return self.second_moment / (2.0 * self.mean) if self.mean > 0 else 0.0

    @property
    def has_transform(self) -> bool:
        return self.family != "moments"

    # transforms

    def _need_transform(self):
        if not self.has_transform:
            raise TransformUnavailable("moments-only distribution has no LST; use a concrete family")

    def lst(self, s):
        """E[exp(-s X)] for real s >= 0 (broadcasts over arrays)."""
        self._need_transform()
        s = np.asarray(s, dtype=float)
        m = self.mean
        if self.family == "exponential":
            return 1.0 / (1.0 + m * s)
        if self.family == "deterministic":
            return np.exp(-m * s)
        if self.family == "erlang":
            return (1.0 + m * s / self.shape) ** (-self.shape)
        return sum(p * np.exp(-v * s) for v, p in zip(self.values, self.probs))

    def divided_difference(self, a, b):
        """(X~(a) - X~(b)) / (b - a), evaluated without cancellation.

        Divided by the mean this is the joint past/residual transform of the
        length-biased interval; at a == b it is the limit -X~'(a).
        """
        self._need_transform()
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        m = self.mean
        if self.family == "exponential":
            return m / ((1.0 + m * a) * (1.0 + m * b))
        if self.family == "erlang":
            k = self.shape
            theta = k / m
            x = theta / (theta + a)
            y = theta / (theta + b)
            acc = sum(x**q * y ** (k - 1 - q) for q in range(k))
            return theta / ((theta + a) * (theta + b)) * acc
        if self.family == "deterministic":
            return _det_dd(m, a, b)
        return sum(p * _det_dd(v, a, b) for v, p in zip(self.values, self.probs))

    def past_residual_lst(self, w_past, w_res):
        """Joint LST of the past and residual parts of a length-biased interval."""
        return self.divided_difference(w_res, w_past) / self.mean

    # sampling

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        self._need_transform()
        m = self.mean
        if self.family == "exponential":
            return rng.exponential(m, size)
        if self.family == "deterministic":
            return np.full(size, m)
        if self.family == "erlang":
            return rng.gamma(self.shape, m / self.shape, size)
        hit = rng.random(size) < self.probs[1]
        return np.where(hit, self.values[1], self.values[0])


def _det_dd(d, a, b):
    # (e^{-ad} - e^{-bd})/(b-a) = d e^{-ad} (1 - e^{-(b-a)d}) / ((b-a)d)
    u = (b - a) * d
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(np.abs(u) < 1e-12, 1.0 - u / 2.0, -np.expm1(-u) / np.where(u == 0, 1.0, u))
    return d * np.exp(-a * d) * ratio
