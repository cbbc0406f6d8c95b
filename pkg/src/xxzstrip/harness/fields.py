"""I.i.d. nonnegative single-site laws and reproducible field sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..lattice import StripGeometry, Vertex

LAWS = ("bernoulli", "uniform", "discrete")


@dataclass(frozen=True)
class RandomFieldSpec:
    """Single-site law plus seed.

    ``params`` is ``(a, p)`` for bernoulli (value a with probability p, else
    0), ``(b,)`` for uniform(0, b) and ``(values, probs)`` for discrete.
    """

    law: str
    params: tuple
    seed: int = 0

    def __post_init__(self):
        if self.law not in LAWS:
            raise ValueError(f"unknown law {self.law!r}; expected one of {LAWS}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit nonnegative integer")
        if self.law == "bernoulli":
            a, p = self.params
            if not (a > 0 and 0 < p <= 1):
                raise ValueError(f"bernoulli needs a > 0 and p in (0, 1], got {self.params}")
        elif self.law == "uniform":
            (b,) = self.params
            if not b > 0:
                raise ValueError(f"uniform needs b > 0, got {b}")
        else:
            values, probs = (tuple(map(float, x)) for x in self.params)
            if len(values) != len(probs) or not values:
                raise ValueError("discrete law needs matching nonempty values and probs")
            if min(values) < 0 or min(probs) < 0 or not math.isclose(sum(probs), 1.0, abs_tol=1e-12):
                raise ValueError("discrete law needs values >= 0 and probabilities summing to 1")
            if all(v == 0 or q == 0 for v, q in zip(values, probs)):
                raise ValueError("law is almost surely zero")
            object.__setattr__(self, "params", (values, probs))

    @classmethod
    def bernoulli(cls, a: float, p: float, seed: int = 0) -> "RandomFieldSpec":
        return cls("bernoulli", (float(a), float(p)), seed)

    @classmethod
    def uniform(cls, b: float, seed: int = 0) -> "RandomFieldSpec":
        return cls("uniform", (float(b),), seed)

    @classmethod
    def discrete(cls, values, probs, seed: int = 0) -> "RandomFieldSpec":
        return cls("discrete", (tuple(values), tuple(probs)), seed)

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "RandomFieldSpec":
        """Parse ``bernoulli:a,p``, ``uniform:b`` or ``discrete:v1,v2,...:p1,p2,...``."""
        law, _, rest = text.partition(":")
        parts = [[float(x) for x in chunk.split(",") if x] for chunk in rest.split(":")] if rest else []
        try:
            if law == "bernoulli":
                (a, p), = parts
                return cls.bernoulli(a, p, seed)
            if law == "uniform":
                ((b,),) = parts
                return cls.uniform(b, seed)
            if law == "discrete":
                values, probs = parts
                return cls.discrete(values, probs, seed)
        except ValueError as exc:
            if "unpack" in str(exc):
                raise ValueError(f"malformed field law {text!r}") from None
            raise
        raise ValueError(f"unknown law in {text!r}")

    def describe(self) -> str:
        if self.law == "discrete":
            v, p = self.params
            return "discrete:" + ",".join(map(repr, v)) + ":" + ",".join(map(repr, p))
        return f"{self.law}:" + ",".join(map(repr, self.params))

    def mean(self) -> float:
        if self.law == "bernoulli":
            a, p = self.params
            return a * p
        if self.law == "uniform":
            return self.params[0] / 2
        v, p = self.params
        return float(np.dot(v, p))

    def variance(self) -> float:
        if self.law == "bernoulli":
            a, p = self.params
            return a * a * p * (1 - p)
        if self.law == "uniform":
            return self.params[0] ** 2 / 12
        v, p = map(np.asarray, self.params)
        return float(np.dot(v * v, p) - np.dot(v, p) ** 2)

    def tail_probability(self, t: float) -> float:
        """P(nu >= t)."""
        if self.law == "bernoulli":
            a, p = self.params
            return p if a >= t else 0.0
        if self.law == "uniform":
            b = self.params[0]
            return min(1.0, max(0.0, 1.0 - t / b))
        v, p = self.params
        return math.fsum(q for x, q in zip(v, p) if x >= t)

    def threshold(self) -> tuple[int, float]:
        """Smallest k with p = P(nu >= 1/k) > 0, together with that p."""
        if self.law == "bernoulli":
            top = self.params[0]
        elif self.law == "uniform":
            top = self.params[0]
        else:
            top = max(x for x, q in zip(*self.params) if q > 0)
        k = max(1, math.ceil(1.0 / top - 1e-9))
        # uniform(0, b) with 1/b integral gives P(nu >= b) = 0
        while self.tail_probability(1.0 / k) == 0.0:
            k += 1
        return k, self.tail_probability(1.0 / k)


def _column_draws(spec: RandomFieldSpec, sample_index: int, column: int, width: int) -> np.ndarray:
    rng = np.random.default_rng([int(spec.seed), int(sample_index), int(column)])
    if spec.law == "bernoulli":
        a, p = spec.params
        return np.where(rng.random(width) < p, a, 0.0)
    if spec.law == "uniform":
        return spec.params[0] * rng.random(width)
    values, probs = spec.params
    return np.asarray(values)[rng.choice(len(values), size=width, p=probs)]


def sample_field(spec: RandomFieldSpec, geometry: StripGeometry, sample_index: int) -> dict[Vertex, float]:
    """V_omega on the strip; a pure function of (seed, sample_index, vertex)."""
    if sample_index < 0:
        raise ValueError("sample_index must be nonnegative")
    V = {}
    for c in range(1, geometry.n_columns + 1):
        for r, val in enumerate(_column_draws(spec, sample_index, c, geometry.width), start=1):
            V[(c, r)] = float(val)
    return V
