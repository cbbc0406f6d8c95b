"""Reduced states across the Lambda_ell | complement cut and their entropies.

Particle-number conservation makes the reduced state block diagonal in the
number j of particles on the kept side; each block is ``Psi_j Psi_j^T``
where ``Psi_j`` holds the amplitudes reshaped into (kept part, other part).
Logarithms are natural.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .bounds import prop42_rhs
from .lattice import Configuration, Sector
from .spectral import DropletProjector

ZERO_EIGENVALUE = 1e-14


@dataclass(frozen=True)
class ReducedState:
    side: str
    blocks: dict = field(repr=False)
    labels: dict = field(repr=False)

    @property
    def trace(self) -> float:
        return float(sum(np.trace(b) for b in self.blocks.values()))

    def eigenvalues(self) -> np.ndarray:
        if not self.blocks:
            return np.zeros(0)
        return np.concatenate([np.linalg.eigvalsh(b) for b in self.blocks.values()])

    def min_eigenvalue(self) -> float:
        ev = self.eigenvalues()
        return float(ev.min()) if ev.size else 0.0


def _kept_block(sector: Sector, side: str) -> frozenset:
    if side == "complement":
        return sector.geometry.right_block
    if side == "left":
        return sector.geometry.left_block
    raise ValueError(f"side must be 'complement' or 'left', got {side!r}")


def reduce(psi: np.ndarray, sector: Sector, side: str = "complement", tol: float = 1e-10) -> ReducedState:
    """Trace out one block of the strip, keeping Lambda_ell^c by default."""
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (len(sector),):
        raise ValueError(f"psi has shape {psi.shape}, sector dimension is {len(sector)}")
    if abs(np.linalg.norm(psi) - 1.0) > tol:
        raise ValueError(f"psi is not normalized (norm {np.linalg.norm(psi)!r})")
    kept = _kept_block(sector, side)

    rows: dict[int, dict] = {}
    cols: dict[int, dict] = {}
    entries: dict[int, list] = {}
    for amp, X in zip(psi, sector.configs):
        K, O = X.split(kept)
        j = len(K)
        r = rows.setdefault(j, {}).setdefault(K, len(rows[j]))
        c = cols.setdefault(j, {}).setdefault(O, len(cols[j]))
        entries.setdefault(j, []).append((r, c, amp))

    blocks, labels = {}, {}
    for j in sorted(entries):
        Psi = np.zeros((len(rows[j]), len(cols[j])))
        for r, c, amp in entries[j]:
            Psi[r, c] = amp
        blocks[j] = Psi @ Psi.T
        labels[j] = list(rows[j])
    return ReducedState(side, blocks, labels)


def _spectrum(rho: ReducedState) -> np.ndarray:
    ev = rho.eigenvalues()
    return ev[ev > ZERO_EIGENVALUE]


def entropy_vn(rho: ReducedState) -> float:
    p = _spectrum(rho)
    return float(max(0.0, -np.sum(p * np.log(p))))


def trace_power(rho: ReducedState, alpha: float) -> float:
    return float(np.sum(_spectrum(rho) ** alpha))


def entropy_renyi(rho: ReducedState, alpha: float) -> float:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(max(0.0, math.log(trace_power(rho, alpha)) / (1.0 - alpha)))


def family_norms(psi: np.ndarray, sector: Sector) -> dict[int, dict[Configuration, float]]:
    """||chi_{A_{X,N}} psi|| for every X in Lambda_ell^c carrying weight, keyed by |X|."""
    sq: dict[Configuration, float] = {}
    for amp, X in zip(np.asarray(psi, dtype=float), sector.configs):
        _, outside = X.split(sector.geometry.left_block)
        sq[outside] = sq.get(outside, 0.0) + amp * amp
    out: dict[int, dict] = {}
    for X, s in sq.items():
        out.setdefault(len(X), {})[X] = math.sqrt(s)
    return out


@dataclass(frozen=True)
class Prop42Result:
    lhs: float
    rhs: float
    per_j: dict

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs


def prop42_check(psi: np.ndarray, Q: DropletProjector, alpha: float) -> Prop42Result:
    """tr rho^alpha against 6 + 2 sum over X in Lambda^c, 0 < |X| < |Lambda^c|."""
    if not Q.contains(psi):
        raise ValueError("psi does not lie in the droplet subspace")
    sector = Q.sector
    lhs = trace_power(reduce(psi, sector), alpha)
    n_right = len(sector.geometry.right_block)
    norms = {
        j: list(d.values()) for j, d in family_norms(psi, sector).items() if 1 <= j <= n_right - 1
    }
    rhs = prop42_rhs(norms, alpha)
    per_j = {j: 2.0 * math.fsum(n ** (2 * alpha) for n in v) for j, v in sorted(norms.items())}
    return Prop42Result(lhs, rhs, per_j)


def subspace_candidates(Q: DropletProjector, samples: int, seed) -> Iterator[tuple[str, np.ndarray]]:
    """Every retained eigenvector, then ``samples`` Haar-random unit vectors of ran Q."""
    for i in range(Q.rank):
        yield f"eigenvector:{i}", Q.columns[:, i]
    if samples > 0 and Q.rank > 0:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        coeffs = rng.standard_normal((Q.rank, samples))
        vecs = Q.columns @ coeffs
        for s in range(samples):
            yield f"sample:{s}", vecs[:, s] / np.linalg.norm(vecs[:, s])


def subspace_ee_sup_estimate(
    Q: DropletProjector, samples: int, seed: Optional[int]
) -> tuple[float, str]:
    """Lower estimate of the supremum of the entropy over unit vectors in ran Q."""
    if Q.rank == 0:
        raise ValueError("droplet projector has rank 0")
    best, arg = -1.0, ""
    for label, psi in subspace_candidates(Q, samples, seed):
        ee = entropy_vn(reduce(psi, Q.sector))
        if ee > best:
            best, arg = ee, label
    return best, arg
