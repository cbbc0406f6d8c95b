"""XXZ sector Hamiltonians, droplet projectors and the clustering bound.

Matrix elements in the Ising basis (a configuration X lists the down spins):

* diagonal: ``|dX| / 2 + sum_{u in X} V(u)`` where ``|dX|`` counts edges with
  exactly one endpoint in X (each such edge contributes 1/4 - S3 S3 = 1/2);
* off-diagonal: ``-1/(2 Delta)`` between configurations related by moving
  one particle along one edge (the S1 S1 + S2 S2 term flips an
  anti-aligned pair with amplitude 1/2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import scipy.linalg

from .bounds import BoundConstants, prop41_constants
from .lattice import (
    Configuration,
    Sector,
    StripGeometry,
    Vertex,
    enumerate_sector,
    is_admissible,
    rect_distance,
)

DEFAULT_DENSE_CAP = 4000
BAND_GUARD = 1e-12


def _validate_potential(geometry: StripGeometry, V: Optional[Mapping[Vertex, float]]) -> dict:
    V = dict(V or {})
    for v, val in V.items():
        if not geometry.contains(v):
            raise ValueError(f"potential given at {v}, outside the strip")
        if not val >= 0:
            raise ValueError(f"potential must be nonnegative, V{v}={val}")
    return V


@dataclass(frozen=True)
class SectorHamiltonian:
    sector: Sector
    Delta: float
    potential: dict = field(repr=False)
    matrix: np.ndarray = field(repr=False)

    @property
    def geometry(self) -> StripGeometry:
        return self.sector.geometry

    @property
    def dim(self) -> int:
        return len(self.sector)


def build_hamiltonian(
    geometry: StripGeometry,
    Delta: float,
    V: Optional[Mapping[Vertex, float]],
    N: int,
    max_dim: int = DEFAULT_DENSE_CAP,
) -> SectorHamiltonian:
    if not Delta > 1:
        raise ValueError(f"Delta must exceed 1, got {Delta}")
    V = _validate_potential(geometry, V)
    sector = enumerate_sector(geometry, N)
    dim = len(sector)
    if dim > max_dim:
        raise ValueError(f"sector dimension {dim} exceeds dense cap {max_dim}")

    vidx = geometry.vertex_index
    edges = [(1 << vidx[u], 1 << vidx[v]) for u, v in geometry.edges]
    masks = [sum(1 << vidx[v] for v in X.sites) for X in sector.configs]
    pos = {m: i for i, m in enumerate(masks)}
    hop = -1.0 / (2.0 * Delta)

    H = np.zeros((dim, dim))
    for i, (X, m) in enumerate(zip(sector.configs, masks)):
        surface = 0
        for bu, bv in edges:
            if bool(m & bu) != bool(m & bv):
                surface += 1
                H[i, pos[m ^ bu ^ bv]] = hop
        H[i, i] = 0.5 * surface + math.fsum(V.get(v, 0.0) for v in X.sites)
    return SectorHamiltonian(sector, float(Delta), V, H)


@dataclass(frozen=True)
class SectorSpectrum:
    hamiltonian: SectorHamiltonian
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)


def eigensolve(H: SectorHamiltonian, max_dim: int = DEFAULT_DENSE_CAP) -> SectorSpectrum:
    """Full dense spectrum, eigenvalues ascending."""
    if H.dim > max_dim:
        raise ValueError(f"dimension {H.dim} exceeds dense cap {max_dim}")
    w, U = scipy.linalg.eigh(H.matrix)
    return SectorSpectrum(H, w, U)


def droplet_interval(M: int, Delta: float, delta: float) -> tuple[float, float]:
    """[(1 - 1/Delta) M, (1 - 1/Delta)(M + 1 - delta)].

    (1 - 1/Delta) is the Ising prefactor: H dominates (1 - 1/Delta) times the
    Ising energy, so minimal-surface droplets (edge surface 2M) start at
    (1 - 1/Delta) M.  The interval is empty once delta > 1.
    """
    tau = 1.0 - 1.0 / Delta
    return tau * M, tau * (M + 1 - delta)


@dataclass(frozen=True)
class DropletProjector:
    spectrum: SectorSpectrum = field(repr=False)
    interval: tuple[float, float]
    eigenvalues: np.ndarray
    columns: np.ndarray = field(repr=False)

    @property
    def rank(self) -> int:
        return self.columns.shape[1]

    @property
    def sector(self) -> Sector:
        return self.spectrum.hamiltonian.sector

    def matrix(self) -> np.ndarray:
        return self.columns @ self.columns.T

    def contains(self, psi: np.ndarray, tol: float = 1e-8) -> bool:
        return bool(np.linalg.norm(self.columns @ (self.columns.T @ psi) - psi) <= tol)


def droplet_projector(
    spectrum: SectorSpectrum,
    delta: float,
    interval: Optional[tuple[float, float]] = None,
) -> DropletProjector:
    """Eigenvectors with eigenvalue in the droplet interval (closed, guarded by 1e-12).

    ``interval`` overrides the droplet interval; rank 0 is a valid result.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    H = spectrum.hamiltonian
    if interval is None:
        interval = droplet_interval(H.geometry.width, H.Delta, delta)
    lo, hi = interval
    w = spectrum.eigenvalues
    keep = (w >= lo - BAND_GUARD) & (w <= hi + BAND_GUARD)
    return DropletProjector(spectrum, (lo, hi), w[keep], spectrum.eigenvectors[:, keep])


def chi_norm(A: Iterable[Configuration], Q: DropletProjector) -> float:
    """Operator norm of chi_A Q: the top singular value of the selected rows."""
    rows = sorted({Q.sector.position(X) for X in A})
    if not rows or Q.rank == 0:
        return 0.0
    return float(min(1.0, np.linalg.norm(Q.columns[rows], 2)))


def spectrum_records(spectrum: SectorSpectrum, delta: float) -> list[dict]:
    H = spectrum.hamiltonian
    lo, hi = droplet_interval(H.geometry.width, H.Delta, delta)
    return [
        {
            "N": H.sector.particle_count,
            "index": i,
            "eigenvalue": float(w),
            "in_droplet_band": bool(lo - BAND_GUARD <= w <= hi + BAND_GUARD),
        }
        for i, w in enumerate(spectrum.eigenvalues)
    ]


@dataclass
class Prop41Report:
    constants: BoundConstants
    rank: int
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.rows)

    @property
    def min_margin(self) -> float:
        return min((r["margin"] for r in self.rows), default=math.inf)


def prop41_verify(
    geometry: StripGeometry,
    Delta: float,
    delta: float,
    V: Optional[Mapping[Vertex, float]],
    N: int,
    families: Optional[Sequence[Sequence[Configuration]]] = None,
    projector: Optional[DropletProjector] = None,
) -> Prop41Report:
    """Check ||chi_A Q|| <= C exp(-mu d(A, R_V)) and d(A, R_V) >= d(A, R) per family.

    ``families`` defaults to every singleton of the sector.
    """
    M = geometry.width
    if not is_admissible(N, M):
        raise ValueError(f"N={N} is not of the form k*M with k >= M={M}")
    consts = prop41_constants(M, delta, Delta)
    if projector is None:
        projector = droplet_projector(eigensolve(build_hamiltonian(geometry, Delta, V, N)), delta)
    if families is None:
        families = [[X] for X in projector.sector.configs]
    V = dict(V or {})

    dist_V: dict = {}
    dist_R: dict = {}
    report = Prop41Report(consts, projector.rank)
    for A in families:
        for X in A:
            if X not in dist_V:
                dist_V[X] = rect_distance(X, N, M, potential=V)[0]
                dist_R[X] = rect_distance(X, N, M)[0]
        dV = min(dist_V[X] for X in A)
        dR = min(dist_R[X] for X in A)
        norm = chi_norm(A, projector)
        bound = consts.C * math.exp(-consts.mu * dV)
        report.rows.append(
            {
                "family": tuple(A),
                "norm": norm,
                "d_V": dV,
                "d_R": dR,
                "bound": bound,
                "margin": bound - norm,
                "passed": norm <= bound and dV >= dR,
            }
        )
    return report
