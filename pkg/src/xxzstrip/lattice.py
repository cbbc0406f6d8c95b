"""Strip geometry, particle configurations and the configuration metric.

Vertices are ``(column, row)`` integer pairs.  The finite strip has columns
``1..2*ell`` and rows ``1..M``; the infinite strip is handled through explicit
column windows ``(a, b)`` (inclusive).  Canonical vertex order is
lexicographic by column, then row.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

Vertex = tuple[int, int]
Window = tuple[int, int]

DEFAULT_SECTOR_CAP = 10**6


def vertex_distance(x: Vertex, y: Vertex) -> int:
    """l1 distance between two vertices."""
    return abs(x[0] - y[0]) + abs(x[1] - y[1])


@dataclass(frozen=True)
class StripGeometry:
    """The strip {1..2*ell} x {1..M} with nearest-neighbour edges."""

    half_length: int
    width: int

    def __post_init__(self):
        if int(self.half_length) != self.half_length or self.half_length < 1:
            raise ValueError(f"half_length must be a positive integer, got {self.half_length!r}")
        if int(self.width) != self.width or self.width < 1:
            raise ValueError(f"width must be a positive integer, got {self.width!r}")

    @property
    def n_columns(self) -> int:
        return 2 * self.half_length

    @cached_property
    def vertices(self) -> tuple[Vertex, ...]:
        return tuple(
            (c, r) for c in range(1, self.n_columns + 1) for r in range(1, self.width + 1)
        )

    @cached_property
    def vertex_index(self) -> dict[Vertex, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @cached_property
    def edges(self) -> tuple[tuple[Vertex, Vertex], ...]:
        out = []
        for c, r in self.vertices:
            if c < self.n_columns:
                out.append(((c, r), (c + 1, r)))
            if r < self.width:
                out.append(((c, r), (c, r + 1)))
        return tuple(out)

    @cached_property
    def left_block(self) -> frozenset[Vertex]:
        """Lambda_ell: the first ``ell`` columns."""
        return frozenset(v for v in self.vertices if v[0] <= self.half_length)

    @cached_property
    def right_block(self) -> frozenset[Vertex]:
        return frozenset(v for v in self.vertices if v[0] > self.half_length)

    def contains(self, v: Vertex) -> bool:
        return 1 <= v[0] <= self.n_columns and 1 <= v[1] <= self.width

    def neighbors(self, v: Vertex) -> list[Vertex]:
        c, r = v
        cand = [(c - 1, r), (c + 1, r), (c, r - 1), (c, r + 1)]
        return [u for u in cand if self.contains(u)]


def build_strip(half_length: int, width: int) -> StripGeometry:
    return StripGeometry(half_length, width)


@dataclass(frozen=True, order=True)
class Configuration:
    """A finite set of occupied vertices stored in canonical order."""

    sites: tuple[Vertex, ...]

    def __post_init__(self):
        sites = tuple((int(c), int(r)) for c, r in self.sites)
        if any(a >= b for a, b in zip(sites, sites[1:])):
            raise ValueError("sites must be strictly increasing; use Configuration.of()")
        object.__setattr__(self, "sites", sites)

    @classmethod
    def of(cls, sites: Iterable[Sequence[int]]) -> "Configuration":
        pts = [(int(s[0]), int(s[1])) for s in sites]
        if len(set(pts)) != len(pts):
            raise ValueError(f"repeated site in configuration {pts}")
        return cls(tuple(sorted(pts)))

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def __contains__(self, v) -> bool:
        return tuple(v) in self.siteset

    @cached_property
    def siteset(self) -> frozenset[Vertex]:
        return frozenset(self.sites)

    @property
    def particle_count(self) -> int:
        return len(self.sites)

    def split(self, block: frozenset[Vertex]) -> tuple["Configuration", "Configuration"]:
        """Return ``(X & block, X - block)``."""
        inside = tuple(v for v in self.sites if v in block)
        outside = tuple(v for v in self.sites if v not in block)
        return Configuration(inside), Configuration(outside)

    def to_json(self) -> str:
        return json.dumps([list(v) for v in self.sites])

    @classmethod
    def from_json(cls, text: str) -> "Configuration":
        return cls.of(json.loads(text))


@dataclass(frozen=True)
class Sector:
    """All N-particle configurations of a strip, canonically ordered."""

    geometry: StripGeometry
    particle_count: int
    configs: tuple[Configuration, ...]
    index: dict = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.configs)

    def position(self, X: Configuration) -> int:
        try:
            return self.index[X]
        except KeyError:
            raise KeyError(f"{X} is not in the N={self.particle_count} sector") from None


def enumerate_sector(geometry: StripGeometry, N: int, max_size: int = DEFAULT_SECTOR_CAP) -> Sector:
    n_sites = len(geometry.vertices)
    if not 0 <= N <= n_sites:
        raise ValueError(f"N={N} outside 0..{n_sites}")
    size = math.comb(n_sites, N)
    if size > max_size:
        raise ValueError(f"sector size C({n_sites},{N})={size} exceeds cap {max_size}")
    configs = tuple(Configuration(c) for c in itertools.combinations(geometry.vertices, N))
    return Sector(geometry, N, configs, {X: i for i, X in enumerate(configs)})


def _cost_matrix(sources: Sequence[Vertex], targets: Sequence[Vertex]) -> np.ndarray:
    a = np.asarray(sources, dtype=np.int64).reshape(-1, 2)
    b = np.asarray(targets, dtype=np.int64).reshape(-1, 2)
    return np.abs(a[:, None, :] - b[None, :, :]).sum(axis=2)


def assignment_cost(cost: np.ndarray) -> int:
    """Exact minimum of a square assignment problem with integer costs."""
    if cost.size == 0:
        return 0
    rows, cols = linear_sum_assignment(cost)
    return int(cost[rows, cols].sum())


def config_distance(X: Configuration, Y: Configuration) -> int:
    """d_N(X, Y): minimal total l1 transport cost over all bijections."""
    if len(X) != len(Y):
        raise ValueError(f"size mismatch: |X|={len(X)}, |Y|={len(Y)}")
    return assignment_cost(_cost_matrix(X.sites, Y.sites))


# --- rectangles -----------------------------------------------------------

def is_admissible(N: int, width: int) -> bool:
    """N = k*M with k >= M."""
    return N > 0 and N % width == 0 and N // width >= width


def rect_depth(N: int, width: int) -> int:
    if not is_admissible(N, width):
        raise ValueError(f"N={N} is not of the form k*M with k >= M={width}")
    return N // width


@dataclass(frozen=True)
class RectangleSpec:
    """Full columns ``start .. start+depth-1`` of the width-M strip."""

    start: int
    depth: int
    width: int

    def __post_init__(self):
        if self.depth < 1 or self.width < 1:
            raise ValueError("depth and width must be positive")

    @classmethod
    def for_particles(cls, N: int, width: int, start: int = 1) -> "RectangleSpec":
        return cls(start, rect_depth(N, width), width)

    @property
    def stop(self) -> int:
        return self.start + self.depth - 1

    @property
    def particle_count(self) -> int:
        return self.depth * self.width

    @cached_property
    def sites(self) -> tuple[Vertex, ...]:
        return tuple(
            (c, r) for c in range(self.start, self.stop + 1) for r in range(1, self.width + 1)
        )

    def as_configuration(self) -> Configuration:
        return Configuration(self.sites)

    def shifted(self, z: int) -> "RectangleSpec":
        return RectangleSpec(self.start + z, self.depth, self.width)

    def contains(self, v: Vertex) -> bool:
        return self.start <= v[0] <= self.stop and 1 <= v[1] <= self.width

    @cached_property
    def internal_boundary(self) -> frozenset[Vertex]:
        cols = {self.start, self.stop}
        return frozenset((c, r) for c in cols for r in range(1, self.width + 1))


def potential_sum(V: Optional[Mapping[Vertex, float]], sites: Iterable[Vertex]) -> float:
    if not V:
        return 0.0
    return float(sum(V.get(v, 0.0) for v in sites))


def _column_gap_bound(start: int, depth: int, width: int, lo: int, hi: int) -> int:
    """Lower bound on any matching cost from sources in columns [lo, hi]."""
    total = 0
    for c in range(start, start + depth):
        if c > hi:
            total += c - hi
        elif c < lo:
            total += lo - c
    return total * width


def _min_over_rectangles(
    cost: Callable[[RectangleSpec], float],
    depth: int,
    width: int,
    lo: int,
    hi: int,
    accept: Optional[Callable[[RectangleSpec], bool]] = None,
    window: Optional[Window] = None,
) -> tuple[float, Optional[int]]:
    """Exact min of ``cost`` over rectangle start columns.

    Sources lie in columns ``[lo, hi]``; every rectangle disjoint from that
    span costs at least ``_column_gap_bound``, which grows with the gap, so
    the outward scan stops as soon as the bound reaches the best value.
    ``accept`` must hold for all rectangles far enough from the sources,
    otherwise a ``window`` is required.
    """
    best, best_start = math.inf, None
    smin = -math.inf if window is None else window[0]
    smax = math.inf if window is None else window[1] - depth + 1

    def visit(s: int):
        nonlocal best, best_start
        R = RectangleSpec(s, depth, width)
        if accept is not None and not accept(R):
            return
        val = cost(R)
        if val < best or (val == best and best_start is not None and s < best_start):
            best, best_start = val, s

    first = lo - depth + 1 if window is None else max(lo - depth + 1, window[0])
    last = hi if window is None else min(hi, smax)
    for s in range(first, last + 1):
        visit(s)
    s = max(hi + 1, first)
    while s <= smax and _column_gap_bound(s, depth, width, lo, hi) <= best:
        visit(s)
        s += 1
        if best == math.inf and window is None and s > hi + 10**6:
            raise RuntimeError("no admissible rectangle found")
    s = min(lo - depth, last)
    while s >= smin and _column_gap_bound(s, depth, width, lo, hi) <= best:
        visit(s)
        s -= 1
        if best == math.inf and window is None and s < lo - 10**6:
            raise RuntimeError("no admissible rectangle found")
    return best, best_start


def _support_span(V: Optional[Mapping[Vertex, float]]) -> Optional[tuple[int, int]]:
    cols = [v[0] for v, val in (V or {}).items() if val != 0]
    return (min(cols), max(cols)) if cols else None


def rect_distance(
    X: Configuration,
    N: int,
    width: int,
    potential: Optional[Mapping[Vertex, float]] = None,
    window: Optional[Window] = None,
) -> tuple[float, Optional[int]]:
    """Distance from ``X`` to the nearest rectangle, with its shift.

    The shift ``z`` is relative to ``R_1^N`` (start column 1).  With a
    ``potential`` only rectangles of potential sum < 1 count (the family
    R_V^N, with V = 0 off its support).  If a ``window`` is given and no
    admissible rectangle fits in it, ``(inf, None)`` is returned.
    """
    if len(X) != N:
        raise ValueError(f"|X|={len(X)} but N={N}")
    k = rect_depth(N, width)
    cols = [v[0] for v in X.sites]
    lo, hi = min(cols), max(cols)
    accept = None
    if potential:
        span = _support_span(potential)
        if span is not None:
            lo, hi = min(lo, span[0]), max(hi, span[1])
        accept = lambda R: potential_sum(potential, R.sites) < 1.0  # noqa: E731
    d, s = _min_over_rectangles(
        lambda R: assignment_cost(_cost_matrix(X.sites, R.sites)), k, width, lo, hi, accept, window
    )
    return d, (None if s is None else s - 1)


def rect_family_V(
    V: Optional[Mapping[Vertex, float]], N: int, width: int, window: Window
) -> list[RectangleSpec]:
    """All rectangles inside ``window`` whose potential sum is below 1."""
    k = rect_depth(N, width)
    a, b = window
    out = []
    for s in range(a, b - k + 2):
        R = RectangleSpec(s, k, width)
        if potential_sum(V, R.sites) < 1.0:
            out.append(R)
    return out


def window_sites(window: Window, width: int) -> tuple[Vertex, ...]:
    a, b = window
    return tuple((c, r) for c in range(a, b + 1) for r in range(1, width + 1))


# --- levels ---------------------------------------------------------------

def boundary_distance(R: RectangleSpec, x: Vertex) -> int:
    """d(x, internal boundary of R); the boundary holds every row of both end columns."""
    return min(abs(x[0] - R.start), abs(x[0] - R.stop)) + (
        0 if 1 <= x[1] <= R.width else min(abs(x[1] - 1), abs(x[1] - R.width))
    )


def level_of(R: RectangleSpec, x: Vertex) -> int:
    d = boundary_distance(R, x)
    return -d if R.contains(x) else d


@dataclass(frozen=True)
class LevelStructure:
    rectangle: RectangleSpec
    window: Window
    levels: dict
    enumeration: tuple[Vertex, ...]

    def level_sizes(self) -> dict[int, int]:
        sizes: dict[int, int] = {}
        for v in self.enumeration:
            sizes[self.levels[v]] = sizes.get(self.levels[v], 0) + 1
        return sizes


def level_structure(R: RectangleSpec, window: Window) -> LevelStructure:
    """Level map over ``window`` plus a level-respecting enumeration.

    Ties inside a level are broken lexicographically by (column, row).
    """
    a, b = window
    if a > R.start or b < R.stop:
        raise ValueError(f"window {window} does not cover columns {R.start}..{R.stop}")
    sites = window_sites(window, R.width)
    levels = {v: level_of(R, v) for v in sites}
    order = tuple(sorted(sites, key=lambda v: (levels[v], v)))
    return LevelStructure(R, window, levels, order)


def level_lower_bound(X: Configuration, R: RectangleSpec) -> int:
    """Sum of boundary distances of particles outside R and of holes inside R."""
    outside = sum(boundary_distance(R, x) for x in X.sites if not R.contains(x))
    holes = sum(boundary_distance(R, y) for y in R.sites if y not in X.siteset)
    return outside + holes


# --- families A_{X,N} ---------------------------------------------------------

def _check_family_input(X: Configuration, N: int, ell: int, width: int):
    if len(X) > N:
        raise ValueError(f"|X|={len(X)} exceeds N={N}")
    for c, r in X.sites:
        if 1 <= c <= ell:
            raise ValueError(f"X must avoid Lambda_ell; site {(c, r)} lies in it")
        if not 1 <= r <= width:
            raise ValueError(f"row {r} outside 1..{width}")


def _family_cost(X: Configuration, N: int, ell: int, width: int, target: Sequence[Vertex]) -> float:
    j = len(X)
    n_free = N - j
    block = [(c, r) for c in range(1, ell + 1) for r in range(1, width + 1)]
    if n_free > len(block):
        return math.inf
    # rows: particles of X, then every site of Lambda; columns: targets, then
    # dummies absorbing the unused Lambda sites (forbidden for X rows)
    n_dummy = len(block) - n_free
    cost = np.zeros((j + len(block), N + n_dummy), dtype=np.int64)
    cost[:, :N] = _cost_matrix(list(X.sites) + block, target)
    big = int(cost[:, :N].max(initial=0)) * N + 1
    cost[:j, N:] = big
    return float(assignment_cost(cost))


def family_distance(X: Configuration, N: int, target: RectangleSpec, ell: int) -> float:
    """min over Z in Lambda_ell (|Z| = N-|X|) of d_N(X u Z, target).

    Returns ``inf`` when Lambda_ell cannot host the N-|X| free particles.
    """
    if target.particle_count != N:
        raise ValueError(f"target holds {target.particle_count} sites, N={N}")
    _check_family_input(X, N, ell, target.width)
    return _family_cost(X, N, ell, target.width, target.sites)


def family_rect_distance(X: Configuration, N: int, ell: int, width: int) -> tuple[float, Optional[int]]:
    """d_N(A_{X,N}, R^N): the family distance minimised over all rectangle shifts."""
    k = rect_depth(N, width)
    _check_family_input(X, N, ell, width)
    if N - len(X) > ell * width:
        return math.inf, None
    cols = [v[0] for v in X.sites] + [1, ell]
    d, s = _min_over_rectangles(
        lambda R: _family_cost(X, N, ell, width, R.sites), k, width, min(cols), max(cols)
    )
    return d, (None if s is None else s - 1)
