"""Degree profiles, the shift scan for disconnectedness, and grid topology.

The degree profile of omega counts, for each level k, the indices i < k at
which the critical value is slow to escape:

    l(k) = #{ i < k : g_{sigma^i omega}(0) < G * 2**-(k - i) }.

Every component of the preimage of the disk of radius tildeR0 under f^k then
maps onto that disk with degree at most 2**l(k).
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import ndimage

from .domain import ParamSequence, sequence_bound
from .dynamics import (
    DEFAULT_N_MAX,
    DEFAULT_TOL,
    Bounded,
    Constants,
    GreenEval,
    escape_times,
    green_batch,
    sequence_params,
)

__all__ = [
    "DegreeProfile",
    "Verdict",
    "SufficiencyReport",
    "GridField",
    "ComponentReport",
    "UnionFind",
    "level_counts",
    "critical_profile",
    "property_Kk",
    "sufficient_condition_report",
    "bbr_disconnected_scan",
    "grid_escape_field",
    "label_cells",
    "components",
]


# ---------------------------------------------------------------------------
# degree profile


@dataclass(frozen=True)
class DegreeProfile:
    k_max: int
    critical_greens: Tuple[Tuple[int, Union[GreenEval, Bounded]], ...]
    l: Tuple[int, ...]  # l[k - 1] = l(k)
    horizon: int
    tie_levels: Tuple[int, ...] = ()  # levels k where a threshold tie was resolved as membership

    def l_at(self, k: int) -> int:
        if not 1 <= k <= self.k_max:
            raise ValueError(f"level {k} outside 1..{self.k_max}")
        return self.l[k - 1]

    @property
    def degree_bound(self) -> Tuple[int, ...]:
        return tuple(2**v for v in self.l)

    @property
    def horizon_limited(self) -> bool:
        return any(isinstance(g, Bounded) for _, g in self.critical_greens)


def level_counts(g, err, bounded, G: float):
    """l(k) for k = 1..k_max from critical Green values along the shifts.

    ``g``, ``err`` and ``bounded`` have shape (..., k_max) with entry i the
    values for sigma^i omega.  Returns ``(l, ties)`` of shape (..., k_max):
    ``l[..., k-1]`` is l(k), ``ties`` marks levels where a comparison fell
    within the error bound and was counted as membership.
    """
    g = np.asarray(g, dtype=float)
    err = np.nan_to_num(np.asarray(err, dtype=float), nan=0.0)
    bounded = np.asarray(bounded, dtype=bool)
    k_max = g.shape[-1]
    i = np.arange(k_max)[:, None]
    k = np.arange(1, k_max + 1)[None, :]
    below = i < k
    thr = np.where(below, G * np.exp2(-(k - i).astype(float)), 0.0)
    gi, ei, bi = g[..., :, None], err[..., :, None], bounded[..., :, None]
    member = below & (bi | (gi - ei < thr))
    tie = below & ~bi & (gi - ei < thr) & ~(gi + ei < thr)
    return member.sum(axis=-2), tie.any(axis=-2)


def critical_profile(
    seq: ParamSequence,
    k_max: int,
    consts: Constants,
    n_max: int = DEFAULT_N_MAX,
    tol: float = DEFAULT_TOL,
) -> DegreeProfile:
    """Evaluate g_{sigma^i omega}(0) for i < k_max and tabulate l(k)."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    shifts = np.arange(k_max)
    k, g, err = green_batch(sequence_params(seq, shifts), np.zeros(k_max), consts, n_max, tol, sequence_bound(seq))
    bounded = k < 0
    l, ties = level_counts(g, err, bounded, consts.G)
    greens = tuple(
        (int(i), Bounded(n_max) if bounded[i] else GreenEval(float(g[i]), float(err[i]))) for i in shifts
    )
    return DegreeProfile(
        k_max=k_max,
        critical_greens=greens,
        l=tuple(int(v) for v in l),
        horizon=n_max,
        tie_levels=tuple(int(v) + 1 for v in np.flatnonzero(ties)),
    )


def property_Kk(profile: DegreeProfile, K: int, k: int) -> bool:
    """More than K of the shifts sigma^i omega (i < k) are slow at level k - i."""
    return profile.l_at(k) > K


class Verdict(str, enum.Enum):
    EVIDENCE_TOTALLY_DISCONNECTED = "EvidenceTotallyDisconnected"
    INCONCLUSIVE = "Inconclusive"


HORIZON_CAVEAT = (
    "finite-horizon diagnostic: degree bounds hold at the listed levels only; "
    "bounded degrees at infinitely many levels cannot be certified by a finite run"
)


@dataclass(frozen=True)
class SufficiencyReport:
    K: int
    k_max: int
    levels_satisfying: Tuple[int, ...]
    verdict: Verdict
    horizon_limited: bool
    caveat: str = HORIZON_CAVEAT


def sufficient_condition_report(profile: DegreeProfile, K: int) -> SufficiencyReport:
    """Levels whose degree bound is at most 2**K, with a half-the-levels verdict."""
    levels = tuple(k for k in range(1, profile.k_max + 1) if profile.l_at(k) <= K)
    enough = len(levels) >= math.ceil(profile.k_max / 2)
    return SufficiencyReport(
        K=K,
        k_max=profile.k_max,
        levels_satisfying=levels,
        verdict=Verdict.EVIDENCE_TOTALLY_DISCONNECTED if enough else Verdict.INCONCLUSIVE,
        horizon_limited=profile.horizon_limited,
    )


def bbr_disconnected_scan(
    seq: ParamSequence, shift_max: int, consts: Constants, n_max: int = DEFAULT_N_MAX
) -> List[int]:
    """Shifts k in 0..shift_max whose critical orbit leaves the disk of radius R0.

    A nonempty result certifies that J_omega is disconnected; an empty one is
    only evidence of connectedness up to the horizon.
    """
    shifts = np.arange(shift_max + 1)
    k = escape_times(sequence_params(seq, shifts), np.zeros(shifts.size), consts.R0, n_max)
    return [int(s) for s in shifts[k >= 0]]


# ---------------------------------------------------------------------------
# grid approximation of the filled Julia set


@dataclass(frozen=True)
class GridField:
    """Escape times at cell centres; row 0 is the top (largest imaginary part).

    ``cells`` holds the escape time, or -1 for orbits bounded at ``n_max``.
    """

    center: complex
    half_width: float
    resolution: int
    n_max: int
    cells: np.ndarray = field(repr=False)

    @property
    def cell_size(self) -> float:
        return 2.0 * self.half_width / self.resolution

    @property
    def bounded(self) -> np.ndarray:
        return self.cells < 0

    def cell_centers(self) -> np.ndarray:
        return _cell_centers(self.center, self.half_width, self.resolution)


def _cell_centers(center: complex, half_width: float, resolution: int) -> np.ndarray:
    h = 2.0 * half_width / resolution
    offs = -half_width + (np.arange(resolution) + 0.5) * h
    x = center.real + offs
    y = center.imag - offs  # top row first
    return x[None, :] + 1j * y[:, None]


def grid_escape_field(
    seq: ParamSequence,
    consts: Constants,
    box: Optional[Tuple[complex, float]] = None,
    resolution: int = 512,
    n_max: int = DEFAULT_N_MAX,
    threads: int = 1,
) -> GridField:
    """Escape time of every cell centre; ``box`` is (center, half_width)."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    center, half_width = (0j, consts.R0) if box is None else (complex(box[0]), float(box[1]))
    pts = _cell_centers(center, half_width, resolution)
    params = sequence_params(seq)
    rows = np.array_split(np.arange(resolution), max(1, min(resolution, 8 * threads)))

    def run(block):
        return escape_times(params, pts[block], consts.R0, n_max).reshape(block.size, resolution)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, rows))
    else:
        parts = [run(b) for b in rows]
    return GridField(center, half_width, resolution, n_max, np.vstack(parts))


class UnionFind:
    """Disjoint sets over 0..n-1 with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra


def _label_union_find(mask: np.ndarray) -> Tuple[np.ndarray, int]:
    rows, cols = mask.shape
    uf = UnionFind(rows * cols)
    for r, c in zip(*np.nonzero(mask)):
        a = r * cols + c
        if c + 1 < cols and mask[r, c + 1]:
            uf.union(a, a + 1)
        if r + 1 < rows and mask[r + 1, c]:
            uf.union(a, a + cols)
    labels = np.zeros(mask.shape, dtype=np.int64)
    ids = {}
    for r, c in zip(*np.nonzero(mask)):
        root = uf.find(r * cols + c)
        labels[r, c] = ids.setdefault(root, len(ids) + 1)
    return labels, len(ids)


def label_cells(mask: np.ndarray, backend: str = "scipy") -> Tuple[np.ndarray, int]:
    """4-connected component labels (1..n, 0 for background) and their count."""
    mask = np.asarray(mask, dtype=bool)
    if backend == "scipy":
        labels, n = ndimage.label(mask, structure=ndimage.generate_binary_structure(2, 1))
        return labels, int(n)
    if backend == "union_find":
        return _label_union_find(mask)
    raise ValueError(f"unknown backend {backend!r}")


@dataclass(frozen=True)
class ComponentReport:
    component_count: int
    sizes: Tuple[int, ...]
    max_diameter: float
    resolution: int
    n_max: int


def components(grid: GridField, backend: str = "scipy") -> ComponentReport:
    """Connected components of the bounded cells.

    The diameter of a component is the diagonal of the bounding box of its
    cells, in plane units.
    """
    labels, n = label_cells(grid.bounded, backend)
    if n == 0:
        return ComponentReport(0, (), 0.0, grid.resolution, grid.n_max)
    sizes = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    diam = 0.0
    for sl in ndimage.find_objects(labels):
        dr = sl[0].stop - sl[0].start
        dc = sl[1].stop - sl[1].start
        diam = max(diam, math.hypot(dr, dc))
    return ComponentReport(
        component_count=n,
        sizes=tuple(int(s) for s in sorted(sizes, reverse=True)),
        max_diameter=diam * grid.cell_size,
        resolution=grid.resolution,
        n_max=grid.n_max,
    )
