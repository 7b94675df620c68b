"""Parameter regions and parameter sequences.

A region is a bounded set V of parameters c.  Sampling is counter based:
the draw for ``(master_seed, stream_index, draw_index)`` is a pure function
of those integers, so Monte Carlo results do not depend on how the work is
split between threads.  Only integer mixing, IEEE arithmetic and ``sqrt`` are
used, which keeps draws bitwise reproducible across platforms.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

__all__ = [
    "Disk",
    "Circle",
    "MainCardioid",
    "DiskAt",
    "RegionUnion",
    "Region",
    "Constant",
    "Explicit",
    "Periodic",
    "Random",
    "ParamSequence",
    "SamplingFault",
    "contains",
    "contains_array",
    "bounding_radius",
    "sample",
    "sample_array",
    "sample_keyed",
    "stream_keys",
    "sequence_at",
    "sequence_array",
    "sequence_bound",
    "uniforms",
]

MAX_REJECTIONS = 10**6
CIRCLE_TOL = 1e-12

_MASK = 0xFFFFFFFFFFFFFFFF
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


class SamplingFault(RuntimeError):
    """Raised when a rejection sampler exceeds its attempt cap."""


# ---------------------------------------------------------------------------
# counter-based uniforms


def _mix(x):
    # splitmix64 finalizer; uint64 array arithmetic wraps modulo 2**64
    x = x + _GAMMA
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def _as_u64(v):
    if isinstance(v, (int, np.integer)):
        return np.uint64(int(v) & _MASK)
    a = np.asarray(v)
    if a.dtype == np.uint64:
        return a
    return a.astype(np.int64).view(np.uint64)


def stream_keys(master_seed, stream):
    """Per-stream hash prefix; pass it to `keyed_uniforms` to skip rehashing."""
    with np.errstate(over="ignore"):
        h = _mix(np.full(np.shape(stream), _as_u64(master_seed), dtype=np.uint64))
        return _mix(h ^ _as_u64(stream))


def keyed_uniforms(key, draw, counter):
    with np.errstate(over="ignore"):
        h = _mix(key ^ _as_u64(draw))
        h = _mix(h ^ _as_u64(counter))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def uniforms(master_seed, stream, draw, counter):
    """Uniform doubles in [0, 1) keyed by four integers (arrays broadcast).

    ``counter`` enumerates independent values belonging to one draw, e.g.
    successive rejection attempts.
    """
    shape = np.broadcast(np.asarray(stream), np.asarray(draw), np.asarray(counter)).shape
    key = np.broadcast_to(stream_keys(master_seed, stream), shape)
    return keyed_uniforms(key, draw, counter)


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Disk:
    """Open disk of the given radius centred at the origin."""

    radius: float

    def __post_init__(self):
        _check_radius(self.radius)


@dataclass(frozen=True)
class Circle:
    """The circle |c| = radius, sampled by arc length."""

    radius: float

    def __post_init__(self):
        _check_radius(self.radius)


@dataclass(frozen=True)
class MainCardioid:
    """Main cardioid of the Mandelbrot set, c = mu/2 - mu**2/4 with |mu| < 1."""


@dataclass(frozen=True)
class DiskAt:
    center: complex
    radius: float

    def __post_init__(self):
        _check_radius(self.radius)
        c = complex(self.center)
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            raise ValueError(f"center must be finite, got {self.center!r}")
        object.__setattr__(self, "center", c)


@dataclass(frozen=True)
class RegionUnion:
    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("union must have at least one member")
        object.__setattr__(self, "members", members)


Region = Union[Disk, Circle, MainCardioid, DiskAt, RegionUnion]


def _check_radius(r):
    if not (isinstance(r, (int, float)) and math.isfinite(r) and r > 0):
        raise ValueError(f"radius must be a positive finite number, got {r!r}")


def contains(region: Region, c: complex) -> bool:
    """Membership test; open regions use strict inequalities."""
    return bool(contains_array(region, np.asarray([complex(c)]))[0])


def contains_array(region: Region, c) -> np.ndarray:
    c = np.asarray(c, dtype=np.complex128)
    if isinstance(region, Disk):
        return np.abs(c) < region.radius
    if isinstance(region, Circle):
        return np.abs(np.abs(c) - region.radius) <= CIRCLE_TOL
    if isinstance(region, DiskAt):
        return np.abs(c - region.center) < region.radius
    if isinstance(region, MainCardioid):
        # principal sqrt has nonnegative real part, so mu = 1 - w is the
        # root of c = mu/2 - mu**2/4 closest to the origin
        w = np.sqrt(1.0 - 4.0 * c)
        return np.abs(1.0 - w) < 1.0
    if isinstance(region, RegionUnion):
        out = np.zeros(c.shape, dtype=bool)
        for m in region.members:
            out |= contains_array(m, c)
        return out
    raise TypeError(f"not a region: {region!r}")


def bounding_radius(region: Region) -> float:
    """Smallest R with the region inside the closed disk of radius R."""
    if isinstance(region, (Disk, Circle)):
        return float(region.radius)
    if isinstance(region, MainCardioid):
        return 0.75
    if isinstance(region, DiskAt):
        return abs(region.center) + region.radius
    if isinstance(region, RegionUnion):
        return max(bounding_radius(m) for m in region.members)
    raise TypeError(f"not a region: {region!r}")


def _bounding_box(region: Region):
    """(xmin, xmax, ymin, ymax) enclosing the region."""
    if isinstance(region, (Disk, Circle)):
        r = region.radius
        return -r, r, -r, r
    if isinstance(region, MainCardioid):
        # Re c spans [-3/4, 3/8] (max at cos(theta) = 1/2, the cusp at 1/4
        # points inward); |Im c| peaks at 3*sqrt(3)/8 ~ 0.6495
        return -0.75, 0.375, -0.65, 0.65
    if isinstance(region, DiskAt):
        x, y, r = region.center.real, region.center.imag, region.radius
        return x - r, x + r, y - r, y + r
    boxes = [_bounding_box(m) for m in region.members]
    return (
        min(b[0] for b in boxes),
        max(b[1] for b in boxes),
        min(b[2] for b in boxes),
        max(b[3] for b in boxes),
    )


def _unit_disk_points(key, draw, min_modulus=0.0):
    """Uniform points of the open unit disk by rejection from the square."""
    key, draw = np.broadcast_arrays(key, np.asarray(draw))
    out = np.empty(key.shape, dtype=np.complex128)
    pending = np.arange(key.size)
    s, d = key.ravel(), draw.ravel()
    flat = out.reshape(-1)
    for attempt in range(MAX_REJECTIONS):
        if attempt == 0:
            x = 2.0 * keyed_uniforms(s, d, 0) - 1.0
            y = 2.0 * keyed_uniforms(s, d, 1) - 1.0
        else:
            x = 2.0 * keyed_uniforms(s[pending], d[pending], 2 * attempt) - 1.0
            y = 2.0 * keyed_uniforms(s[pending], d[pending], 2 * attempt + 1) - 1.0
        r2 = x * x + y * y
        ok = (r2 < 1.0) & (r2 >= min_modulus * min_modulus)
        flat[pending[ok]] = x[ok] + 1j * y[ok]
        pending = pending[~ok]
        if pending.size == 0:
            return out
    raise SamplingFault("unit-disk sampler exceeded the rejection cap")


def _box_rejection(region, key, draw):
    key, draw = np.broadcast_arrays(key, np.asarray(draw))
    x0, x1, y0, y1 = _bounding_box(region)
    out = np.empty(key.shape, dtype=np.complex128)
    flat = out.reshape(-1)
    s, d = key.ravel(), draw.ravel()
    pending = np.arange(key.size)
    for attempt in range(MAX_REJECTIONS):
        x = x0 + (x1 - x0) * keyed_uniforms(s[pending], d[pending], 2 * attempt)
        y = y0 + (y1 - y0) * keyed_uniforms(s[pending], d[pending], 2 * attempt + 1)
        c = x + 1j * y
        ok = contains_array(region, c)
        flat[pending[ok]] = c[ok]
        pending = pending[~ok]
        if pending.size == 0:
            return out
    raise SamplingFault(f"rejection sampler for {region!r} exceeded the cap")


def sample_array(region: Region, master_seed: int, stream, draw) -> np.ndarray:
    """Vectorised `sample`; ``stream`` and ``draw`` are broadcast integer arrays."""
    return sample_keyed(region, stream_keys(master_seed, np.asarray(stream, dtype=np.int64)), draw)


def sample_keyed(region: Region, key, draw) -> np.ndarray:
    """`sample_array` with precomputed `stream_keys`."""
    draw = np.asarray(draw, dtype=np.int64)
    if isinstance(region, Disk):
        return region.radius * _unit_disk_points(key, draw)
    if isinstance(region, DiskAt):
        return region.center + region.radius * _unit_disk_points(key, draw)
    if isinstance(region, Circle):
        # direction of a uniform disk point is uniform on the circle
        p = _unit_disk_points(key, draw, min_modulus=1e-3)
        return region.radius * (p / np.abs(p))
    if isinstance(region, (MainCardioid, RegionUnion)):
        return _box_rejection(region, key, draw)
    raise TypeError(f"not a region: {region!r}")


def sample(region: Region, master_seed: int, stream_index: int, draw_index: int) -> complex:
    """One uniform draw from the region, a pure function of its arguments."""
    return complex(sample_array(region, master_seed, np.array([stream_index]), np.array([draw_index]))[0])


# ---------------------------------------------------------------------------
# parameter sequences


@dataclass(frozen=True)
class Constant:
    c: complex


@dataclass(frozen=True)
class Explicit:
    """Finite prefix followed by a constant tail."""

    items: tuple
    tail: complex

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(complex(v) for v in self.items))


@dataclass(frozen=True)
class Periodic:
    items: tuple

    def __post_init__(self):
        items = tuple(complex(v) for v in self.items)
        if not items:
            raise ValueError("periodic sequence needs at least one item")
        object.__setattr__(self, "items", items)


@dataclass(frozen=True)
class Random:
    region: Region
    master_seed: int
    stream_index: int = 0


ParamSequence = Union[Constant, Explicit, Periodic, Random]


def sequence_at(seq: ParamSequence, i: int) -> complex:
    """The parameter c_i; the shift sigma**k is realised as ``i + k``."""
    if isinstance(seq, Constant):
        return complex(seq.c)
    if isinstance(seq, Explicit):
        return seq.items[i] if i < len(seq.items) else complex(seq.tail)
    if isinstance(seq, Periodic):
        return seq.items[i % len(seq.items)]
    if isinstance(seq, Random):
        return sample(seq.region, seq.master_seed, seq.stream_index, i)
    raise TypeError(f"not a parameter sequence: {seq!r}")


def sequence_array(seq: ParamSequence, idx) -> np.ndarray:
    """Vectorised `sequence_at` over an integer index array."""
    idx = np.asarray(idx, dtype=np.int64)
    if isinstance(seq, Constant):
        return np.full(idx.shape, complex(seq.c))
    if isinstance(seq, Explicit):
        table = np.asarray(seq.items + (complex(seq.tail),), dtype=np.complex128)
        return table[np.minimum(idx, len(seq.items))]
    if isinstance(seq, Periodic):
        return np.asarray(seq.items, dtype=np.complex128)[idx % len(seq.items)]
    if isinstance(seq, Random):
        return sample_array(seq.region, seq.master_seed, seq.stream_index, idx)
    raise TypeError(f"not a parameter sequence: {seq!r}")


def sequence_bound(seq: ParamSequence) -> float:
    """An upper bound on |c_i| over all i."""
    if isinstance(seq, Constant):
        return abs(complex(seq.c))
    if isinstance(seq, (Explicit, Periodic)):
        vals: Sequence[complex] = seq.items + ((complex(seq.tail),) if isinstance(seq, Explicit) else ())
        return max(abs(v) for v in vals)
    if isinstance(seq, Random):
        return bounding_radius(seq.region)
    raise TypeError(f"not a parameter sequence: {seq!r}")


def cardioid_point(mu: complex) -> complex:
    return mu / 2 - mu * mu / 4


def cardioid_mu(c: complex) -> complex:
    return 1 - cmath.sqrt(1 - 4 * c)
