"""Non-autonomous quadratic iteration, escape times and Green's function.

For a parameter sequence omega = (c_0, c_1, ...) the n-th iterate is
f^n(z) = f_{c_{n-1}}( ... f_{c_0}(z)) with f_c(z) = z**2 + c.

The batch kernels at the bottom work on numpy arrays of starting points and
take a callable ``params(idx, steps)`` returning c for the points ``idx`` at
their own step numbers ``steps``.  The scalar functions are thin wrappers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .domain import ParamSequence, Region, sample_keyed, sequence_array, sequence_bound, stream_keys

__all__ = [
    "Constants",
    "GreenEval",
    "Escaped",
    "Bounded",
    "Overflow",
    "derive_constants",
    "iterate",
    "escape_time",
    "green",
    "escape_times",
    "green_batch",
    "sequence_params",
    "random_params",
    "DEFAULT_TOL",
    "DEFAULT_N_MAX",
]

DEFAULT_TOL = 1e-10
DEFAULT_N_MAX = 1000
OVERFLOW_MODULUS = 1e100

# tail of the correction series: sum_{t>=0} 8**-t = 8/7, times the 2R bound
_TAIL_FACTOR = 16.0 / 7.0
_LN2 = math.log(2.0)

ParamFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Constants:
    """Escape radius and Green bound for parameters with |c| <= R."""

    R: float
    R0: float
    tildeR0: float
    G: float


@dataclass(frozen=True)
class GreenEval:
    value: float
    abs_error: float


@dataclass(frozen=True)
class Escaped:
    k: int
    green: Optional[GreenEval] = None


@dataclass(frozen=True)
class Bounded:
    """The orbit stayed inside the escape disk up to ``horizon``."""

    horizon: int


@dataclass(frozen=True)
class Overflow:
    """Returned by `iterate` when an intermediate modulus exceeded 1e100."""

    step: int


EscapeOutcome = Union[Escaped, Bounded]


def derive_constants(R: float) -> Constants:
    """Constants for parameter radius R.

    R0 = max(1 + sqrt(1 + R), sqrt(2R), R + 1) makes |z**2 + c| >= 2|z| on
    |z| >= R0 and keeps |g(z) - log|z|| < 1 there.  G = log(tildeR0) + 1
    bounds g on the disk of radius tildeR0.
    """
    if not (R > 0 and math.isfinite(R)):
        raise ValueError(f"R must be positive and finite, got {R!r}")
    R0 = max(1.0 + math.sqrt(1.0 + R), math.sqrt(2.0 * R), R + 1.0)
    tilde = 0.5 * (R0 + R0 * R0 - R)
    return Constants(R=float(R), R0=R0, tildeR0=tilde, G=math.log(tilde) + 1.0)


# ---------------------------------------------------------------------------
# parameter providers for the batch kernels


def sequence_params(seq: ParamSequence, offsets=0) -> ParamFn:
    """Params for many starting points sharing one sequence.

    ``offsets`` (scalar or per-point array) shifts the sequence, i.e. point
    ``p`` follows sigma**offsets[p] omega.
    """
    offsets = np.asarray(offsets, dtype=np.int64)

    def params(idx, steps):
        off = offsets if offsets.ndim == 0 else offsets[idx]
        return sequence_array(seq, off + steps)

    return params


def random_params(region: Region, master_seed: int, streams, offsets=0) -> ParamFn:
    """Params for points each following its own random stream."""
    keys = stream_keys(master_seed, np.asarray(streams, dtype=np.int64))
    offsets = np.asarray(offsets, dtype=np.int64)

    def params(idx, steps):
        off = offsets if offsets.ndim == 0 else offsets[idx]
        return sample_keyed(region, keys[idx], off + steps)

    return params


# ---------------------------------------------------------------------------
# batch kernels


def escape_times(params: ParamFn, z, R0: float, n_max: int, return_points: bool = False):
    """Escape time of every point from the disk of radius R0.

    Returns an int64 array, -1 where the orbit stayed below R0 for all
    steps 0..n_max.  With ``return_points`` also returns f^k(z) at the escape
    step (nan for bounded orbits).
    """
    w = np.array(z, dtype=np.complex128).ravel()
    k = np.full(w.shape, -1, dtype=np.int64)
    hit = np.full(w.shape, np.nan, dtype=np.complex128)
    active = np.arange(w.size)
    for step in range(n_max + 1):
        out = np.abs(w) >= R0
        if out.any():
            k[active[out]] = step
            hit[active[out]] = w[out]
            active = active[~out]
            w = w[~out]
        if active.size == 0 or step == n_max:
            break
        w = w * w + params(active, np.full(active.shape, step, dtype=np.int64))
    return (k, hit) if return_points else k


def green_batch(params: ParamFn, z, consts: Constants, n_max: int, tol: float, c_bound: Optional[float] = None):
    """Green's function at many points.

    Returns ``(k, value, abs_error)`` arrays; ``k`` is the escape time from
    the disk of radius R0 (-1 for orbits bounded at the horizon, whose value
    and error are set to 0 and nan respectively).

    ``c_bound`` is an upper bound on |c_i| along the sequences.  If it
    exceeds ``consts.R`` the certification radius and tail bound use it
    instead, so the reported error stays rigorous.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    R_tail = consts.R if c_bound is None else max(consts.R, c_bound)
    R_cert = consts.R0 if R_tail <= consts.R else derive_constants(R_tail).R0

    z = np.array(z, dtype=np.complex128).ravel()
    k, hit = escape_times(params, z, consts.R0, n_max, return_points=True)
    value = np.zeros(z.shape)
    err = np.full(z.shape, np.nan)

    if R_cert == consts.R0:
        start = k
        idx = np.flatnonzero(k >= 0)
        w = hit[idx]
    else:
        start, hit = escape_times(params, z, R_cert, n_max, return_points=True)
        k[start < 0] = -1
        idx = np.flatnonzero(start >= 0)
        w = hit[idx]
    if idx.size == 0:
        return k, value, err

    # w_j = exp(L) * p with |p| = 1; V = 2**-j * L converges to g
    j = start[idx].copy()
    L = np.log(np.abs(w))
    p = w / np.abs(w)
    V = np.ldexp(L, -j)
    log_coef = math.log(_TAIL_FACTOR * R_tail)
    while idx.size:
        bound = np.exp(-(j + 1) * _LN2 + log_coef - 2.0 * L)
        done = bound < tol
        if done.any():
            value[idx[done]] = V[done]
            err[idx[done]] = bound[done]
            keep = ~done
            idx, j, L, p, V = idx[keep], j[keep], L[keep], p[keep], V[keep]
            if idx.size == 0:
                break
        c = params(idx, j)
        u = c * np.exp(-2.0 * L) / (p * p)
        log_corr = 0.5 * np.log1p(2.0 * u.real + (u.real * u.real + u.imag * u.imag))
        one_u = 1.0 + u
        p = p * p * (one_u / np.abs(one_u))
        L = 2.0 * L + log_corr
        j = j + 1
        V = V + np.ldexp(log_corr, -j)
    return k, value, err


# ---------------------------------------------------------------------------
# scalar API


def iterate(seq: ParamSequence, z: complex, n: int):
    """f^n(z) by direct iteration, or `Overflow` past modulus 1e100."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    w = complex(z)
    cs = sequence_array(seq, np.arange(n)) if n else ()
    for i, c in enumerate(cs):
        w = w * w + complex(c)
        if abs(w) > OVERFLOW_MODULUS:
            return Overflow(step=i + 1)
    return w


def escape_time(seq: ParamSequence, z: complex, consts: Constants, n_max: int = DEFAULT_N_MAX) -> EscapeOutcome:
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    k = int(escape_times(sequence_params(seq), [z], consts.R0, n_max)[0])
    return Escaped(k) if k >= 0 else Bounded(n_max)


def green(
    seq: ParamSequence,
    z: complex,
    consts: Constants,
    n_max: int = DEFAULT_N_MAX,
    tol: float = DEFAULT_TOL,
    offset: int = 0,
):
    """g_omega(z) with a certified error bound, or `Bounded` at the horizon.

    ``offset`` evaluates the Green's function of the shifted sequence
    sigma**offset omega.
    """
    k, value, err = green_batch(sequence_params(seq, offset), [z], consts, n_max, tol, sequence_bound(seq))
    if k[0] < 0:
        return Bounded(n_max)
    return GreenEval(float(value[0]), float(err[0]))
