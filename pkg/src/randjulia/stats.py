"""Monte Carlo estimates over random parameter sequences.

Sample ``s`` follows the random stream ``s`` of the master seed and starts at
z = 0.  Work is cut into chunks aligned to absolute stream indices, so the
per-sample results, and every aggregate built from them, are identical for
any thread count and for runs split into disjoint stream ranges.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .connectivity import level_counts
from .domain import Region, bounding_radius
from .dynamics import DEFAULT_TOL, Constants, derive_constants, escape_times, green_batch, random_params

__all__ = [
    "Mode",
    "CriticalSamples",
    "TailCurve",
    "GammaFit",
    "InsufficientData",
    "DisconnectReport",
    "GreenSummary",
    "sample_critical",
    "tail_from_samples",
    "sample_tail",
    "merge_tails",
    "fit_gamma",
    "fast_escape_violations",
    "sandwich_violations",
    "disconnect_fraction",
    "green_summary",
]

CHUNK = 4096
DEFAULT_K_CAP = 4
QUANTILES = (0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0)


class Mode(str, enum.Enum):
    ESCAPE_TIME = "escape-time"
    FAST_ESCAPE_GREEN = "fast-escape-green"


class InsufficientData(ValueError):
    """Fewer than three usable points to fit an exponential rate."""


def _chunks(start: int, stop: int):
    lo = start
    while lo < stop:
        hi = min(stop, (lo // CHUNK + 1) * CHUNK)
        yield lo, hi
        lo = hi


def _map_spans(fn, spans, threads: int):
    spans = list(spans)
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda sp: fn(*sp), spans))
    return [fn(*sp) for sp in spans]


# ---------------------------------------------------------------------------
# per-sample data


@dataclass(frozen=True)
class CriticalSamples:
    """Escape time and Green value of the critical point, one entry per stream.

    ``k`` is -1 for orbits bounded at ``n_max``; their ``g`` is 0 and ``err``
    nan.  ``g`` is None when only escape times were computed.
    """

    stream_start: int
    k: np.ndarray
    g: Optional[np.ndarray]
    err: Optional[np.ndarray]
    consts: Constants
    n_max: int

    @property
    def M(self) -> int:
        return int(self.k.size)

    @property
    def censored(self) -> np.ndarray:
        return self.k < 0


def sample_critical(
    region: Region,
    M: int,
    n_max: int,
    master_seed: int,
    with_green: bool = True,
    tol: float = DEFAULT_TOL,
    stream_start: int = 0,
    threads: int = 1,
    consts: Optional[Constants] = None,
) -> CriticalSamples:
    """Escape times (and Green values) of z = 0 for streams ``stream_start`` onwards."""
    if M < 1:
        raise ValueError("M must be positive")
    consts = consts or derive_constants(bounding_radius(region))
    c_bound = bounding_radius(region)

    def run(lo, hi):
        streams = np.arange(lo, hi)
        params = random_params(region, master_seed, streams)
        z = np.zeros(streams.size)
        if with_green:
            return green_batch(params, z, consts, n_max, tol, c_bound)
        return escape_times(params, z, consts.R0, n_max), None, None

    parts = _map_spans(run, _chunks(stream_start, stream_start + M), threads)
    k = np.concatenate([p[0] for p in parts])
    g = np.concatenate([p[1] for p in parts]) if with_green else None
    err = np.concatenate([p[2] for p in parts]) if with_green else None
    return CriticalSamples(stream_start, k, g, err, consts, n_max)


# ---------------------------------------------------------------------------
# tail curves


@dataclass(frozen=True)
class TailCurve:
    """Survival counts at k = 0..k_max; censored samples survive at every k."""

    M: int
    survivors: Tuple[float, ...]
    censored: int
    n_max: int
    master_seed: int
    mode: Mode = Mode.ESCAPE_TIME

    def __post_init__(self):
        s = np.asarray(self.survivors, dtype=float)
        if np.any(np.diff(s) > 0):
            raise ValueError("survivor counts must be nonincreasing in k")
        if np.any(s < 0) or np.any(s > self.M):
            raise ValueError("survivor counts must lie in [0, M]")

    @property
    def k_max(self) -> int:
        return len(self.survivors) - 1

    @property
    def k_values(self) -> np.ndarray:
        return np.arange(len(self.survivors))

    @property
    def survival(self) -> np.ndarray:
        return np.asarray(self.survivors, dtype=float) / self.M

    @property
    def stderr(self) -> np.ndarray:
        p = self.survival
        return np.sqrt(p * (1 - p) / self.M)

    def median(self) -> Optional[int]:
        """Smallest k with survival(k) <= 1/2, None if never reached."""
        hits = np.flatnonzero(self.survival <= 0.5)
        return int(hits[0]) if hits.size else None

    @classmethod
    def from_survival(cls, survival: Sequence[float], M: float = 1.0, **kw) -> "TailCurve":
        """Build a curve from survival fractions (e.g. synthetic tests)."""
        surv = np.asarray(survival, dtype=float)
        return cls(M=M, survivors=tuple(surv * M), censored=kw.pop("censored", 0),
                   n_max=kw.pop("n_max", len(surv) - 1), master_seed=kw.pop("master_seed", 0), **kw)


def tail_from_samples(data: CriticalSamples, k_max: int, mode: Mode, master_seed: int) -> TailCurve:
    ks = np.arange(k_max + 1)
    if mode is Mode.ESCAPE_TIME:
        t = np.where(data.censored, np.iinfo(np.int64).max, data.k)
        # survivors(k) = #{t > k}
        counts = np.bincount(np.minimum(t, k_max + 1), minlength=k_max + 2)
        survivors = data.M - np.cumsum(counts)[: k_max + 1]
    else:
        if data.g is None:
            raise ValueError("fast-escape mode needs Green values")
        thr = data.consts.G * np.exp2(-ks.astype(float))
        g = np.where(data.censored, 0.0, data.g)
        # g < thr[k] holds for k up to the last threshold above g
        last = np.searchsorted(-thr, -g, side="left") - 1
        counts = np.bincount(last + 1, minlength=k_max + 2)
        survivors = data.M - np.cumsum(counts)[: k_max + 1]
    return TailCurve(
        M=data.M,
        survivors=tuple(int(v) for v in survivors),
        censored=int(data.censored.sum()),
        n_max=data.n_max,
        master_seed=master_seed,
        mode=mode,
    )


def sample_tail(
    region: Region,
    M: int,
    k_max: int,
    n_max: int,
    master_seed: int,
    mode: Mode = Mode.ESCAPE_TIME,
    tol: float = DEFAULT_TOL,
    stream_start: int = 0,
    threads: int = 1,
) -> TailCurve:
    """Survival curve of the critical escape time or of the fast-escape event."""
    if k_max > n_max:
        raise ValueError("k_max must not exceed n_max")
    mode = Mode(mode)
    data = sample_critical(
        region, M, n_max, master_seed, with_green=mode is Mode.FAST_ESCAPE_GREEN,
        tol=tol, stream_start=stream_start, threads=threads,
    )
    return tail_from_samples(data, k_max, mode, master_seed)


def merge_tails(a: TailCurve, b: TailCurve) -> TailCurve:
    """Pool two curves computed on disjoint stream ranges."""
    if (a.k_max, a.n_max, a.master_seed, a.mode) != (b.k_max, b.n_max, b.master_seed, b.mode):
        raise ValueError("curves differ in k_max, n_max, seed or mode")
    return TailCurve(
        M=a.M + b.M,
        survivors=tuple(x + y for x, y in zip(a.survivors, b.survivors)),
        censored=a.censored + b.censored,
        n_max=a.n_max,
        master_seed=a.master_seed,
        mode=a.mode,
    )


@dataclass(frozen=True)
class GammaFit:
    gamma_hat: float
    intercept: float
    fit_range: Tuple[int, int]
    rms_residual: float
    min_survivors: int
    n_points: int


def fit_gamma(curve: TailCurve, k_lo: int = 5, min_survivors: int = 30) -> GammaFit:
    """Least-squares slope of log survival against k.

    Points need k >= k_lo, at least ``min_survivors`` survivors, and
    0 < survival < 1 (a flat head carries no decay information).
    """
    surv = curve.survival
    ks = curve.k_values
    counts = np.asarray(curve.survivors, dtype=float)
    use = (ks >= k_lo) & (counts >= min_survivors) & (surv > 0) & (surv < 1)
    if use.sum() < 3:
        raise InsufficientData(f"only {int(use.sum())} usable points from k={k_lo} (need 3)")
    x = ks[use].astype(float)
    y = np.log(surv[use])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    return GammaFit(
        gamma_hat=float(-slope),
        intercept=float(intercept),
        fit_range=(int(x[0]), int(x[-1])),
        rms_residual=float(np.sqrt(np.mean(resid**2))),
        min_survivors=min_survivors,
        n_points=int(use.sum()),
    )


# ---------------------------------------------------------------------------
# per-sample consistency checks


def sandwich_violations(data: CriticalSamples) -> np.ndarray:
    """Mask of escaped samples (k >= 1) outside the two-sided escape-time bound.

    (log R0 - 1) 2**-k <= g <= 2 (log R0 + 1) 2**-k, with the certified
    error of g as slack.
    """
    lr = math.log(data.consts.R0)
    k = data.k
    esc = k >= 1
    scale = np.exp2(-np.where(esc, k, 0).astype(float))
    err = np.nan_to_num(data.err, nan=0.0)
    low = data.g + err < (lr - 1) * scale
    high = data.g - err > 2 * (lr + 1) * scale
    return esc & (low | high)


def fast_escape_violations(data: CriticalSamples, m_max: int) -> np.ndarray:
    """Mask of samples breaking  g < (log R0 - 1) 2**-m  =>  k > m  for some m <= m_max."""
    lr = math.log(data.consts.R0)
    m = np.arange(m_max + 1, dtype=float)
    err = np.nan_to_num(data.err, nan=0.0)
    slow = (data.g + err)[:, None] < (lr - 1) * np.exp2(-m)[None, :]
    t = np.where(data.censored, np.iinfo(np.int64).max, data.k)
    escaped_by_m = t[:, None] <= m[None, :]
    return (slow & escaped_by_m).any(axis=1)


# ---------------------------------------------------------------------------
# disconnectedness fractions


@dataclass(frozen=True)
class DisconnectReport:
    M: int
    shift_max: int
    k_max: int
    n_max: int
    K_used: int
    fraction_disconnected: float
    fraction_evidence_td: float
    horizon_limited_samples: int


def disconnect_fraction(
    region: Region,
    M: int,
    shift_max: int,
    n_max: int,
    master_seed: int,
    K_cap: int = DEFAULT_K_CAP,
    k_max: Optional[int] = None,
    tol: float = DEFAULT_TOL,
    threads: int = 1,
) -> DisconnectReport:
    """Fractions of samples with a certified disconnected Julia set, and with
    degree-profile evidence of total disconnectedness at cap K."""
    k_max = shift_max if k_max is None else k_max
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    consts = derive_constants(bounding_radius(region))
    c_bound = bounding_radius(region)
    n_shift = max(shift_max + 1, k_max)

    def run(lo, hi):
        streams = np.repeat(np.arange(lo, hi), n_shift)
        offsets = np.tile(np.arange(n_shift), hi - lo)
        k, g, err = green_batch(random_params(region, master_seed, streams, offsets),
                                np.zeros(streams.size), consts, n_max, tol, c_bound)
        k, g, err = (a.reshape(hi - lo, n_shift) for a in (k, g, err))
        disconnected = (k[:, : shift_max + 1] >= 0).any(axis=1)
        bounded = k[:, :k_max] < 0
        l, _ = level_counts(g[:, :k_max], err[:, :k_max], bounded, consts.G)
        satisfying = (l <= K_cap).sum(axis=1)
        evidence = satisfying >= math.ceil(k_max / 2)
        return disconnected, evidence, bounded.any(axis=1)

    # a chunk holds about CHUNK orbits, i.e. CHUNK // n_shift samples
    step = max(1, CHUNK // n_shift)
    parts = _map_spans(run, [(lo, min(M, lo + step)) for lo in range(0, M, step)], threads)
    disc = np.concatenate([p[0] for p in parts])
    evid = np.concatenate([p[1] for p in parts])
    lim = np.concatenate([p[2] for p in parts])
    return DisconnectReport(
        M=M,
        shift_max=shift_max,
        k_max=k_max,
        n_max=n_max,
        K_used=K_cap,
        fraction_disconnected=float(disc.mean()),
        fraction_evidence_td=float(evid.mean()),
        horizon_limited_samples=int(lim.sum()),
    )


# ---------------------------------------------------------------------------
# Green's function summary


@dataclass(frozen=True)
class GreenSummary:
    M: int
    n_max: int
    quantiles: Dict[float, float]
    censored_fraction: float
    sandwich_violations: int
    escaped: int
    R0: float


def green_summary(
    region: Region,
    M: int,
    n_max: int,
    master_seed: int,
    tol: float = DEFAULT_TOL,
    threads: int = 1,
) -> GreenSummary:
    """Quantiles of g_omega(0) (0 for horizon-bounded samples) and a sandwich check."""
    data = sample_critical(region, M, n_max, master_seed, with_green=True, tol=tol, threads=threads)
    g = np.where(data.censored, 0.0, data.g)
    return GreenSummary(
        M=M,
        n_max=n_max,
        quantiles={q: float(np.quantile(g, q)) for q in QUANTILES},
        censored_fraction=float(data.censored.mean()),
        sandwich_violations=int(sandwich_violations(data).sum()),
        escaped=int((~data.censored).sum()),
        R0=data.consts.R0,
    )
