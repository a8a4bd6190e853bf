"""Averaged-moment inequalities over complements of exceptional sets.

The experiments here all follow one pattern: decompose a function at
height lambda, remove a union E of dilated bad cells, and integrate a
spectral quantity (partial sums, or a kernel convolved with |f|^2) over
the complement.  E lives as a bitmap of integer unit cells at scale
2**(J+4) per axis, the same scale the dilation arithmetic uses, so its
measure is an exact Fraction and quadrature weights on any power-of-two
grid are exact dyadic numbers.

Partial-sum sweeps never rebuild S_n from scratch: S_n differs from
S_{n-1} by two modes, so a chunked running sum over the refined grid
computes the whole curve n = 1..N_max in O(N_max * M) work.  Orders are
capped at the stored bandwidth n/2; the reading at the cap includes the
shared Nyquist coefficient on both sides, matching `spectral.partial_sum`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .czd import CZDecomposition, decompose
from .dyadic import dilate, scale_for
from .grid import GridFunction
from .spectral import (
    AliasingError,
    band_energy,
    convolve,
    forward,
    kernel_samples,
    plancherel_average,
    plancherel_average_rect,
    saturated_sum,
    valle_poussin,
)

SUPPORTED_DILATIONS = (1, 3, 5)
DEFAULT_LAM_GRID = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)


class NotBandLimitedError(ValueError):
    """Input carries energy beyond the admissible frequency band."""


class ScheduleInfeasibleError(ValueError):
    """No schedule point satisfies the first mean-square threshold."""


# ---------------------------------------------------------------------------
# exceptional sets


@dataclass
class ExceptionalSet:
    """Union of dilated bad cells as a unit bitmap, with exact measure.

    Two geometries exist for dim >= 2.  "cube" dilates each bad cube
    about its center, so the removed set has measure <= (c/lam)^ (per
    cell sums).  "slab" removes every point whose i-th coordinate falls
    in the dilated i-th shadow of some bad cube, for any axis i; the
    complement is then a product set.  Cube removal is smaller but its
    complement keeps cross-bands that run along a bad cube in one
    coordinate, and partial-sum mass parked on those bands grows with
    the order.  Slab removal trades a larger measure for a complement
    on which separable averages factor.  For dim == 1 they coincide.
    """

    dim: int
    scale: int  # units per axis
    lam: float
    dilation: int
    mask: np.ndarray = field(repr=False)
    measure: Fraction
    geometry: str = "cube"
    _weights: dict = field(default_factory=dict, repr=False, compare=False)

    def complement_weights(self, M: int) -> np.ndarray:
        """Fraction of each M-grid cell lying outside the set.

        Exact: M and the bitmap scale are both powers of two, so each
        weight is a count divided by a power of two.
        """
        w = self._weights.get(M)
        if w is not None:
            return w
        S = self.scale
        if self.dim == 1:
            if M <= S:
                w = 1.0 - self.mask.reshape(M, S // M).mean(axis=1)
            else:
                w = 1.0 - np.repeat(self.mask, M // S).astype(float)
        else:
            if M <= S:
                r = S // M
                w = 1.0 - self.mask.reshape(M, r, M, r).mean(axis=(1, 3))
            else:
                r = M // S
                w = 1.0 - np.repeat(np.repeat(self.mask, r, 0), r, 1).astype(float)
        self._weights[M] = w
        return w


def _mark_arc(mask: np.ndarray, lo: int, hi: int):
    S = mask.shape[0]
    if hi <= S:
        mask[lo:hi] = True
    else:
        mask[lo:] = True
        mask[: hi - S] = True


def _axis_segments(lo: int, hi: int, S: int) -> list[tuple[int, int]]:
    if hi <= S:
        return [(lo, hi)]
    return [(lo, S), (0, hi - S)]


def _dilated_units(iv, c: int, J: int) -> tuple[int, int]:
    if c == 1:
        return iv.units(J)
    arc = dilate(iv, c, j_max=J)
    return arc.lo, arc.hi


def build_exceptional_set(cz: CZDecomposition, c: int = 5,
                          geometry: str = "cube") -> ExceptionalSet:
    """E = union of c-dilated bad cells of the decomposition."""
    if c not in SUPPORTED_DILATIONS:
        raise ValueError(f"dilation {c} not in {SUPPORTED_DILATIONS}")
    if geometry not in ("cube", "slab"):
        raise ValueError(f"unknown geometry {geometry!r}")
    J = cz.J
    S = scale_for(J)
    if cz.dim == 1:
        geometry = "cube"  # identical constructions
        mask = np.zeros(S, dtype=bool)
        for iv in cz.bad:
            _mark_arc(mask, *_dilated_units(iv, c, J))
        measure = Fraction(int(mask.sum()), S)
    elif geometry == "slab":
        axis_masks = []
        for a in range(2):
            m = np.zeros(S, dtype=bool)
            for q in cz.bad:
                _mark_arc(m, *_dilated_units(q.axes[a], c, J))
            axis_masks.append(m)
        mask = axis_masks[0][:, None] | axis_masks[1][None, :]
        # complement is a product set, so the measure multiplies out
        free = [S - int(m.sum()) for m in axis_masks]
        measure = 1 - Fraction(free[0] * free[1], S * S)
    else:
        mask = np.zeros((S, S), dtype=bool)
        for q in cz.bad:
            segs = [_axis_segments(*_dilated_units(iv, c, J), S)
                    for iv in q.axes]
            for a0, a1 in segs[0]:
                for b0, b1 in segs[1]:
                    mask[a0:a1, b0:b1] = True
        measure = Fraction(int(mask.sum()), S * S)
    return ExceptionalSet(cz.dim, S, cz.lam, c, mask, measure, geometry)


def weighted_moment(g: GridFunction, exc: ExceptionalSet, p: int = 1) -> float:
    """Integral of |g|**p over the complement of the set.

    Reads g as piecewise constant on its own grid; the cell weights are
    exact, so for g constant on the set's unit cells this is exact
    quadrature.
    """
    if g.dim != exc.dim:
        raise ValueError("dimension mismatch")
    w = exc.complement_weights(g.n)
    return float(np.mean(np.abs(g.samples) ** p * w))


# ---------------------------------------------------------------------------
# report types


@dataclass
class MomentReport:
    lam: float
    N: int
    p: int
    avg_moment: float
    measure_E: Fraction
    ratio: float
    full_torus_avg: float
    metadata: dict
    exceptional: ExceptionalSet | None = field(default=None, repr=False, compare=False)


@dataclass
class StrongMeansReport:
    eps: float
    r: int
    schedule: tuple
    measures: tuple       # super-level measure of the averaged deviation, per N
    lam_grid: tuple
    weak_ratios: tuple    # sup over the schedule of lam*|{A_N > lam}| / ||f||_1
    metadata: dict


@dataclass
class DensityRun:
    s: float
    dim: int
    schedule: tuple
    k_positions: tuple    # positions within the schedule chosen as k_m
    shells: tuple         # (m, N_lo, N_hi] index ranges
    mean_square: tuple    # per schedule point
    eval_points: tuple
    density: tuple
    mask: np.ndarray = field(repr=False, compare=False)

    def check_membership(self, values: np.ndarray) -> bool:
        """Every emitted index obeys its shell threshold |s_n - s| < 1/m."""
        dev = np.abs(values - self.s)
        for m, lo, hi in self.shells:
            sel = _shell_slice(self.mask, lo, hi)
            dsel = _shell_slice(dev, lo, hi)
            if np.any(dsel[sel] >= 1.0 / m):
                return False
        return True

    def density_floor_ok(self) -> bool:
        """density(N_k) >= 1 - 1/l whenever k_l < k <= k_{l+1}."""
        ks = self.k_positions
        for pos, N in enumerate(self.schedule):
            ell = sum(1 for k in ks if k < pos)
            if ell >= 1 and self.density[pos] < 1.0 - 1.0 / ell - 1e-15:
                return False
        return True


def _shell_slice(arr: np.ndarray, lo: int, hi: int):
    """Entries of the shell R+_hi minus R+_lo (1-based lattice indices)."""
    if arr.ndim == 1:
        return arr[lo:hi]
    return np.concatenate(
        [arr[lo:hi, 0:hi].ravel(), arr[0:lo, lo:hi].ravel()]
    )


# ---------------------------------------------------------------------------
# running partial-sum engine


def dyadic_schedule(N_max: int, lo: int = 32) -> tuple:
    """Powers of two lo, 2*lo, ..., N_max."""
    if N_max < lo or N_max & (N_max - 1) or lo & (lo - 1):
        raise ValueError("schedule endpoints must be powers of two, N_max >= lo")
    out = []
    N = lo
    while N <= N_max:
        out.append(N)
        N *= 2
    return tuple(out)


def _partial_sum_stream(f: GridFunction, n_hi: int, refine: int = 2,
                        chunk: int = 256):
    """Yield (ns, rows): rows[i] is S_{ns[i]} f on the 2**refine finer grid."""
    H = f.n // 2
    if n_hi > H:
        raise AliasingError(f"order {n_hi} exceeds stored bandwidth {H}")
    c = forward(f)
    M = 1 << (f.J + refine)
    # keep the per-chunk scratch (a few chunk x M complex arrays) well
    # under 100 MB so parallel sweeps on fine grids stay in memory
    chunk = max(8, min(chunk, (1 << 21) // M))
    t = np.arange(M)
    table = np.exp(2j * np.pi * t / M)
    carry = np.full(M, c[H], dtype=complex)  # S_0 is the mean
    for n0 in range(1, n_hi + 1, chunk):
        ns = np.arange(n0, min(n0 + chunk, n_hi + 1))
        ph = table[(ns[:, None] * t[None, :]) % M]
        cp = c[(ns + H) % f.n]  # mode +n; wraps to the Nyquist bin at n = H
        cm = c[(H - ns) % f.n]  # mode -n
        incr = cp[:, None] * ph + cm[:, None] * np.conj(ph)
        rows = carry + np.cumsum(incr, axis=0)
        carry = rows[-1].copy()
        yield ns, rows


def _norm_factor(N: int, p: int) -> float:
    # N for the quadratic moment; N log^(p-2) N beyond
    if p == 2:
        return float(N)
    return float(N) * math.log(N) ** (p - 2)


def averaged_moment(f: GridFunction, lam: float, N_max: int, p: int = 2,
                    c: int = 5, schedule: tuple | None = None, refine: int = 2,
                    fn_id: str = "", exc: ExceptionalSet | None = None
                    ) -> list[MomentReport]:
    """Curve of (1/norm(N)) sum_{n<=N} integral of |S_n f|^p off E.

    E is built once from the decomposition at height lambda and shared
    by every report in the curve.
    """
    if f.dim != 1:
        raise ValueError("averaged_moment is the 1-d sweep")
    H = f.n // 2
    if N_max > H:
        raise AliasingError(f"N_max {N_max} exceeds stored bandwidth {H}")
    if p not in (2, 4):
        raise ValueError("p must be 2 or 4")
    schedule = tuple(schedule) if schedule else dyadic_schedule(N_max)
    if max(schedule) > N_max:
        raise ValueError("schedule exceeds N_max")
    if exc is None:
        exc = build_exceptional_set(decompose(f, lam), c)
    M = 1 << (f.J + refine)
    w = exc.complement_weights(M)
    per_w = np.empty(N_max)
    per_full = np.empty(N_max)
    half = p // 2
    for ns, rows in _partial_sum_stream(f, N_max, refine):
        a = (rows.real**2 + rows.imag**2) ** half
        per_w[ns - 1] = a @ w / M
        per_full[ns - 1] = a.mean(axis=1)
    cw = np.cumsum(per_w)
    cf = np.cumsum(per_full)
    l1 = f.l1()
    meta = {"fn_id": fn_id, "J": f.J, "d": 1, "c": exc.dilation, "refine": refine}
    out = []
    for N in schedule:
        norm = _norm_factor(N, p)
        avg = cw[N - 1] / norm
        out.append(MomentReport(
            lam=lam, N=N, p=p, avg_moment=avg, measure_E=exc.measure,
            ratio=avg / (lam ** (p - 1) * l1**p),
            full_torus_avg=cf[N - 1] / norm, metadata=dict(meta),
            exceptional=exc,
        ))
    return out


# ---------------------------------------------------------------------------
# single-moment checks


def verify_first_reduction(f: GridFunction, lam: float,
                           fn_id: str = "") -> MomentReport:
    """Integral of |f|^2 off the undilated bad cells, against lam*||f||_1^2.

    Off the bad set every sample is at most lam, so the moment is at
    most lam times the L1 mass: the passed flag checks ratio <= 1.
    """
    cz = decompose(f, lam)
    exc = build_exceptional_set(cz, 1)
    moment = weighted_moment(f, exc, 2)
    l1 = f.l1()
    ratio = moment / (lam * l1**2)
    return MomentReport(
        lam=lam, N=0, p=2, avg_moment=moment, measure_E=exc.measure,
        ratio=ratio, full_torus_avg=f.l2sq(),
        metadata={"fn_id": fn_id, "J": f.J, "d": f.dim, "c": 1,
                  "passed": bool(ratio <= 1.0 + 1e-12)},
        exceptional=exc,
    )


def _require_band(f: GridFunction, N: int):
    # accept anything a delayed-mean smoothing at order N can produce
    H = f.n // 2
    band = min(2 * N - 1, H)
    tail = band_energy(f, band, H)
    if tail > 1e-9 * max(f.l2sq(), 1e-30):
        raise NotBandLimitedError(
            f"energy {tail:.3e} beyond frequency {band}; smooth the input first"
        )


def verify_second_reduction(f: GridFunction, lam: float, N: int,
                            fn_id: str = "") -> MomentReport:
    """Moment of B_N * |f|^2 off the 3-dilated bad cells.

    No constant is asserted; the ratio is recorded for baseline
    comparison.  B_N carries total mass 1/N^2.
    """
    _require_band(f, N)
    cz = decompose(f, lam)
    exc = build_exceptional_set(cz, 3)
    sq = GridFunction(1, f.J, np.abs(f.samples) ** 2)
    conv = convolve(sq, kernel_samples("box", N, f.J))
    moment = weighted_moment(conv, exc, 1)
    l1 = f.l1()
    return MomentReport(
        lam=lam, N=N, p=2, avg_moment=moment, measure_E=exc.measure,
        ratio=moment / (lam * l1**2),
        full_torus_avg=float(np.mean(conv.samples.real)),
        metadata={"fn_id": fn_id, "J": f.J, "d": 1, "c": 3,
                  "kernel": "box", "kernel_mass": 1.0 / N**2},
        exceptional=exc,
    )


def verify_decay_kernel(f: GridFunction, lam: float, N: int, s: float,
                        fn_id: str = "",
                        exc: ExceptionalSet | None = None) -> MomentReport:
    """Moment of the power-decay kernel against |f|^2 off E."""
    if s <= 1:
        raise ValueError("decay exponent must exceed 1")
    _require_band(f, N)
    if exc is None:
        exc = build_exceptional_set(decompose(f, lam), 5)
    sq = GridFunction(1, f.J, np.abs(f.samples) ** 2)
    conv = convolve(sq, kernel_samples("power_decay", N, f.J, s=s))
    moment = weighted_moment(conv, exc, 1)
    l1 = f.l1()
    return MomentReport(
        lam=lam, N=N, p=2, avg_moment=moment, measure_E=exc.measure,
        ratio=moment / (lam * l1**2),
        full_torus_avg=float(np.mean(conv.samples.real)),
        metadata={"fn_id": fn_id, "J": f.J, "d": 1, "c": exc.dilation,
                  "kernel": "power_decay", "s": s},
        exceptional=exc,
    )


def decay_slope(f: GridFunction, lam: float, s: float,
                Ns: tuple = (64, 128, 256, 512, 1024), c: int = 5,
                fn_id: str = "") -> tuple[float, list[MomentReport]]:
    """Log-log slope of the power-decay moment over a sweep of N.

    The base function is smoothed per N with the delayed mean, while
    the exceptional set stays fixed: the bad cells keep their length,
    so the slope isolates the kernel's scale behaviour.
    """
    H = f.n // 2
    if 2 * max(Ns) - 1 > H:
        raise AliasingError("smoothing order exceeds the stored bandwidth")
    exc = build_exceptional_set(decompose(f, lam), c)
    reports = [
        verify_decay_kernel(valle_poussin(f, N), lam, N, s, fn_id=fn_id, exc=exc)
        for N in Ns
    ]
    moments = np.array([r.avg_moment for r in reports])
    slope = float(np.polyfit(np.log(np.array(Ns, float)), np.log(moments), 1)[0])
    return slope, reports


# ---------------------------------------------------------------------------
# rectangular (d = 2) sweep


def _abs2_rows(g: GridFunction, n_hi: int, refine: int) -> np.ndarray:
    """|S_n g|^2 on the refined grid for n = 1..n_hi, as an (n_hi, M) array."""
    M = 1 << (g.J + refine)
    rows = np.empty((n_hi, M))
    for ns, block in _partial_sum_stream(g, n_hi, refine):
        rows[ns - 1] = block.real**2 + block.imag**2
    return rows


def averaged_moment_rect(f: GridFunction, lam: float, N_max: int, c: int = 5,
                         schedule: tuple | None = None, refine: int = 1,
                         fn_id: str = "", geometry: str = "cube") -> list[MomentReport]:
    """Square-lattice version: (1/N^2) sum over 1 <= n1, n2 <= N.

    Separable inputs take a fast path through their factors; general
    inputs fall back to per-pair rectangular sums and are only
    reasonable for small grids.
    """
    if f.dim != 2:
        raise ValueError("averaged_moment_rect needs a 2-d function")
    H = f.n // 2
    if N_max > H:
        raise AliasingError(f"N_max {N_max} exceeds stored bandwidth {H}")
    schedule = tuple(schedule) if schedule else dyadic_schedule(N_max)
    if max(schedule) > N_max:
        raise ValueError("schedule exceeds N_max")
    exc = build_exceptional_set(decompose(f, lam), c, geometry)
    M = 1 << (f.J + refine)
    W = exc.complement_weights(M)
    if f.factors is not None:
        a, b = f.factors
        T = _abs2_rows(a, N_max, refine) @ W @ _abs2_rows(b, N_max, refine).T
        T /= M * M
    else:
        if f.J > 6:
            raise ValueError("general 2-d sweep is limited to J <= 6")
        from .spectral import partial_sum_rect
        T = np.empty((N_max, N_max))
        for n1 in range(1, N_max + 1):
            for n2 in range(1, N_max + 1):
                Sn = partial_sum_rect(f, n1, n2, refine)
                a2 = Sn.samples.real**2 + Sn.samples.imag**2
                T[n1 - 1, n2 - 1] = float(np.mean(a2 * W))
    cum = T.cumsum(axis=0).cumsum(axis=1)
    l1 = f.l1()
    meta = {"fn_id": fn_id, "J": f.J, "d": 2, "c": c, "refine": refine,
            "geometry": exc.geometry}
    out = []
    for N in schedule:
        avg = cum[N - 1, N - 1] / N**2
        out.append(MomentReport(
            lam=lam, N=N, p=2, avg_moment=avg, measure_E=exc.measure,
            ratio=avg / (lam * l1**2),
            full_torus_avg=plancherel_average_rect(f, N),
            metadata=dict(meta), exceptional=exc,
        ))
    return out


# ---------------------------------------------------------------------------
# strong means and the density extractor


def strong_means_measure(f: GridFunction, eps: float, schedule: tuple,
                         r: int = 2, lam_grid: tuple = DEFAULT_LAM_GRID,
                         refine: int = 2, fn_id: str = "") -> StrongMeansReport:
    """Super-level measures of the averaged r-th deviation, plus the
    weak-type ratio of the quadratic means functional.

    The reference value at each point is the saturated partial sum, so
    deviations vanish identically once n reaches the stored bandwidth.
    Measures are counting quadrature on the refined grid.
    """
    if f.dim != 1:
        raise ValueError("strong_means_measure is one-dimensional")
    if r not in (2, 4):
        raise ValueError("r must be 2 or 4")
    H = f.n // 2
    schedule = tuple(sorted(schedule))
    if schedule[-1] > H:
        raise AliasingError("schedule exceeds stored bandwidth")
    M = 1 << (f.J + refine)
    ref = saturated_sum(f, refine).samples
    R = np.zeros(M)
    P = np.zeros(M)
    half = r // 2
    l1 = f.l1()
    measures = []
    weak = np.zeros(len(lam_grid))
    pending = list(schedule)
    for ns, rows in _partial_sum_stream(f, schedule[-1], refine):
        lo = ns[0]
        while pending and pending[0] <= ns[-1]:
            N = pending.pop(0)
            seg = rows[: N - lo + 1]
            dev = np.abs(seg - ref) ** 2
            R += (dev**half).sum(axis=0)
            P += (seg.real**2 + seg.imag**2).sum(axis=0)
            rows = rows[N - lo + 1:]
            lo = N + 1
            measures.append(float(np.count_nonzero(R / N > eps)) / M)
            A = np.sqrt(P / N)
            for i, lam in enumerate(lam_grid):
                ratio = lam * (np.count_nonzero(A > lam) / M) / l1
                weak[i] = max(weak[i], ratio)
        if len(rows):
            dev = np.abs(rows - ref) ** 2
            R += (dev**half).sum(axis=0)
            P += (rows.real**2 + rows.imag**2).sum(axis=0)
    return StrongMeansReport(
        eps=eps, r=r, schedule=schedule, measures=tuple(measures),
        lam_grid=tuple(lam_grid), weak_ratios=tuple(weak),
        metadata={"fn_id": fn_id, "J": f.J, "d": 1, "refine": refine},
    )


def density_subsequence(values: np.ndarray, s: float,
                        schedule: tuple) -> DensityRun:
    """Extract a density-one index set along which values approach s.

    Shell construction: pick schedule points k_m where the mean square
    of |values - s| over the initial lattice block drops below m**-3;
    between consecutive picks, keep exactly the indices within 1/m of
    the limit.  The final shell extends to the end of the value array.
    """
    values = np.asarray(values, dtype=float)
    d = values.ndim
    if d not in (1, 2):
        raise ValueError("values must be a 1-d or 2-d lattice array")
    size = values.shape[0]
    if d == 2 and values.shape[1] != size:
        raise ValueError("2-d lattice must be square")
    schedule = tuple(int(N) for N in schedule)
    if not all(1 <= N <= size for N in schedule) or \
            any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing within the lattice")
    dev = np.abs(values - s)
    sq = dev * dev
    if d == 1:
        csum = np.concatenate([[0.0], np.cumsum(sq)])
        msq = tuple(float(csum[N] / N) for N in schedule)
    else:
        ii = np.zeros((size + 1, size + 1))
        ii[1:, 1:] = sq.cumsum(axis=0).cumsum(axis=1)
        msq = tuple(float(ii[N, N] / N**2) for N in schedule)

    ks: list[int] = []
    prev = -1
    m = 1
    while True:
        k = next((i for i in range(prev + 1, len(schedule))
                  if msq[i] < m**-3), None)
        if k is None:
            if m == 1:
                raise ScheduleInfeasibleError(
                    "no schedule point has mean square below 1")
            break
        ks.append(k)
        prev = k
        m += 1

    shells = []
    mask = np.zeros(values.shape, dtype=bool)
    for m, kpos in enumerate(ks, start=1):
        lo = schedule[kpos]
        hi = schedule[ks[m]] if m < len(ks) else size
        if hi <= lo:
            continue
        shells.append((m, lo, hi))
        thr = 1.0 / m
        if d == 1:
            mask[lo:hi] = dev[lo:hi] < thr
        else:
            mask[lo:hi, 0:hi] = dev[lo:hi, 0:hi] < thr
            mask[0:lo, lo:hi] = dev[0:lo, lo:hi] < thr

    eval_points = schedule if schedule[-1] == size else schedule + (size,)
    if d == 1:
        mc = np.concatenate([[0], np.cumsum(mask)])
        density = tuple(float(mc[N] / N) for N in eval_points)
    else:
        mi = np.zeros((size + 1, size + 1), dtype=np.int64)
        mi[1:, 1:] = mask.cumsum(axis=0).cumsum(axis=1)
        density = tuple(float(mi[N, N] / N**2) for N in eval_points)
    return DensityRun(
        s=s, dim=d, schedule=schedule, k_positions=tuple(ks),
        shells=tuple(shells), mean_square=msq,
        eval_points=eval_points, density=density, mask=mask,
    )
