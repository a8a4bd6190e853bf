"""Exceptional sets, moment sweeps, strong means, density extraction.

Oracles come first and stay independent of the implementation: set
measures and cell weights are recomputed with Fraction interval
arithmetic, moment curves with per-order partial sums, and the density
extractor against a direct loop over the defining thresholds.
"""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strongmeans import corpus, spectral
from strongmeans.czd import decompose
from strongmeans.estimates import (
    DEFAULT_LAM_GRID,
    ExceptionalSet,
    NotBandLimitedError,
    ScheduleInfeasibleError,
    averaged_moment,
    averaged_moment_rect,
    build_exceptional_set,
    decay_slope,
    density_subsequence,
    dyadic_schedule,
    strong_means_measure,
    verify_decay_kernel,
    verify_first_reduction,
    verify_second_reduction,
    weighted_moment,
)
from strongmeans.grid import GridFunction, constant, tensor
from strongmeans.spectral import AliasingError


# ---------------------------------------------------------------------------
# oracles


def arcs_of(cz, c: int) -> list[tuple[Fraction, Fraction]]:
    """Dilated bad cells as exact endpoint pairs (lo may be negative)."""
    out = []
    for iv in cz.bad:
        lo = Fraction(iv.index, 1 << iv.level)
        hi = Fraction(iv.index + 1, 1 << iv.level)
        mid = (lo + hi) / 2
        half = min(Fraction(c) * (hi - lo), Fraction(1)) / 2
        out.append((mid - half, mid + half))
    return out


def covered_length(arcs, lo: Fraction, hi: Fraction) -> Fraction:
    """Length of [lo, hi) covered by the union of the arcs, mod 1."""
    events = []
    for a, b in arcs:
        for shift in (-1, 0, 1):
            aa, bb = a + shift, b + shift
            if bb > lo and aa < hi:
                events.append((max(aa, lo), min(bb, hi)))
    events.sort()
    total = Fraction(0)
    cur_lo = cur_hi = None
    for a, b in events:
        if cur_hi is None or a > cur_hi:
            if cur_hi is not None:
                total += cur_hi - cur_lo
            cur_lo, cur_hi = a, b
        else:
            cur_hi = max(cur_hi, b)
    if cur_hi is not None:
        total += cur_hi - cur_lo
    return total


def union_measure_oracle(arcs) -> Fraction:
    return covered_length(arcs, Fraction(0), Fraction(1))


def weighted_moment_oracle(g: GridFunction, cz, c: int, p: int) -> Fraction:
    """16x oversampled exact quadrature of |g|^p off the dilated bad cells."""
    arcs = arcs_of(cz, c)
    F = 16 * g.n
    total = Fraction(0)
    for t in range(F):
        lo, hi = Fraction(t, F), Fraction(t + 1, F)
        out_len = (hi - lo) - covered_length(arcs, lo, hi)
        v = abs(float(g.samples[(t * g.n) // F]))
        total += Fraction(v) ** p * out_len
    return total


def brute_curve(f, lam, N_max, c, p, refine):
    """Per-order partial sums, no streaming: the engine's ground truth."""
    cz = decompose(f, lam)
    exc = build_exceptional_set(cz, c)
    M = 1 << (f.J + refine)
    w = exc.complement_weights(M)
    per = []
    full = []
    for n in range(1, N_max + 1):
        Sn = spectral.partial_sum(f, n, refine).samples
        a = np.abs(Sn) ** p
        per.append(float(a @ w / M))
        full.append(float(a.mean()))
    return np.cumsum(per), np.cumsum(full)


# ---------------------------------------------------------------------------
# exceptional sets


def test_spike_exceptional_set_frozen():
    f = corpus.spike(6)
    cz = decompose(f, 8.0)
    for c, want in [(1, Fraction(1, 16)), (3, Fraction(3, 16)), (5, Fraction(5, 16))]:
        exc = build_exceptional_set(cz, c)
        assert exc.measure == want
        assert exc.measure == union_measure_oracle(arcs_of(cz, c))


def test_exceptional_set_rejects_other_dilations():
    cz = decompose(corpus.spike(5), 4.0)
    with pytest.raises(ValueError):
        build_exceptional_set(cz, 2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([2.0, 4.0, 8.0, 16.0]),
       st.sampled_from([1, 3, 5]))
def test_measure_matches_fraction_oracle(seed, lam, c):
    rng = np.random.default_rng(seed)
    f = corpus.multi_spike(6, int(rng.integers(2, 9)), rng)
    cz = decompose(f, lam)
    exc = build_exceptional_set(cz, c)
    assert exc.measure == union_measure_oracle(arcs_of(cz, c))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([2.0, 4.0, 8.0]))
def test_measure_bound_exact_rational(seed, lam):
    rng = np.random.default_rng(seed)
    f = corpus.abs_noise(7, rng)
    exc = build_exceptional_set(decompose(f, lam), 5)
    assert exc.measure <= Fraction(5) / Fraction(lam)


def test_weighted_moment_vs_oversampled_oracle():
    rng = np.random.default_rng(9)
    f = corpus.multi_spike(5, 4, rng)
    cz = decompose(f, 4.0)
    exc = build_exceptional_set(cz, 5)
    want = float(weighted_moment_oracle(f, cz, 5, 2))
    assert abs(weighted_moment(f, exc, 2) - want) < 1e-9


def test_complement_weights_exact_on_both_grid_directions():
    f = corpus.spike(4)
    exc = build_exceptional_set(decompose(f, 4.0), 5)
    for M in (8, 16, 64, 512):
        w = exc.complement_weights(M)
        assert w.shape == (M,)
        # every weight is a dyadic count over the unit subdivision
        assert np.all(w * exc.scale % 1 == 0) or M > exc.scale
        assert abs(float(np.mean(1.0 - w)) - float(exc.measure)) < 1e-15


def test_weights_cached_by_grid():
    exc = build_exceptional_set(decompose(corpus.spike(4), 4.0), 3)
    assert exc.complement_weights(16) is exc.complement_weights(16)


# ---------------------------------------------------------------------------
# averaged moments, 1-d


def test_dyadic_schedule():
    assert dyadic_schedule(256) == (32, 64, 128, 256)
    with pytest.raises(ValueError):
        dyadic_schedule(100)


def test_engine_matches_brute_curve():
    rng = np.random.default_rng(21)
    f = corpus.trig_poly(6, rng)
    lam = 4.0
    reports = averaged_moment(f, lam, 16, schedule=(2, 4, 8, 16), refine=2)
    cw, cf = brute_curve(f, lam, 16, 5, 2, refine=2)
    for rep in reports:
        assert abs(rep.avg_moment - cw[rep.N - 1] / rep.N) < 1e-10
        assert abs(rep.full_torus_avg - cf[rep.N - 1] / rep.N) < 1e-10


def test_engine_matches_brute_curve_p4():
    f = corpus.multi_spike(6, 3, np.random.default_rng(22))
    reports = averaged_moment(f, 8.0, 16, p=4, schedule=(4, 16), refine=2)
    cw, _ = brute_curve(f, 8.0, 16, 5, 4, refine=2)
    for rep in reports:
        want = cw[rep.N - 1] / (rep.N * np.log(rep.N) ** 2)
        assert abs(rep.avg_moment - want) < 1e-9 * max(1.0, want)


def test_full_torus_average_matches_closed_form():
    f = corpus.spike(6)
    reports = averaged_moment(f, 8.0, 32, schedule=(4, 8, 16, 32))
    for rep in reports:
        assert abs(rep.full_torus_avg - (rep.N + 2)) < 1e-9
        assert abs(rep.full_torus_avg - spectral.plancherel_average(f, rep.N)) < 1e-9


def test_constant_function_curve_is_one():
    reports = averaged_moment(constant(1.0, 6), 2.0, 16, schedule=(4, 16))
    for rep in reports:
        assert rep.measure_E == 0
        assert abs(rep.avg_moment - 1.0) < 1e-12
        assert abs(rep.ratio - 0.5) < 1e-12


def test_exceptional_set_shared_across_curve():
    f = corpus.spike(8)
    reports = averaged_moment(f, 8.0, 64)
    assert all(r.exceptional is reports[0].exceptional for r in reports)


def test_full_torus_dominates_restricted():
    for _, f in corpus.standard_corpus(8, seed=5):
        for rep in averaged_moment(f, 8.0, 64):
            assert rep.full_torus_avg >= rep.avg_moment - 1e-12


def test_averaged_moment_rejects_aliased_schedule():
    with pytest.raises(AliasingError):
        averaged_moment(corpus.spike(6), 8.0, 64)


# ---------------------------------------------------------------------------
# reductions and decay kernels


def test_first_reduction_constant_passes():
    rep = verify_first_reduction(constant(1.0, 6), 2.0)
    assert rep.avg_moment == 1.0 and rep.ratio == 0.5
    assert rep.metadata["passed"]


def test_first_reduction_spike_moment_zero():
    rep = verify_first_reduction(corpus.spike(8), 4.0)
    assert rep.avg_moment == 0.0
    assert rep.metadata["passed"]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([2.0, 4.0, 8.0, 32.0]))
def test_first_reduction_ratio_never_exceeds_one(seed, lam):
    rng = np.random.default_rng(seed)
    f = corpus.abs_noise(7, rng) if seed % 2 else corpus.multi_spike(7, 5, rng)
    rep = verify_first_reduction(f, lam)
    assert rep.ratio <= 1.0 + 1e-12
    assert rep.metadata["passed"]


def test_first_reduction_exact_against_oracle():
    f = corpus.multi_spike(5, 3, np.random.default_rng(33))
    cz = decompose(f, 4.0)
    rep = verify_first_reduction(f, 4.0)
    want = float(weighted_moment_oracle(f, cz, 1, 2))
    assert abs(rep.avg_moment - want) < 1e-9


def test_second_reduction_constant():
    rep = verify_second_reduction(constant(1.0, 6), 2.0, 8)
    assert abs(rep.avg_moment - 1.0 / 64) < 1e-15
    assert rep.metadata["kernel_mass"] == 1.0 / 64


def test_second_reduction_rejects_wideband():
    f = corpus.abs_noise(8, np.random.default_rng(3))
    with pytest.raises(NotBandLimitedError):
        verify_second_reduction(f, 4.0, 4)


def test_second_reduction_smoothed_spike_runs():
    f = spectral.valle_poussin(corpus.spike(8), 16)
    rep = verify_second_reduction(f, 8.0, 16)
    assert rep.avg_moment >= 0 and np.isfinite(rep.ratio)
    assert rep.measure_E == build_exceptional_set(decompose(f, 8.0), 3).measure


def test_decay_kernel_rejects_small_s():
    with pytest.raises(ValueError):
        verify_decay_kernel(constant(1.0, 5), 2.0, 4, s=1.0)


def test_decay_slopes_match_scale_dichotomy():
    # growth exponent 2-s below s=2; the fixed-length bad interval keeps
    # the s=2 moment flat and sends s=3 into genuine decay
    f = corpus.spike(10)
    Ns = (32, 64, 128, 256)
    slope15, reports = decay_slope(f, 8.0, 1.5, Ns)
    assert 0.25 < slope15 < 0.75
    assert all(r.exceptional is reports[0].exceptional for r in reports)
    slope2, _ = decay_slope(f, 8.0, 2.0, Ns)
    assert -0.2 < slope2 < 0.2
    slope3, _ = decay_slope(f, 8.0, 3.0, Ns)
    assert -1.3 < slope3 < -0.7


# ---------------------------------------------------------------------------
# rectangular sweep


def test_rect_tensor_path_matches_general_path():
    f = corpus.tensor_multi_spike(4, 2, np.random.default_rng(8))
    fast = averaged_moment_rect(f, 4.0, 8, schedule=(2, 4, 8))
    bare = GridFunction(2, 4, f.samples.copy())
    slow = averaged_moment_rect(bare, 4.0, 8, schedule=(2, 4, 8))
    for a, b in zip(fast, slow):
        assert abs(a.avg_moment - b.avg_moment) < 1e-10
        assert a.measure_E == b.measure_E


def test_rect_tensor_spike_closed_form():
    f = corpus.spike(5, dim=2)
    reports = averaged_moment_rect(f, 16.0, 16, schedule=(4, 8, 16))
    for rep in reports:
        assert abs(rep.full_torus_avg - (rep.N + 2) ** 2) < 1e-9
        assert rep.full_torus_avg >= rep.avg_moment - 1e-12


def test_rect_constant_curve():
    f = tensor(constant(1.0, 4), constant(1.0, 4))
    for rep in averaged_moment_rect(f, 2.0, 8, schedule=(8,)):
        assert rep.measure_E == 0
        assert abs(rep.avg_moment - 1.0) < 1e-12


def test_rect_measure_bound_uses_squared_dilation():
    f = corpus.tensor_multi_spike(5, 6, np.random.default_rng(urandom := 17))
    exc = build_exceptional_set(decompose(f, 4.0), 5)
    assert exc.measure <= Fraction(25, 4)


# ---------------------------------------------------------------------------
# slab geometry


def axis_arcs(cz, c: int, axis: int) -> list[tuple[Fraction, Fraction]]:
    """Dilated per-axis shadows of the bad cubes, exact endpoints."""
    out = []
    for q in cz.bad:
        iv = q.axes[axis]
        lo = Fraction(iv.index, 1 << iv.level)
        hi = Fraction(iv.index + 1, 1 << iv.level)
        mid = (lo + hi) / 2
        half = min(Fraction(c) * (hi - lo), Fraction(1)) / 2
        out.append((mid - half, mid + half))
    return out


def test_slab_measure_matches_inclusion_exclusion_oracle():
    f = corpus.tensor_multi_spike(5, 4, np.random.default_rng(3))
    cz = decompose(f, 4.0)
    exc = build_exceptional_set(cz, 5, geometry="slab")
    lens = [union_measure_oracle(axis_arcs(cz, 5, a)) for a in range(2)]
    assert exc.measure == 1 - (1 - lens[0]) * (1 - lens[1])
    assert exc.measure == Fraction(int(exc.mask.sum()), exc.scale**2)


def test_slab_contains_cube_set():
    f = corpus.tensor_multi_spike(5, 3, np.random.default_rng(11))
    cz = decompose(f, 8.0)
    cube = build_exceptional_set(cz, 5, geometry="cube")
    slab = build_exceptional_set(cz, 5, geometry="slab")
    assert np.all(slab.mask >= cube.mask)
    assert slab.measure >= cube.measure


def test_slab_collapses_to_cube_in_1d():
    f = corpus.multi_spike(6, 3, np.random.default_rng(2))
    cz = decompose(f, 4.0)
    a = build_exceptional_set(cz, 5)
    b = build_exceptional_set(cz, 5, geometry="slab")
    assert np.array_equal(a.mask, b.mask)
    assert a.measure == b.measure
    assert b.geometry == "cube"


def test_build_rejects_unknown_geometry():
    f = corpus.spike(5, dim=2)
    with pytest.raises(ValueError):
        build_exceptional_set(decompose(f, 8.0), 5, geometry="ball")


def test_rect_slab_average_factorizes():
    # the slab complement is a product set, so the separable lattice
    # average must equal the product of two 1-d off-band averages
    f = corpus.spike(6, dim=2)
    cz = decompose(f, 16.0)
    reports = averaged_moment_rect(f, 16.0, 16, schedule=(4, 8, 16),
                                   geometry="slab")
    M = 1 << (6 + 1)
    per_axis = []
    for axis in range(2):
        arcs = axis_arcs(cz, 5, axis)
        w = np.array([
            1.0 - covered_length(arcs, Fraction(t, M), Fraction(t + 1, M)) * M
            for t in range(M)
        ])
        g = f.factors[axis]
        per = [float((np.abs(spectral.partial_sum(g, n, 1).samples) ** 2) @ w / M)
               for n in range(1, 17)]
        per_axis.append(np.cumsum(per))
    for rep in reports:
        N = rep.N
        want = (per_axis[0][N - 1] / N) * (per_axis[1][N - 1] / N)
        assert abs(rep.avg_moment - want) < 1e-9 * max(1.0, want)


def test_rect_cube_grows_where_slab_plateaus():
    # cross-bands of the cube complement carry partial-sum mass that
    # scales with the order; the slab complement removes them
    f = corpus.spike(6, dim=2)
    cube = averaged_moment_rect(f, 32.0, 32, schedule=(16, 32))
    slab = averaged_moment_rect(f, 32.0, 32, schedule=(16, 32), geometry="slab")
    cube_change = cube[1].avg_moment / cube[0].avg_moment - 1
    slab_change = abs(slab[1].avg_moment / slab[0].avg_moment - 1)
    assert cube_change > 0.5
    assert slab_change <= 0.15


# ---------------------------------------------------------------------------
# strong means


def test_strong_means_constant_is_zero():
    rep = strong_means_measure(constant(1.0, 6), 0.1, (4, 8, 16, 32))
    assert rep.measures == (0.0, 0.0, 0.0, 0.0)


def test_strong_means_matches_direct_recomputation():
    f = corpus.multi_spike(5, 3, np.random.default_rng(12))
    schedule = (4, 8, 16)
    eps = 0.5 * f.linf() ** 2
    rep = strong_means_measure(f, eps, schedule, refine=2)
    M = 1 << (f.J + 2)
    ref = spectral.saturated_sum(f, 2).samples
    R = np.zeros(M)
    P = np.zeros(M)
    weak = np.zeros(len(DEFAULT_LAM_GRID))
    want_measures = []
    for n in range(1, schedule[-1] + 1):
        Sn = spectral.partial_sum(f, n, 2).samples
        R += np.abs(Sn - ref) ** 2
        P += np.abs(Sn) ** 2
        if n in schedule:
            want_measures.append(np.count_nonzero(R / n > eps) / M)
            A = np.sqrt(P / n)
            for i, lam in enumerate(DEFAULT_LAM_GRID):
                weak[i] = max(weak[i], lam * (np.count_nonzero(A > lam) / M) / f.l1())
    assert np.allclose(rep.measures, want_measures, atol=1e-12)
    assert np.allclose(rep.weak_ratios, weak, atol=1e-9)


def test_strong_means_band_limited_poly_hits_zero():
    f = corpus.trig_poly(8, np.random.default_rng(14), degree=8, quantized=False)
    eps = 0.25 * f.linf() ** 2
    rep = strong_means_measure(f, eps, (8, 16, 32, 64, 128))
    assert rep.measures[-1] == 0.0
    assert all(a >= b for a, b in zip(rep.measures, rep.measures[1:]))


def test_strong_means_rejects_aliased_schedule():
    with pytest.raises(AliasingError):
        strong_means_measure(corpus.spike(5), 1.0, (8, 64))


# ---------------------------------------------------------------------------
# density extraction


def density_oracle_1d(values, s, schedule):
    """Direct loop over the definitions; returns the membership mask."""
    size = len(values)
    dev = np.abs(values - s)
    msq = [float(np.mean(dev[:N] ** 2)) for N in schedule]
    ks, prev, m = [], -1, 1
    while True:
        k = next((i for i in range(prev + 1, len(schedule)) if msq[i] < m**-3), None)
        if k is None:
            break
        ks.append(k)
        prev, m = k, m + 1
    mask = np.zeros(size, dtype=bool)
    for m, kpos in enumerate(ks, start=1):
        lo = schedule[kpos]
        hi = schedule[ks[m]] if m < len(ks) else size
        for n in range(lo + 1, hi + 1):  # lattice index n at array slot n-1
            mask[n - 1] = dev[n - 1] < 1.0 / m
    return ks, mask


def test_density_constant_values():
    size = 10_000
    run = density_subsequence(np.full(size, 2.5), 2.5, (4, 16, 64, 256, 1024, 4096))
    assert run.density[-1] >= 0.999
    assert run.check_membership(np.full(size, 2.5))
    assert run.density_floor_ok()


def test_density_quarter_power_matches_oracle():
    size = 100_000
    n = np.arange(1, size + 1)
    values = 1.0 + n**-0.25
    schedule = tuple(4**k for k in range(1, 9))
    run = density_subsequence(values, 1.0, schedule)
    ks, mask = density_oracle_1d(values, 1.0, schedule)
    assert list(run.k_positions) == ks
    assert np.array_equal(run.mask, mask)
    assert run.density[-1] >= 0.99
    assert run.check_membership(values)
    assert run.density_floor_ok()


def test_density_2d_radial():
    size = 200
    i = np.arange(1, size + 1)
    r = np.hypot(i[:, None], i[None, :])
    values = 3.0 + r**-0.5
    run = density_subsequence(values, 3.0, (4, 16, 64, 200))
    assert run.dim == 2
    assert run.density[-1] >= 0.98
    assert run.check_membership(values)
    assert run.density_floor_ok()


def test_density_infeasible_schedule():
    with pytest.raises(ScheduleInfeasibleError):
        density_subsequence(np.full(100, 7.0), 0.0, (10, 100))


def test_density_rejects_bad_schedule():
    with pytest.raises(ValueError):
        density_subsequence(np.zeros(10), 0.0, (4, 4))
    with pytest.raises(ValueError):
        density_subsequence(np.zeros(10), 0.0, (4, 20))
