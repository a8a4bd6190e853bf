"""Randomized invariant batteries over the decomposition and covering layers.

Each suite draws a reproducible stream of inputs, checks every invariant
on every draw, and accumulates failure counts instead of raising, so one
run summarizes thousands of trials.  Comparisons the theory states
exactly (stopping heights, measures, reassembly, set containments) run
in integer arithmetic on the 24-bit sample grid; nothing here trusts a
float tolerance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import corpus
from .covering import (
    exhaustive_chain_scan,
    random_nonadjacent_cube_family,
    random_nonadjacent_family,
    verify_covering,
    verify_covering_cubes,
)
from .czd import FRACT_BITS, bad_part, decompose, good_part

# lambda draws live on this grid so the stopping height stays a dyadic
# rational and every decomposition takes the exact integer path
_LAM_DEN = 64


@dataclass
class SuiteResult:
    suite: str
    trials: int
    failures: dict
    elapsed: float
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(v == 0 for v in self.failures.values())

    def summary(self) -> dict:
        return {
            "suite": self.suite,
            "trials": self.trials,
            "ok": self.ok,
            "failures": dict(self.failures),
            "elapsed_s": round(self.elapsed, 3),
            **{k: v for k, v in self.stats.items()},
        }


def _draw_lam(rng) -> float:
    """Dyadic-rational heights, log-spread over (1, 64]."""
    e = int(rng.integers(0, 6))
    m = int(rng.integers(_LAM_DEN + 1, 2 * _LAM_DEN + 1))  # (1, 2] in 64ths
    return (m << e) / _LAM_DEN


def _draw_function(rng, J: int, t: int):
    fam = t % 3
    if fam == 0:
        k = int(rng.integers(2, 17))
        return corpus.multi_spike(J, k, rng)
    if fam == 1:
        return corpus.trig_poly(J, rng)
    return corpus.abs_noise(J, rng)


def _cell_sums(csum: np.ndarray, idx: np.ndarray, w: int) -> np.ndarray:
    return csum[(idx + 1) * w] - csum[idx * w]


def czd_invariants(f, lam: float) -> tuple[dict, int]:
    """Run the full exact-invariant battery on one (f, lam) pair.

    Returns (check name -> bool, number of bad cells).  Requires samples
    on the 24-bit grid and a height with a small dyadic denominator;
    both are guaranteed by the corpus and the suite's lambda draw.
    """
    lamF = Fraction(lam)
    num, den = lamF.numerator, lamF.denominator
    n = 1 << f.J
    units = np.round(np.real(f.samples) * (1 << FRACT_BITS)).astype(np.int64)
    checks = {}
    checks["exact_input"] = bool(
        np.array_equal(units / (1 << FRACT_BITS), np.real(f.samples))
    )

    cz = decompose(f, lam)
    checks["exact_path"] = cz.exact

    if f.dim == 1:
        csum = np.concatenate(([0], np.cumsum(np.abs(units))))
        spans = sorted((iv.index << (f.J - iv.level),
                        (iv.index + 1) << (f.J - iv.level)) for iv in cz.bad)
        checks["disjoint"] = all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))

        window = True
        maximal = True
        by_level = {}
        for iv in cz.bad:
            by_level.setdefault(iv.level, []).append(iv.index)
        for j, idxs in by_level.items():
            idx = np.asarray(idxs, dtype=np.int64)
            w = n >> j
            sums = _cell_sums(csum, idx, w)
            height_units = num * (w << FRACT_BITS)  # lam * cell volume, scaled
            window &= bool(np.all(sums * den > height_units))
            window &= bool(np.all(sums * den <= 2 * height_units))
            # parent average must sit at or below the height, else the
            # stopping time would have selected the parent instead
            psums = _cell_sums(csum, idx >> 1, 2 * w)
            maximal &= bool(np.all(psums * den <= 2 * height_units))
        checks["height_window"] = window
        checks["parents_not_selected"] = maximal

        total = Fraction(sum(hi - lo for lo, hi in spans), n)
        l1 = Fraction(int(np.abs(units).sum()), n << FRACT_BITS)
        checks["mass_bound"] = total <= l1 / lamF

        mask = cz.bad_mask()
        lam_units = Fraction(num << FRACT_BITS, den)
        off = np.abs(units[~mask])
        checks["bounded_off_bad"] = off.size == 0 or Fraction(int(off.max())) <= lam_units
    else:
        absu = np.abs(units)
        csum2 = np.zeros((n + 1, n + 1), dtype=np.int64)
        csum2[1:, 1:] = absu.cumsum(axis=0).cumsum(axis=1)

        def box_sum(i0, i1, j0, j1):
            return int(csum2[i1, j1] - csum2[i0, j1] - csum2[i1, j0] + csum2[i0, j0])

        disjoint = True
        cells = []
        for q in cz.bad:
            w = n >> q.level
            i0, j0 = q.axes[0].index * w, q.axes[1].index * w
            cells.append((i0, i0 + w, j0, j0 + w))
        for a in range(len(cells)):
            for b in range(a + 1, len(cells)):
                A, B = cells[a], cells[b]
                if A[0] < B[1] and B[0] < A[1] and A[2] < B[3] and B[2] < A[3]:
                    disjoint = False
        checks["disjoint"] = disjoint

        window = True
        maximal = True
        for i0, i1, j0, j1 in cells:
            w = i1 - i0
            s = box_sum(i0, i1, j0, j1)
            height_units = num * ((w * w) << FRACT_BITS)
            window &= s * den > height_units
            window &= s * den <= 4 * height_units  # 2**d with d=2
            pw = 2 * w
            pi, pj = (i0 // pw) * pw, (j0 // pw) * pw
            ps = box_sum(pi, pi + pw, pj, pj + pw)
            maximal &= ps * den <= num * ((pw * pw) << FRACT_BITS)
        checks["height_window"] = window
        checks["parents_not_selected"] = maximal

        total = Fraction(sum((i1 - i0) * (j1 - j0) for i0, i1, j0, j1 in cells),
                         n * n)
        l1 = Fraction(int(absu.sum()), (n * n) << FRACT_BITS)
        checks["mass_bound"] = total <= l1 / lamF

        mask = cz.bad_mask()
        lam_units = Fraction(num << FRACT_BITS, den)
        off = absu[~mask]
        checks["bounded_off_bad"] = off.size == 0 or Fraction(int(off.max())) <= lam_units

    g = good_part(cz)
    b = bad_part(cz)
    checks["reassembly"] = bool(np.array_equal(g.samples + b.samples, f.samples))

    mask2 = decompose(f, 2 * lam).bad_mask()
    checks["lam_monotone"] = bool(np.all(mask | ~mask2))
    return checks, len(cz.bad)


def czd_suite(trials: int, J: int = 12, seed: int = 0, dim: int = 1) -> SuiteResult:
    """Randomized decomposition battery: zero failures expected."""
    rng = np.random.default_rng(seed)
    failures: dict = {}
    bad_counts = 0
    t0 = time.perf_counter()
    for t in range(trials):
        if dim == 1:
            f = _draw_function(rng, J, t)
        else:
            f = (corpus.tensor_multi_spike(J, int(rng.integers(2, 17)), rng)
                 if t % 2 == 0 else corpus.tensor_trig(J, rng))
        lam = _draw_lam(rng)
        checks, n_bad = czd_invariants(f, lam)
        for name, ok in checks.items():
            if not ok:
                failures[name] = failures.get(name, 0) + 1
        bad_counts += n_bad
    elapsed = time.perf_counter() - t0
    return SuiteResult(
        suite=f"czd-{dim}d",
        trials=trials,
        failures=failures,
        elapsed=elapsed,
        stats={"mean_bad_cells": round(bad_counts / max(trials, 1), 2)},
    )


def covering_suite(trials_1d: int, trials_2d: int, seed: int = 0,
                   max_level_1d: int = 12, max_level_2d: int = 7) -> SuiteResult:
    """Random nonadjacent families: hull containment must never fail."""
    rng = np.random.default_rng(seed)
    failures = {"containment_1d": 0, "containment_2d": 0}
    components = 0
    t0 = time.perf_counter()
    for _ in range(trials_1d):
        fam = random_nonadjacent_family(rng, max_level=max_level_1d, max_count=64)
        rep = verify_covering(fam, j_max=max_level_1d, validate=False)
        if not rep.holds:
            failures["containment_1d"] += 1
        components += rep.components
    for _ in range(trials_2d):
        fam = random_nonadjacent_cube_family(rng, max_level=max_level_2d)
        rep = verify_covering_cubes(fam, j_max=max_level_2d, validate=False)
        if not rep.holds:
            failures["containment_2d"] += 1
        components += rep.components
    elapsed = time.perf_counter() - t0
    return SuiteResult(
        suite="covering",
        trials=trials_1d + trials_2d,
        failures=failures,
        elapsed=elapsed,
        stats={"components": components},
    )


def chain_suite(max_level: int = 6) -> SuiteResult:
    """Exhaustive bridge-length scan over all chains up to a level."""
    t0 = time.perf_counter()
    scan = exhaustive_chain_scan(max_level)
    elapsed = time.perf_counter() - t0
    return SuiteResult(
        suite="chains",
        trials=scan.chains,
        failures={"bridge_not_longest": len(scan.violations)},
        elapsed=elapsed,
        stats={
            "intervals": scan.intervals,
            "outer_pairs": scan.outer_pairs,
            "chains": scan.chains,
        },
    )
