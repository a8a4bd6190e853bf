#!/usr/bin/env python3
"""Profile the two removal geometries for the separable 2-d moment.

For a tensor spike, removing dilated bad *cubes* leaves cross-bands in
the complement: points aligned with the spike in one coordinate but far
from it in the other.  A partial sum parked on such a band contributes
roughly its 1-d peak mass (~ 2n) times a bounded tail integral, so the
lattice average over the cube complement grows affinely in N.  Removing
dilated *slabs* (both coordinate shadows) deletes the bands; the
complement becomes a product set and the average plateaus.

This script prints both curves plus the affine model prediction
2*w*(N+2) - w^2, where w is the 1-d off-band plateau integral.
"""

import numpy as np

from strongmeans import corpus
from strongmeans.czd import decompose
from strongmeans.dyadic import dilate
from strongmeans.estimates import (
    _abs2_rows,
    _axis_segments,
    averaged_moment_rect,
    build_exceptional_set,
)

J, LAM = 7, 32.0
SCHEDULE = (4, 8, 16, 32, 64)


def main():
    f = corpus.spike(J, dim=2)
    curves = {}
    for geometry in ("cube", "slab"):
        reports = averaged_moment_rect(f, LAM, SCHEDULE[-1],
                                       schedule=SCHEDULE, geometry=geometry)
        curves[geometry] = [r.avg_moment for r in reports]
        measure = reports[0].measure_E
        print(f"{geometry:>5}: measure(E) = {measure} = {float(measure):.4f}")

    # 1-d off-band plateau for the model
    cz = decompose(f, LAM)
    exc = build_exceptional_set(cz, 5)
    S = exc.scale
    band = np.zeros(S, dtype=bool)
    for q in cz.bad:
        arc = dilate(q.axes[0], 5, j_max=J)
        for lo, hi in _axis_segments(arc.lo, arc.hi, S):
            band[lo:hi] = True
    M = 1 << (J + 1)
    w_cells = 1.0 - band.reshape(M, S // M).mean(axis=1)
    rows = _abs2_rows(corpus.spike(J), SCHEDULE[-1], 1)
    w_of_n = rows @ w_cells / M
    w = float(w_of_n[SCHEDULE[-1] // 2:].mean())
    print(f"1-d off-band plateau w ~ {w:.4f}")

    print(f"\n{'N':>5} {'cube':>10} {'slab':>10} {'2w(N+2)-w^2':>12}")
    for i, N in enumerate(SCHEDULE):
        model = 2 * w * (N + 2) - w * w
        print(f"{N:>5} {curves['cube'][i]:>10.4f} {curves['slab'][i]:>10.4f}"
              f" {model:>12.4f}")

    for geometry in ("cube", "slab"):
        c = curves[geometry]
        change = abs(c[-1] / c[-2] - 1)
        print(f"{geometry}: relative change {SCHEDULE[-2]} -> {SCHEDULE[-1]}"
              f" = {change:.1%}")


if __name__ == "__main__":
    main()
