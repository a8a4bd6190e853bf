"""Fourier transforms, partial sums, and summation kernels on dyadic grids.

Coefficients are stored centered: index i of a length-n array holds the
mode m = i - n/2, so the range is [-n/2, n/2).  Partial sums of order up
to n/2 inclusive are allowed; the order-n/2 sum reads the single stored
Nyquist bin for both modes +-n/2, which is the periodic reading of the
discrete spectrum.  Orders beyond n/2 raise AliasingError in the public
entry points; sweep engines instead saturate there, since a partial sum
of a band-limited function stops changing once the band is exhausted.
"""

from __future__ import annotations

import numpy as np

from .grid import GridFunction, tensor


class AliasingError(ValueError):
    """Requested spectral order exceeds what the grid can represent."""


def centered_modes(n: int) -> np.ndarray:
    return np.arange(-(n // 2), n // 2)


def forward(f: GridFunction) -> np.ndarray:
    """Fourier coefficients with mode m at index m + n/2 (per axis)."""
    if f.dim == 1:
        return np.fft.fftshift(np.fft.fft(f.samples)) / f.n
    return np.fft.fftshift(np.fft.fft2(f.samples)) / f.n**2


def inverse(coeffs: np.ndarray, J: int) -> GridFunction:
    dim = coeffs.ndim
    n = 1 << J
    if coeffs.shape != ((n,) if dim == 1 else (n, n)):
        raise ValueError("coefficient shape does not match J")
    if dim == 1:
        samples = np.fft.ifft(np.fft.ifftshift(coeffs)) * n
    else:
        samples = np.fft.ifft2(np.fft.ifftshift(coeffs)) * n**2
    return GridFunction(dim, J, samples)


def _check_order(N: int, H: int):
    if N < 0:
        raise ValueError("order must be nonnegative")
    if N > H:
        raise AliasingError(f"order {N} exceeds stored bandwidth {H}")


def partial_sum(f: GridFunction, N: int, refine: int = 2) -> GridFunction:
    """Square partial sum of order N evaluated on a 2**refine finer grid."""
    H = f.n // 2
    _check_order(N, H)
    c = forward(f)
    M = 1 << (f.J + refine)
    ms = np.arange(-N, N + 1)
    if f.dim == 1:
        b = np.zeros(M, dtype=complex)
        np.add.at(b, ms % M, c[(ms + H) % f.n])
        samples = np.fft.ifft(b) * M
        return GridFunction(1, f.J + refine, samples)
    b = np.zeros((M, M), dtype=complex)
    src = c[np.ix_((ms + H) % f.n, (ms + H) % f.n)]
    np.add.at(b, ((ms % M)[:, None], (ms % M)[None, :]), src)
    samples = np.fft.ifft2(b) * M**2
    return GridFunction(2, f.J + refine, samples)


def partial_sum_rect(f: GridFunction, N1: int, N2: int, refine: int = 1) -> GridFunction:
    """Rectangular partial sum: modes |m1| <= N1, |m2| <= N2."""
    if f.dim != 2:
        raise ValueError("rectangular sums need a 2-d function")
    H = f.n // 2
    _check_order(N1, H)
    _check_order(N2, H)
    c = forward(f)
    M = 1 << (f.J + refine)
    m1 = np.arange(-N1, N1 + 1)
    m2 = np.arange(-N2, N2 + 1)
    b = np.zeros((M, M), dtype=complex)
    src = c[np.ix_((m1 + H) % f.n, (m2 + H) % f.n)]
    np.add.at(b, ((m1 % M)[:, None], (m2 % M)[None, :]), src)
    samples = np.fft.ifft2(b) * M**2
    return GridFunction(2, f.J + refine, samples)


def saturated_sum(f: GridFunction, refine: int = 2) -> GridFunction:
    """The stable limit of the partial sums: order n/2 on the finer grid."""
    return partial_sum(f, f.n // 2, refine)


def vp_multiplier(N: int, m) -> np.ndarray:
    """Trapezoid multiplier: 1 on |m|<=N, linear down to 0 at |m|=2N."""
    a = np.abs(np.asarray(m))
    ramp = (2 * N - a) / N
    return np.where(a <= N, 1.0, np.where(a <= 2 * N - 1, ramp, 0.0))


def valle_poussin(f: GridFunction, N: int) -> GridFunction:
    """Delayed-mean smoothing of f; reproduces every mode up to N.

    The result lives on the same grid, so its band 2N-1 must fit the
    stored bandwidth n/2.
    """
    H = f.n // 2
    if N < 1:
        raise ValueError("order must be positive")
    if 2 * N - 1 > H:
        raise AliasingError(f"band {2 * N - 1} exceeds stored bandwidth {H}")
    c = forward(f)
    w = vp_multiplier(N, centered_modes(f.n))
    c = c * w if f.dim == 1 else c * np.multiply.outer(w, w)
    out = inverse(c, f.J)
    if f.is_real():
        out = GridFunction(f.dim, f.J, out.samples.real)
    return out


# ---------------------------------------------------------------------------
# kernels

KERNEL_NAMES = ("dirichlet", "inv_square", "power_decay", "box", "product")


def _signed_points(n: int) -> np.ndarray:
    t = np.arange(n)
    return np.where(t < n // 2, t, t - n) / n


def kernel_samples(name: str, N: int, J: int, s: float | None = None) -> GridFunction:
    """Sample a summation kernel on the grid; 'product' is the 2-d tensor."""
    n = 1 << J
    if name == "dirichlet":
        _check_order(N, n // 2)
        b = np.zeros(n, dtype=complex)
        ms = np.arange(-N, N + 1)
        np.add.at(b, ms % n, 1.0 + 0j)
        return GridFunction(1, J, (np.fft.ifft(b) * n).real)
    x = _signed_points(n)
    if name == "inv_square":
        near = np.abs(x) < 1.0 / N
        vals = np.empty(n)
        vals[near] = float(N)
        vals[~near] = 1.0 / (N * x[~near] ** 2)
        return GridFunction(1, J, vals)
    if name == "power_decay":
        if s is None or s <= 1:
            raise ValueError("power_decay needs a decay exponent s > 1")
        near = np.abs(x) < 1.0 / N
        vals = np.empty(n)
        vals[near] = float(N)
        vals[~near] = N ** (1.0 - s) * np.abs(x[~near]) ** (-s)
        return GridFunction(1, J, vals)
    if name == "box":
        # half-open window so the cell count is exactly n/N
        half = 1.0 / (2 * N)
        vals = np.where((x >= -half) & (x < half), 1.0 / N, 0.0)
        return GridFunction(1, J, vals)
    if name == "product":
        k = kernel_samples("inv_square", N, J)
        return tensor(k, k)
    raise ValueError(f"unknown kernel {name!r}")


def kernel_mass(name: str, N: int, s: float | None = None) -> float:
    """Exact integral of the kernel over the torus (closed forms)."""
    if name == "dirichlet":
        return 1.0
    if name == "inv_square":
        return 4.0 - 4.0 / N
    if name == "power_decay":
        if s is None or s <= 1:
            raise ValueError("power_decay needs a decay exponent s > 1")
        return 2.0 + 2.0 / (s - 1.0) * (1.0 - (2.0 / N) ** (s - 1.0))
    if name == "box":
        return 1.0 / N**2
    if name == "product":
        return (4.0 - 4.0 / N) ** 2
    raise ValueError(f"unknown kernel {name!r}")


def convolve(f: GridFunction, g: GridFunction) -> GridFunction:
    """Circular convolution, reading both functions as piecewise constant."""
    if f.dim != g.dim or f.J != g.J:
        raise ValueError("convolution needs matching grids")
    if f.dim == 1:
        samples = np.fft.ifft(np.fft.fft(f.samples) * np.fft.fft(g.samples)) / f.n
    else:
        samples = np.fft.ifft2(np.fft.fft2(f.samples) * np.fft.fft2(g.samples)) / f.n**2
    if f.is_real() and g.is_real():
        samples = samples.real
    return GridFunction(f.dim, f.J, samples)


# ---------------------------------------------------------------------------
# closed-form averaged second moments (full torus)

def _mode_weights(n: int, N: int) -> np.ndarray:
    """For each stored mode, how many of S_1..S_N contain it.

    The Nyquist bin enters both as +n/2 and -n/2 once n/2 <= N, hence
    the doubled weight.  Valid for every N; orders past n/2 change
    nothing, which encodes the saturation of partial sums.
    """
    H = n // 2
    ms = centered_modes(n)
    w = np.maximum(N + 1 - np.maximum(np.abs(ms), 1), 0).astype(float)
    w[0] = 2.0 * max(N + 1 - H, 0)
    return w


def plancherel_average(f: GridFunction, N: int) -> float:
    """(1/N) sum_{n<=N} ||S_n f||_2^2 via mode counting; exact, no sweep."""
    if f.dim != 1:
        raise ValueError("use plancherel_average_rect for 2-d functions")
    c = forward(f)
    return float(np.sum((c.real**2 + c.imag**2) * _mode_weights(f.n, N)) / N)


def plancherel_average_rect(f: GridFunction, N1: int, N2: int | None = None) -> float:
    """(1/(N1 N2)) sum_{n1<=N1, n2<=N2} ||S_{n1,n2} f||_2^2, exact."""
    if f.dim != 2:
        raise ValueError("needs a 2-d function")
    if N2 is None:
        N2 = N1
    c = forward(f)
    w1 = _mode_weights(f.n, N1)
    w2 = _mode_weights(f.n, N2)
    a = c.real**2 + c.imag**2
    return float(w1 @ a @ w2 / (N1 * N2))


def band_energy(f: GridFunction, lo: int, hi: int) -> float:
    """||S_hi f - S_lo f||_2^2: energy of modes lo < |m| <= hi (1-d)."""
    if f.dim != 1:
        raise ValueError("band energy is 1-d")
    H = f.n // 2
    lo, hi = min(lo, H), min(hi, H)
    if hi <= lo:
        return 0.0
    c = forward(f)
    ms = np.abs(centered_modes(f.n))
    a = c.real**2 + c.imag**2
    mask = (ms > lo) & (ms <= hi)
    extra = a[0] if hi >= H > lo else 0.0  # Nyquist bin counts twice
    return float(np.sum(a[mask]) + extra)
