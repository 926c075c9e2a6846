"""Periodic calculus on the circle R / 2piZ.

Fields are plain 1-D float arrays sampled at ``x_k = 2*pi*k/N``, ``k = 0..N-1``,
with ``N`` even and at least 8. All transforms go through ``numpy.fft.rfft``.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi
MIN_POINTS = 8


def grid(n: int) -> np.ndarray:
    """Uniform periodic grid with ``n`` points on [0, 2pi)."""
    check_size(n)
    return TWO_PI * np.arange(n) / n


def check_size(n: int) -> None:
    if n < MIN_POINTS or n % 2:
        raise ValueError(f"grid size must be even and >= {MIN_POINTS}, got {n}")


def check_field(f: np.ndarray) -> np.ndarray:
    """Validate a periodic field and return it as a float array."""
    f = np.asarray(f, dtype=float)
    if f.ndim != 1:
        raise ValueError(f"periodic field must be 1-D, got shape {f.shape}")
    check_size(f.size)
    if not np.all(np.isfinite(f)):
        raise FloatingPointError("periodic field contains non-finite values")
    return f


def wavenumbers(n: int) -> np.ndarray:
    return np.arange(n // 2 + 1, dtype=float)


def derivative(f: np.ndarray, order: int = 1) -> np.ndarray:
    """Spectral derivative of the given order.

    Mode ``k`` is multiplied by ``(ik)**order``; the Nyquist mode is dropped for
    odd orders since its derivative is not representable on the grid.
    """
    if order < 1:
        raise ValueError(f"derivative order must be positive, got {order}")
    f = check_field(f)
    n = f.size
    fh = np.fft.rfft(f)
    mult = (1j * wavenumbers(n)) ** order
    if order % 2:
        mult[-1] = 0.0
    out = np.fft.irfft(fh * mult, n)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("spectral derivative overflowed")
    return out


def integrate(f: np.ndarray) -> float:
    """Integral over the circle (rectangle rule, spectrally accurate)."""
    f = np.asarray(f, dtype=float)
    return TWO_PI / f.size * float(np.sum(f))


def _antiderivative_coefficients(fh: np.ndarray) -> np.ndarray:
    k = wavenumbers(2 * (fh.size - 1))
    gh = np.zeros_like(fh)
    gh[1:-1] = fh[1:-1] / (1j * k[1:-1])
    return gh


def cumulative_integral(f: np.ndarray) -> np.ndarray:
    """``F(x_k) = int_0^{x_k} f`` for ``k = 0..N``.

    The mean-free part is integrated in Fourier space and the mean contributes
    the linear term. The last entry equals :func:`integrate` exactly.
    """
    f = check_field(f)
    n = f.size
    fh = np.fft.rfft(f)
    mean = fh[0].real / n
    g = np.fft.irfft(_antiderivative_coefficients(fh), n)
    out = np.empty(n + 1)
    out[:n] = mean * grid(n) + (g - g[0])
    out[n] = integrate(f)
    return out


def _evaluate_series(fh: np.ndarray, n: int, points: np.ndarray) -> np.ndarray:
    # real trigonometric interpolant; the Nyquist mode enters as a cosine with half weight
    k = wavenumbers(n)
    weights = np.full(k.size, 2.0 / n)
    weights[0] = 1.0 / n
    weights[-1] = 1.0 / n
    coef = fh * weights
    coef[-1] = coef[-1].real
    phase = np.exp(1j * np.outer(points, k))
    return (phase @ coef).real


def resample(f: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``f`` at arbitrary points."""
    f = check_field(f)
    points = np.asarray(points, dtype=float)
    if not np.all(np.isfinite(points)):
        raise ValueError("resample points must be finite")
    shape = points.shape
    vals = _evaluate_series(np.fft.rfft(f), f.size, points.ravel())
    return vals.reshape(shape)


def antiderivative_evaluator(f: np.ndarray):
    """Return a callable ``x -> int_0^x f`` valid at arbitrary real ``x``."""
    f = check_field(f)
    n = f.size
    fh = np.fft.rfft(f)
    mean = fh[0].real / n
    gh = _antiderivative_coefficients(fh)
    g0 = _evaluate_series(gh, n, np.zeros(1))[0]

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        return mean * x + _evaluate_series(gh, n, x.ravel()).reshape(x.shape) - g0

    return evaluate
