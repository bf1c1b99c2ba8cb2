"""Discrete Hilbert transform and analytic-signal helpers.

The transform is defined through its frequency multiplier ``-1j * sign(k)``
with the DC bin and (for even lengths) the Nyquist bin set to zero. Those two
bins have no well-defined sign, so anything living there is annihilated:
``H(H(v)) = -(v - DC(v) - Nyquist(v))``.

For multi-dimensional fields only the directional (partial) transform along a
single axis is provided.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from . import numerics

__all__ = [
    "hilbert_multiplier",
    "hilbert_transform",
    "inverse_hilbert_transform",
    "hilbert_transform_vjp",
    "AnalyticSignal",
    "analytic_signal",
    "instantaneous_envelope_phase",
    "multiplier_along",
]


def hilbert_multiplier(n: int) -> np.ndarray:
    """Frequency response of the discrete Hilbert transform for length ``n``.

    >>> hilbert_multiplier(4)
    array([ 0.+0.j, -0.-1.j,  0.+0.j,  0.+1.j])
    """
    if n < 1:
        raise ValueError(f"length must be >= 1, got {n}")
    k = np.arange(n)
    h = np.zeros(n, dtype=np.complex128)
    h[(k > 0) & (2 * k < n)] = -1j
    h[2 * k > n] = 1j
    return h


def multiplier_along(shape: tuple[int, ...], axis: int, bins: np.ndarray | None = None) -> np.ndarray:
    """The Hilbert multiplier reshaped to broadcast along ``axis`` of ``shape``.

    ``bins`` restricts it to a subset of frequency bins (e.g. the kept modes).
    """
    h = hilbert_multiplier(shape[axis])
    if bins is not None:
        h = h[bins]
    bshape = [1] * len(shape)
    bshape[axis] = h.size
    return h.reshape(bshape)


def _check_real(field) -> np.ndarray:
    field = np.asarray(field)
    if np.iscomplexobj(field):
        raise TypeError("Hilbert transform expects a real-valued field")
    return field.astype(np.float64, copy=False)


def hilbert_transform(field: np.ndarray, axis: int = -1) -> np.ndarray:
    """Hilbert transform of a real field along ``axis``.

    Equal to ``real(ifft(h * fft(v)))``. Since ``h * fft(v)`` is Hermitian for
    real ``v``, the computation runs through the real FFT pair and the result
    carries no imaginary residue at all.
    """
    field = _check_real(field)
    (axis,) = numerics.normalize_axes(field.ndim, axis)
    n = field.shape[axis]
    bshape = [1] * field.ndim
    bshape[axis] = n // 2 + 1
    h = hilbert_multiplier(n)[: n // 2 + 1].reshape(bshape)
    return sfft.irfft(sfft.rfft(field, axis=axis) * h, n=n, axis=axis)


def inverse_hilbert_transform(field: np.ndarray, axis: int = -1) -> np.ndarray:
    """``-H``: the inverse of :func:`hilbert_transform` on zero-mean, Nyquist-free fields."""
    return -hilbert_transform(field, axis)


def hilbert_transform_vjp(g: np.ndarray, axis: int = -1) -> np.ndarray:
    # H is real-linear and anti-self-adjoint, so H^T = -H
    return -hilbert_transform(g, axis)


@dataclass(frozen=True)
class AnalyticSignal:
    real_part: np.ndarray
    imag_part: np.ndarray
    axis: int

    @property
    def complex(self) -> np.ndarray:
        return self.real_part + 1j * self.imag_part


def analytic_signal(field: np.ndarray, axis: int = -1) -> AnalyticSignal:
    """Build ``v + i H{v}`` along ``axis``; ``real_part`` is the input itself."""
    field = _check_real(field)
    (axis,) = numerics.normalize_axes(field.ndim, axis)
    return AnalyticSignal(real_part=field, imag_part=hilbert_transform(field, axis), axis=axis)


def instantaneous_envelope_phase(sig: AnalyticSignal) -> tuple[np.ndarray, np.ndarray]:
    """Envelope ``|v_A|`` and wrapped phase ``atan2(H v, v)`` in ``(-pi, pi]``.

    Where the analytic signal vanishes the phase is reported as 0.
    """
    re, im = sig.real_part, sig.imag_part
    env = np.hypot(re, im)
    phase = np.arctan2(im, re)
    # atan2 returns -pi for (-x, -0.0); fold onto +pi to keep the half-open range
    phase = np.where(phase == -np.pi, np.pi, phase)
    phase = np.where(env == 0.0, 0.0, phase)
    return env, phase
