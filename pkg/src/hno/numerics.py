"""Dense spectral numerics shared by every other module.

Fields are plain ``numpy`` arrays laid out as ``(batch, spatial..., channels)``
with channels innermost. Real fields are ``float64``; spectra are ``complex128``
and always stored over the full index range (no half-spectrum packing).

Conventions
-----------
Forward DFT is unnormalized, ``X[k] = sum_n x[n] exp(-2 pi i k n / N)``; the
inverse carries the ``1/N``. The FFT itself is delegated to ``scipy.fft``.

Every linear primitive here has a matching ``*_vjp`` used by the reverse pass
in :mod:`hno.training`. Cotangents of complex arrays follow the convention
``g = dL/dRe(z) + 1j * dL/dIm(z)`` so that the VJP of a complex-linear map
``A`` is multiplication by ``A^H``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft as sfft

__all__ = [
    "normalize_axes",
    "dft_forward",
    "dft_inverse",
    "take_real",
    "kept_bins",
    "TruncatedSpectrum",
    "mode_truncate",
    "mode_pad",
    "channel_contract",
    "dft_forward_vjp",
    "dft_inverse_vjp",
    "channel_contract_vjp",
    "dft_truncated",
    "real_inverse_padded",
    "dft_truncated_vjp",
    "real_inverse_padded_vjp",
]


def normalize_axes(ndim: int, axes: Sequence[int] | int) -> tuple[int, ...]:
    """Map possibly-negative axis indices onto ``range(ndim)``.

    Raises ``ValueError`` on out-of-range or repeated axes.
    """
    if isinstance(axes, (int, np.integer)):
        axes = (int(axes),)
    out = []
    for ax in axes:
        ax = int(ax)
        if not -ndim <= ax < ndim:
            raise ValueError(f"axis {ax} out of range for array of rank {ndim}")
        out.append(ax % ndim)
    if len(set(out)) != len(out):
        raise ValueError(f"repeated axes in {tuple(axes)}")
    return tuple(out)


def dft_forward(field: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Unnormalized forward DFT along ``axes``; other axes untouched.

    An empty ``axes`` list returns a complex copy of the input.
    """
    field = np.asarray(field)
    axes = normalize_axes(field.ndim, axes)
    if not axes:
        return field.astype(np.complex128, copy=True)
    return sfft.fftn(field, axes=axes)


def dft_inverse(spec: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Inverse DFT along ``axes`` with ``1/N`` normalization per axis."""
    spec = np.asarray(spec)
    axes = normalize_axes(spec.ndim, axes)
    if not axes:
        return spec.astype(np.complex128, copy=True)
    return sfft.ifftn(spec, axes=axes)


def take_real(spec: np.ndarray) -> tuple[np.ndarray, float]:
    """Return the real part and the largest discarded ``|imag|``."""
    spec = np.asarray(spec)
    if not np.iscomplexobj(spec):
        return spec.astype(np.float64, copy=True), 0.0
    resid = float(np.max(np.abs(spec.imag))) if spec.size else 0.0
    return np.ascontiguousarray(spec.real), resid


def dft_forward_vjp(g: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    # F^H = N * F^{-1} per transformed axis
    g = np.asarray(g)
    axes = normalize_axes(g.ndim, axes)
    if not axes:
        return g.astype(np.complex128, copy=True)
    scale = float(np.prod([g.shape[a] for a in axes]))
    return sfft.ifftn(g, axes=axes) * scale


def dft_inverse_vjp(g: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    # (F^{-1})^H = F / N per transformed axis
    g = np.asarray(g)
    axes = normalize_axes(g.ndim, axes)
    if not axes:
        return g.astype(np.complex128, copy=True)
    scale = float(np.prod([g.shape[a] for a in axes]))
    return sfft.fftn(g, axes=axes) / scale


def kept_bins(n: int, m: int) -> np.ndarray:
    """Bin indices retained when keeping ``m`` modes on an axis of length ``n``.

    These are ``0..m-1`` plus their conjugate mirrors ``n-m+1..n-1``, sorted
    ascending and without duplicates. ``n=8, m=2`` gives ``[0, 1, 7]``.
    """
    if n < 1:
        raise ValueError(f"axis length must be >= 1, got {n}")
    if not 1 <= m <= n // 2 + 1:
        raise ValueError(f"mode count {m} outside [1, {n // 2 + 1}] for axis length {n}")
    low = np.arange(m)
    high = np.arange(n - m + 1, n)
    return np.unique(np.concatenate([low, high]))


@dataclass(frozen=True)
class TruncatedSpectrum:
    """Kept bins of a spectrum plus what is needed to scatter them back."""

    data: np.ndarray
    sizes: tuple[int, ...]
    axes: tuple[int, ...]
    modes: tuple[int, ...]

    @property
    def bins(self) -> tuple[np.ndarray, ...]:
        return tuple(kept_bins(n, m) for n, m in zip(self.sizes, self.modes))

    @property
    def full_shape(self) -> tuple[int, ...]:
        shape = list(self.data.shape)
        for ax, n in zip(self.axes, self.sizes):
            shape[ax] = n
        return tuple(shape)


def _per_axis(modes, n_axes: int) -> tuple[int, ...]:
    if isinstance(modes, (int, np.integer)):
        return (int(modes),) * n_axes
    modes = tuple(int(m) for m in modes)
    if len(modes) != n_axes:
        raise ValueError(f"got {len(modes)} mode counts for {n_axes} axes")
    return modes


def mode_truncate(spec: np.ndarray, modes, axes: Sequence[int]) -> TruncatedSpectrum:
    """Keep the lowest ``modes`` bins (and conjugate mirrors) on each axis."""
    spec = np.asarray(spec)
    axes = normalize_axes(spec.ndim, axes)
    modes = _per_axis(modes, len(axes))
    sizes = tuple(spec.shape[a] for a in axes)
    data = spec
    for ax, n, m in zip(axes, sizes, modes):
        idx = kept_bins(n, m)
        if idx.size < n:
            data = np.take(data, idx, axis=ax)
    if data is spec:
        data = spec.copy()
    return TruncatedSpectrum(data=data, sizes=sizes, axes=axes, modes=modes)


def mode_pad(truncated: TruncatedSpectrum, sizes: Sequence[int] | None = None) -> np.ndarray:
    """Scatter kept bins into a zero spectrum of the original size.

    ``sizes`` may be passed explicitly to pad to a different resolution; the
    kept bins are then re-derived for the new lengths.
    """
    if sizes is None:
        sizes = truncated.sizes
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) != len(truncated.axes):
        raise ValueError(f"expected {len(truncated.axes)} sizes, got {len(sizes)}")
    out = truncated.data
    for ax, n, m in zip(truncated.axes, sizes, truncated.modes):
        idx = kept_bins(n, m) if m <= n // 2 + 1 else None
        if idx is None or idx.size != out.shape[ax]:
            raise ValueError(
                f"truncated extent {out.shape[ax]} on axis {ax} does not match "
                f"{m} modes at size {n}"
            )
        if idx.size == n:
            continue
        shape = list(out.shape)
        shape[ax] = n
        full = np.zeros(shape, dtype=np.complex128)
        sl = [slice(None)] * out.ndim
        sl[ax] = idx
        full[tuple(sl)] = out
        out = full
    if out is truncated.data:
        out = out.astype(np.complex128, copy=True)
    return out


def channel_contract(spec: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Independent channel mixing at every retained mode.

    ``spec`` has shape ``(batch, k_1..k_d, c_in)`` and ``weights`` shape
    ``(k_1..k_d, c_in, c_out)``; the result is ``(batch, k_1..k_d, c_out)``
    with ``out[b, k, :] = spec[b, k, :] @ weights[k]``.
    """
    spec = np.asarray(spec)
    weights = np.asarray(weights)
    if weights.ndim != spec.ndim or spec.shape[1:] != weights.shape[:-1]:
        raise ValueError(
            f"kernel shape {weights.shape} incompatible with spectrum shape {spec.shape}"
        )
    b, c_in, c_out = spec.shape[0], weights.shape[-2], weights.shape[-1]
    mode_shape = spec.shape[1:-1]
    k = int(np.prod(mode_shape))
    # modes leading so the product is one batched (B x c_in) @ (c_in x c_out) per mode
    x = np.moveaxis(spec.reshape(b, k, c_in), 1, 0)
    y = np.matmul(x, weights.reshape(k, c_in, c_out))
    return np.moveaxis(y, 0, 1).reshape((b,) + mode_shape + (c_out,))


def channel_contract_vjp(
    g: np.ndarray, spec: np.ndarray, weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Cotangents of :func:`channel_contract` w.r.t. ``spec`` and ``weights``."""
    b, c_in, c_out = spec.shape[0], weights.shape[-2], weights.shape[-1]
    mode_shape = spec.shape[1:-1]
    k = int(np.prod(mode_shape))
    gk = np.moveaxis(g.reshape(b, k, c_out), 1, 0)
    xk = np.moveaxis(spec.reshape(b, k, c_in), 1, 0)
    wk = weights.reshape(k, c_in, c_out)
    g_spec = np.matmul(gk, np.conj(np.swapaxes(wk, 1, 2)))
    g_w = np.matmul(np.conj(np.swapaxes(xk, 1, 2)), gk)
    g_spec = np.moveaxis(g_spec, 0, 1).reshape(spec.shape)
    return g_spec, g_w.reshape(weights.shape)


# ---------------------------------------------------------------------------
# fused pair used on the hot path of the operator layers


def dft_truncated(field: np.ndarray, modes, axes: Sequence[int]) -> TruncatedSpectrum:
    """``mode_truncate(dft_forward(field, axes), modes, axes)`` for a real field.

    The last listed axis is transformed with a real FFT and the mirrored bins
    are filled in by conjugation; remaining axes are transformed only on the
    bins that survive, so discarded modes are never computed.
    """
    field = np.asarray(field, dtype=np.float64)
    axes = normalize_axes(field.ndim, axes)
    if not axes:
        raise ValueError("dft_truncated needs at least one axis")
    modes = _per_axis(modes, len(axes))
    sizes = tuple(field.shape[a] for a in axes)
    last, n_last, m_last = axes[-1], sizes[-1], modes[-1]
    half = sfft.rfft(field, axis=last)
    idx = kept_bins(n_last, m_last)
    # bin j > n/2 of a real signal's partial transform is conj(bin n - j)
    mirror = np.where(idx <= n_last // 2, idx, n_last - idx)
    data = np.take(half, mirror, axis=last)
    flip = [slice(None)] * field.ndim
    flip[last] = idx > n_last // 2
    data[tuple(flip)] = np.conj(data[tuple(flip)])
    for ax, n, m in zip(axes[:-1], sizes[:-1], modes[:-1]):
        data = sfft.fft(data, axis=ax)
        keep = kept_bins(n, m)
        if keep.size < n:
            data = np.take(data, keep, axis=ax)
    return TruncatedSpectrum(data=data, sizes=sizes, axes=axes, modes=modes)


def real_inverse_padded(truncated: TruncatedSpectrum) -> np.ndarray:
    """``take_real(dft_inverse(mode_pad(truncated), axes))[0]`` without the full spectrum.

    Only the Hermitian part of the padded spectrum survives the real part,
    so the last axis is finished with an inverse real FFT.
    """
    data = truncated.data
    axes, sizes, modes = truncated.axes, truncated.sizes, truncated.modes
    for ax, n, m in zip(axes[:-1], sizes[:-1], modes[:-1]):
        keep = kept_bins(n, m)
        if data.shape[ax] != keep.size:
            raise ValueError(f"truncated extent {data.shape[ax]} on axis {ax} does not match {m} modes at size {n}")
        if keep.size < n:
            shape = list(data.shape)
            shape[ax] = n
            full = np.zeros(shape, dtype=np.complex128)
            sl = [slice(None)] * data.ndim
            sl[ax] = keep
            full[tuple(sl)] = data
            data = full
        data = sfft.ifft(data, axis=ax)
    last, n, m = axes[-1], sizes[-1], modes[-1]
    keep = kept_bins(n, m)
    if data.shape[last] != keep.size:
        raise ValueError(f"truncated extent {data.shape[last]} on axis {last} does not match {m} modes at size {n}")
    # Hermitian part on bins 0..n//2: H[j] = (W[j] + conj(W[-j])) / 2
    shape = list(data.shape)
    shape[last] = n // 2 + 1
    herm = np.zeros(shape, dtype=np.complex128)
    pos = keep <= n // 2
    sl_dst = [slice(None)] * data.ndim
    sl_src = [slice(None)] * data.ndim
    sl_dst[last] = keep[pos]
    sl_src[last] = np.flatnonzero(pos)
    herm[tuple(sl_dst)] += 0.5 * data[tuple(sl_src)]
    neg_bins = (n - keep) % n
    negpos = neg_bins <= n // 2
    sl_dst[last] = neg_bins[negpos]
    sl_src[last] = np.flatnonzero(negpos)
    herm[tuple(sl_dst)] += 0.5 * np.conj(data[tuple(sl_src)])
    return sfft.irfft(herm, n=n, axis=last)


def dft_truncated_vjp(g: TruncatedSpectrum) -> np.ndarray:
    # adjoint of T F on real inputs: Re(F^H P g) = N * Re(F^{-1} P g)
    return real_inverse_padded(g) * float(np.prod(g.sizes))


def real_inverse_padded_vjp(g: np.ndarray, like: TruncatedSpectrum) -> TruncatedSpectrum:
    # adjoint of Re F^{-1} P: T F g / N
    out = dft_truncated(g, like.modes, like.axes)
    return TruncatedSpectrum(out.data / float(np.prod(like.sizes)), like.sizes, like.axes, like.modes)
