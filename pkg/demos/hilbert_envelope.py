"""Recovering amplitude and phase of an oscillation with the Hilbert transform.

A slowly modulated carrier ``A(t) cos(2 pi f t)`` hides its amplitude in the
sign changes of the carrier. The Hilbert transform shifts every positive
frequency by -pi/2, turning the cosine into a sine, so the analytic signal
``v + i H{v}`` traces a circle of radius ``A(t)`` in the complex plane.

Run with ``python3 demos/hilbert_envelope.py``.
"""
import numpy as np

from hno import analytic


def main():
    n = 1024
    t = np.arange(n) / n

    print("1. A pure tone: H{cos} = sin, exactly up to round-off")
    v = np.cos(2 * np.pi * 5 * t)
    err = np.max(np.abs(analytic.hilbert_transform(v) - np.sin(2 * np.pi * 5 * t)))
    print(f"   max |H{{cos}} - sin| = {err:.2e}")

    print("2. Applying H twice negates the signal once DC and Nyquist are removed")
    rng = np.random.default_rng(0)
    w = rng.standard_normal(n) + 0.7
    hh = analytic.hilbert_transform(analytic.hilbert_transform(w))
    spec = np.fft.fft(w)
    spec[0] = spec[n // 2] = 0
    print(f"   max |H(H w) + w_stripped| = {np.max(np.abs(hh + np.fft.ifft(spec).real)):.2e}")
    print(f"   mean of w = {w.mean():.3f}, mean of H(H w) = {hh.mean():.1e}  (the DC part is gone)")

    print("3. Envelope of an amplitude-modulated carrier")
    envelope = 1.0 + 0.5 * np.sin(2 * np.pi * 3 * t)
    signal = envelope * np.cos(2 * np.pi * 120 * t + 0.3)
    amp, phase = analytic.instantaneous_envelope_phase(analytic.analytic_signal(signal))
    print(f"   max envelope error = {np.max(np.abs(amp - envelope)):.2e}")
    freq = np.diff(np.unwrap(phase)) * n / (2 * np.pi)
    print(f"   instantaneous frequency: mean {freq.mean():.3f}, spread {freq.std():.1e} (carrier 120)")

    print("4. Why the Hilbert layer ignores the mean of a field")
    h_const = analytic.hilbert_transform(np.full(n, 3.0))
    shifted = analytic.hilbert_transform(w + 5.0) - analytic.hilbert_transform(w)
    print(f"   max |H{{3}}| = {np.max(np.abs(h_const)):.1e}, max |H{{w + 5}} - H{{w}}| = {np.max(np.abs(shifted)):.1e}")
    print("   so a Hilbert spectral branch cannot pass a constant offset; the pointwise path must carry it")


if __name__ == "__main__":
    main()
