import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hno import numerics as nm
from oracles import kept_set, loop_contract, naive_dft, naive_dftn


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


# --- dft_forward / dft_inverse ------------------------------------------------


def test_constant_signal_is_dc_only():
    X = nm.dft_forward(np.ones(4), [0])
    np.testing.assert_allclose(X, [4, 0, 0, 0], atol=1e-15)


def test_pure_cosine_tone():
    n = np.arange(8)
    X = nm.dft_forward(np.cos(2 * np.pi * n / 8), [0])
    expect = np.zeros(8)
    expect[[1, 7]] = 4.0
    assert np.max(np.abs(X - expect)) < 1e-12


@pytest.mark.parametrize("n", list(range(1, 65)))
def test_matches_naive_dft(n, rng):
    x = rng.uniform(-1, 1, size=(2, n, 3))
    assert rel_err(nm.dft_forward(x, [1]), naive_dft(x, 1)) < 1e-9
    assert rel_err(nm.dft_inverse(x, [1]), naive_dft(x, 1, inverse=True)) < 1e-9


def test_matches_naive_dft_2d(rng):
    x = rng.uniform(-1, 1, size=(2, 6, 9, 2))
    assert rel_err(nm.dft_forward(x, [1, 2]), naive_dftn(x, [1, 2])) < 1e-9


def test_batch_and_channel_axes_untouched(rng):
    x = rng.uniform(-1, 1, size=(3, 16, 2))
    X = nm.dft_forward(x, [1])
    for b in range(3):
        for c in range(2):
            np.testing.assert_allclose(X[b, :, c], naive_dft(x[b, :, c]), atol=1e-12)


def test_inverse_of_dc_spike():
    x = nm.dft_inverse(np.array([4, 0, 0, 0], dtype=complex), [0])
    np.testing.assert_allclose(x, np.ones(4), atol=1e-15)


def test_odd_length_round_trip(rng):
    x = rng.uniform(-1, 1, size=257)
    back = nm.dft_inverse(nm.dft_forward(x, [0]), [0])
    assert np.max(np.abs(back - x)) < 1e-12


@pytest.mark.parametrize("n", [4, 8, 15, 16, 64, 256])
def test_round_trip_sizes(n, rng):
    x = rng.uniform(-1, 1, size=(2, n, 2))
    assert np.max(np.abs(nm.dft_inverse(nm.dft_forward(x, [1]), [1]) - x)) < 1e-12


def test_parseval(rng):
    x = rng.uniform(-1, 1, size=100)
    X = nm.dft_forward(x, [0])
    lhs, rhs = np.sum(x**2), np.sum(np.abs(X) ** 2) / 100
    assert abs(lhs - rhs) / lhs < 1e-12


def test_linearity(rng):
    x, y = rng.uniform(-1, 1, size=(2, 32))
    a, b = 0.7, -2.3
    lhs = nm.dft_forward(a * x + b * y, [0])
    rhs = a * nm.dft_forward(x, [0]) + b * nm.dft_forward(y, [0])
    assert np.max(np.abs(lhs - rhs)) < 1e-12


@pytest.mark.parametrize("shape", [(1, 16, 1), (2, 9, 10, 3)])
def test_conjugate_symmetry_of_real_spectra(shape, rng):
    x = rng.uniform(-1, 1, size=shape)
    axes = list(range(1, len(shape) - 1))
    X = nm.dft_forward(x, axes)
    mirrored = X
    for ax in axes:
        mirrored = np.roll(np.flip(mirrored, axis=ax), 1, axis=ax)
    assert np.max(np.abs(X - np.conj(mirrored))) < 1e-12


def test_empty_axes_is_identity(rng):
    x = rng.uniform(-1, 1, size=(2, 5))
    X = nm.dft_forward(x, [])
    assert X.dtype == np.complex128
    np.testing.assert_array_equal(X.real, x)
    np.testing.assert_array_equal(nm.dft_inverse(X, []), X)


@pytest.mark.parametrize("axes", [[3], [-4], [0, 0]])
def test_bad_axes_rejected(axes):
    with pytest.raises(ValueError):
        nm.dft_forward(np.zeros((2, 4, 1)), axes)


def test_take_real_reports_residue():
    re, resid = nm.take_real(np.array([1 + 2e-3j, 2 - 5e-3j]))
    np.testing.assert_array_equal(re, [1.0, 2.0])
    assert resid == pytest.approx(5e-3)
    assert nm.take_real(np.array([1.0]))[1] == 0.0


# --- mode truncation and padding ---------------------------------------------


def test_kept_bins_example():
    np.testing.assert_array_equal(nm.kept_bins(8, 2), [0, 1, 7])


@pytest.mark.parametrize("n", [1, 2, 7, 8, 16, 33])
def test_kept_bins_match_definition(n):
    for m in range(1, n // 2 + 2):
        assert nm.kept_bins(n, m).tolist() == kept_set(n, m)


@pytest.mark.parametrize("m", [0, 6])
def test_mode_count_out_of_range(m):
    with pytest.raises(ValueError):
        nm.kept_bins(8, m)
    with pytest.raises(ValueError):
        nm.mode_truncate(np.zeros((1, 8, 1), dtype=complex), m, [1])


@pytest.mark.parametrize("n", [8, 9])
def test_full_band_truncation_is_identity(n, rng):
    X = rng.standard_normal((2, n, 1)) + 1j * rng.standard_normal((2, n, 1))
    t = nm.mode_truncate(X, n // 2 + 1, [1])
    np.testing.assert_array_equal(nm.mode_pad(t), X)


def test_out_of_band_tone_is_killed():
    n = np.arange(16)
    X = nm.dft_forward(np.cos(2 * np.pi * 5 * n / 16)[None, :, None], [1])
    t = nm.mode_truncate(X, 3, [1])
    assert t.data.shape == (1, 5, 1)
    assert np.max(np.abs(t.data)) < 1e-12


def _rand_spec(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_projection_idempotent_and_self_adjoint(rng):
    shape, axes, modes = (2, 10, 12, 3), [1, 2], (3, 4)

    def proj(x):
        return nm.mode_pad(nm.mode_truncate(x, modes, axes))

    x, y = _rand_spec(rng, shape), _rand_spec(rng, shape)
    assert np.max(np.abs(proj(proj(x)) - proj(x))) < 1e-12
    lhs, rhs = np.vdot(proj(x), y), np.vdot(x, proj(y))
    assert abs(lhs - rhs) / abs(lhs) < 1e-12


def test_pad_and_truncate_are_adjoint(rng):
    axes, modes = [1, 2], (2, 3)
    y = _rand_spec(rng, (2, 8, 7, 2))
    ty = nm.mode_truncate(y, modes, axes)
    x = nm.TruncatedSpectrum(_rand_spec(rng, ty.data.shape), ty.sizes, ty.axes, ty.modes)
    lhs, rhs = np.vdot(nm.mode_pad(x), y), np.vdot(x.data, ty.data)
    assert abs(lhs - rhs) / abs(lhs) < 1e-12


def test_pad_of_zeros_is_zero():
    t = nm.TruncatedSpectrum(np.zeros((1, 3, 2), dtype=complex), (8,), (1,), (2,))
    full = nm.mode_pad(t)
    assert full.shape == (1, 8, 2) and not np.any(full)


def test_pad_size_mismatch():
    t = nm.TruncatedSpectrum(np.zeros((1, 3, 1), dtype=complex), (8,), (1,), (2,))
    with pytest.raises(ValueError):
        nm.mode_pad(t, (8, 8))
    with pytest.raises(ValueError):
        nm.mode_pad(nm.TruncatedSpectrum(np.zeros((1, 4, 1), dtype=complex), (8,), (1,), (2,)))


def test_pad_to_finer_grid(rng):
    X = _rand_spec(rng, (1, 8, 1))
    t = nm.mode_truncate(X, 3, [1])
    fine = nm.mode_pad(t, (16,))
    np.testing.assert_array_equal(fine[0, [0, 1, 2, 14, 15], 0], t.data[0, :, 0])
    assert not np.any(fine[0, 3:14])


# --- channel contraction -------------------------------------------------------


def test_identity_kernel_contract(rng):
    spec = _rand_spec(rng, (2, 5, 3))
    w = np.broadcast_to(np.eye(3), (5, 3, 3))
    np.testing.assert_array_equal(nm.channel_contract(spec, w), spec)


def test_scalar_kernel_doubles(rng):
    spec = _rand_spec(rng, (2, 5, 1))
    w = np.full((5, 1, 1), 2 + 0j)
    np.testing.assert_allclose(nm.channel_contract(spec, w), 2 * spec, atol=0)


def test_contract_matches_loop_oracle(rng):
    spec = _rand_spec(rng, (3, 2, 2))
    w = _rand_spec(rng, (2, 2, 3))
    assert np.max(np.abs(nm.channel_contract(spec, w) - loop_contract(spec, w))) < 1e-14


def test_contract_2d_matches_loop_oracle(rng):
    spec = _rand_spec(rng, (2, 3, 4, 2))
    w = _rand_spec(rng, (3, 4, 2, 3))
    assert np.max(np.abs(nm.channel_contract(spec, w) - loop_contract(spec, w))) < 1e-13


@pytest.mark.parametrize("wshape", [(5, 2, 3), (4, 3, 3), (5, 3)])
def test_contract_shape_mismatch(wshape):
    with pytest.raises(ValueError):
        nm.channel_contract(np.zeros((1, 5, 3), dtype=complex), np.zeros(wshape, dtype=complex))


# --- fused transforms and adjoints ----------------------------------------------


@pytest.mark.parametrize(
    "shape,modes",
    [((2, 16, 3), (5,)), ((2, 15, 1), (8,)), ((1, 8, 2), (1,)), ((2, 8, 10, 2), (3, 6)), ((1, 7, 9, 1), (4, 2))],
)
def test_fused_transforms_match_composition(shape, modes, rng):
    axes = list(range(1, len(shape) - 1))
    x = rng.uniform(-1, 1, size=shape)
    fused = nm.dft_truncated(x, modes, axes)
    ref = nm.mode_truncate(nm.dft_forward(x, axes), modes, axes)
    assert np.max(np.abs(fused.data - ref.data)) < 1e-12 * x.size
    # an arbitrary (non-Hermitian) truncated spectrum
    w = nm.TruncatedSpectrum(_rand_spec(rng, ref.data.shape), ref.sizes, ref.axes, ref.modes)
    y_ref, _ = nm.take_real(nm.dft_inverse(nm.mode_pad(w), axes))
    assert np.max(np.abs(nm.real_inverse_padded(w) - y_ref)) < 1e-13


def test_fused_vjps_are_adjoints(rng):
    axes, modes = (1, 2), (3, 4)
    x = rng.uniform(-1, 1, size=(2, 9, 8, 2))
    t = nm.dft_truncated(x, modes, axes)
    g = nm.TruncatedSpectrum(_rand_spec(rng, t.data.shape), t.sizes, t.axes, t.modes)
    # <T F x, g>_R = <x, vjp(g)>
    lhs = np.sum((np.conj(t.data) * g.data).real)
    rhs = np.sum(x * nm.dft_truncated_vjp(g))
    assert abs(lhs - rhs) / abs(lhs) < 1e-12
    y = rng.uniform(-1, 1, size=x.shape)
    lhs = np.sum(nm.real_inverse_padded(g) * y)
    back = nm.real_inverse_padded_vjp(y, g)
    rhs = np.sum((np.conj(g.data) * back.data).real)
    assert abs(lhs - rhs) / abs(lhs) < 1e-12


def test_plain_dft_vjps_are_adjoints(rng):
    x, g = _rand_spec(rng, (2, 12, 1)), _rand_spec(rng, (2, 12, 1))
    assert abs(np.vdot(nm.dft_forward(x, [1]), g) - np.vdot(x, nm.dft_forward_vjp(g, [1]))) < 1e-10
    assert abs(np.vdot(nm.dft_inverse(x, [1]), g) - np.vdot(x, nm.dft_inverse_vjp(g, [1]))) < 1e-12


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(2, 40),
    data=st.data(),
)
def test_truncate_pad_round_trip_keeps_real_signals_real(n, data):
    m = data.draw(st.integers(1, n // 2 + 1))
    seed = data.draw(st.integers(0, 2**31))
    x = np.random.default_rng(seed).uniform(-1, 1, size=(1, n, 1))
    t = nm.mode_truncate(nm.dft_forward(x, [1]), m, [1])
    _, resid = nm.take_real(nm.dft_inverse(nm.mode_pad(t), [1]))
    assert resid < 1e-12
