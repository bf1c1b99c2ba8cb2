"""Fourier and Hilbert neural operator layers and the full lift/layers/project model.

Both layer kinds share the structure ``sigma(W v + b + K(v))``; they differ in
the global branch ``K``:

* FNO: ``K(v) = real(ifft(pad(R . trunc(fft(v)))))``
* HNO: ``K(v) = -H(real(ifft(pad(R . trunc(fft(H v))))))``

where ``H`` is the directional Hilbert transform along ``hilbert_axis``. The
``fft(H v)`` step is fused into a single multiply ``h * fft(v)``.

Because the Hilbert multiplier is ``-1j * sign`` with DC and Nyquist zeroed,
the HNO branch with a per-mode linear kernel reproduces the FNO branch whose
kernel has its DC/Nyquist rows (along the Hilbert axis) removed. The DC
component of a feature map therefore only travels through the local ``W`` path
in an HNO layer.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analytic, numerics

__all__ = [
    "ACTIVATIONS",
    "LAYER_KINDS",
    "activate",
    "activate_grad",
    "activate_with_grad",
    "SpectralKernel",
    "LayerParams",
    "ModelConfig",
    "ModelParams",
    "init_model",
    "pointwise_affine",
    "spectral_conv",
    "hno_spectral_branch",
    "fno_layer",
    "hno_layer",
    "model_forward",
    "at_resolution",
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointFormatError",
]

ACTIVATIONS = ("gelu", "relu", "identity")
LAYER_KINDS = ("fno", "hno")

_GELU_C = np.sqrt(2.0 / np.pi)
_GELU_A = 0.044715


def activate(x: np.ndarray, kind: str) -> np.ndarray:
    """Pointwise activation. ``gelu`` is the tanh form of GELU."""
    if kind == "gelu":
        t = np.tanh(_GELU_C * x * (1.0 + _GELU_A * x * x))
        t += 1.0
        t *= 0.5 * x
        return t
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "identity":
        return x
    raise ValueError(f"unknown activation {kind!r}; choose from {ACTIVATIONS}")


def activate_with_grad(x: np.ndarray, kind: str) -> tuple[np.ndarray, np.ndarray]:
    """``(activate(x), activate_grad(x))`` sharing the transcendental work."""
    if kind == "gelu":
        x2 = x * x
        t = np.tanh(_GELU_C * x * (1.0 + _GELU_A * x2))
        half_x = 0.5 * x
        dy = (1.0 - t * t) * (1.0 + 3.0 * _GELU_A * x2)
        dy *= _GELU_C * half_x
        t += 1.0
        dy += 0.5 * t
        t *= half_x
        return t, dy
    return activate(x, kind), activate_grad(x, kind)


def activate_grad(x: np.ndarray, kind: str) -> np.ndarray:
    """Pointwise derivative of :func:`activate` at ``x`` (ReLU uses 0 at 0)."""
    if kind == "gelu":
        x2 = x * x
        t = np.tanh(_GELU_C * x * (1.0 + _GELU_A * x2))
        return 0.5 * (1.0 + t) + (0.5 * _GELU_C) * x * (1.0 - t * t) * (1.0 + 3.0 * _GELU_A * x2)
    if kind == "relu":
        return (x > 0.0).astype(np.float64)
    if kind == "identity":
        return np.ones_like(x)
    raise ValueError(f"unknown activation {kind!r}; choose from {ACTIVATIONS}")


@dataclass
class SpectralKernel:
    """Complex channel-mixing weights on the retained modes.

    ``weights`` has shape ``(k_1..k_d, c_in, c_out)`` where ``k_j`` is the
    number of bins :func:`hno.numerics.kept_bins` keeps on axis ``j``.
    """

    modes: tuple[int, ...]
    weights: np.ndarray

    def __post_init__(self):
        self.modes = tuple(int(m) for m in self.modes)
        self.weights = np.asarray(self.weights, dtype=np.complex128)
        if self.weights.ndim != len(self.modes) + 2:
            raise ValueError(
                f"kernel weights of rank {self.weights.ndim} do not match {len(self.modes)} mode axes"
            )
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("kernel weights must be finite")

    @property
    def c_in(self) -> int:
        return self.weights.shape[-2]

    @property
    def c_out(self) -> int:
        return self.weights.shape[-1]

    def check_sizes(self, sizes: Sequence[int]) -> None:
        for n, m, k in zip(sizes, self.modes, self.weights.shape):
            expect = numerics.kept_bins(n, m).size
            if k != expect:
                raise ValueError(
                    f"kernel extent {k} does not match {expect} kept bins "
                    f"({m} modes at size {n})"
                )

    @classmethod
    def identity(cls, modes, sizes, channels: int) -> SpectralKernel:
        extents = [numerics.kept_bins(n, m).size for n, m in zip(sizes, modes)]
        w = np.zeros(tuple(extents) + (channels, channels), dtype=np.complex128)
        w[..., np.arange(channels), np.arange(channels)] = 1.0
        return cls(modes=tuple(modes), weights=w)

    @classmethod
    def random(cls, rng: np.random.Generator, modes, sizes, c_in: int, c_out: int) -> SpectralKernel:
        extents = tuple(numerics.kept_bins(n, m).size for n, m in zip(sizes, modes))
        s = 1.0 / (c_in * c_out)
        shape = extents + (c_in, c_out)
        w = rng.uniform(-s, s, size=shape) + 1j * rng.uniform(-s, s, size=shape)
        return cls(modes=tuple(modes), weights=w)


@dataclass
class LayerParams:
    kernel: SpectralKernel
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        c = self.weight.shape[0]
        if self.weight.shape != (c, c) or self.bias.shape != (c,):
            raise ValueError(f"local weight {self.weight.shape} / bias {self.bias.shape} not square c={c}")
        if self.kernel.c_in != c or self.kernel.c_out != c:
            raise ValueError(f"kernel channels ({self.kernel.c_in}->{self.kernel.c_out}) != width {c}")


@dataclass(frozen=True)
class ModelConfig:
    """Static hyperparameters of an operator network.

    ``grid`` is the spatial shape the kernels were sized for; ``hilbert_axis``
    counts spatial axes only (0 is the first spatial axis).
    """

    in_channels: int
    out_channels: int
    grid: tuple[int, ...]
    width: int = 32
    n_layers: int = 4
    modes: tuple[int, ...] = (16,)
    proj_width: int = 128
    activation: str = "gelu"
    layer_kind: str = "hno"
    hilbert_axis: int = 0
    coord_features: bool = True

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(int(n) for n in self.grid))
        modes = self.modes
        if isinstance(modes, (int, np.integer)):
            modes = (int(modes),) * len(self.grid)
        object.__setattr__(self, "modes", tuple(int(m) for m in modes))
        if len(self.modes) != len(self.grid):
            raise ValueError(f"{len(self.modes)} mode counts for a {len(self.grid)}-D grid")
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        if min(self.in_channels, self.out_channels, self.width, self.proj_width) < 1:
            raise ValueError("channel counts must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.layer_kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.layer_kind!r}")
        if not 0 <= self.hilbert_axis < len(self.grid):
            raise ValueError(f"hilbert_axis {self.hilbert_axis} outside a {len(self.grid)}-D grid")
        for n, m in zip(self.grid, self.modes):
            numerics.kept_bins(n, m)

    @property
    def ndim(self) -> int:
        return len(self.grid)

    @property
    def lift_in(self) -> int:
        return self.in_channels + (self.ndim if self.coord_features else 0)

    @property
    def spatial_axes(self) -> tuple[int, ...]:
        return tuple(range(1, self.ndim + 1))


@dataclass
class ModelParams:
    """All weights of a model plus fixed input/output normalization constants.

    Pointwise weights are stored ``(c_out, c_in)``. The normalizer is not
    trained: inputs are mapped to ``(a - in_shift) / in_scale`` before the lift
    and outputs to ``y * out_scale + out_shift`` after the projection.
    """

    config: ModelConfig
    lift_w: np.ndarray
    lift_b: np.ndarray
    layers: list[LayerParams]
    proj1_w: np.ndarray
    proj1_b: np.ndarray
    proj2_w: np.ndarray
    proj2_b: np.ndarray
    in_shift: float = 0.0
    in_scale: float = 1.0
    out_shift: float = 0.0
    out_scale: float = 1.0

    def __post_init__(self):
        cfg = self.config
        for name in ("lift_w", "lift_b", "proj1_w", "proj1_b", "proj2_w", "proj2_b"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        expect = {
            "lift_w": (cfg.width, cfg.lift_in),
            "lift_b": (cfg.width,),
            "proj1_w": (cfg.proj_width, cfg.width),
            "proj1_b": (cfg.proj_width,),
            "proj2_w": (cfg.out_channels, cfg.proj_width),
            "proj2_b": (cfg.out_channels,),
        }
        for name, shape in expect.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if len(self.layers) != cfg.n_layers:
            raise ValueError(f"{len(self.layers)} layers given, config says {cfg.n_layers}")
        for i, layer in enumerate(self.layers):
            if layer.weight.shape[0] != cfg.width:
                raise ValueError(f"layer {i} width {layer.weight.shape[0]} != {cfg.width}")
            if layer.kernel.modes != cfg.modes:
                raise ValueError(f"layer {i} kernel modes {layer.kernel.modes} != {cfg.modes}")
            layer.kernel.check_sizes(cfg.grid)
        if self.in_scale <= 0 or self.out_scale <= 0:
            raise ValueError("normalizer scales must be positive")

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Trainable arrays in declaration order, complex ones as float64 views.

        The returned arrays alias the parameters, so in-place updates train the
        model. Complex kernels appear with interleaved (re, im) last axis.
        """
        out = [("lift_w", self.lift_w), ("lift_b", self.lift_b)]
        for i, layer in enumerate(self.layers):
            out.append((f"layer{i}.kernel", layer.kernel.weights.view(np.float64)))
            out.append((f"layer{i}.weight", layer.weight))
            out.append((f"layer{i}.bias", layer.bias))
        out += [
            ("proj1_w", self.proj1_w),
            ("proj1_b", self.proj1_b),
            ("proj2_w", self.proj2_w),
            ("proj2_b", self.proj2_b),
        ]
        return out

    def copy(self) -> ModelParams:
        layers = [
            LayerParams(
                kernel=SpectralKernel(l.kernel.modes, l.kernel.weights.copy()),
                weight=l.weight.copy(),
                bias=l.bias.copy(),
            )
            for l in self.layers
        ]
        return replace(
            self,
            lift_w=self.lift_w.copy(),
            lift_b=self.lift_b.copy(),
            layers=layers,
            proj1_w=self.proj1_w.copy(),
            proj1_b=self.proj1_b.copy(),
            proj2_w=self.proj2_w.copy(),
            proj2_b=self.proj2_b.copy(),
        )

    def zeros_like(self) -> ModelParams:
        p = self.copy()
        for _, arr in p.named_arrays():
            arr[...] = 0.0
        return p


def _uniform(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_model(config: ModelConfig, seed: int | np.random.Generator = 0) -> ModelParams:
    """Seeded initialization: fan-in uniform for pointwise maps, small uniform for kernels."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    c = config.width
    lift_w = _uniform(rng, config.lift_in, (c, config.lift_in))
    lift_b = _uniform(rng, config.lift_in, (c,))
    layers = []
    for _ in range(config.n_layers):
        kernel = SpectralKernel.random(rng, config.modes, config.grid, c, c)
        layers.append(LayerParams(kernel, _uniform(rng, c, (c, c)), _uniform(rng, c, (c,))))
    proj1_w = _uniform(rng, c, (config.proj_width, c))
    proj1_b = _uniform(rng, c, (config.proj_width,))
    proj2_w = _uniform(rng, config.proj_width, (config.out_channels, config.proj_width))
    proj2_b = _uniform(rng, config.proj_width, (config.out_channels,))
    return ModelParams(config, lift_w, lift_b, layers, proj1_w, proj1_b, proj2_w, proj2_b)


def pointwise_affine(field: np.ndarray, weight: np.ndarray, bias: np.ndarray | None = None) -> np.ndarray:
    """Apply ``y = W x + b`` over the channel axis at every grid point.

    ``weight`` is ``(c_out, c_in)``.
    """
    field = np.asarray(field, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    if weight.ndim != 2 or weight.shape[1] != field.shape[-1]:
        raise ValueError(f"weight {weight.shape} cannot act on {field.shape[-1]} channels")
    out = field @ weight.T
    if bias is not None:
        bias = np.asarray(bias, dtype=np.float64)
        if bias.shape != (weight.shape[0],):
            raise ValueError(f"bias {bias.shape} does not match {weight.shape[0]} outputs")
        out += bias
    return out


def _spatial_axes(v: np.ndarray) -> tuple[int, ...]:
    return tuple(range(1, v.ndim - 1))


def _check_field(v: np.ndarray, kernel: SpectralKernel, axes) -> tuple[int, ...]:
    if v.ndim < 3:
        raise ValueError(f"expected (batch, spatial..., channels), got shape {v.shape}")
    axes = numerics.normalize_axes(v.ndim, axes)
    if len(axes) != len(kernel.modes):
        raise ValueError(f"{len(axes)} axes for a kernel with {len(kernel.modes)} mode axes")
    if v.shape[-1] != kernel.c_in:
        raise ValueError(f"field has {v.shape[-1]} channels, kernel expects {kernel.c_in}")
    kernel.check_sizes([v.shape[a] for a in axes])
    return axes


def hilbert_on_kept(trunc: numerics.TruncatedSpectrum, hilbert_axis: int) -> np.ndarray:
    """Hilbert multiplier restricted to the kept bins of ``hilbert_axis``."""
    j = trunc.axes.index(hilbert_axis)
    bins = numerics.kept_bins(trunc.sizes[j], trunc.modes[j])
    return analytic.multiplier_along(trunc.full_shape, hilbert_axis, bins)


def _spectral_core(v, kernel, axes, hilbert_axis, tape):
    # fft -> truncate and pad -> ifft -> real are fused; see numerics.dft_truncated
    trunc = numerics.dft_truncated(v, kernel.modes, axes)
    if hilbert_axis is not None:
        trunc = replace(trunc, data=trunc.data * hilbert_on_kept(trunc, hilbert_axis))
    mixed = numerics.channel_contract(trunc.data, kernel.weights)
    y = numerics.real_inverse_padded(replace(trunc, data=mixed))
    if tape is not None:
        tape["trunc"] = trunc
    return y


def spectral_conv(v: np.ndarray, kernel: SpectralKernel, axes=None) -> np.ndarray:
    """Truncated-mode spectral convolution ``real(ifft(pad(R . trunc(fft(v)))))``."""
    v = np.asarray(v, dtype=np.float64)
    axes = _spatial_axes(v) if axes is None else axes
    axes = _check_field(v, kernel, axes)
    return _spectral_core(v, kernel, axes, None, None)


def hno_spectral_branch(v: np.ndarray, kernel: SpectralKernel, hilbert_axis: int, axes=None) -> np.ndarray:
    """``H^{-1}(spectral_conv(H v))`` with the first two steps fused.

    ``hilbert_axis`` is an array axis of ``v`` and must be one of ``axes``.
    """
    v = np.asarray(v, dtype=np.float64)
    axes = _spatial_axes(v) if axes is None else axes
    axes = _check_field(v, kernel, axes)
    (hilbert_axis,) = numerics.normalize_axes(v.ndim, hilbert_axis)
    if hilbert_axis not in axes:
        raise ValueError(f"Hilbert axis {hilbert_axis} is not a transformed axis {axes}")
    y = _spectral_core(v, kernel, axes, hilbert_axis, None)
    return analytic.inverse_hilbert_transform(y, hilbert_axis)


def _layer(v, params: LayerParams, activation, hilbert_axis, tape):
    axes = _check_field(v, params.kernel, _spatial_axes(v))
    pre = pointwise_affine(v, params.weight, params.bias)
    if hilbert_axis is None:
        pre += _spectral_core(v, params.kernel, axes, None, tape)
    else:
        y = _spectral_core(v, params.kernel, axes, hilbert_axis, tape)
        pre += analytic.inverse_hilbert_transform(y, hilbert_axis)
    if tape is None:
        return activate(pre, activation)
    out, dact = activate_with_grad(pre, activation)
    tape.update(input=v, pre=pre, dact=dact)
    return out


def fno_layer(v: np.ndarray, params: LayerParams, activation: str = "gelu") -> np.ndarray:
    """``sigma(W v + b + spectral_conv(v, R))``."""
    return _layer(np.asarray(v, dtype=np.float64), params, activation, None, None)


def hno_layer(
    v: np.ndarray, params: LayerParams, activation: str = "gelu", hilbert_axis: int = 1
) -> np.ndarray:
    """``sigma(W v + b + H^{-1}(spectral_conv(H v, R)))``.

    ``hilbert_axis`` is an array axis (1 is the first spatial axis).
    """
    v = np.asarray(v, dtype=np.float64)
    (hilbert_axis,) = numerics.normalize_axes(v.ndim, hilbert_axis)
    if hilbert_axis not in _spatial_axes(v):
        raise ValueError(f"Hilbert axis {hilbert_axis} is not a spatial axis of shape {v.shape}")
    return _layer(v, params, activation, hilbert_axis, None)


def coordinate_channels(spatial_shape: Sequence[int]) -> np.ndarray:
    """Normalized grid coordinates on ``[0, 1]``, shape ``(*spatial, d)``."""
    grids = np.meshgrid(*[np.linspace(0.0, 1.0, n) for n in spatial_shape], indexing="ij")
    return np.stack(grids, axis=-1)


def model_forward(
    a: np.ndarray, params: ModelParams, layer_kind: str | None = None, tape: dict | None = None
) -> np.ndarray:
    """Evaluate ``Q(layer_T(...layer_1(P(a))...))`` on a batch ``a``.

    ``layer_kind`` overrides the kind stored in the config. When ``tape`` is a
    dict, the intermediates needed by :func:`hno.training.backward` are
    recorded into it.
    """
    cfg = params.config
    kind = cfg.layer_kind if layer_kind is None else layer_kind
    if kind not in LAYER_KINDS:
        raise ValueError(f"unknown layer kind {kind!r}")
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != cfg.ndim + 2 or a.shape[-1] != cfg.in_channels:
        raise ValueError(
            f"input shape {a.shape} incompatible with a {cfg.ndim}-D model taking {cfg.in_channels} channels"
        )
    x = (a - params.in_shift) / params.in_scale
    if cfg.coord_features:
        coords = np.broadcast_to(coordinate_channels(a.shape[1:-1]), a.shape[:-1] + (cfg.ndim,))
        x = np.concatenate([x, coords], axis=-1)
    h = pointwise_affine(x, params.lift_w, params.lift_b)
    if tape is not None:
        tape.update(lifted_input=x, layers=[], kind=kind)
    hilbert_axis = 1 + cfg.hilbert_axis if kind == "hno" else None
    for layer in params.layers:
        rec = {} if tape is not None else None
        h = _layer(h, layer, cfg.activation, hilbert_axis, rec)
        if tape is not None:
            tape["layers"].append(rec)
    q_pre = pointwise_affine(h, params.proj1_w, params.proj1_b)
    if tape is None:
        q = activate(q_pre, cfg.activation)
    else:
        q, dq = activate_with_grad(q_pre, cfg.activation)
    y = pointwise_affine(q, params.proj2_w, params.proj2_b)
    if tape is not None:
        tape.update(latent=h, q_pre=q_pre, q=q, dq=dq, y=y)
    return y * params.out_scale + params.out_shift


def at_resolution(params: ModelParams, grid: Sequence[int]) -> ModelParams:
    """Reuse a trained model on another grid.

    Kernels live on the retained modes only, so moving to a finer (or coarser)
    grid amounts to zero-padding them into a larger spectrum. The same
    truncated weights are therefore valid as long as every mode count still
    fits, i.e. ``m <= n // 2 + 1`` on the new grid.
    """
    cfg = replace(params.config, grid=tuple(int(n) for n in grid))
    p = params.copy()
    p.config = cfg
    p.__post_init__()
    return p


# ---------------------------------------------------------------------------
# checkpoint file: "HNOM", u32 version, config block, float64 arrays

CHECKPOINT_MAGIC = b"HNOM"
CHECKPOINT_VERSION = 1


class CheckpointFormatError(ValueError):
    pass


def _put_str(buf, s: str):
    b = s.encode("utf-8")
    buf.write(struct.pack("<I", len(b)))
    buf.write(b)


def save_checkpoint(params: ModelParams, path) -> None:
    """Write ``params`` in the little-endian ``HNOM`` v1 layout.

    Config block: n_layers, width, ndim, modes[ndim], grid[ndim] (u32 each),
    activation and layer_kind (u32 length + UTF-8), hilbert_axis (u32),
    coord_features (u8), in_channels, out_channels, proj_width (u32). Then
    every array of :meth:`ModelParams.named_arrays` flattened in order, and
    finally the four normalizer constants.
    """
    cfg = params.config
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    buf.write(struct.pack("<III", cfg.n_layers, cfg.width, cfg.ndim))
    buf.write(struct.pack(f"<{cfg.ndim}I", *cfg.modes))
    buf.write(struct.pack(f"<{cfg.ndim}I", *cfg.grid))
    _put_str(buf, cfg.activation)
    _put_str(buf, cfg.layer_kind)
    buf.write(struct.pack("<IB", cfg.hilbert_axis, int(cfg.coord_features)))
    buf.write(struct.pack("<III", cfg.in_channels, cfg.out_channels, cfg.proj_width))
    for _, arr in params.named_arrays():
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    buf.write(
        np.array([params.in_shift, params.in_scale, params.out_shift, params.out_scale], dtype="<f8").tobytes()
    )
    Path(path).write_bytes(buf.getvalue())


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointFormatError(f"truncated file: need {n} bytes for {what} at offset {self.pos}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str, count: int = 1):
        vals = struct.unpack(f"<{count}I", self.take(4 * count, what))
        return vals if count > 1 else vals[0]

    def string(self, what: str) -> str:
        n = self.u32(f"{what} length")
        try:
            return self.take(n, what).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointFormatError(f"{what} at offset {self.pos - n} is not UTF-8") from exc

    def f64(self, count: int, what: str) -> np.ndarray:
        return np.frombuffer(self.take(8 * count, what), dtype="<f8").astype(np.float64)


def load_checkpoint(path) -> ModelParams:
    r = _Reader(Path(path).read_bytes())
    if r.take(4, "magic") != CHECKPOINT_MAGIC:
        raise CheckpointFormatError("bad magic at offset 0, expected b'HNOM'")
    version = r.u32("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version} at offset 4")
    n_layers, width, ndim = r.u32("layer/width/ndim", 3)
    modes = tuple(np.atleast_1d(r.u32("modes", ndim)))
    grid = tuple(np.atleast_1d(r.u32("grid", ndim)))
    activation = r.string("activation")
    layer_kind = r.string("layer_kind")
    hilbert_axis, coord = struct.unpack("<IB", r.take(5, "hilbert_axis/coord flag"))
    in_ch, out_ch, proj_width = r.u32("channel counts", 3)
    try:
        cfg = ModelConfig(
            in_channels=in_ch,
            out_channels=out_ch,
            grid=grid,
            width=width,
            n_layers=n_layers,
            modes=modes,
            proj_width=proj_width,
            activation=activation,
            layer_kind=layer_kind,
            hilbert_axis=hilbert_axis,
            coord_features=bool(coord),
        )
    except ValueError as exc:
        raise CheckpointFormatError(f"invalid config block: {exc}") from exc
    params = init_model(cfg, 0)
    for name, arr in params.named_arrays():
        arr[...] = r.f64(arr.size, name).reshape(arr.shape)
    norm = r.f64(4, "normalizer")
    if r.pos != len(r.data):
        raise CheckpointFormatError(f"{len(r.data) - r.pos} trailing bytes at offset {r.pos}")
    params.in_shift, params.in_scale, params.out_shift, params.out_scale = (float(x) for x in norm)
    return params
