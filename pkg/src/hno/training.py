"""Loss, reverse-mode gradients, optimizer and training loop.

The operator graph is fixed (lift, T layers, two-stage projection), so the
reverse pass is written out directly: :func:`hno.operator.model_forward`
records intermediates on a tape and :func:`backward` walks it in reverse,
calling the VJP that each primitive module provides.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import analytic, numerics
from . import operator as op

__all__ = [
    "DegenerateSampleError",
    "NonFiniteError",
    "relative_l2",
    "relative_l2_per_sample",
    "relative_l2_grad",
    "backward",
    "GradCheckReport",
    "gradient_check",
    "gradcheck_problem",
    "AdamHyper",
    "AdamState",
    "adam_init",
    "adam_step",
    "TrainConfig",
    "TrainReport",
    "DESK_PRESETS",
    "desk_config",
    "split_indices",
    "evaluate",
    "train",
]


class DegenerateSampleError(ValueError):
    """A target sample has zero norm, so relative error is undefined."""


class NonFiniteError(FloatingPointError):
    pass


def _sample_norms(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(x.reshape(x.shape[0], -1) ** 2, axis=1))


def relative_l2_per_sample(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {truth.shape}")
    tn = _sample_norms(truth)
    bad = np.flatnonzero(tn == 0.0)
    if bad.size:
        raise DegenerateSampleError(f"target sample(s) {bad.tolist()} have zero norm")
    return _sample_norms(pred - truth) / tn


def relative_l2(pred: np.ndarray, truth: np.ndarray) -> float:
    """Batch mean of ``||pred - truth|| / ||truth||`` with norms over all non-batch axes."""
    return float(np.mean(relative_l2_per_sample(pred, truth)))


def relative_l2_grad(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Gradient of :func:`relative_l2` w.r.t. ``pred``.

    A sample with ``pred == truth`` exactly contributes a zero gradient.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    diff = pred - truth
    dn = _sample_norms(diff)
    tn = _sample_norms(truth)
    denom = dn * tn * pred.shape[0]
    coef = np.divide(1.0, denom, out=np.zeros_like(denom), where=dn > 0)
    return diff * coef.reshape((-1,) + (1,) * (pred.ndim - 1))


def _affine_grads(g_out, x):
    g2 = g_out.reshape(-1, g_out.shape[-1])
    return g2.T @ x.reshape(-1, x.shape[-1]), g2.sum(axis=0)


def _first_nonfinite(tape: dict) -> str | None:
    if not np.all(np.isfinite(tape["lifted_input"])):
        return "normalized input"
    for i, rec in enumerate(tape["layers"]):
        if not np.all(np.isfinite(rec["pre"])):
            return f"layer {i} pre-activation"
    for key in ("latent", "q_pre", "y"):
        if not np.all(np.isfinite(tape[key])):
            return key
    return None


def backward(
    params: op.ModelParams, batch: tuple[np.ndarray, np.ndarray], layer_kind: str | None = None
) -> tuple[float, dict[str, np.ndarray]]:
    """Relative-L2 loss on ``batch`` and its gradient for every trainable array.

    Gradients are keyed like :meth:`ModelParams.named_arrays` and share their
    shapes; complex kernels get interleaved (d/dRe, d/dIm) float arrays.
    """
    a, u = batch
    if len(a) == 0:
        raise ValueError("empty batch")
    cfg = params.config
    tape: dict = {}
    pred = op.model_forward(a, params, layer_kind, tape=tape)
    loss = relative_l2(pred, u)
    if not math.isfinite(loss):
        where = _first_nonfinite(tape) or "prediction"
        raise NonFiniteError(f"non-finite loss {loss}; first non-finite intermediate: {where}")
    kind = tape["kind"]
    grads: dict[str, np.ndarray] = {}

    g = relative_l2_grad(pred, u) * params.out_scale
    grads["proj2_w"], grads["proj2_b"] = _affine_grads(g, tape["q"])
    g = (g @ params.proj2_w) * tape["dq"]
    grads["proj1_w"], grads["proj1_b"] = _affine_grads(g, tape["latent"])
    g = g @ params.proj1_w

    hilbert_axis = 1 + cfg.hilbert_axis
    layer_grads = []
    for layer, rec in zip(reversed(params.layers), reversed(tape["layers"])):
        g_pre = g * rec["dact"]
        v = rec["input"]
        axes = tuple(range(1, v.ndim - 1))
        g_w, g_b = _affine_grads(g_pre, v)
        g_in = g_pre @ layer.weight

        g_y = g_pre
        if kind == "hno":
            # output branch is -H(y)
            g_y = -analytic.hilbert_transform_vjp(g_y, hilbert_axis)
        trunc = rec["trunc"]
        g_mixed = numerics.real_inverse_padded_vjp(g_y, trunc)
        g_trunc, g_kernel = numerics.channel_contract_vjp(g_mixed.data, trunc.data, layer.kernel.weights)
        if kind == "hno":
            g_trunc = g_trunc * np.conj(op.hilbert_on_kept(trunc, hilbert_axis))
        g_in += numerics.dft_truncated_vjp(replace(trunc, data=g_trunc))

        layer_grads.append((np.ascontiguousarray(g_kernel).view(np.float64), g_w, g_b))
        g = g_in

    for i, (g_k, g_w, g_b) in enumerate(reversed(layer_grads)):
        grads[f"layer{i}.kernel"] = g_k
        grads[f"layer{i}.weight"] = g_w
        grads[f"layer{i}.bias"] = g_b
    grads["lift_w"], grads["lift_b"] = _affine_grads(g, tape["lifted_input"])

    ordered = {name: grads[name] for name, _ in params.named_arrays()}
    for name, arr in ordered.items():
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"non-finite gradient for {name}")
    return loss, ordered


# ---------------------------------------------------------------------------
# finite-difference verification


@dataclass
class GradCheckReport:
    max_rel: float
    mean_rel: float
    n_coords: int
    tolerance: float
    worst: str

    @property
    def passed(self) -> bool:
        return self.max_rel < self.tolerance


def _sample_coords(params: op.ModelParams, n_coords: int | None, rng) -> list[tuple[str, int]]:
    arrays = params.named_arrays()
    sizes = np.array([arr.size for _, arr in arrays])
    if n_coords is None or n_coords >= sizes.sum():
        return [(name, i) for name, arr in arrays for i in range(arr.size)]
    coords = []
    # every array is probed at least a few times, the rest is uniform over all coordinates
    for name, arr in arrays:
        k = min(arr.size, 4)
        coords += [(name, int(i)) for i in rng.choice(arr.size, size=k, replace=False)]
    remaining = max(0, n_coords - len(coords))
    flat = rng.choice(sizes.sum(), size=remaining, replace=False)
    offsets = np.cumsum(sizes) - sizes
    for f in flat:
        j = int(np.searchsorted(offsets, f, side="right") - 1)
        coords.append((arrays[j][0], int(f - offsets[j])))
    return coords


def gradient_check(
    params: op.ModelParams,
    batch: tuple[np.ndarray, np.ndarray],
    tolerance: float = 1e-4,
    *,
    n_coords: int | None = 200,
    step: float = 1e-5,
    seed: int = 0,
    layer_kind: str | None = None,
    grad_fn: Callable | None = None,
    floor: float = 1e-3,
) -> GradCheckReport:
    """Compare analytic gradients with central differences on sampled coordinates.

    ``n_coords=None`` probes every coordinate. The deviation per coordinate
    is ``|g - g_fd| / max(|g|, |g_fd|, floor)`` where the floor is ``floor``
    times the largest probed gradient magnitude, so coordinates whose
    gradient is pure round-off do not dominate.
    """
    grad_fn = backward if grad_fn is None else grad_fn
    params = params.copy()
    _, grads = grad_fn(params, batch, layer_kind)
    arrays = dict(params.named_arrays())
    coords = _sample_coords(params, n_coords, np.random.default_rng(seed))

    def loss_at() -> float:
        pred = op.model_forward(batch[0], params, layer_kind)
        return relative_l2(pred, batch[1])

    analytic_g = np.empty(len(coords))
    numeric_g = np.empty(len(coords))
    for j, (name, i) in enumerate(coords):
        flat = arrays[name].reshape(-1)
        orig = flat[i]
        flat[i] = orig + step
        lp = loss_at()
        flat[i] = orig - step
        lm = loss_at()
        flat[i] = orig
        numeric_g[j] = (lp - lm) / (2.0 * step)
        analytic_g[j] = grads[name].reshape(-1)[i]

    scale = max(np.max(np.abs(analytic_g)), np.max(np.abs(numeric_g)), np.finfo(float).tiny)
    denom = np.maximum(np.maximum(np.abs(analytic_g), np.abs(numeric_g)), floor * scale)
    rel = np.abs(analytic_g - numeric_g) / denom
    worst = int(np.argmax(rel))
    return GradCheckReport(
        max_rel=float(rel[worst]),
        mean_rel=float(np.mean(rel)),
        n_coords=len(coords),
        tolerance=tolerance,
        worst=f"{coords[worst][0]}[{coords[worst][1]}]",
    )


def gradcheck_problem(
    config: op.ModelConfig, seed: int = 0, batch_size: int = 3
) -> tuple[op.ModelParams, tuple[np.ndarray, np.ndarray]]:
    """A fresh model plus a batch whose targets come from a second random model.

    Teacher targets keep the loss well away from its flat regime, so the
    finite differences are not swamped by round-off.
    """
    rng = np.random.default_rng(seed)
    params = op.init_model(config, rng)
    teacher = op.init_model(config, rng)
    a = rng.standard_normal((batch_size,) + config.grid + (config.in_channels,))
    return params, (a, op.model_forward(a, teacher))


# ---------------------------------------------------------------------------
# Adam


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0


@dataclass
class AdamState:
    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]


def adam_init(params: op.ModelParams) -> AdamState:
    arrays = params.named_arrays()
    return AdamState(
        step=0,
        m={k: np.zeros_like(a) for k, a in arrays},
        v={k: np.zeros_like(a) for k, a in arrays},
    )


def adam_step(
    params: op.ModelParams, grads: dict[str, np.ndarray], state: AdamState, hyper: AdamHyper = AdamHyper()
) -> tuple[op.ModelParams, AdamState]:
    """One bias-corrected Adam update, applied in place.

    Real and imaginary kernel components are independent coordinates.
    ``weight_decay`` adds ``wd * theta`` to the gradient (L2 penalty).
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for {name}")
    state.step += 1
    t = state.step
    bc1 = 1.0 - hyper.beta1**t
    bc2 = 1.0 - hyper.beta2**t
    for name, theta in params.named_arrays():
        g = grads[name]
        if hyper.weight_decay:
            g = g + hyper.weight_decay * theta
        m, v = state.m[name], state.v[name]
        m *= hyper.beta1
        m += (1.0 - hyper.beta1) * g
        v *= hyper.beta2
        v += (1.0 - hyper.beta2) * g * g
        theta -= hyper.lr * (m / bc1) / (np.sqrt(v / bc2) + hyper.eps)
    return params, state


# ---------------------------------------------------------------------------
# training loop


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 1e-3
    lr_step: int = 0
    lr_gamma: float = 0.5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    seed: int = 0
    layer_kind: str = "hno"
    width: int = 32
    n_layers: int = 4
    modes: int | tuple[int, ...] = 16
    proj_width: int = 128
    activation: str = "gelu"
    hilbert_axis: int = 0
    coord_features: bool = True
    val_fraction: float = 0.2
    normalize: bool = True
    record_wall_time: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.lr_step < 0:
            raise ValueError("lr_step must be >= 0 (0 keeps the learning rate constant)")
        if not 0.0 < self.lr_gamma <= 1.0:
            raise ValueError("lr_gamma must lie in (0, 1]")
        if self.layer_kind not in op.LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.layer_kind!r}")

    @property
    def adam(self) -> AdamHyper:
        return AdamHyper(self.learning_rate, self.beta1, self.beta2, self.eps, self.weight_decay)

    def learning_rate_at(self, epoch: int) -> float:
        """Step-decayed learning rate for the 0-based ``epoch``.

        The rate is multiplied by ``lr_gamma`` every ``lr_step`` epochs;
        ``lr_step = 0`` keeps it constant.
        """
        if self.lr_step == 0:
            return self.learning_rate
        return self.learning_rate * self.lr_gamma ** (epoch // self.lr_step)

    def model_config(self, in_channels: int, out_channels: int, grid) -> op.ModelConfig:
        return op.ModelConfig(
            in_channels=in_channels,
            out_channels=out_channels,
            grid=tuple(grid),
            width=self.width,
            n_layers=self.n_layers,
            modes=self.modes,
            proj_width=self.proj_width,
            activation=self.activation,
            layer_kind=self.layer_kind,
            hilbert_axis=self.hilbert_axis,
            coord_features=self.coord_features,
        )


#: Model sizes used for the desk-scale benchmarks. The 2D and long 1D problems
#: are memory-bandwidth bound on a single core, so they get narrower networks.
DESK_PRESETS: dict[str, dict] = {
    "burgers1d": dict(width=32, n_layers=4, modes=16, proj_width=128),
    "darcy2d": dict(width=16, n_layers=4, modes=12, proj_width=64),
    "lorenz63": dict(width=24, n_layers=4, modes=16, proj_width=64),
}


def desk_config(problem: str, **overrides) -> TrainConfig:
    """Default :class:`TrainConfig` for one of the desk benchmark problems."""
    try:
        base = dict(DESK_PRESETS[problem])
    except KeyError:
        raise ValueError(f"unknown problem {problem!r}; expected one of {sorted(DESK_PRESETS)}") from None
    base.update(overrides)
    return TrainConfig(**base)


@dataclass
class TrainReport:
    config: TrainConfig
    train_loss: list[float] = field(default_factory=list)
    val_rel_l2: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    best_epoch: int = -1
    final_val_rel_l2: float = math.nan
    diverged: bool = False

    @property
    def seed(self) -> int:
        return self.config.seed

    def to_csv(self, path) -> None:
        """Write ``epoch,train_loss,val_rel_l2,seconds`` rows with 17 significant digits."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_rel_l2", "seconds"])
            for i, (tl, vl, s) in enumerate(zip(self.train_loss, self.val_rel_l2, self.seconds)):
                w.writerow([i + 1, f"{tl:.17g}", f"{vl:.17g}", f"{s:.17g}"])

    def as_dict(self) -> dict:
        d = asdict(self)
        d["config"] = asdict(self.config)
        return d


def split_indices(n: int, val_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded (train, val) index split; both parts are non-empty."""
    n_val = int(round(n * val_fraction))
    n_val = min(max(n_val, 1), n - 1)
    if n - n_val < 1 or n_val < 1:
        raise ValueError(f"cannot split {n} samples into non-empty train/val sets")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def evaluate(
    params: op.ModelParams, inputs: np.ndarray, outputs: np.ndarray, batch_size: int = 32
) -> np.ndarray:
    """Per-sample relative L2 errors of the model over a dataset."""
    errs = [
        relative_l2_per_sample(op.model_forward(inputs[i : i + batch_size], params), outputs[i : i + batch_size])
        for i in range(0, len(inputs), batch_size)
    ]
    return np.concatenate(errs)


def _normalizer(x: np.ndarray) -> tuple[float, float]:
    std = float(np.std(x))
    return float(np.mean(x)), std if std > 0 else 1.0


def train(dataset, config: TrainConfig, log: Callable[[str], None] | None = None):
    """Train an operator on ``dataset`` (a :class:`hno.datagen.DatasetPair`).

    Returns the parameters with the best validation error and a
    :class:`TrainReport`. Divergence (loss above 1e6 or non-finite) stops
    training early and flags the report instead of raising.
    """
    inputs, outputs = dataset.inputs, dataset.outputs
    train_idx, val_idx = split_indices(len(inputs), config.val_fraction, config.seed)
    if len(train_idx) < 1 or len(val_idx) < 1:
        raise ValueError("need at least one training and one validation sample")
    x_tr, y_tr = inputs[train_idx], outputs[train_idx]
    x_va, y_va = inputs[val_idx], outputs[val_idx]

    rng = np.random.default_rng(config.seed)
    mcfg = config.model_config(inputs.shape[-1], outputs.shape[-1], inputs.shape[1:-1])
    params = op.init_model(mcfg, rng)
    if config.normalize:
        params.in_shift, params.in_scale = _normalizer(x_tr)
        params.out_shift, params.out_scale = _normalizer(y_tr)
    state = adam_init(params)
    report = TrainReport(config=config)
    best = params.copy()
    best_val = math.inf

    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        hyper = replace(config.adam, lr=config.learning_rate_at(epoch))
        order = rng.permutation(len(x_tr))
        total = 0.0
        diverged = False
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            try:
                loss, grads = backward(params, (x_tr[idx], y_tr[idx]))
            except NonFiniteError:
                diverged = True
                break
            if loss > 1e6:
                diverged = True
                break
            total += loss * len(idx)
            adam_step(params, grads, state, hyper)
        if not diverged:
            try:
                val = float(np.mean(evaluate(params, x_va, y_va)))
            except FloatingPointError:
                val = math.nan
            diverged = not math.isfinite(val) or val > 1e6
        if diverged:
            report.diverged = True
            if log:
                log(f"epoch {epoch + 1}: diverged")
            break
        report.train_loss.append(total / len(order))
        report.val_rel_l2.append(val)
        report.seconds.append(time.perf_counter() - t0 if config.record_wall_time else 0.0)
        if val < best_val:
            best_val = val
            best = params.copy()
            report.best_epoch = epoch + 1
        if log:
            log(f"epoch {epoch + 1}: train {report.train_loss[-1]:.4e} val {val:.4e}")

    report.final_val_rel_l2 = best_val
    return best, report
