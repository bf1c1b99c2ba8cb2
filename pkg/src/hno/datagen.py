"""Synthetic operator-learning datasets: random fields, Burgers, Darcy, Lorenz-63.

All generators are seeded; sample ``i`` of a dataset draws from
``numpy.random.default_rng([seed, i])`` so any sample can be regenerated
without the others.
"""
from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "GrfSpec",
    "grf_sample",
    "grf_variance",
    "burgers_min_steps",
    "burgers_solve",
    "StabilityError",
    "darcy_operator",
    "darcy_solve",
    "SolverError",
    "lorenz63_solve",
    "DivergenceError",
    "DatasetPair",
    "DatasetFormatError",
    "check_dataset",
    "write_dataset",
    "read_dataset",
    "make_burgers_dataset",
    "make_darcy_dataset",
    "make_lorenz_dataset",
    "lorenz_fixed_point",
]


class StabilityError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


class DivergenceError(FloatingPointError):
    pass


# ---------------------------------------------------------------------------
# Gaussian random fields


@dataclass(frozen=True)
class GrfSpec:
    """Periodic Gaussian random field on the unit cube.

    The spectral density is ``sigma^2 (4 pi^2 |k|^2 + tau^2)^(-alpha)`` with
    ``sigma = tau^(alpha - d/2)``, multiplied by ``scale^2``. With
    ``zero_mean`` the constant mode is dropped, so every sample has mean zero.
    """

    shape: tuple[int, ...]
    alpha: float = 2.5
    tau: float = 7.0
    scale: float = 1.0
    seed: int = 0
    zero_mean: bool = False

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        d = len(self.shape)
        if d < 1 or min(self.shape) < 1:
            raise ValueError(f"invalid grid shape {self.shape}")
        if self.alpha <= d / 2:
            raise ValueError(f"alpha={self.alpha} must exceed d/2={d / 2} for a continuous field")
        if self.tau <= 0:
            raise ValueError("tau must be positive")

    def density(self) -> np.ndarray:
        d = len(self.shape)
        freqs = np.meshgrid(*[np.fft.fftfreq(n, 1.0 / n) for n in self.shape], indexing="ij")
        k2 = sum(f * f for f in freqs)
        sigma2 = self.tau ** (2 * self.alpha - d)
        lam = self.scale**2 * sigma2 * (4 * math.pi**2 * k2 + self.tau**2) ** (-self.alpha)
        if self.zero_mean:
            lam[(0,) * d] = 0.0
        return lam


def grf_variance(spec: GrfSpec) -> float:
    """Pointwise variance of :func:`grf_sample` output (the density summed over modes)."""
    return float(np.sum(spec.density()))


def grf_sample(spec: GrfSpec, n_samples: int = 1) -> np.ndarray:
    """Draw ``n_samples`` fields of shape ``spec.shape``; returns ``(n, *shape)``."""
    sqrt_lam = np.sqrt(spec.density())
    axes = tuple(range(len(spec.shape)))
    n_total = int(np.prod(spec.shape))
    out = np.empty((n_samples,) + spec.shape)
    for i in range(n_samples):
        rng = np.random.default_rng([spec.seed, i])
        xi = (rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)) / math.sqrt(2.0)
        c = sqrt_lam * xi
        # c_sym[k] = (c[k] + conj(c[-k])) / sqrt(2) keeps E|c_sym[k]|^2 = lambda_k
        c_neg = np.conj(np.roll(np.flip(c, axis=axes), 1, axis=axes))
        c_sym = (c + c_neg) / math.sqrt(2.0)
        out[i] = np.fft.ifftn(c_sym).real * n_total
    return out


# ---------------------------------------------------------------------------
# 1D viscous Burgers, pseudo-spectral


def _burgers_kmax(n: int) -> float:
    return 2.0 * math.pi * math.floor((n - 1) / 3)


def burgers_min_steps(u0: np.ndarray, t_final: float, courant: float = 2.5) -> int:
    """Smallest step count satisfying the advective bound used by :func:`burgers_solve`."""
    u0 = np.asarray(u0, dtype=np.float64)
    umax = float(np.max(np.abs(u0))) if u0.size else 0.0
    return max(1, math.ceil(t_final * umax * _burgers_kmax(u0.shape[-1]) / courant))


def burgers_solve(
    u0: np.ndarray,
    nu: float,
    t_final: float = 1.0,
    n_steps: int | None = None,
    *,
    courant: float = 2.5,
    snapshot_every: int | None = None,
):
    """Integrate ``u_t + (u^2/2)_x = nu u_xx`` on the periodic unit interval.

    Pseudo-spectral in space with 2/3-rule dealiasing of the quadratic term,
    diffusion absorbed by an integrating factor, classical RK4 in time.
    ``u0`` may carry leading batch axes; the last axis is space.

    The step count must satisfy ``dt * max|u0| * k_max <= courant`` with
    ``k_max`` the largest retained wavenumber (``max|u|`` cannot grow for
    this equation, so checking ``u0`` suffices). ``n_steps=None`` picks the
    smallest admissible count.

    Returns ``u(., t_final)``, or ``(u, snapshots)`` when ``snapshot_every`` is
    given, where ``snapshots`` holds the state every that many steps including
    the initial one.
    """
    u0 = np.asarray(u0, dtype=np.float64)
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    n = u0.shape[-1]
    need = burgers_min_steps(u0, t_final, courant)
    if n_steps is None:
        n_steps = need
    if n_steps < need:
        raise StabilityError(
            f"n_steps={n_steps} violates the advective stability bound; need at least {need}"
        )
    dt = t_final / n_steps

    kint = np.fft.rfftfreq(n, 1.0 / n)
    k = 2.0 * math.pi * kint
    dealias = kint <= math.floor((n - 1) / 3)
    e_half = np.exp(-nu * k * k * dt / 2.0)
    e_full = e_half * e_half
    g = -0.5j * k * dt

    def nonlin(v_hat):
        u = np.fft.irfft(v_hat * dealias, n=n)
        return g * (np.fft.rfft(u * u) * dealias)

    v = np.fft.rfft(u0)
    snaps = [u0.copy()] if snapshot_every else None
    for step in range(1, n_steps + 1):
        a = nonlin(v)
        b = nonlin(e_half * (v + a / 2))
        c = nonlin(e_half * v + b / 2)
        d = nonlin(e_full * v + e_half * c)
        v = e_full * v + (e_full * a + 2.0 * e_half * (b + c) + d) / 6.0
        if snaps is not None and step % snapshot_every == 0:
            snaps.append(np.fft.irfft(v, n=n))
    u = np.fft.irfft(v, n=n)
    if not np.all(np.isfinite(u)):
        raise DivergenceError("Burgers integration produced non-finite values")
    if snaps is not None:
        return u, np.stack(snaps)
    return u


# ---------------------------------------------------------------------------
# 2D Darcy flow, finite volumes


def darcy_operator(a: np.ndarray) -> sp.csr_matrix:
    """Five-point finite-volume matrix for ``-div(a grad u)`` on interior nodes.

    ``a`` is sampled on the full ``n x n`` node grid of the unit square
    (spacing ``1/(n-1)``); face coefficients are harmonic means of the two
    adjacent nodes and boundary nodes carry ``u = 0``.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n) or n < 3:
        raise ValueError(f"coefficient must be a square grid with n >= 3, got {a.shape}")
    if not np.all(a > 0):
        raise ValueError(f"coefficient must be positive everywhere (min {a.min():g})")
    h2 = (1.0 / (n - 1)) ** 2
    ax = 2.0 * a[1:, :] * a[:-1, :] / (a[1:, :] + a[:-1, :])  # face (i+1/2, j)
    ay = 2.0 * a[:, 1:] * a[:, :-1] / (a[:, 1:] + a[:, :-1])  # face (i, j+1/2)
    m = n - 2
    idx = np.arange(m * m).reshape(m, m)
    west = ax[:-1, 1:-1]
    east = ax[1:, 1:-1]
    south = ay[1:-1, :-1]
    north = ay[1:-1, 1:]
    diag = (west + east + south + north) / h2
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [diag.ravel()]
    for coef, src, dst in (
        (east[:-1, :], idx[:-1, :], idx[1:, :]),
        (north[:, :-1], idx[:, :-1], idx[:, 1:]),
    ):
        off = -coef.ravel() / h2
        rows += [src.ravel(), dst.ravel()]
        cols += [dst.ravel(), src.ravel()]
        vals += [off, off]
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m * m, m * m)
    )


def darcy_solve(a: np.ndarray, f: np.ndarray | float = 1.0, rtol: float = 1e-10) -> np.ndarray:
    """Solve ``-div(a grad u) = f`` with ``u = 0`` on the boundary of the unit square.

    Conjugate gradients run until the true relative residual
    ``||f - A u|| / ||f||`` is below ``rtol``. Returns ``u`` on the full grid.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    A = darcy_operator(a)
    f = np.broadcast_to(np.asarray(f, dtype=np.float64), a.shape)
    b = np.ascontiguousarray(f[1:-1, 1:-1]).ravel()
    u = np.zeros((n, n))
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return u
    maxiter = 10 * n * n
    x, info = spla.cg(A, b, rtol=0.1 * rtol, atol=0.0, maxiter=maxiter)
    resid = np.linalg.norm(b - A @ x) / bnorm
    if info != 0 or resid >= rtol:
        raise SolverError(f"CG did not converge in {maxiter} iterations (relative residual {resid:.3e})")
    u[1:-1, 1:-1] = x.reshape(n - 2, n - 2)
    return u


# ---------------------------------------------------------------------------
# forced Lorenz-63


def lorenz63_solve(
    f_series: np.ndarray,
    sigma: float = 10.0,
    rho: float = 28.0,
    beta: float = 8.0 / 3.0,
    x0: float | np.ndarray = 1.0,
    y0: float | np.ndarray = 1.0,
    z0: float | np.ndarray = 1.0,
    dt: float = 0.01,
    *,
    return_state: bool = False,
) -> np.ndarray:
    """RK4 integration of Lorenz-63 with forcing ``-f(t)`` on the ``z`` equation.

    ``f_series`` holds ``f`` on the uniform grid ``t_j = j dt`` (leading axes
    are independent trajectories); mid-step values are linear interpolants.
    Returns ``x(t_j)`` with the same shape, or the full ``(..., n, 3)`` state
    when ``return_state`` is set.
    """
    f = np.asarray(f_series, dtype=np.float64)
    if dt <= 0:
        raise ValueError("dt must be positive")
    batch = f.shape[:-1]
    n = f.shape[-1]
    state = np.empty(batch + (n, 3))
    x = np.broadcast_to(np.asarray(x0, dtype=np.float64), batch).copy()
    y = np.broadcast_to(np.asarray(y0, dtype=np.float64), batch).copy()
    z = np.broadcast_to(np.asarray(z0, dtype=np.float64), batch).copy()

    def rhs(x, y, z, fv):
        return sigma * (y - x), x * (rho - z) - y, x * y - beta * z - fv

    state[..., 0, 0], state[..., 0, 1], state[..., 0, 2] = x, y, z
    for j in range(n - 1):
        f0, f1 = f[..., j], f[..., j + 1]
        fm = 0.5 * (f0 + f1)
        k1 = rhs(x, y, z, f0)
        k2 = rhs(x + 0.5 * dt * k1[0], y + 0.5 * dt * k1[1], z + 0.5 * dt * k1[2], fm)
        k3 = rhs(x + 0.5 * dt * k2[0], y + 0.5 * dt * k2[1], z + 0.5 * dt * k2[2], fm)
        k4 = rhs(x + dt * k3[0], y + dt * k3[1], z + dt * k3[2], f1)
        x = x + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        y = y + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        z = z + dt / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise DivergenceError(f"Lorenz state became non-finite at step {j + 1}")
        state[..., j + 1, 0], state[..., j + 1, 1], state[..., j + 1, 2] = x, y, z
    return state if return_state else state[..., 0]


# ---------------------------------------------------------------------------
# datasets and the NOPD file format


@dataclass
class DatasetPair:
    """Input/output sample pairs shaped ``(n, spatial..., channels)``."""

    inputs: np.ndarray
    outputs: np.ndarray
    problem: str
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.outputs = np.asarray(self.outputs, dtype=np.float64)
        if len(self.inputs) != len(self.outputs):
            raise ValueError(f"{len(self.inputs)} inputs vs {len(self.outputs)} outputs")

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def resolution(self) -> tuple[int, ...]:
        return self.inputs.shape[1:-1]

    def subset(self, idx) -> DatasetPair:
        return DatasetPair(self.inputs[idx], self.outputs[idx], self.problem, dict(self.metadata))


class DatasetFormatError(ValueError):
    pass


def check_dataset(pair: DatasetPair) -> None:
    """Reject datasets with non-finite values or all-zero targets."""
    for name, arr in (("inputs", pair.inputs), ("outputs", pair.outputs)):
        bad = ~np.isfinite(arr.reshape(len(arr), -1)).all(axis=1)
        if bad.any():
            raise ValueError(f"{name} of samples {np.flatnonzero(bad).tolist()[:10]} are not finite")
    norms = np.linalg.norm(pair.outputs.reshape(len(pair), -1), axis=1)
    if np.any(norms == 0):
        raise ValueError(f"samples {np.flatnonzero(norms == 0).tolist()[:10]} have zero-norm targets")


DATASET_MAGIC = b"NOPD"
DATASET_VERSION = 1


def _put_str(buf, s: str):
    b = s.encode("utf-8")
    buf.write(struct.pack("<I", len(b)))
    buf.write(b)


def _put_array(buf, arr: np.ndarray):
    buf.write(struct.pack("<I", arr.ndim))
    buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def write_dataset(pair: DatasetPair, path) -> None:
    buf = io.BytesIO()
    buf.write(DATASET_MAGIC)
    buf.write(struct.pack("<I", DATASET_VERSION))
    _put_str(buf, pair.problem)
    buf.write(struct.pack("<I", len(pair.metadata)))
    for key, value in pair.metadata.items():
        _put_str(buf, str(key))
        _put_str(buf, str(value))
    _put_array(buf, pair.inputs)
    _put_array(buf, pair.outputs)
    Path(path).write_bytes(buf.getvalue())


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise DatasetFormatError(
                f"truncated file: {what} needs {n} bytes at offset {self.pos}, "
                f"only {len(self.data) - self.pos} left"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def string(self, what: str) -> str:
        n = self.u32(f"{what} length")
        start = self.pos
        try:
            return self.take(n, what).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DatasetFormatError(f"{what} at offset {start} is not valid UTF-8") from exc

    def array(self, what: str) -> np.ndarray:
        rank = self.u32(f"{what} rank")
        dims = struct.unpack(f"<{rank}I", self.take(4 * rank, f"{what} dims"))
        count = int(np.prod(dims)) if rank else 1
        raw = self.take(8 * count, f"{what} payload")
        return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(dims)


def read_dataset(path) -> DatasetPair:
    r = _Reader(Path(path).read_bytes())
    magic = r.take(4, "magic")
    if magic != DATASET_MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r} at offset 0, expected {DATASET_MAGIC!r}")
    version = r.u32("version")
    if version != DATASET_VERSION:
        raise DatasetFormatError(f"unsupported version {version} at offset 4")
    problem = r.string("problem tag")
    n_keys = r.u32("metadata key count")
    metadata = {}
    for _ in range(n_keys):
        key = r.string("metadata key")
        metadata[key] = r.string(f"metadata value for {key!r}")
    inputs = r.array("inputs")
    outputs = r.array("outputs")
    if r.pos != len(r.data):
        raise DatasetFormatError(f"{len(r.data) - r.pos} unexpected trailing bytes at offset {r.pos}")
    try:
        return DatasetPair(inputs, outputs, problem, metadata)
    except ValueError as exc:
        raise DatasetFormatError(str(exc)) from exc


# ---------------------------------------------------------------------------
# benchmark generators


def make_burgers_dataset(
    n_samples: int = 320,
    resolution: int = 256,
    nu: float = 0.1,
    t_final: float = 1.0,
    alpha: float = 2.5,
    tau: float = 7.0,
    scale: float = 1.0,
    zero_mean: bool = True,
    seed: int = 0,
) -> DatasetPair:
    """Pairs ``(u0, u(., t_final))`` with GRF initial conditions.

    Initial conditions have zero mean by default. A mean ``c`` only moves the
    solution along at speed ``c``, and a Hilbert spectral layer cannot see
    the mean of its input, so a random per-sample mean would put HNO networks
    at a structural disadvantage that has nothing to do with the dynamics.
    """
    spec = GrfSpec((resolution,), alpha=alpha, tau=tau, scale=scale, seed=seed, zero_mean=zero_mean)
    u0 = grf_sample(spec, n_samples)
    u1 = np.stack([burgers_solve(u, nu, t_final) for u in u0])
    meta = dict(
        resolution=str(resolution), nu=repr(nu), t_final=repr(t_final), alpha=repr(alpha),
        tau=repr(tau), scale=repr(scale), zero_mean=str(zero_mean), seed=str(seed),
        input="u0", output="u(t_final)",
    )
    pair = DatasetPair(u0[..., None], u1[..., None], "burgers1d", meta)
    check_dataset(pair)
    return pair


def make_darcy_dataset(
    n_samples: int = 320,
    resolution: int = 64,
    alpha: float = 2.0,
    tau: float = 3.0,
    a_high: float = 12.0,
    a_low: float = 3.0,
    threshold: float = 0.0,
    forcing: float = 1.0,
    seed: int = 0,
) -> DatasetPair:
    """Pairs ``(a, u)`` with two-valued coefficients thresholded from a GRF."""
    if a_high <= 0 or a_low <= 0:
        raise ValueError("coefficient values must be positive")
    spec = GrfSpec((resolution, resolution), alpha=alpha, tau=tau, seed=seed)
    psi = grf_sample(spec, n_samples)
    a = np.where(psi >= threshold, a_high, a_low)
    u = np.stack([darcy_solve(ai, forcing) for ai in a])
    meta = dict(
        resolution=str(resolution), alpha=repr(alpha), tau=repr(tau), a_high=repr(a_high),
        a_low=repr(a_low), threshold=repr(threshold), forcing=repr(forcing), seed=str(seed),
        input="a", output="u",
    )
    pair = DatasetPair(a[..., None], u[..., None], "darcy2d", meta)
    check_dataset(pair)
    return pair


def lorenz_fixed_point(rho: float, beta: float) -> tuple[float, float, float]:
    """The unforced equilibrium with positive ``x`` (requires ``rho > 1``)."""
    if rho <= 1:
        return (0.0, 0.0, 0.0)
    r = math.sqrt(beta * (rho - 1.0))
    return (r, r, rho - 1.0)


def make_lorenz_dataset(
    n_samples: int = 320,
    n_points: int = 2048,
    dt: float = 0.01,
    sigma: float = 10.0,
    rho: float = 5.0,
    beta: float = 8.0 / 3.0,
    alpha: float = 2.0,
    tau: float = 5.0,
    scale: float = 10.0,
    seed: int = 0,
) -> DatasetPair:
    """Pairs ``(f(t), x(t))`` for GRF forcings on ``t in [0, n_points * dt)``.

    Trajectories start at the unforced equilibrium with ``x > 0``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    spec = GrfSpec((n_points,), alpha=alpha, tau=tau, scale=scale, seed=seed)
    f = grf_sample(spec, n_samples)
    x0, y0, z0 = lorenz_fixed_point(rho, beta)
    x = lorenz63_solve(f, sigma, rho, beta, x0, y0, z0, dt)
    meta = dict(
        n_points=str(n_points), dt=repr(dt), sigma=repr(sigma), rho=repr(rho), beta=repr(beta),
        alpha=repr(alpha), tau=repr(tau), scale=repr(scale), seed=str(seed),
        input="f(t)", output="x(t)",
    )
    pair = DatasetPair(f[..., None], x[..., None], "lorenz63", meta)
    check_dataset(pair)
    return pair
