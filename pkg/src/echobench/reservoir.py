"""Fixed-weight echo state reservoirs: dense and locally connected.

Construction is deterministic given (config, seed): raw weights are drawn
uniformly on [-1, 1] in row-major order, masks follow in a pinned draw
order, and the recurrent matrix is rescaled so its spectral radius hits
the configured target. Weight matrices are frozen (non-writeable) after
construction; stepping the reservoir never records gradients.

Local variant layout: hidden nodes are grouped as
[U_0, S_01, U_1, S_12, ..., U_{n-1}] where U_i holds the nodes unique to
input i and S_{i,i+1} the nodes shared by inputs i and i+1. Input i may
connect only to U_i and its shared block (the last input reuses the
final shared block), so every input targets exactly
n_unique + n_shared candidate rows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ConstructionError
from .rng import Xoshiro256pp
from .autodiff import assert_all_finite

DENSE = "dense"
LOCAL = "local"


@dataclass(frozen=True)
class EsnConfig:
    """Reservoir hyperparameters; defaults follow the two stock variants.

    input_scale sets the half-width of the uniform input-weight draw:
    strong input drive pushes the tanh units into their nonlinear regime,
    which is what makes reservoir features usable by a shallow decoder.
    """

    variant: str = DENSE
    n_hidden: int = 64          # dense variant only; local size is derived
    phi: float = 1.0            # target spectral radius
    p_global: float = 0.4       # global connection probability
    p_input: float = 0.4        # input connection probability
    p_local: float = 0.5        # within-band connection probability (local)
    n_unique: int = 20          # nodes exclusive to one input (local)
    n_shared: int = 10          # nodes shared per neighboring input pair (local)
    radius: int = 10            # max local connection radius (local)
    input_scale: float = 6.0    # input weights drawn uniform on [-s, s]

    def __post_init__(self):
        for name in ("p_global", "p_input", "p_local"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError(f"{name}={p} outside [0, 1]")
        if self.phi <= 0.0:
            raise ConfigurationError("phi must be positive")
        if self.input_scale <= 0.0:
            raise ConfigurationError("input_scale must be positive")
        if self.variant not in (DENSE, LOCAL):
            raise ConfigurationError(f"unknown variant {self.variant!r}")
        if self.variant == LOCAL:
            if self.radius < 1:
                raise ConfigurationError("local variant needs radius >= 1")
            if self.n_unique < 0 or self.n_shared < 0 or self.n_unique + self.n_shared < 1:
                raise ConfigurationError("need n_unique + n_shared >= 1, both nonnegative")
        elif self.n_hidden < 1:
            raise ConfigurationError("dense variant needs n_hidden >= 1")

    @classmethod
    def dense_default(cls, n_hidden: int = 64) -> "EsnConfig":
        return cls(variant=DENSE, n_hidden=n_hidden, phi=1.0, p_global=0.4, p_input=0.4)

    @classmethod
    def local_default(cls) -> "EsnConfig":
        return cls(variant=LOCAL, phi=1.0, p_global=0.01, p_input=0.5,
                   p_local=0.5, n_unique=20, n_shared=10, radius=10)


@dataclass
class ReservoirWeights:
    """Frozen recurrent and input matrices plus construction metadata."""

    recurrent: np.ndarray
    input: np.ndarray
    achieved_radius: float
    n_hidden: int


def local_reservoir_size(config: EsnConfig, n_inputs: int) -> int:
    if n_inputs < 1:
        raise ConfigurationError("need at least one input")
    return n_inputs * config.n_unique + (n_inputs - 1) * config.n_shared


def band_mask(n: int, radius: int) -> np.ndarray:
    """Binary matrix with ones where |i - j| <= radius."""
    if n < 1 or radius < 0:
        raise ConfigurationError("band_mask needs n >= 1 and radius >= 0")
    idx = np.arange(n)
    return (np.abs(idx[:, None] - idx[None, :]) <= radius).astype(np.float64)


# ---------------------------------------------------------------------------
# spectral radius by blocked power (subspace) iteration (production path)

_POWER_MAX_ITER = 10000
_POWER_TOL = 1e-12
_STABLE_STEPS = 3
_BLOCK_SIZE = 8


def spectral_radius(w: np.ndarray, max_iter: int = _POWER_MAX_ITER,
                    tol: float = _POWER_TOL, seed: int = 0x5EED,
                    block: int = _BLOCK_SIZE) -> float:
    """Spectral radius via blocked power iteration.

    A single power vector (or a 2-D Krylov block) cannot separate the
    near-equal complex-conjugate pairs these random reservoirs routinely
    produce, so iterate a whole orthonormal block: once the dominant
    cluster (any shape up to `block` eigenvalues) lies inside the span,
    the largest Ritz-value magnitude of the projected block is the
    radius. Verified independently against full dense eigensolves.
    """
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ConfigurationError("spectral_radius needs a square matrix")
    n = w.shape[0]
    m = min(block, n)
    rng = Xoshiro256pp(seed)
    q = rng.normal_matrix(n, m, 1.0)
    q, _ = np.linalg.qr(q)
    prev = np.inf
    stable = 0
    est = 0.0
    for _ in range(max_iter):
        z = w @ q
        if not np.any(z):
            return 0.0  # block fell into the nullspace: w is (near) nilpotent
        q, r = np.linalg.qr(z)
        # guard against rank collapse of the iterated block
        dead = np.abs(np.diag(r)) < 1e-300
        if dead.any():
            fresh = rng.normal_matrix(n, int(dead.sum()), 1.0)
            q[:, dead] = fresh
            q, _ = np.linalg.qr(q)
        t = q.T @ (w @ q)
        est = float(np.abs(np.linalg.eigvals(t)).max())
        if abs(est - prev) <= tol * max(1.0, est):
            stable += 1
            if stable >= _STABLE_STEPS:
                return est
        else:
            stable = 0
        prev = est
    return est


def scale_spectral_radius(w: np.ndarray, phi: float) -> np.ndarray:
    """Rescale w so its spectral radius equals phi."""
    rho = spectral_radius(w)
    if rho < 1e-12:
        raise ConstructionError("matrix has (numerically) zero spectral radius")
    return w * (phi / rho)


# ---------------------------------------------------------------------------
# construction

def build_dense_recurrent(config: EsnConfig, rng: Xoshiro256pp) -> np.ndarray:
    n = config.n_hidden
    raw = rng.uniform_matrix(n, n)
    keep = rng.bernoulli_matrix(n, n, config.p_global)
    w = raw * keep
    if not np.any(w):
        raise ConstructionError("dense recurrent matrix is all zero after masking")
    return scale_spectral_radius(w, config.phi)


def build_local_recurrent(config: EsnConfig, n: int, rng: Xoshiro256pp) -> np.ndarray:
    """Banded local weights, thinned, with sparse global links filled in.

    Steps, in fixed draw order: raw uniform matrix; band mask of the given
    radius; within-band Bernoulli(p_local) thinning; an independent raw
    matrix Bernoulli(p_global)-masked whose surviving entries fill
    positions that are currently (structurally) zero; spectral rescale.
    """
    raw = rng.uniform_matrix(n, n)
    band = band_mask(n, config.radius)
    local_keep = rng.bernoulli_matrix(n, n, config.p_local)
    w = raw * band * local_keep
    zeroed = (band * local_keep) == 0.0
    global_raw = rng.uniform_matrix(n, n)
    global_keep = rng.bernoulli_matrix(n, n, config.p_global)
    fill = zeroed & (global_keep == 1.0)
    w[fill] = global_raw[fill]
    if not np.any(w):
        raise ConstructionError("local recurrent matrix is all zero after masking")
    return scale_spectral_radius(w, config.phi)


def input_candidate_mask(config: EsnConfig, n_inputs: int) -> np.ndarray:
    """Rows each input may reach (local variant block wiring)."""
    n = local_reservoir_size(config, n_inputs)
    nu, ns = config.n_unique, config.n_shared
    mask = np.zeros((n, n_inputs), dtype=np.float64)
    stride = nu + ns
    for i in range(n_inputs):
        u0 = i * stride
        mask[u0:u0 + nu, i] = 1.0
        if n_inputs > 1:
            j = i if i < n_inputs - 1 else n_inputs - 2
            s0 = j * stride + nu
            mask[s0:s0 + ns, i] = 1.0
    return mask


def build_input_matrix(config: EsnConfig, n_inputs: int, rng: Xoshiro256pp) -> np.ndarray:
    if n_inputs < 1:
        raise ConfigurationError("build_input_matrix needs n_inputs >= 1")
    s = config.input_scale
    if config.variant == DENSE:
        raw = rng.uniform_matrix(config.n_hidden, n_inputs, -s, s)
        keep = rng.bernoulli_matrix(config.n_hidden, n_inputs, config.p_input)
        return raw * keep
    n = local_reservoir_size(config, n_inputs)
    raw = rng.uniform_matrix(n, n_inputs, -s, s)
    keep = rng.bernoulli_matrix(n, n_inputs, config.p_input)
    return raw * keep * input_candidate_mask(config, n_inputs)


def build_reservoir(config: EsnConfig, n_inputs: int, seed: int) -> ReservoirWeights:
    """Construct frozen reservoir weights from a 64-bit seed."""
    rng = Xoshiro256pp(seed)
    if config.variant == DENSE:
        n = config.n_hidden
        recurrent = build_dense_recurrent(config, rng)
    else:
        n = local_reservoir_size(config, n_inputs)
        recurrent = build_local_recurrent(config, n, rng)
    inp = build_input_matrix(config, n_inputs, rng)
    achieved = spectral_radius(recurrent)
    recurrent.setflags(write=False)
    inp.setflags(write=False)
    return ReservoirWeights(recurrent=recurrent, input=inp,
                            achieved_radius=achieved, n_hidden=n)


# ---------------------------------------------------------------------------
# stepping

def initial_state(n_hidden: int) -> np.ndarray:
    return np.zeros((n_hidden, 1), dtype=np.float64)


def esn_step(weights: ReservoirWeights, state: np.ndarray, x: np.ndarray) -> np.ndarray:
    """One reservoir update: tanh(W h + W_in x). Never differentiated."""
    assert_all_finite(x, "reservoir input")
    if state.shape != (weights.n_hidden, 1):
        raise ConfigurationError(
            f"state shape {state.shape} does not match reservoir size {weights.n_hidden}"
        )
    if x.shape != (weights.input.shape[1], 1):
        raise ConfigurationError(
            f"input shape {x.shape} does not match input width {weights.input.shape[1]}"
        )
    return np.tanh(weights.recurrent @ state + weights.input @ x)


def impulse_response(weights: ReservoirWeights, steps: int, seed: int) -> np.ndarray:
    """Activations after one random input then zero input; column per step."""
    rng = Xoshiro256pp(seed)
    x = np.array([[rng.uniform(-1.0, 1.0)] for _ in range(weights.input.shape[1])])
    zero = np.zeros_like(x)
    h = initial_state(weights.n_hidden)
    cols = []
    h = esn_step(weights, h, x)
    cols.append(h.copy())
    for _ in range(steps):
        h = esn_step(weights, h, zero)
        cols.append(h.copy())
    return np.hstack(cols)


def export_weights_csv(weights: ReservoirWeights, recurrent_path, input_path) -> None:
    """Debug dump of both weight matrices as plain CSV."""
    for path, mat in ((recurrent_path, weights.recurrent), (input_path, weights.input)):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in mat:
                writer.writerow([f"{v:.17g}" for v in row])
