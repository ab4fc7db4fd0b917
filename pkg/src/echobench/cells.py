"""Trainable memory cells, the MLP decoder, and parameter budgeting.

Cells are single-step column-vector maps, fully differentiable through
the tape so credit can flow over a whole (meta-)episode. Weight matrices
are initialized from a normal with std 1/sqrt(fan_in); biases start at
zero (no forget-gate offset).

The budgeting half sizes decoder widths (and cell hidden sizes) so that
every model variant lands on roughly the same trainable-parameter total,
which keeps architecture comparisons fair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigurationError
from .rng import Xoshiro256pp

TRAINABLE_KINDS = ("linear", "rnn", "gru", "lstm")
ESN_KINDS = ("esn_dense", "esn_local")
ALL_KINDS = TRAINABLE_KINDS + ESN_KINDS


@dataclass(frozen=True)
class CellConfig:
    kind: str
    input_dim: int
    hidden_dim: int

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ConfigurationError(f"unknown cell kind {self.kind!r}")
        if self.hidden_dim < 1 or self.input_dim < 1:
            raise ConfigurationError("cell dims must be >= 1")


@dataclass(frozen=True)
class MlpConfig:
    n_hidden_units: int = 48
    n_layers: int = 2

    def __post_init__(self):
        if self.n_layers < 1 or self.n_hidden_units < 1:
            raise ConfigurationError("MLP needs n_layers >= 1 and width >= 1")


def weight_param(rng: Xoshiro256pp, rows: int, cols: int) -> Tensor:
    return ad.parameter(rng.normal_matrix(rows, cols, 1.0 / np.sqrt(cols)))


def bias_param(rows: int) -> Tensor:
    return ad.parameter(np.zeros((rows, 1)))


_GRU_GATES = ("z", "r", "n")
_LSTM_GATES = ("f", "i", "o", "g")


def init_cell_params(config: CellConfig, rng: Xoshiro256pp) -> dict[str, Tensor]:
    """Parameters in a fixed draw order (part of the determinism contract)."""
    n, h = config.input_dim, config.hidden_dim
    if config.kind == "linear":
        return {"W": weight_param(rng, h, n), "b": bias_param(h)}
    if config.kind == "rnn":
        return {"W_x": weight_param(rng, h, n), "W_h": weight_param(rng, h, h), "b": bias_param(h)}
    if config.kind == "gru":
        params: dict[str, Tensor] = {}
        for gate in _GRU_GATES:
            params[f"W_{gate}"] = weight_param(rng, h, n)
            params[f"U_{gate}"] = weight_param(rng, h, h)
            params[f"b_{gate}"] = bias_param(h)
        return params
    if config.kind == "lstm":
        params = {}
        for gate in _LSTM_GATES:
            params[f"W_{gate}"] = weight_param(rng, h, n)
            params[f"U_{gate}"] = weight_param(rng, h, h)
            params[f"b_{gate}"] = bias_param(h)
        return params
    raise ConfigurationError(f"init_cell_params does not handle {config.kind!r}")


def initial_cell_state(config: CellConfig) -> tuple[Tensor, ...]:
    h = config.hidden_dim
    zeros = np.zeros((h, 1))
    if config.kind == "linear":
        return ()
    if config.kind == "lstm":
        return (ad.constant(zeros), ad.constant(zeros.copy()))
    return (ad.constant(zeros),)


def cell_step(config: CellConfig, params: dict[str, Tensor],
              state: tuple[Tensor, ...], x: Tensor) -> tuple[tuple[Tensor, ...], Tensor]:
    """Advance one step; returns (new state, output fed to the decoder)."""
    kind = config.kind
    if kind == "linear":
        out = ad.linear(params["W"], x, params["b"])
        return (), out
    if kind == "rnn":
        (h,) = state
        h_new = ad.tanh(ad.add(ad.linear(params["W_x"], x, params["b"]),
                               ad.matmul(params["W_h"], h)))
        return (h_new,), h_new
    if kind == "gru":
        (h,) = state
        z = ad.sigmoid(ad.add(ad.linear(params["W_z"], x, params["b_z"]),
                              ad.matmul(params["U_z"], h)))
        r = ad.sigmoid(ad.add(ad.linear(params["W_r"], x, params["b_r"]),
                              ad.matmul(params["U_r"], h)))
        n = ad.tanh(ad.add(ad.linear(params["W_n"], x, params["b_n"]),
                           ad.mul(r, ad.matmul(params["U_n"], h))))
        h_new = ad.add(ad.mul(ad.affine_const(z, -1.0, 1.0), n), ad.mul(z, h))
        return (h_new,), h_new
    if kind == "lstm":
        h, c = state
        f = ad.sigmoid(ad.add(ad.linear(params["W_f"], x, params["b_f"]),
                              ad.matmul(params["U_f"], h)))
        i = ad.sigmoid(ad.add(ad.linear(params["W_i"], x, params["b_i"]),
                              ad.matmul(params["U_i"], h)))
        o = ad.sigmoid(ad.add(ad.linear(params["W_o"], x, params["b_o"]),
                              ad.matmul(params["U_o"], h)))
        g = ad.tanh(ad.add(ad.linear(params["W_g"], x, params["b_g"]),
                           ad.matmul(params["U_g"], h)))
        c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
        h_new = ad.mul(o, ad.tanh(c_new))
        return (h_new, c_new), h_new
    raise ConfigurationError(f"cell_step does not handle {kind!r}")


# ---------------------------------------------------------------------------
# decoder MLP

def init_mlp_params(config: MlpConfig, in_dim: int, out_dim: int | None,
                    rng: Xoshiro256pp) -> dict:
    """Hidden tanh layers plus an optional affine output head."""
    layers = []
    width = config.n_hidden_units
    prev = in_dim
    for _ in range(config.n_layers):
        layers.append((weight_param(rng, width, prev), bias_param(width)))
        prev = width
    params = {"layers": layers}
    if out_dim is not None:
        params["head"] = (weight_param(rng, out_dim, prev), bias_param(out_dim))
    return params


def mlp_forward(config: MlpConfig, params: dict, x: Tensor) -> Tensor:
    del config  # layer count is carried by the parameter list
    for w, b in params["layers"]:
        x = ad.tanh(ad.linear(w, x, b))
    if "head" in params:
        w, b = params["head"]
        x = ad.linear(w, x, b)
    return x


def mlp_param_list(params: dict) -> list[Tensor]:
    out = []
    for w, b in params["layers"]:
        out.extend((w, b))
    if "head" in params:
        out.extend(params["head"])
    return out


# ---------------------------------------------------------------------------
# parameter accounting

def parameter_count(kind: str, input_dim: int, hidden_dim: int) -> int:
    """Exact trainable count of the memory module alone."""
    n, h = input_dim, hidden_dim
    if kind == "linear":
        return h * (n + 1)
    if kind == "rnn":
        return h * (n + h + 1)
    if kind == "gru":
        return 3 * h * (n + h + 1)
    if kind == "lstm":
        return 4 * h * (n + h + 1)
    if kind in ESN_KINDS:
        return 0
    raise ConfigurationError(f"unknown cell kind {kind!r}")


def decoder_parameter_count(state_dim: int, width: int, n_layers: int,
                            n_actions: int) -> int:
    """Trunk layers plus actor and critic heads."""
    total = width * state_dim + width
    total += (n_layers - 1) * (width * width + width)
    total += n_actions * width + n_actions   # actor head
    total += width + 1                       # critic head
    return total


def model_total_count(kind: str, enc_width: int, memory_hidden: int,
                      state_dim: int, decoder_width: int, n_layers: int,
                      n_actions: int) -> int:
    return (parameter_count(kind, enc_width, memory_hidden)
            + decoder_parameter_count(state_dim, decoder_width, n_layers, n_actions))


@dataclass
class ModelSizing:
    kind: str
    memory_hidden: int        # 0 for ESN variants
    state_dim: int            # width of the vector the decoder reads
    decoder_width: int
    memory_params: int
    decoder_params: int
    total_params: int


WIDTH_RANGE = (32, 62)
PARITY_TOLERANCE = 0.05
_MAX_HIDDEN = 4096


def _esn_total(state_dim: int, width: int, n_layers: int, n_actions: int) -> int:
    return decoder_parameter_count(state_dim, width, n_layers, n_actions)


def dense_size_for_parity(local_state_dim: int, n_actions: int,
                          n_layers: int = 2, floor: int = 64) -> int:
    """Smallest dense-reservoir size whose widest decoder can match the
    narrowest decoder of the local variant."""
    lo, hi = WIDTH_RANGE
    need = _esn_total(local_state_dim, lo, n_layers, n_actions)
    # solve decoder(n, hi) >= need for the dense state size n
    heads = n_actions * hi + n_actions + hi + 1
    trunk_rest = (n_layers - 1) * (hi * hi + hi) + hi
    n = int(np.ceil((need - heads - trunk_rest) / hi))
    return max(floor, n)


def _best_trainable_sizing(kind: str, enc_width: int, n_actions: int,
                           n_layers: int, target: int) -> tuple[int, int, int]:
    """(hidden, width, total) closest to target for a trainable cell."""
    lo, hi = WIDTH_RANGE
    best = None
    for w in range(lo, hi + 1):
        # total is monotone in h at fixed w: bisect for the crossing point
        a, b = 1, _MAX_HIDDEN
        while a < b:
            mid = (a + b) // 2
            if model_total_count(kind, enc_width, mid, mid, w, n_layers, n_actions) < target:
                a = mid + 1
            else:
                b = mid
        for h in (a - 1, a):
            if h < 1:
                continue
            total = model_total_count(kind, enc_width, h, h, w, n_layers, n_actions)
            err = abs(total - target)
            if best is None or err < best[0]:
                best = (err, h, w, total)
    assert best is not None
    return best[1], best[2], best[3]


def equalize_models(models: list[str], enc_width: int, n_actions: int,
                    esn_state_dims: dict[str, int],
                    n_layers: int = 2) -> dict[str, ModelSizing]:
    """Choose per-model sizes so total trainable counts cluster tightly.

    ESN variants have a fixed state width, so their decoder width is the
    only knob; the target budget is taken from the overlap of their
    achievable ranges (trainable cells can hit any budget via their
    hidden size). Raises if the requested set admits no common budget.
    """
    lo, hi = WIDTH_RANGE
    ranges = []
    for kind in models:
        if kind in ESN_KINDS:
            dim = esn_state_dims[kind]
            ranges.append((_esn_total(dim, lo, n_layers, n_actions),
                           _esn_total(dim, hi, n_layers, n_actions)))
    if ranges:
        band_lo = max(r[0] for r in ranges)
        band_hi = min(r[1] for r in ranges)
        if band_lo > band_hi:
            raise ConfigurationError(
                "no common parameter budget: ESN decoder ranges "
                f"{ranges} do not overlap for widths in {WIDTH_RANGE}"
            )
        target = (band_lo + band_hi) // 2
    else:
        # unconstrained set: center of a mid-size linear model's range
        target = model_total_count("linear", enc_width, 64, 64,
                                   (lo + hi) // 2, n_layers, n_actions)

    out: dict[str, ModelSizing] = {}
    for kind in models:
        if kind in ESN_KINDS:
            dim = esn_state_dims[kind]
            w = min(range(lo, hi + 1),
                    key=lambda ww: abs(_esn_total(dim, ww, n_layers, n_actions) - target))
            dec = _esn_total(dim, w, n_layers, n_actions)
            out[kind] = ModelSizing(kind, 0, dim, w, 0, dec, dec)
        else:
            h, w, total = _best_trainable_sizing(kind, enc_width, n_actions,
                                                 n_layers, target)
            mem = parameter_count(kind, enc_width, h)
            out[kind] = ModelSizing(kind, h, h, w, mem, total - mem, total)
    return out


def parity_deviations(sizings: dict[str, ModelSizing]) -> dict[str, float]:
    """Relative deviation of each model's total from the median total."""
    totals = sorted(s.total_params for s in sizings.values())
    n = len(totals)
    median = (totals[n // 2] if n % 2 else
              0.5 * (totals[n // 2 - 1] + totals[n // 2]))
    return {kind: abs(s.total_params - median) / median
            for kind, s in sizings.items()}
