"""Multi-headed self-attention network that predicts deleted modulations.

Pre-norm transformer over spectrogram frames: a 20-dim frame projection plus
sinusoidal positions, a stack of self-attention + feed-forward blocks with
layer norms on either side of each sublayer (and a final norm), and a
projection back to 20 dims. Forward, masked L1 loss, and the full analytic
backward pass are implemented directly on numpy arrays so gradients can be
validated against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .dsp import FdlpSpectrogram
from .errors import ConfigurationError, LengthError, NumericalError

LN_EPS = 1e-5


@dataclass(frozen=True)
class PredictorConfig:
    input_dim: int = 20
    model_dim: int = 256
    layer_count: int = 12
    head_count: int = 8
    ffn_dim: int = 2048
    max_frames: int = 3000
    seed: int = 0

    def validate(self) -> None:
        for name in ("input_dim", "model_dim", "layer_count", "head_count",
                     "ffn_dim", "max_frames"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.model_dim % self.head_count != 0:
            raise ConfigurationError(
                f"model_dim {self.model_dim} not divisible by head_count {self.head_count}"
            )

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.head_count


def param_shapes(config: PredictorConfig) -> dict[str, tuple[int, ...]]:
    """Name -> shape for every trainable tensor, in a stable order."""
    d, f, i = config.model_dim, config.ffn_dim, config.input_dim
    shapes: dict[str, tuple[int, ...]] = {
        "input_proj.weight": (i, d),
        "input_proj.bias": (d,),
    }
    for l in range(config.layer_count):
        p = f"layers.{l:02d}"
        shapes[f"{p}.ln1.scale"] = (d,)
        shapes[f"{p}.ln1.shift"] = (d,)
        for proj in ("wq", "wk", "wv", "wo"):
            shapes[f"{p}.attn.{proj}"] = (d, d)
        for b in ("bq", "bk", "bv", "bo"):
            shapes[f"{p}.attn.{b}"] = (d,)
        shapes[f"{p}.ln2.scale"] = (d,)
        shapes[f"{p}.ln2.shift"] = (d,)
        shapes[f"{p}.ffn.w1"] = (d, f)
        shapes[f"{p}.ffn.b1"] = (f,)
        shapes[f"{p}.ffn.w2"] = (f, d)
        shapes[f"{p}.ffn.b2"] = (d,)
    shapes["final_ln.scale"] = (d,)
    shapes["final_ln.shift"] = (d,)
    shapes["output_proj.weight"] = (d, i)
    shapes["output_proj.bias"] = (i,)
    return shapes


@dataclass
class PredictorParams:
    config: PredictorConfig
    tensors: dict[str, np.ndarray]
    positions: np.ndarray = field(repr=False, default=None)  # (max_frames, model_dim)

    @property
    def dtype(self) -> np.dtype:
        return self.tensors["input_proj.weight"].dtype

    def copy(self) -> "PredictorParams":
        return PredictorParams(config=self.config,
                               tensors={k: v.copy() for k, v in self.tensors.items()},
                               positions=self.positions)


@dataclass
class ActivationTrace:
    """Per-layer post-residual outputs, each (frames, model_dim)."""

    layers: list[np.ndarray]


def sinusoidal_positions(max_frames: int, dim: int, dtype=np.float64) -> np.ndarray:
    """Classic interleaved sine/cosine position table."""
    pos = np.arange(max_frames, dtype=np.float64)[:, None]
    div = np.exp(np.arange(0, dim, 2, dtype=np.float64) * -(np.log(10000.0) / dim))
    table = np.zeros((max_frames, dim))
    table[:, 0::2] = np.sin(pos * div)
    table[:, 1::2] = np.cos(pos * div[: dim // 2])
    return table.astype(dtype)


def init_params(config: PredictorConfig, dtype=np.float32) -> PredictorParams:
    """Seeded init: uniform(+-1/sqrt(fan_in)) weights, zero biases, unit norms."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(config).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "scale":
            arr = np.ones(shape)
        elif leaf in ("shift", "bias") or leaf.startswith("b"):
            arr = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(shape[0])
            arr = rng.uniform(-bound, bound, size=shape)
        tensors[name] = arr.astype(dtype)
    positions = sinusoidal_positions(config.max_frames, config.model_dim, dtype)
    return PredictorParams(config=config, tensors=tensors, positions=positions)


# --------------------------------------------------------------------------- forward

def _layer_norm(x: np.ndarray, scale: np.ndarray, shift: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return xhat * scale + shift, (xhat, inv)


def _layer_norm_backward(dy: np.ndarray, scale: np.ndarray, cache):
    xhat, inv = cache
    dscale = np.sum(dy * xhat, axis=0)
    dshift = np.sum(dy, axis=0)
    dxhat = dy * scale
    dx = inv * (dxhat
                - dxhat.mean(axis=-1, keepdims=True)
                - xhat * np.mean(dxhat * xhat, axis=-1, keepdims=True))
    return dx, dscale, dshift


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    t, d = x.shape
    return x.reshape(t, heads, d // heads).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    h, t, dh = x.shape
    return x.transpose(1, 0, 2).reshape(t, h * dh)


def _coerce_frames(spectrogram) -> np.ndarray:
    frames = spectrogram.frames if isinstance(spectrogram, FdlpSpectrogram) else spectrogram
    return np.asarray(frames)


def _forward_cache(params: PredictorParams, x: np.ndarray) -> tuple[np.ndarray, dict]:
    cfg = params.config
    p = params.tensors
    h = x @ p["input_proj.weight"] + p["input_proj.bias"] + params.positions[: x.shape[0]]
    cache: dict[str, Any] = {"x": x, "layers": [], "layer_out": []}
    scale = 1.0 / np.sqrt(cfg.head_dim)
    for l in range(cfg.layer_count):
        pre = f"layers.{l:02d}"
        lc: dict[str, Any] = {"h_in": h}
        n1, lc["ln1"] = _layer_norm(h, p[f"{pre}.ln1.scale"], p[f"{pre}.ln1.shift"])
        lc["n1"] = n1
        q = _split_heads(n1 @ p[f"{pre}.attn.wq"] + p[f"{pre}.attn.bq"], cfg.head_count)
        k = _split_heads(n1 @ p[f"{pre}.attn.wk"] + p[f"{pre}.attn.bk"], cfg.head_count)
        v = _split_heads(n1 @ p[f"{pre}.attn.wv"] + p[f"{pre}.attn.bv"], cfg.head_count)
        probs = _softmax(scale * (q @ k.transpose(0, 2, 1)))
        o = _merge_heads(probs @ v)
        lc.update(q=q, k=k, v=v, probs=probs, o=o)
        h = h + o @ p[f"{pre}.attn.wo"] + p[f"{pre}.attn.bo"]
        lc["h_mid"] = h
        n2, lc["ln2"] = _layer_norm(h, p[f"{pre}.ln2.scale"], p[f"{pre}.ln2.shift"])
        lc["n2"] = n2
        z1 = n2 @ p[f"{pre}.ffn.w1"] + p[f"{pre}.ffn.b1"]
        r = np.maximum(z1, 0.0)
        lc["z1"], lc["r"] = z1, r
        h = h + r @ p[f"{pre}.ffn.w2"] + p[f"{pre}.ffn.b2"]
        cache["layers"].append(lc)
        cache["layer_out"].append(h)
    hn, cache["final_ln"] = _layer_norm(h, p["final_ln.scale"], p["final_ln.shift"])
    cache["hn"] = hn
    y = hn @ p["output_proj.weight"] + p["output_proj.bias"]
    return y, cache


def forward(params: PredictorParams, spectrogram,
            capture: bool = False) -> tuple[np.ndarray, ActivationTrace | None]:
    """Predict a (frames, 20) spectrogram; optionally capture per-layer outputs."""
    x = _coerce_frames(spectrogram).astype(params.dtype)
    if x.ndim != 2 or x.shape[1] != params.config.input_dim:
        raise ConfigurationError(
            f"input shape {x.shape} incompatible with input_dim {params.config.input_dim}"
        )
    if x.shape[0] > params.config.max_frames:
        raise LengthError(
            f"{x.shape[0]} frames exceeds max_frames {params.config.max_frames}"
        )
    if not np.all(np.isfinite(x)):
        raise NumericalError("non-finite values in predictor input")
    y, cache = _forward_cache(params, x)
    trace = ActivationTrace(layers=[out.copy() for out in cache["layer_out"]]) \
        if capture else None
    return y, trace


# --------------------------------------------------------------------------- loss

def _mask_rows(target: FdlpSpectrogram) -> slice:
    if target.masked_frame_range is None:
        raise ConfigurationError("target has no masked_frame_range; cannot localize loss")
    lo, hi = target.masked_frame_range
    if not (0 <= lo < hi <= target.frame_count):
        raise ConfigurationError(f"masked_frame_range {target.masked_frame_range} "
                                 f"invalid for {target.frame_count} frames")
    return slice(lo, hi)


def masked_l1_loss(prediction: np.ndarray, target: FdlpSpectrogram) -> float:
    """Mean absolute error over the masked frame range only, all bands."""
    if prediction.shape != target.frames.shape:
        raise ConfigurationError(
            f"prediction shape {prediction.shape} != target shape {target.frames.shape}"
        )
    rows = _mask_rows(target)
    diff = prediction[rows] - target.frames[rows]
    return float(np.mean(np.abs(diff)))


def full_l1_loss(prediction: np.ndarray, target: FdlpSpectrogram) -> float:
    """Mean absolute error over the whole utterance (ablation variant)."""
    if prediction.shape != target.frames.shape:
        raise ConfigurationError(
            f"prediction shape {prediction.shape} != target shape {target.frames.shape}"
        )
    return float(np.mean(np.abs(prediction - target.frames)))


def _l1_grad(prediction: np.ndarray, target: FdlpSpectrogram,
             loss_scope: str) -> tuple[float, np.ndarray]:
    dpred = np.zeros_like(prediction)
    if loss_scope == "masked":
        rows = _mask_rows(target)
        diff = prediction[rows] - target.frames[rows].astype(prediction.dtype)
        loss = float(np.mean(np.abs(diff)))
        dpred[rows] = np.sign(diff) / diff.size     # subgradient 0 at exact ties
    elif loss_scope == "full":
        diff = prediction - target.frames.astype(prediction.dtype)
        loss = float(np.mean(np.abs(diff)))
        dpred = np.sign(diff) / diff.size
    else:
        raise ConfigurationError(f"unknown loss scope {loss_scope!r}")
    return loss, dpred


# --------------------------------------------------------------------------- backward

def backward(params: PredictorParams, spectrogram, target: FdlpSpectrogram,
             loss_scope: str = "masked") -> tuple[float, dict[str, np.ndarray]]:
    """Loss and analytic gradients for every tensor in ``params``."""
    cfg = params.config
    p = params.tensors
    x = _coerce_frames(spectrogram).astype(params.dtype)
    y, cache = _forward_cache(params, x)
    loss, dy = _l1_grad(y, target, loss_scope)

    grads = {name: np.zeros_like(arr) for name, arr in p.items()}
    grads["output_proj.weight"] = cache["hn"].T @ dy
    grads["output_proj.bias"] = dy.sum(axis=0)
    dhn = dy @ p["output_proj.weight"].T
    dh, grads["final_ln.scale"], grads["final_ln.shift"] = \
        _layer_norm_backward(dhn, p["final_ln.scale"], cache["final_ln"])

    scale = 1.0 / np.sqrt(cfg.head_dim)
    for l in reversed(range(cfg.layer_count)):
        pre = f"layers.{l:02d}"
        lc = cache["layers"][l]
        # feed-forward sublayer
        df = dh
        grads[f"{pre}.ffn.w2"] = lc["r"].T @ df
        grads[f"{pre}.ffn.b2"] = df.sum(axis=0)
        dr = df @ p[f"{pre}.ffn.w2"].T
        dz1 = dr * (lc["z1"] > 0)
        grads[f"{pre}.ffn.w1"] = lc["n2"].T @ dz1
        grads[f"{pre}.ffn.b1"] = dz1.sum(axis=0)
        dn2 = dz1 @ p[f"{pre}.ffn.w1"].T
        dmid, grads[f"{pre}.ln2.scale"], grads[f"{pre}.ln2.shift"] = \
            _layer_norm_backward(dn2, p[f"{pre}.ln2.scale"], lc["ln2"])
        dh = dh + dmid
        # attention sublayer
        datt = dh
        grads[f"{pre}.attn.wo"] = lc["o"].T @ datt
        grads[f"{pre}.attn.bo"] = datt.sum(axis=0)
        do = _split_heads(datt @ p[f"{pre}.attn.wo"].T, cfg.head_count)
        probs, q, k, v = lc["probs"], lc["q"], lc["k"], lc["v"]
        dprobs = do @ v.transpose(0, 2, 1)
        dv = probs.transpose(0, 2, 1) @ do
        ds = probs * (dprobs - np.sum(dprobs * probs, axis=-1, keepdims=True))
        dq = scale * (ds @ k)
        dk = scale * (ds.transpose(0, 2, 1) @ q)
        dq, dk, dv = (_merge_heads(a) for a in (dq, dk, dv))
        n1 = lc["n1"]
        dn1 = np.zeros_like(n1)
        for name, dproj in (("wq", dq), ("wk", dk), ("wv", dv)):
            grads[f"{pre}.attn.{name}"] = n1.T @ dproj
            grads[f"{pre}.attn.b{name[1]}"] = dproj.sum(axis=0)
            dn1 += dproj @ p[f"{pre}.attn.{name}"].T
        dpre, grads[f"{pre}.ln1.scale"], grads[f"{pre}.ln1.shift"] = \
            _layer_norm_backward(dn1, p[f"{pre}.ln1.scale"], lc["ln1"])
        dh = dh + dpre

    grads["input_proj.weight"] = cache["x"].T @ dh
    grads["input_proj.bias"] = dh.sum(axis=0)

    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in tensor '{name}'")
    return loss, grads
