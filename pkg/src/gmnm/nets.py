"""Baseline and host networks: MLP, isotropic RBF, a small conv stack and an
LSTM, plus the regression losses.

Every forward takes a parameter dict ``P`` whose values are numpy arrays or
tape variables, so one definition serves evaluation and training. Parameter
dicts use flat names; a GMNM sub-block is stored under a ``prefix.`` namespace.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import Rng, ShapeError, fn, seed_direction
from .engine import tape as T
from .mixture import GmnmConfig, GmnmParams, count_params as gmnm_count, gmnm_apply, gmnm_init

ACTIVATIONS = ("tanh", "relu", "silu")


def _activate(h, kind):
    if kind == "tanh":
        return fn.tanh(h)
    if kind == "relu":
        return fn.relu(h)
    if kind == "silu":
        return h * fn.sigmoid(h)
    raise ValueError(f"unknown activation {kind!r}")


def glorot(rng: Rng, fan_in: int, fan_out: int, shape=None):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(shape or (fan_in, fan_out), -bound, bound)


def sub_params(P: dict, prefix: str) -> dict:
    cut = len(prefix) + 1
    return {k[cut:]: v for k, v in P.items() if k.startswith(prefix + ".")}


def prefixed(params: dict, prefix: str) -> dict:
    return {f"{prefix}.{k}": v for k, v in params.items()}


# ---------------------------------------------------------------- MLP

@dataclass
class MlpSpec:
    widths: list
    activation: str = "tanh"

    def __post_init__(self):
        if len(self.widths) < 2 or min(self.widths) < 1:
            raise ValueError(f"invalid layer widths {self.widths}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")

    @property
    def n_layers(self):
        return len(self.widths) - 1


def mlp_init(spec: MlpSpec, rng: Rng) -> dict:
    P = {}
    for i, (a, b) in enumerate(zip(spec.widths[:-1], spec.widths[1:])):
        P[f"W{i}"] = glorot(rng, a, b)
        P[f"b{i}"] = np.zeros(b)
    return P


def mlp_count(widths) -> int:
    return int(sum(a * b + b for a, b in zip(widths[:-1], widths[1:])))


def mlp_forward(P: dict, x, activation: str = "tanh"):
    """[batch x d] -> [batch x out]; affine layers with ``activation`` between."""
    n = sum(1 for k in P if k.startswith("W"))
    if x.shape[-1] != np.shape(T.value_of(P["W0"]))[0]:
        raise ShapeError(f"input width {x.shape[-1]} does not match first layer {np.shape(T.value_of(P['W0']))[0]}")
    h = x
    for i in range(n):
        h = fn.matmul(h, P[f"W{i}"]) + P[f"b{i}"]
        if i < n - 1:
            h = _activate(h, activation)
    return h


def mlp_laplacian(P: dict, x, activation: str = "tanh"):
    """Sum of pure second input derivatives via hyper-dual propagation.

    Works when ``P`` holds tape variables, which makes the Laplacian itself
    differentiable with respect to the weights.
    """
    total = None
    for k in range(x.shape[-1]):
        d2 = mlp_forward(P, seed_direction(x, k), activation).d2
        total = d2 if total is None else total + d2
    return total


# ---------------------------------------------------------------- RBF

def rbf_init(rng: Rng, m: int, d: int, out_dim: int = 1, domain=(-1.0, 1.0), width: float = 0.5) -> dict:
    return {
        "centers": rng.uniform((m, d), *domain),
        "log_widths": np.full(m, np.log(width)),
        "weights": np.zeros((out_dim, m)),
    }


def rbf_forward(P: dict, x):
    """out_k = sum_i weights[k,i] exp(-|x - c_i|^2 / (2 sigma_i^2))."""
    c = P["centers"]
    m, d = np.shape(T.value_of(c))
    if x.shape[-1] != d:
        raise ShapeError(f"input width {x.shape[-1]} does not match centre dimension {d}")
    diff = x.reshape(1, *x.shape) - c.reshape(m, 1, d)
    sq = fn.sum(fn.square(diff), -1)  # [m, N]
    inv_var = fn.exp(-2.0 * P["log_widths"]).reshape(m, 1)
    phi = fn.exp(-0.5 * (sq * inv_var))
    return fn.matmul(phi.T, P["weights"].T)


def rbf_as_gmnm(P: dict) -> GmnmParams:
    """Quadratic-mode GMNM with identical outputs: each component gets
    projections ``a_n = e_n`` and weights ``alpha_n = 1 / sigma**2``."""
    c = np.asarray(P["centers"], dtype=np.float64)
    m, d = c.shape
    W = np.asarray(P["weights"], dtype=np.float64)
    sigma = np.exp(np.asarray(P["log_widths"], dtype=np.float64))
    cfg = GmnmConfig(d=d, m=m, n=d, out_dim=W.shape[0], mode="quadratic")
    return GmnmParams(
        cfg,
        mu=c.copy(),
        A=np.broadcast_to(np.eye(d), (m, d, d)).copy(),
        b=np.zeros((m, d)),
        alpha_raw=np.repeat((1.0 / sigma)[:, None], d, axis=1),
        beta_raw=np.zeros(m),
        Pi=W.copy(),
    )


# ---------------------------------------------------------------- conv stack

@dataclass
class ConvSpec:
    image: tuple = (28, 28, 1)
    channels: tuple = (21, 64)
    classes: int = 10
    head: str = "dense"
    gmnm: dict = field(default_factory=dict)

    def feature_shape(self):
        h, w, _ = self.image
        for _ in self.channels:
            h, w = (h - 2) // 2, (w - 2) // 2
            if h < 1 or w < 1:
                raise ShapeError(f"image {self.image} too small for {len(self.channels)} conv+pool stages")
        return h, w, self.channels[-1]

    @property
    def features(self):
        h, w, c = self.feature_shape()
        return h * w * c

    def gmnm_config(self) -> GmnmConfig:
        opts = {"m": 29, "n": 1, "mode": "ridge", "trainable_mu": False, "mu_init": "data_sample"}
        opts.update(self.gmnm)
        return GmnmConfig(d=self.features, out_dim=self.classes, **opts)


def conv_init(spec: ConvSpec, rng: Rng, head_images=None) -> dict:
    """``head_images`` seed the GMNM centres (sampled from the features the
    freshly initialised stack produces for them)."""
    P = {}
    c_in = spec.image[2]
    for i, c_out in enumerate(spec.channels):
        P[f"K{i}"] = glorot(rng, 9 * c_in, c_out, (3, 3, c_in, c_out))
        P[f"kb{i}"] = np.zeros(c_out)
        c_in = c_out
    spec.feature_shape()
    if spec.head == "dense":
        P["Wd"] = glorot(rng, spec.features, spec.classes)
        P["bd"] = np.zeros(spec.classes)
    elif spec.head == "gmnm":
        cfg = spec.gmnm_config()
        feats = None
        if cfg.mu_init == "data_sample":
            if head_images is None:
                raise ValueError("GMNM head with data_sample centres needs head_images")
            n = len(spec.channels)
            feats = np.concatenate([conv_features(P, head_images[i:i + 1000], n)
                                    for i in range(0, len(head_images), 1000)])
        P.update(prefixed(gmnm_init(cfg, rng, feats).arrays(), "head"))
    else:
        raise ValueError(f"unknown head {spec.head!r}")
    return P


def conv_frozen(spec: ConvSpec) -> frozenset:
    if spec.head != "gmnm":
        return frozenset()
    return frozenset(f"head.{k}" for k in spec.gmnm_config().frozen)


def conv_count(spec: ConvSpec) -> int:
    c_in, total = spec.image[2], 0
    for c_out in spec.channels:
        total += 9 * c_in * c_out + c_out
        c_in = c_out
    if spec.head == "dense":
        return total + spec.features * spec.classes + spec.classes
    return total + gmnm_count(spec.gmnm_config())


def _pool2(h):
    b, hh, ww, c = h.shape
    h2, w2 = hh // 2, ww // 2
    if (hh, ww) != (2 * h2, 2 * w2):
        h = h[:, :2 * h2, :2 * w2, :]
    h = h.reshape(b, h2, 2, w2, 2, c).transpose(0, 1, 3, 5, 2, 4).reshape(b, h2, w2, c, 4)
    return h.max(-1) if isinstance(h, T.Var) else h.max(axis=-1)


def _conv3(h, K, kb):
    kh, kw, c_in, c_out = np.shape(T.value_of(K))
    if isinstance(h, T.Var):
        cols = T.patches(h, kh, kw)
    else:
        view = np.lib.stride_tricks.sliding_window_view(h, (kh, kw), axis=(1, 2))
        cols = view.transpose(0, 1, 2, 4, 5, 3)
    b, ho, wo = cols.shape[:3]
    out = fn.matmul(cols.reshape(b * ho * wo, kh * kw * c_in), K.reshape(kh * kw * c_in, c_out)) + kb
    return out.reshape(b, ho, wo, c_out)


def conv_features(P: dict, images, n_stages: int):
    h = images
    if h.shape[1] < 3 or h.shape[2] < 3:
        raise ShapeError(f"images of size {h.shape[1:3]} are too small for a 3x3 valid convolution")
    for i in range(n_stages):
        h = _pool2(fn.relu(_conv3(h, P[f"K{i}"], P[f"kb{i}"])))
    b = h.shape[0]
    return h.reshape(b, int(np.prod(h.shape[1:])))


def conv_forward(P: dict, images, spec: ConvSpec):
    """[batch x h x w x c] -> [batch x classes]."""
    if tuple(images.shape[1:]) != tuple(spec.image):
        raise ShapeError(f"images have shape {images.shape[1:]}, expected {spec.image}")
    feats = conv_features(P, images, len(spec.channels))
    if spec.head == "dense":
        return fn.matmul(feats, P["Wd"]) + P["bd"]
    return gmnm_apply(sub_params(P, "head"), feats, spec.gmnm_config().mode)


# ---------------------------------------------------------------- LSTM

@dataclass
class LstmSpec:
    features: int = 4
    units: int = 3
    gmnm: dict | None = None  # None: no post-block

    def gmnm_config(self) -> GmnmConfig | None:
        if self.gmnm is None:
            return None
        opts = {"m": 100, "out_dim": 1, "mode": "ridge", "trainable_mu": False, "domain": [[-1.0, 1.0]] * self.units}
        opts.update(self.gmnm)
        return GmnmConfig(d=self.units, **opts)

    @property
    def readout_in(self):
        cfg = self.gmnm_config()
        return self.units if cfg is None else cfg.out_dim


def lstm_init(spec: LstmSpec, rng: Rng) -> dict:
    H, F = spec.units, spec.features
    P = {
        "Wx": glorot(rng, F, 4 * H),
        "Wh": glorot(rng, H, 4 * H),
        "bh": np.concatenate([np.zeros(H), np.ones(H), np.zeros(2 * H)]),  # forget-gate bias 1
    }
    cfg = spec.gmnm_config()
    if cfg is not None:
        P.update(prefixed(gmnm_init(cfg, rng).arrays(), "post"))
    P["Wo"] = glorot(rng, spec.readout_in, 1)
    P["bo"] = np.zeros(1)
    return P


def lstm_frozen(spec: LstmSpec) -> frozenset:
    cfg = spec.gmnm_config()
    return frozenset() if cfg is None else frozenset(f"post.{k}" for k in cfg.frozen)


def lstm_count(spec: LstmSpec) -> int:
    H, F = spec.units, spec.features
    total = 4 * (F * H + H * H + H) + spec.readout_in + 1
    cfg = spec.gmnm_config()
    return total if cfg is None else total + gmnm_count(cfg)


def lstm_states(P: dict, seq, units: int):
    """Run the recurrence; returns the list of (h, c) after every step.

    Gate layout along the 4H axis: input, forget, output, candidate.
    """
    B, Tn, F = seq.shape
    if Tn < 1:
        raise ShapeError("sequence needs at least one step")
    if F != np.shape(T.value_of(P["Wx"]))[0]:
        raise ShapeError(f"sequence has {F} features, weights expect {np.shape(T.value_of(P['Wx']))[0]}")
    H = units
    xw = fn.matmul(seq.reshape(B * Tn, F), P["Wx"]).reshape(B, Tn, 4 * H)
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    out = []
    for t in range(Tn):
        g = xw[:, t, :] + fn.matmul(h, P["Wh"]) + P["bh"]
        i = fn.sigmoid(g[:, :H])
        f = fn.sigmoid(g[:, H:2 * H])
        o = fn.sigmoid(g[:, 2 * H:3 * H])
        cand = fn.tanh(g[:, 3 * H:])
        c = f * c + i * cand
        h = o * fn.tanh(c)
        out.append((h, c))
    return out


def lstm_forward(P: dict, seq, spec: LstmSpec):
    """[batch x T x features] -> [batch x 1]."""
    h, _ = lstm_states(P, seq, spec.units)[-1]
    cfg = spec.gmnm_config()
    if cfg is not None:
        h = gmnm_apply(sub_params(P, "post"), h, cfg.mode)
    return fn.matmul(h, P["Wo"]) + P["bo"]


# ---------------------------------------------------------------- losses

def one_hot(labels, classes: int) -> np.ndarray:
    labels = np.asarray(labels).astype(int).ravel()
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise ValueError(f"labels outside [0, {classes})")
    out = np.zeros((labels.size, classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def loss(kind: str, pred, target):
    """Mean squared error; ``mse_onehot`` expands integer labels first."""
    if kind == "mse_onehot":
        target = one_hot(target, pred.shape[-1])
    elif kind != "mse":
        raise ValueError(f"unknown loss {kind!r}")
    target = np.asarray(target, dtype=np.float64)
    if tuple(pred.shape) != target.shape:
        raise ShapeError(f"prediction shape {tuple(pred.shape)} differs from target {target.shape}")
    diff = pred - target
    if isinstance(diff, T.Var):
        return fn.square(diff).mean()
    with np.errstate(over="ignore", invalid="ignore"):  # a non-finite loss is reported by the caller
        return float(np.mean(diff * diff))
