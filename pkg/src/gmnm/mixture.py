"""Gaussian mixture-inspired nonlinear module (GMNM).

Each of the ``m`` augmented Gaussian projections (AGPs) centres its input,
``z = x - mu``, applies ``n`` linear projections ``LP_n = a_n . z + b_n`` and
aggregates them into a scalar ``y`` that is pushed through a Gaussian bump.
The module output is an unconstrained linear mix ``G_k = sum_i Pi[k, i] f_i``.

Two aggregation modes are provided:

``ridge``
    ``y = sum_n alpha_n LP_n + beta`` and ``f = exp(-y**2 / 2)``. ``y`` is affine
    in ``z`` so each AGP is a Gaussian ridge along the collapsed direction
    ``w = sum_n alpha_n a_n``.
``quadratic``
    ``y = sum_n alpha_n LP_n**2 + beta`` with ``alpha = s**2`` and ``beta = t**2``
    (stored raw as ``s`` and ``t``) and ``f = exp(-y / 2)``. With ``b = 0`` and
    ``beta = 0``, ``y = z^T (sum_n alpha_n a_n a_n^T) z`` is a Mahalanobis form.

The same code evaluates on numpy arrays, tape variables and hyper-dual
numbers, so the analytic input derivatives below can be checked against
exact automatic ones.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .engine import HyperDual, Rng, ShapeError, fn
from .engine import tape as T
from .snapshot import dump_arrays, load_arrays

MODES = ("ridge", "quadratic")
MU_INITS = ("uniform_domain", "data_sample")
PARAM_NAMES = ("mu", "A", "b", "alpha_raw", "beta_raw", "Pi")


class ModeError(ValueError):
    pass


@dataclass
class GmnmConfig:
    d: int
    m: int
    n: int | None = None
    out_dim: int = 1
    mode: str = "ridge"
    trainable_mu: bool = True
    mu_init: str = "uniform_domain"
    domain: list | None = None
    minimal_ridge: bool = False
    a_scale: float | None = None  # projection init bound; default 1/sqrt(d)

    def __post_init__(self):
        if self.n is None:
            self.n = 1 if self.minimal_ridge else self.d
        for name in ("d", "m", "n", "out_dim"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mu_init not in MU_INITS:
            raise ValueError(f"mu_init must be one of {MU_INITS}, got {self.mu_init!r}")
        if self.minimal_ridge and (self.mode != "ridge" or self.n != 1):
            raise ValueError("minimal_ridge requires mode='ridge' and n=1")
        if self.domain is None:
            self.domain = [[-1.0, 1.0]] * self.d
        self.domain = [[float(lo), float(hi)] for lo, hi in self.domain]
        if len(self.domain) != self.d:
            raise ValueError(f"domain has {len(self.domain)} intervals for d={self.d}")

    @property
    def frozen(self) -> frozenset:
        """Parameter blocks excluded from optimisation."""
        names = set()
        if not self.trainable_mu:
            names.add("mu")
        if self.minimal_ridge:
            # A holds the collapsed direction w; alpha == 1, b == beta == 0
            names.update(("b", "alpha_raw", "beta_raw"))
        return frozenset(names)


@dataclass
class GmnmParams:
    config: GmnmConfig
    mu: np.ndarray
    A: np.ndarray
    b: np.ndarray
    alpha_raw: np.ndarray
    beta_raw: np.ndarray
    Pi: np.ndarray
    extra: dict = field(default_factory=dict, repr=False)

    @property
    def alpha(self) -> np.ndarray:
        return self.alpha_raw ** 2 if self.config.mode == "quadratic" else self.alpha_raw

    @property
    def beta(self) -> np.ndarray:
        return self.beta_raw ** 2 if self.config.mode == "quadratic" else self.beta_raw

    def arrays(self) -> dict:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def replace(self, **arrays) -> "GmnmParams":
        cur = self.arrays()
        cur.update(arrays)
        return GmnmParams(self.config, **cur)

    def copy(self) -> "GmnmParams":
        return GmnmParams(self.config, **{k: np.array(v) for k, v in self.arrays().items()})


@dataclass
class RidgeCollapse:
    w: np.ndarray
    c: float


def gmnm_init(config: GmnmConfig, rng: Rng, data=None) -> GmnmParams:
    m, n, d = config.m, config.n, config.d
    if config.mu_init == "data_sample":
        if data is None:
            raise ValueError("mu_init='data_sample' needs a data array")
        data = np.asarray(data, dtype=np.float64).reshape(len(data), -1)
        if data.shape[1] != d:
            raise ShapeError(f"data has {data.shape[1]} columns, expected {d}")
        if len(data) < m:
            raise ValueError(f"data_sample needs at least m={m} rows, got {len(data)}")
        mu = data[rng.choice(len(data), m, replace=False)].copy()
    else:
        lo = np.array([iv[0] for iv in config.domain])
        hi = np.array([iv[1] for iv in config.domain])
        mu = lo + (hi - lo) * rng.uniform((m, d))
    bound = 1.0 / np.sqrt(d) if config.a_scale is None else float(config.a_scale)
    A = rng.uniform((m, n, d), -bound, bound)
    if config.minimal_ridge:
        alpha_raw = np.ones((m, n))
    else:
        alpha_raw = rng.uniform((m, n), 0.0, 1.0)
    return GmnmParams(
        config,
        mu=mu,
        A=A,
        b=np.zeros((m, n)),
        alpha_raw=alpha_raw,
        beta_raw=np.zeros(m),
        Pi=np.zeros((config.out_dim, m)),
    )


def count_params(config: GmnmConfig) -> int:
    """Number of trainable scalars."""
    m, n, d, k = config.m, config.n, config.d, config.out_dim
    sizes = {"mu": m * d, "A": m * n * d, "b": m * n, "alpha_raw": m * n, "beta_raw": m, "Pi": k * m}
    return sum(v for name, v in sizes.items() if name not in config.frozen)


# ---------------------------------------------------------------- evaluation

def _as_batch(x, d):
    shape = x.shape
    if shape[-1] != d:
        raise ShapeError(f"input has dimension {shape[-1]}, expected {d}")
    if len(shape) == 1:
        return fn.reshape(x, 1, d), True
    if len(shape) != 2:
        raise ShapeError(f"input must be [d] or [N x d], got {shape}")
    return x, False


def agp_activations(P: dict, x, mode: str):
    """AGP outputs ``f`` with shape [m x N] for a batch ``x`` of shape [N x d].

    ``P`` maps parameter names to arrays or tape variables.
    """
    mu, A, b = P["mu"], P["A"], P["b"]
    m, n, d = np.shape(T.value_of(A))
    z = x.reshape(1, *x.shape) - mu.reshape(m, 1, d)  # [m, N, d]
    lp = fn.matmul(z, A.transpose(0, 2, 1)) + b.reshape(m, 1, n)  # [m, N, n]
    if mode == "ridge":
        y = fn.sum(lp * P["alpha_raw"].reshape(m, 1, n), -1) + P["beta_raw"].reshape(m, 1)
        return fn.exp(-0.5 * fn.square(y))
    if mode == "quadratic":
        alpha = fn.square(P["alpha_raw"]).reshape(m, 1, n)
        y = fn.sum(fn.square(lp) * alpha, -1) + fn.square(P["beta_raw"]).reshape(m, 1)
        return fn.exp(-0.5 * y)
    raise ModeError(f"unknown mode {mode!r}")


def gmnm_apply(P: dict, x, mode: str):
    """Mixture output [N x out_dim] for a batch [N x d]; works on arrays,
    tape variables and hyper-dual numbers."""
    return fn.matmul(agp_activations(P, x, mode).T, P["Pi"].T)


def gmnm_forward(params: GmnmParams, x):
    """``G(x)`` for one input [d] (returns [out_dim]) or a batch [N x d]."""
    xb, single = _as_batch(_as_input(x), params.config.d)
    out = gmnm_apply(params.arrays(), xb, params.config.mode)
    return out[0] if single else out


def agp_forward(params: GmnmParams, i: int, x) -> float:
    """Output of AGP ``i`` at a single input, in (0, 1]."""
    cfg = params.config
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (cfg.d,):
        raise ShapeError(f"input must have shape ({cfg.d},), got {x.shape}")
    z = x - params.mu[i]
    lp = params.A[i] @ z + params.b[i]
    if cfg.mode == "ridge":
        y = params.alpha_raw[i] @ lp + params.beta_raw[i]
        return float(np.exp(-0.5 * y * y))
    y = (params.alpha_raw[i] ** 2) @ (lp * lp) + params.beta_raw[i] ** 2
    return float(np.exp(-0.5 * y))


def _as_input(x):
    if isinstance(x, (T.Var, HyperDual)) or (isinstance(x, np.ndarray) and x.dtype == object):
        return x
    return np.asarray(x, dtype=np.float64)


# ---------------------------------------------------------------- ridge collapse

def _require_ridge(params: GmnmParams, what: str):
    if params.config.mode != "ridge":
        raise ModeError(f"{what} is only defined in ridge mode (use the tape in quadratic mode)")


def collapse_ridge(params: GmnmParams, i: int) -> RidgeCollapse:
    """``(w, c)`` with ``f_i(x) = exp(-(w . (x - mu_i) + c)**2 / 2)``."""
    _require_ridge(params, "collapse_ridge")
    alpha = params.alpha_raw[i]
    return RidgeCollapse(w=alpha @ params.A[i], c=float(alpha @ params.b[i] + params.beta_raw[i]))


def ridge_directions(P: dict):
    """Collapsed directions W [m x d] and offsets c [m] for every AGP."""
    A, alpha = P["A"], P["alpha_raw"]
    m, n, d = np.shape(T.value_of(A))
    W = fn.sum(A * alpha.reshape(m, n, 1), 1)
    c = fn.sum(alpha * P["b"], -1) + P["beta_raw"]
    return W, c


def ridge_terms(P: dict, x):
    """Per-AGP ridge coordinate ``y`` and response ``f`` ([N x m] each) plus W.

    Uses the affine form ``x W^T - (W . mu) + c``; the fast path for PDE work.
    """
    W, c = ridge_directions(P)
    shift = fn.sum(W * P["mu"], -1) - c
    y = fn.matmul(x, W.T) - shift
    return y, fn.exp(-0.5 * fn.square(y)), W


def _fused_ridge(kind: str, W, shift, Pi, X):
    """One tape node for the ridge mixture value or Laplacian at constant X.

    value:      G = F Pi^T,               F = exp(-Y^2/2), Y = X W^T - shift
    laplacian:  L = (F (Y^2 - 1) r) Pi^T, r = |w|^2
    """
    Wv, sv, Pv = T.value_of(W), T.value_of(shift), T.value_of(Pi)
    Y = X @ Wv.T
    Y -= sv
    Y2 = Y * Y
    F = np.exp(-0.5 * Y2)
    if kind == "value":
        out = F @ Pv.T

        def common(g):
            gY = g @ Pv
            gY *= F
            gY *= Y
            np.negative(gY, out=gY)
            return gY

        def g_pi(g):
            return g.T @ F
    else:
        r = np.einsum("ij,ij->i", Wv, Wv)
        B = Y2 - 1.0
        B *= F  # F (Y^2 - 1)
        out = (B * r) @ Pv.T

        def common(g):
            gQ = g @ Pv
            gr = np.einsum("nm,nm->m", gQ, B)
            gQ *= r
            gQ *= F
            gQ *= Y
            gQ *= 3.0 - Y2
            return gQ, gr

        def g_pi(g):
            return g.T @ (B * r)

    cache = {}

    def grads(g):
        # the three input adjoints share one intermediate per backward pass
        if cache.get("g") is not g:
            cache["g"] = g
            cache["val"] = common(g)
        return cache["val"]

    if kind == "value":
        pairs = [
            (W, lambda g: grads(g).T @ X),
            (shift, lambda g: -grads(g).sum(0)),
            (Pi, g_pi),
        ]
    else:
        pairs = [
            (W, lambda g: grads(g)[0].T @ X + 2.0 * Wv * grads(g)[1][:, None]),
            (shift, lambda g: -grads(g)[0].sum(0)),
            (Pi, g_pi),
        ]
    return T._make(f"ridge_{kind}", out, pairs)


def _fused_inputs(P):
    W, c = ridge_directions(P)
    return W, fn.sum(W * P["mu"], -1) - c


def ridge_value(P: dict, x):
    if isinstance(x, np.ndarray) and x.dtype != object and any(isinstance(v, T.Var) for v in P.values()):
        W, shift = _fused_inputs(P)
        return _fused_ridge("value", W, shift, P["Pi"], x)
    _, f, _ = ridge_terms(P, x)
    return fn.matmul(f, P["Pi"].T)


def ridge_laplacian(P: dict, x):
    """Laplacian [N x out_dim]: sum_i Pi[k,i] f_i (y_i^2 - 1) |w_i|^2."""
    if isinstance(x, np.ndarray) and x.dtype != object and any(isinstance(v, T.Var) for v in P.values()):
        W, shift = _fused_inputs(P)
        return _fused_ridge("laplacian", W, shift, P["Pi"], x)
    y, f, W = ridge_terms(P, x)
    scale = fn.sum(fn.square(W), -1)
    return fn.matmul(f * (fn.square(y) - 1.0) * scale, P["Pi"].T)


def gmnm_input_gradient(params: GmnmParams, x) -> np.ndarray:
    """dG_k/dx_j: [out_dim x d] for one input, [N x out_dim x d] for a batch."""
    _require_ridge(params, "gmnm_input_gradient")
    xb, single = _as_batch(np.asarray(x, dtype=np.float64), params.config.d)
    y, f, W = ridge_terms(params.arrays(), xb)
    out = np.einsum("km,nm,mj->nkj", params.Pi, -f * y, W)
    return out[0] if single else out


def gmnm_input_laplacian(params: GmnmParams, x) -> np.ndarray:
    """Sum of pure second input derivatives: [out_dim] or [N x out_dim]."""
    _require_ridge(params, "gmnm_input_laplacian")
    xb, single = _as_batch(np.asarray(x, dtype=np.float64), params.config.d)
    out = ridge_laplacian(params.arrays(), xb)
    return out[0] if single else out


# ---------------------------------------------------------------- Mahalanobis

def mahalanobis_embed(P, mu=None, pi: float = 1.0) -> GmnmParams:
    """Single quadratic-mode AGP whose aggregated ``y`` equals ``z^T P z``.

    The eigendecomposition ``P = sum_n lam_n v_n v_n^T`` gives projections
    ``a_n = v_n`` with weights ``alpha_n = lam_n`` (stored as ``sqrt(lam_n)``).
    """
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"precision matrix must be square, got {P.shape}")
    if not np.allclose(P, P.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(P).max())):
        raise ValueError("precision matrix is not symmetric")
    d = P.shape[0]
    lam, V = np.linalg.eigh(0.5 * (P + P.T))
    if lam.min() < -1e-10:
        raise ValueError(f"precision matrix is indefinite (eigenvalue {lam.min():.3e})")
    lam = np.clip(lam, 0.0, None)
    cfg = GmnmConfig(d=d, m=1, n=d, out_dim=1, mode="quadratic")
    return GmnmParams(
        cfg,
        mu=np.zeros((1, d)) if mu is None else np.asarray(mu, dtype=np.float64).reshape(1, d),
        A=V.T.reshape(1, d, d).copy(),
        b=np.zeros((1, d)),
        alpha_raw=np.sqrt(lam).reshape(1, d),
        beta_raw=np.zeros(1),
        Pi=np.full((1, 1), float(pi)),
    )


def aggregated_y(params: GmnmParams, i: int, x) -> float:
    """The scalar ``y`` of AGP ``i`` before the Gaussian map."""
    z = np.asarray(x, dtype=np.float64) - params.mu[i]
    lp = params.A[i] @ z + params.b[i]
    if params.config.mode == "ridge":
        return float(params.alpha_raw[i] @ lp + params.beta_raw[i])
    return float(params.alpha[i] @ (lp * lp) + params.beta[i])


# ---------------------------------------------------------------- snapshots

def save_params(params: GmnmParams, path) -> None:
    dump_arrays(path, asdict(params.config), params.arrays())


def load_params(path) -> GmnmParams:
    config, arrays = load_arrays(path)
    return GmnmParams(GmnmConfig(**config), **{k: arrays[k] for k in PARAM_NAMES})
