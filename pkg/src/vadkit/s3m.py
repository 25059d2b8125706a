"""Linear state-space sequence model scoring temporal inconsistency.

The model predicts the next clip feature from the running state of a linear
recurrence:

    x_t = W_enc f_t + b_enc          (feature encoder)
    h_t = S h_{t-1} + x_t,  h_0 = 0  (state transition S, learnable)
    f_hat_{t+1} = W_dec h_t + b_dec  (feature decoder)

Training minimizes mean squared prediction error over normal clips only; at
test time the per-frame squared error is the temporal anomaly score.
Gradients are computed analytically by backpropagation through the
recurrence (verified against central finite differences in the test suite),
and optimized with Adam under global gradient-norm clipping. Everything is
deterministic given the config seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from vadkit._util import rng_for
from vadkit.errors import DivergenceError

MODEL_MAGIC = b"VSSM"
MODEL_VERSION = 1


@dataclass
class S3MParams:
    """Learnable weights: encoder, state transition, decoder."""

    encoder_weight: np.ndarray  # (O, D)
    encoder_bias: np.ndarray  # (O,)
    transition: np.ndarray  # (O, O)
    decoder_weight: np.ndarray  # (D, O)
    decoder_bias: np.ndarray  # (D,)

    @property
    def feature_dim(self) -> int:
        return int(self.encoder_weight.shape[1])

    @property
    def state_dim(self) -> int:
        return int(self.encoder_weight.shape[0])

    def arrays(self) -> list[np.ndarray]:
        """Weight blocks in declared (serialization) order."""
        return [
            self.encoder_weight,
            self.encoder_bias,
            self.transition,
            self.decoder_weight,
            self.decoder_bias,
        ]

    def copy(self) -> "S3MParams":
        return S3MParams(*[a.copy() for a in self.arrays()])


@dataclass
class TrainConfig:
    epochs: int = 20
    lr0: float = 5e-5
    lr_decay: float = 0.99
    init_std: float = 0.02
    init_mode: str = "gaussian"  # or "hippo"
    grad_clip_norm: float = 1.0
    seed: int = 0
    optimizer: str = "adam"  # or "sgd"
    hippo_dt: float = 0.125  # 1 / default clip length

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")
        if not (0.0 < self.lr_decay <= 1.0):
            raise ValueError("lr_decay must be in (0, 1]")
        if self.init_mode not in ("gaussian", "hippo"):
            raise ValueError(f"unknown init_mode '{self.init_mode}'")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer '{self.optimizer}'")


def hippo_legs_matrix(n: int) -> np.ndarray:
    """Structured lower-triangular memory matrix.

    A[n,k] = -sqrt(2n+1)*sqrt(2k+1) for n > k, -(n+1) on the diagonal,
    0 above it.
    """
    a = np.zeros((n, n))
    for row in range(n):
        for col in range(row):
            a[row, col] = -np.sqrt(2 * row + 1) * np.sqrt(2 * col + 1)
        a[row, row] = -(row + 1)
    return a


def init_params(feature_dim: int, state_dim: int, cfg: TrainConfig) -> S3MParams:
    """Fresh parameters; every weight i.i.d. N(0, init_std^2), biases zero.

    In hippo mode the transition matrix is instead I + dt * A with A the
    structured memory matrix above.
    """
    if feature_dim < 1 or state_dim < 1:
        raise ValueError("feature_dim and state_dim must be >= 1")
    rng = rng_for(cfg.seed, "s3m-init")
    encoder_weight = rng.normal(0.0, cfg.init_std, size=(state_dim, feature_dim))
    if cfg.init_mode == "hippo":
        transition = np.eye(state_dim) + cfg.hippo_dt * hippo_legs_matrix(state_dim)
    else:
        transition = rng.normal(0.0, cfg.init_std, size=(state_dim, state_dim))
    decoder_weight = rng.normal(0.0, cfg.init_std, size=(feature_dim, state_dim))
    return S3MParams(
        encoder_weight=encoder_weight,
        encoder_bias=np.zeros(state_dim),
        transition=transition,
        decoder_weight=decoder_weight,
        decoder_bias=np.zeros(feature_dim),
    )


def _run_recurrence(params: S3MParams, seq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """States H (T-1, O) and predictions (T-1, D) for frames 2..T."""
    if seq.ndim != 2 or seq.shape[0] < 2:
        raise ValueError(f"sequence must be (T, D) with T >= 2, got shape {seq.shape}")
    t_minus_1 = seq.shape[0] - 1
    x = seq[:-1] @ params.encoder_weight.T + params.encoder_bias
    states = np.empty((t_minus_1, params.state_dim))
    h = np.zeros(params.state_dim)
    transition = params.transition
    for t in range(t_minus_1):
        h = transition @ h + x[t]
        states[t] = h
    preds = states @ params.decoder_weight.T + params.decoder_bias
    if not np.isfinite(preds).all():
        raise DivergenceError("non-finite prediction; recurrence diverged")
    return states, preds


def forward(params: S3MParams, seq: np.ndarray) -> np.ndarray:
    """Predicted features for frames 2..T, shape (T-1, D)."""
    _states, preds = _run_recurrence(params, seq)
    return preds


def loss(params: S3MParams, seq: np.ndarray) -> float:
    """Mean squared prediction error over the T-1 predicted frames."""
    preds = forward(params, seq)
    residual = preds - seq[1:]
    return float(np.mean(residual * residual))


def temporal_score(params: S3MParams, seq: np.ndarray) -> np.ndarray:
    """Per-predicted-frame squared error, ||f_hat_t - f_t||^2 / D, shape (T-1,)."""
    preds = forward(params, seq)
    residual = preds - seq[1:]
    return np.mean(residual * residual, axis=1)


def backward(params: S3MParams, seq: np.ndarray) -> tuple[S3MParams, float]:
    """Gradients of the MSE loss w.r.t. every parameter, plus the loss itself.

    Backpropagation through the linear recurrence: with r_t the prediction
    residual and s = 2 / ((T-1) D),

        dL/dW_dec = sum_t s r_t h_t^T          dL/db_dec = sum_t s r_t
        g_t = W_dec^T (s r_t) + S^T g_{t+1}
        dL/dS = sum_t g_t h_{t-1}^T            (h_0 = 0)
        dL/dW_enc = sum_t g_t f_t^T            dL/db_enc = sum_t g_t
    """
    states, preds = _run_recurrence(params, seq)
    t_minus_1 = seq.shape[0] - 1
    dim = seq.shape[1]
    scale = 2.0 / (t_minus_1 * dim)
    residual_grad = scale * (preds - seq[1:])  # (T-1, D), dL/dpred

    g_decoder_weight = residual_grad.T @ states
    g_decoder_bias = residual_grad.sum(axis=0)

    upstream = residual_grad @ params.decoder_weight  # (T-1, O), dL/dh via output path
    state_grads = np.empty_like(states)
    carry = np.zeros(params.state_dim)
    transition_t = params.transition.T
    for t in range(t_minus_1 - 1, -1, -1):
        carry = upstream[t] + transition_t @ carry
        state_grads[t] = carry

    g_transition = state_grads[1:].T @ states[:-1]  # t=1 term vanishes (h_0 = 0)
    g_encoder_weight = state_grads.T @ seq[:-1]
    g_encoder_bias = state_grads.sum(axis=0)

    residual = preds - seq[1:]
    loss_value = float(np.mean(residual * residual))
    grads = S3MParams(
        encoder_weight=g_encoder_weight,
        encoder_bias=g_encoder_bias,
        transition=g_transition,
        decoder_weight=g_decoder_weight,
        decoder_bias=g_decoder_bias,
    )
    return grads, loss_value


def clip_gradients(grads: S3MParams, max_norm: float) -> float:
    """Scale all gradient blocks in place so the global norm is <= max_norm."""
    total = 0.0
    for a in grads.arrays():
        total += float(np.sum(a * a))
    norm = float(np.sqrt(total))
    if max_norm > 0 and norm > max_norm:
        factor = max_norm / norm
        for a in grads.arrays():
            a *= factor
    return norm


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def like(cls, params: S3MParams) -> "AdamState":
        return cls(
            m=[np.zeros_like(a) for a in params.arrays()],
            v=[np.zeros_like(a) for a in params.arrays()],
        )


def _adam_update(
    params: S3MParams,
    grads: S3MParams,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    state.step += 1
    correction1 = 1.0 - beta1**state.step
    correction2 = 1.0 - beta2**state.step
    for i, (p, g) in enumerate(zip(params.arrays(), grads.arrays())):
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * (g * g)
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass
class TrainResult:
    params: S3MParams
    epoch_losses: list[float] = field(default_factory=list)


def train(clips: list[np.ndarray], cfg: TrainConfig, state_dim: int) -> TrainResult:
    """Fit the model on normal clips.

    One gradient step per clip, clip order reshuffled each epoch by a seeded
    RNG, learning rate lr0 * lr_decay^epoch, global gradient-norm clipping.
    Fully deterministic for a fixed config. Raises DivergenceError with the
    epoch and step if the loss goes non-finite.
    """
    if not clips:
        raise ValueError("need at least one training clip")
    dims = {c.shape[1] for c in clips}
    if len(dims) != 1:
        raise ValueError(f"inconsistent clip feature dims: {sorted(dims)}")
    feature_dim = dims.pop()
    params = init_params(feature_dim, state_dim, cfg)
    adam = AdamState.like(params) if cfg.optimizer == "adam" else None
    shuffle_rng = rng_for(cfg.seed, "s3m-shuffle")

    epoch_losses: list[float] = []
    for epoch in range(cfg.epochs):
        lr = cfg.lr0 * cfg.lr_decay**epoch
        order = shuffle_rng.permutation(len(clips))
        total = 0.0
        for step, idx in enumerate(order):
            try:
                grads, loss_value = backward(params, clips[int(idx)])
            except DivergenceError as exc:
                raise DivergenceError(f"epoch {epoch}, step {step}: {exc}") from exc
            if not np.isfinite(loss_value):
                raise DivergenceError(f"epoch {epoch}, step {step}: non-finite loss")
            total += loss_value
            clip_gradients(grads, cfg.grad_clip_norm)
            if adam is not None:
                _adam_update(params, grads, adam, lr)
            else:
                for p, g in zip(params.arrays(), grads.arrays()):
                    p -= lr * g
        epoch_losses.append(total / len(clips))
    return TrainResult(params=params, epoch_losses=epoch_losses)


def save_params(params: S3MParams, path: Path | str) -> None:
    """Binary model file: magic, version, D, O header + float64 LE blocks."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = MODEL_MAGIC + struct.pack("<HII", MODEL_VERSION, params.feature_dim, params.state_dim)
    blocks = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in params.arrays())
    path.write_bytes(header + blocks)


def load_params(path: Path | str) -> S3MParams:
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise ValueError(f"{path}: not a temporal model file (bad magic)")
    version, feature_dim, state_dim = struct.unpack("<HII", raw[4:14])
    if version != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {version}")
    shapes = [
        (state_dim, feature_dim),
        (state_dim,),
        (state_dim, state_dim),
        (feature_dim, state_dim),
        (feature_dim,),
    ]
    offset = 14
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape))
        end = offset + count * 8
        if end > len(raw):
            raise ValueError(f"{path}: truncated model file")
        arrays.append(np.frombuffer(raw[offset:end], dtype="<f8").reshape(shape).copy())
        offset = end
    if offset != len(raw):
        raise ValueError(f"{path}: trailing bytes in model file")
    return S3MParams(*arrays)
