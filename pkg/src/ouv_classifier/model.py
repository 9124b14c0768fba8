"""Two-layer perceptron with manual backpropagation and Adam.

Trains against soft labels with cross-entropy, inverted dropout on the
hidden layer, L2 regularization folded into the gradients, and early
stopping on validation top-k accuracy. Everything is seeded and
deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy import sparse

from . import NUM_CLASSES
from .labels import SmoothingConfig, PriorWeights, smooth

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
LOG_EPS = 1e-12


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class MlpParams:
    W1: np.ndarray  # hidden x input
    b1: np.ndarray  # hidden
    W2: np.ndarray  # 11 x hidden
    b2: np.ndarray  # 11

    def copy(self) -> "MlpParams":
        return MlpParams(self.W1.copy(), self.b1.copy(),
                         self.W2.copy(), self.b2.copy())

    def arrays(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}


@dataclass(frozen=True)
class TrainConfig:
    hidden: int = 200
    batch_size: int = 128
    learning_rate: float = 2e-4
    l2: float = 1e-5
    dropout: float = 0.5
    max_epochs: int = 100
    patience: int = 5
    seed: int = 1337
    k: int = 3
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)

    def __post_init__(self):
        if self.patience < 1 or self.batch_size < 1:
            raise ValueError("patience and batch_size must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")


@dataclass
class TrainedModel:
    params: MlpParams
    featurizer_ref: str
    config: TrainConfig
    best_epoch: int
    history: list[dict]


def init_params(input_dim: int, hidden: int, seed: int) -> MlpParams:
    """Glorot-uniform weights, zero biases, seeded."""
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (input_dim + hidden))
    lim2 = np.sqrt(6.0 / (hidden + NUM_CLASSES))
    return MlpParams(
        W1=rng.uniform(-lim1, lim1, size=(hidden, input_dim)),
        b1=np.zeros(hidden),
        W2=rng.uniform(-lim2, lim2, size=(NUM_CLASSES, hidden)),
        b2=np.zeros(NUM_CLASSES),
    )


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def forward(params: MlpParams, x, dropout_mask: np.ndarray | None = None):
    """Forward pass over a batch (dense or CSR rows).

    Returns (logits, probabilities, cache). The dropout mask, when given,
    is an inverted-dropout multiplier for the hidden activations.
    """
    single = not sparse.issparse(x) and np.ndim(x) == 1
    if single:
        x = np.asarray(x)[None, :]
    if x.shape[1] != params.W1.shape[1]:
        raise ValueError(
            f"input dim {x.shape[1]} != expected {params.W1.shape[1]}")
    z1 = x @ params.W1.T + params.b1
    z1 = np.asarray(z1)
    h = np.maximum(z1, 0.0)
    if dropout_mask is not None:
        h = h * dropout_mask
    logits = h @ params.W2.T + params.b2
    probs = _softmax_rows(logits)
    cache = {"x": x, "z1": z1, "h": h, "mask": dropout_mask}
    if single:
        return logits[0], probs[0], cache
    return logits, probs, cache


def cross_entropy_soft(probabilities: np.ndarray,
                       target: np.ndarray) -> float:
    """-sum_t target_t * ln(prob_t + eps), averaged over batch rows."""
    probs = np.atleast_2d(probabilities)
    targets = np.atleast_2d(target)
    losses = -(targets * np.log(probs + LOG_EPS)).sum(axis=1)
    return float(losses.mean())


def backward(cache: dict, probs: np.ndarray, targets: np.ndarray,
             params: MlpParams, l2: float) -> MlpParams:
    """Gradients of mean cross-entropy plus (l2/2)*||params||^2."""
    probs = np.atleast_2d(probs)
    targets = np.atleast_2d(targets)
    batch = probs.shape[0]
    dlogits = (probs - targets) / batch
    h, z1, x, mask = cache["h"], cache["z1"], cache["x"], cache["mask"]
    dW2 = dlogits.T @ h + l2 * params.W2
    db2 = dlogits.sum(axis=0) + l2 * params.b2
    dh = dlogits @ params.W2
    if mask is not None:
        dh = dh * mask
    dz1 = dh * (z1 > 0)
    if sparse.issparse(x):
        dW1 = np.asarray((x.T @ dz1).T) + l2 * params.W1
    else:
        dW1 = dz1.T @ x + l2 * params.W1
    db1 = dz1.sum(axis=0) + l2 * params.b1
    return MlpParams(W1=dW1, b1=db1, W2=dW2, b2=db2)


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: MlpParams) -> "AdamState":
        return cls(m={k: np.zeros_like(a) for k, a in params.arrays().items()},
                   v={k: np.zeros_like(a) for k, a in params.arrays().items()})


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState,
              learning_rate: float) -> None:
    """In-place Adam update with the canonical constants."""
    state.t += 1
    t = state.t
    for key, p in params.arrays().items():
        g = grads.arrays()[key]
        state.m[key] = ADAM_BETA1 * state.m[key] + (1 - ADAM_BETA1) * g
        state.v[key] = ADAM_BETA2 * state.v[key] + (1 - ADAM_BETA2) * g * g
        m_hat = state.m[key] / (1 - ADAM_BETA1 ** t)
        v_hat = state.v[key] / (1 - ADAM_BETA2 ** t)
        p -= learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def soft_targets(one_hots: np.ndarray, parentals: np.ndarray,
                 mu: PriorWeights | None,
                 config: SmoothingConfig) -> np.ndarray:
    return np.stack([smooth(y, g, mu, config)
                     for y, g in zip(one_hots, parentals)])


def _topk_hits(probs: np.ndarray, labels: np.ndarray, k: int) -> tuple[float, float]:
    """(top-1, top-k) accuracy; ties broken toward the lower class index."""
    # argsort on (-prob, index): stable sort over index handles ties
    order = np.argsort(-probs, axis=1, kind="stable")
    top1 = float((order[:, 0] == labels).mean())
    topk = float((order[:, :k] == labels[:, None]).any(axis=1).mean())
    return top1, topk


def train(train_x, train_one_hots: np.ndarray, train_parentals: np.ndarray,
          valid_x, valid_labels: np.ndarray, config: TrainConfig,
          mu: PriorWeights | None = None,
          featurizer_ref: str = "") -> TrainedModel:
    """Minibatch training with early stopping on validation top-k.

    ``train_x``/``valid_x`` are feature matrices (dense or CSR);
    ``valid_labels`` are 0-based class indices of the validation split.
    """
    n = train_x.shape[0]
    if n == 0 or valid_x.shape[0] == 0:
        raise ValueError("train and valid splits must be non-empty")
    targets = soft_targets(train_one_hots, train_parentals, mu,
                           config.smoothing)
    rng = np.random.default_rng(config.seed)
    params = init_params(train_x.shape[1], config.hidden, config.seed)
    state = AdamState.for_params(params)
    keep = 1.0 - config.dropout

    best_topk = -1.0
    best_epoch = 0
    best_params = params.copy()
    history: list[dict] = []
    epochs_since_improvement = 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb = train_x[idx]
            yb = targets[idx]
            mask = None
            if config.dropout > 0:
                mask = (rng.random((len(idx), config.hidden)) < keep) / keep
            _, probs, cache = forward(params, xb, dropout_mask=mask)
            loss = cross_entropy_soft(probs, yb)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}")
            epoch_loss += loss * len(idx)
            grads = backward(cache, probs, yb, params, config.l2)
            adam_step(params, grads, state, config.learning_rate)
        epoch_loss /= n

        _, val_probs, _ = forward(params, valid_x)
        val_top1, val_topk = _topk_hits(val_probs, valid_labels, config.k)
        history.append({"epoch": epoch, "train_loss": epoch_loss,
                        "val_top1": val_top1, "val_topk": val_topk})

        if val_topk > best_topk:
            best_topk = val_topk
            best_epoch = epoch
            best_params = params.copy()
            epochs_since_improvement = 0
        else:
            epochs_since_improvement += 1
            if epochs_since_improvement >= config.patience:
                break

    return TrainedModel(params=best_params, featurizer_ref=featurizer_ref,
                        config=config, best_epoch=best_epoch, history=history)


def predict_proba(model: TrainedModel, x) -> np.ndarray:
    _, probs, _ = forward(model.params, x)
    return probs


def predict_topk(model: TrainedModel, features,
                 k: int = 3) -> list[tuple[int, float]]:
    """Ranked (criterion id, confidence) pairs for a single feature vector."""
    if not 1 <= k <= NUM_CLASSES:
        raise ValueError("k must be in [1, 11]")
    probs = np.asarray(predict_proba(model, features)).reshape(-1)
    order = np.argsort(-probs, kind="stable")
    return [(int(i) + 1, float(probs[i])) for i in order[:k]]


def rank_classes(probs: np.ndarray) -> np.ndarray:
    """Full per-sample class rankings (1-based ids), ties to lower index."""
    order = np.argsort(-np.atleast_2d(probs), axis=1, kind="stable")
    return order + 1


# ---------------------------------------------------------------------------
# Checkpoints

def save_checkpoint(model: TrainedModel, path: str | Path) -> None:
    payload = {
        "config": _config_dict(model.config),
        "featurizer_ref": model.featurizer_ref,
        "best_epoch": model.best_epoch,
        "history": model.history,
        "params": {
            key: {"shape": list(arr.shape),
                  "data": [float(v) for v in arr.ravel()]}
            for key, arr in model.params.arrays().items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))


def load_checkpoint(path: str | Path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    cfg = dict(payload["config"])
    cfg["smoothing"] = SmoothingConfig(**cfg["smoothing"])
    arrays = {
        key: np.asarray(spec["data"], dtype=float).reshape(spec["shape"])
        for key, spec in payload["params"].items()
    }
    return TrainedModel(
        params=MlpParams(**arrays),
        featurizer_ref=payload["featurizer_ref"],
        config=TrainConfig(**cfg),
        best_epoch=payload["best_epoch"],
        history=payload["history"],
    )


def _config_dict(config: TrainConfig) -> dict:
    d = asdict(config)
    return d
