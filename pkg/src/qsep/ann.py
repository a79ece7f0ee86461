"""Linear and one-hidden-layer classifiers trained by full-batch gradient descent.

Both models map the four correlators to P(entangled) through a sigmoid
readout and are trained on mean binary cross-entropy.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .quantum import Label

EPS = 1e-12


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def relu(z):
    return np.maximum(z, 0.0)


def _as_batch(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


@dataclass
class LinearModel:
    """sigmoid(w . x + w0); w holds (w1, w2, w3, w4)."""

    w: np.ndarray
    w0: float = 0.0

    arch = "linear"

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float).reshape(4)
        self.w0 = float(self.w0)

    @property
    def n_ne(self) -> int:
        return 0

    def logits(self, x: np.ndarray) -> np.ndarray:
        return x @ self.w + self.w0

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.w, [self.w0]])

    @classmethod
    def from_vector(cls, vec, n_ne: int = 0) -> LinearModel:
        vec = np.asarray(vec, dtype=float)
        return cls(vec[:4].copy(), float(vec[4]))


@dataclass
class MlpModel:
    """sigmoid(W2 . relu(W1 x + w01) + w02) with ``n_ne`` hidden neurons."""

    W1: np.ndarray
    w01: np.ndarray
    W2: np.ndarray
    w02: float = 0.0

    arch = "mlp"

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=float).reshape(-1, 4)
        n = self.W1.shape[0]
        if n < 1:
            raise ValueError("an MLP needs at least one hidden neuron")
        self.w01 = np.asarray(self.w01, dtype=float).reshape(n)
        self.W2 = np.asarray(self.W2, dtype=float).reshape(n)
        self.w02 = float(self.w02)

    @property
    def n_ne(self) -> int:
        return self.W1.shape[0]

    def hidden(self, x: np.ndarray) -> np.ndarray:
        return relu(x @ self.W1.T + self.w01)

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.hidden(x) @ self.W2 + self.w02

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.w01, self.W2, [self.w02]])

    @classmethod
    def from_vector(cls, vec, n_ne: int) -> MlpModel:
        vec = np.asarray(vec, dtype=float)
        if len(vec) != 6 * n_ne + 1:
            raise ValueError(f"expected {6 * n_ne + 1} weights for n_ne={n_ne}, got {len(vec)}")
        k = 4 * n_ne
        return cls(vec[:k].reshape(n_ne, 4).copy(), vec[k:k + n_ne].copy(),
                   vec[k + n_ne:k + 2 * n_ne].copy(), float(vec[-1]))


def model_from_vector(arch: str, vec, n_ne: int = 0):
    if arch == "linear" or n_ne == 0:
        return LinearModel.from_vector(vec)
    return MlpModel.from_vector(vec, n_ne)


def forward(model, x):
    """P(entangled) for one feature vector or a batch, clamped to [EPS, 1 - EPS]."""
    xb, single = _as_batch(x)
    out = np.clip(sigmoid(model.logits(xb)), EPS, 1.0 - EPS)
    return float(out[0]) if single else out


def linear_forward(m: LinearModel, x):
    return forward(m, x)


def mlp_forward(m: MlpModel, x):
    return forward(m, x)


def bce_loss(pred, label):
    pred = np.clip(np.asarray(pred, dtype=float), EPS, 1.0 - EPS)
    y = np.asarray(label, dtype=float)
    loss = -(y * np.log(pred) + (1.0 - y) * np.log1p(-pred))
    return float(loss) if loss.ndim == 0 else loss


def mean_loss(model, x, y) -> float:
    return float(np.mean(bce_loss(forward(model, x), y)))


def loss_and_gradients(model, x, y):
    """Mean BCE and its exact gradient, returned as a model of the same shape.

    The ReLU subgradient at 0 is taken as 0.
    """
    x, _ = _as_batch(x)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n == 0:
        raise ValueError("empty batch")
    if isinstance(model, LinearModel):
        prob = sigmoid(model.logits(x))
        err = prob - y
        grad = LinearModel(err @ x / n, err.sum() / n)
    else:
        pre = x @ model.W1.T + model.w01
        h = relu(pre)
        prob = sigmoid(h @ model.W2 + model.w02)
        err = prob - y
        dpre = err[:, None] * model.W2
        dpre[pre <= 0] = 0.0
        grad = MlpModel(dpre.T @ x / n, dpre.sum(axis=0) / n, err @ h / n, err.sum() / n)
    loss = float(np.mean(bce_loss(prob, y)))
    return loss, grad


def gradients(model, x, y):
    return loss_and_gradients(model, x, y)[1]


@dataclass
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 20_000
    init_halfwidth: float = 0.5
    seed: int = 20180601
    threshold: float = 0.5
    max_halvings: int = 10

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.init_halfwidth <= 0:
            raise ValueError(f"invalid training configuration {self}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainReport:
    losses: np.ndarray
    train_match_rate: float
    wall_clock: float
    config: dict
    halvings: int = 0
    final_learning_rate: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "final_loss": float(self.losses[-1]),
            "first_loss": float(self.losses[0]),
            "losses": [float(v) for v in self.losses],
            "train_match_rate": self.train_match_rate,
            "wall_clock_s": self.wall_clock,
            "lr_halvings": self.halvings,
            "final_learning_rate": self.final_learning_rate,
            "config": self.config,
        }


class DegenerateDataError(ValueError):
    pass


def init_model(n_ne: int, cfg: TrainConfig):
    """Parameters drawn uniformly from [-init_halfwidth, init_halfwidth]."""
    rng = np.random.default_rng(cfg.seed)
    size = 5 if n_ne == 0 else 6 * n_ne + 1
    vec = rng.uniform(-cfg.init_halfwidth, cfg.init_halfwidth, size)
    return model_from_vector("linear" if n_ne == 0 else "mlp", vec, n_ne)


def train(x, y, n_ne: int = 0, cfg: TrainConfig | None = None):
    """Full-batch gradient descent on mean BCE.

    ``n_ne = 0`` trains the linear model.  An epoch whose step raises the loss
    is undone and the learning rate halved, at most ``cfg.max_halvings`` times;
    after that every step is accepted.
    """
    cfg = cfg or TrainConfig()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) == 0 or len(np.unique(y)) < 2:
        raise DegenerateDataError("training data must contain both labels")
    t0 = time.perf_counter()
    model = init_model(n_ne, cfg)
    lr = cfg.learning_rate
    halvings = 0
    params = model.to_vector()
    arch = model.arch
    losses = np.empty(cfg.epochs)
    loss, grad = loss_and_gradients(model, x, y)
    for epoch in range(cfg.epochs):
        losses[epoch] = loss
        step = params - lr * grad.to_vector()
        cand = model_from_vector(arch, step, n_ne)
        cand_loss, cand_grad = loss_and_gradients(cand, x, y)
        if cand_loss > loss and halvings < cfg.max_halvings:
            lr *= 0.5
            halvings += 1
            continue
        params, model, loss, grad = step, cand, cand_loss, cand_grad
    report = TrainReport(
        losses=losses,
        train_match_rate=match_rate_arrays(model, x, y, cfg.threshold),
        wall_clock=time.perf_counter() - t0,
        config=cfg.to_dict(),
        halvings=halvings,
        final_learning_rate=lr,
    )
    return model, report


def train_dataset(dataset, n_ne: int = 0, cfg: TrainConfig | None = None):
    return train(dataset.features, dataset.labels, n_ne, cfg)


def predict(model, x, threshold: float = 0.5):
    """Entangled iff forward(x) >= threshold; batches give an int array."""
    out = forward(model, x)
    if np.ndim(out) == 0:
        return Label.ENTANGLED if out >= threshold else Label.SEPARABLE
    return (out >= threshold).astype(np.int64)


def match_rate_arrays(model, x, y, threshold: float = 0.5) -> float:
    y = np.asarray(y)
    if len(y) == 0:
        raise ValueError("empty evaluation set")
    return float(np.mean(predict(model, x, threshold) == y))


def match_rate(model, dataset, threshold: float = 0.5) -> float:
    return match_rate_arrays(model, dataset.features, dataset.labels, threshold)


class ChshBaseline:
    """Standard CHSH test used as a classifier: entangled iff a CHSH combination exceeds 2.

    With ``signs=None`` every CHSH sign pattern is tried; otherwise only the
    given one.
    """

    arch = "chsh"
    n_ne = 0

    def __init__(self, signs=None):
        self.signs = None if signs is None else np.asarray(signs, dtype=float)

    def score(self, x) -> np.ndarray:
        from .measurement import CHSH_SIGN_PATTERNS

        xb, _ = _as_batch(x)
        if self.signs is not None:
            return np.abs(xb @ self.signs)
        return np.max(np.abs(xb @ np.array(CHSH_SIGN_PATTERNS, dtype=float).T), axis=1)

    def logits(self, x):
        # finite stand-in so forward() stays in (0, 1); the sign is what matters
        return np.where(self.score(x) > 2.0, 1.0, -1.0)
