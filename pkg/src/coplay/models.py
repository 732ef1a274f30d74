"""Link-weight predictors over a directed weighted network.

* :class:`AverageBaseline` predicts the mean training weight everywhere.
* Graph factorization learns source factors ``U`` and target factors ``V``
  so that ``w_ij ~ <u_i, v_j>`` on observed links.
* The autoencoders reconstruct adjacency rows. The traditional variant
  penalizes every entry of the row; the teammate variant only penalizes
  observed links (and only sees observed links as input).

All gradients are written out by hand; tests check them against central
finite differences.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

ALL_ENTRIES = "all_entries"
OBSERVED_ONLY = "observed_only"
MASK_MODES = (ALL_ENTRIES, OBSERVED_ONLY)
ACTIVATIONS = ("relu", "linear")
DEFAULT_DIMS = (16, 64, 128, 256, 512, 1024)
OPTIMIZERS = ("momentum", "adam")
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDivergence(FloatingPointError):
    """Loss or gradient became non-finite during training."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 500
    patience: int = 20
    plateau: int = 10
    momentum: float = 0.9
    seed: int = 0
    dims: tuple = DEFAULT_DIMS
    weight_decay: float = 0.0
    validation_fraction: float = 0.0
    clip_norm: Optional[float] = None
    optimizer: str = "momentum"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1 or self.epochs < 1 or self.patience < 1 or self.plateau < 1:
            raise ValueError("batch_size, epochs, patience and plateau must be >= 1")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in [0, 1)")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ValueError("clip_norm must be > 0")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")


def _check_pair(n: int, i: int, j: int) -> None:
    if not (0 <= i < n and 0 <= j < n):
        raise KeyError(f"unknown node pair ({i}, {j}) for {n} nodes")
    if i == j:
        raise ValueError("self-links are not predicted")


# -- baseline ------------------------------------------------------------------

@dataclass
class AverageBaseline:
    mean: float
    n: Optional[int] = None

    def predict(self, src, dst) -> np.ndarray:
        return np.full(len(np.atleast_1d(src)), self.mean)


def baseline_average(train_weights, n: Optional[int] = None) -> AverageBaseline:
    w = np.asarray(train_weights, dtype=float)
    if w.size == 0:
        raise ValueError("baseline needs at least one training edge")
    return AverageBaseline(float(w.mean()), n)


@dataclass
class IdealPredictor:
    """Predicts the true weight; upper reference for ranking metrics."""

    truth: np.ndarray

    @property
    def n(self) -> int:
        return self.truth.shape[0]

    def predict(self, src, dst) -> np.ndarray:
        return self.truth[np.asarray(src), np.asarray(dst)]


# -- graph factorization -------------------------------------------------------

@dataclass
class FactorizationParams:
    U: np.ndarray
    V: np.ndarray
    lam: float = 0.0
    history: list = field(default_factory=list, repr=False)

    @property
    def d(self) -> int:
        return self.U.shape[1]

    @property
    def n(self) -> int:
        return self.U.shape[0]

    def predict(self, src, dst) -> np.ndarray:
        src, dst = np.asarray(src), np.asarray(dst)
        return np.einsum("ij,ij->i", self.U[src], self.V[dst])

    def embeddings(self) -> np.ndarray:
        return np.hstack([self.U, self.V])


def gf_loss(params: FactorizationParams, src, dst, w) -> float:
    """Squared error on observed links plus a per-link L2 penalty.

    The penalty ``lam/2 * (|u_i|^2 + |v_j|^2)`` is added once for every
    observed link ``(i, j)``, so high-degree nodes are regularized more.
    """
    Us, Vd = params.U[src], params.V[dst]
    err = np.asarray(w, dtype=float) - np.einsum("ij,ij->i", Us, Vd)
    reg = (Us ** 2).sum(axis=1) + (Vd ** 2).sum(axis=1)
    return float(np.sum(err ** 2) + params.lam / 2.0 * np.sum(reg))


def gf_grad(params: FactorizationParams, src, dst, w):
    """Gradient of :func:`gf_loss` with respect to ``(U, V)``."""
    Us, Vd = params.U[src], params.V[dst]
    err = np.asarray(w, dtype=float) - np.einsum("ij,ij->i", Us, Vd)
    gU = np.zeros_like(params.U)
    gV = np.zeros_like(params.V)
    np.add.at(gU, src, -2.0 * err[:, None] * Vd + params.lam * Us)
    np.add.at(gV, dst, -2.0 * err[:, None] * Us + params.lam * Vd)
    return gU, gV


class _Plateau:
    """Tracks the best loss, halves the learning rate on plateaus, stops on patience."""

    def __init__(self, cfg: TrainConfig):
        self.lr = cfg.learning_rate
        self.cfg = cfg
        self.best = math.inf
        self.wait = 0

    def update(self, loss: float) -> tuple[bool, bool]:
        """Returns ``(improved, stop)``."""
        if loss < self.best:
            self.best = loss
            self.wait = 0
            return True, False
        self.wait += 1
        if self.wait % self.cfg.plateau == 0:
            self.lr /= 2.0
        return False, self.wait >= self.cfg.patience


def _diverged(what: str, epoch: int, lr: float, last: float):
    return TrainingDivergence(
        f"{what} diverged at epoch {epoch} (learning rate {lr:g}, "
        f"last finite loss {last:g})")


class _Stepper:
    """In-place parameter updates: heavy-ball momentum or Adam.

    For Adam, ``cfg.momentum`` is the first-moment decay rate.
    """

    def __init__(self, params: Sequence[np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.first = [np.zeros_like(p) for p in params]
        self.second = [np.zeros_like(p) for p in params] if cfg.optimizer == "adam" else None
        self.t = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray], lr: float) -> None:
        beta1 = self.cfg.momentum
        self.t += 1
        if self.second is None:
            for p, g, m in zip(params, grads, self.first):
                m *= beta1
                m -= lr * g
                p += m
            return
        c1 = 1.0 - beta1 ** self.t
        c2 = 1.0 - ADAM_BETA2 ** self.t
        for p, g, m, v in zip(params, grads, self.first, self.second):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


def _holdout(rng: np.random.Generator, m: int, fraction: float) -> np.ndarray:
    """Boolean mask selecting ``round(fraction * m)`` validation items."""
    held = np.zeros(m, dtype=bool)
    k = int(math.floor(fraction * m + 0.5))
    if 0 < k < m:
        held[rng.choice(m, k, replace=False)] = True
    return held


def gf_train(n: int, src, dst, w, d: int, lam: float = 1e-4,
             cfg: TrainConfig = TrainConfig(learning_rate=0.01, batch_size=16),
             init_scale: float = 0.1) -> FactorizationParams:
    """Fit ``U, V`` by minibatch stochastic gradient descent with momentum.

    Each minibatch applies the summed per-link gradients, so a batch of one
    is classic per-link SGD. With ``cfg.validation_fraction > 0`` that share
    of links is held out and drives early stopping; otherwise the full
    training loss does. The best parameters are returned and
    ``params.history`` holds the monitored loss after every epoch.

    Raises:
        TrainingDivergence: the loss became non-finite.
    """
    if d < 1:
        raise ValueError("latent dimension must be >= 1")
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    w = np.asarray(w, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    params = FactorizationParams(init_scale * rng.standard_normal((n, d)),
                                 init_scale * rng.standard_normal((n, d)), lam)
    if len(w) == 0:
        return params
    held = _holdout(rng, len(w), cfg.validation_fraction)
    fit = np.flatnonzero(~held)
    val = np.flatnonzero(held)

    def monitored() -> float:
        if len(val):
            return float(np.sum((w[val] - params.predict(src[val], dst[val])) ** 2))
        return gf_loss(params, src, dst, w)

    stepper = _Stepper([params.U, params.V], cfg)
    sched = _Plateau(cfg)
    best = (params.U.copy(), params.V.copy())
    last = monitored()
    for epoch in range(cfg.epochs):
        order = fit[rng.permutation(len(fit))]
        for start in range(0, len(order), cfg.batch_size):
            b = order[start:start + cfg.batch_size]
            gU, gV = gf_grad(params, src[b], dst[b], w[b])
            stepper.step([params.U, params.V], [gU, gV], sched.lr)
        loss = monitored()
        if not (math.isfinite(loss) and np.all(np.isfinite(params.U))):
            raise _diverged("graph factorization", epoch, sched.lr, last)
        last = loss
        params.history.append(loss)
        improved, stop = sched.update(loss)
        if improved:
            best = (params.U.copy(), params.V.copy())
        if stop:
            break
    params.U, params.V = best
    return params


# -- autoencoders ----------------------------------------------------------------

@dataclass
class AutoencoderParams:
    weights: list  # W_k with shape (fan_in, fan_out)
    biases: list
    activations: list
    mask_mode: str = OBSERVED_ONLY
    embedding_layer: int = 1  # index of the layer whose output is the embedding
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.mask_mode not in MASK_MODES:
            raise ValueError(f"mask_mode must be one of {MASK_MODES}")
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        if len(self.weights) != len(self.biases) or len(self.weights) != len(self.activations):
            raise ValueError("weights, biases and activations must align")
        sizes = self.sizes
        if sizes[0] != sizes[-1]:
            raise ValueError("decoder output width must equal input width")

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    @property
    def n(self) -> int:
        return self.sizes[0]

    @property
    def d(self) -> int:
        return self.sizes[self.embedding_layer + 1]

    def copy(self) -> "AutoencoderParams":
        return AutoencoderParams([W.copy() for W in self.weights],
                                 [b.copy() for b in self.biases],
                                 list(self.activations), self.mask_mode,
                                 self.embedding_layer, list(self.history))


def layer_plan(n: int, d: int) -> tuple[list[int], list[str]]:
    """Encoder ``n -> 2d -> d`` and a mirrored decoder ``d -> 2d -> n``."""
    return [n, 2 * d, d, 2 * d, n], ["relu", "linear", "relu", "linear"]


def init_autoencoder(sizes: Sequence[int], activations: Sequence[str],
                     rng: np.random.Generator, mask_mode: str = OBSERVED_ONLY,
                     embedding_layer: Optional[int] = None) -> AutoencoderParams:
    weights, biases = [], []
    for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
        gain = 2.0 if act == "relu" else 1.0
        weights.append(rng.standard_normal((fan_in, fan_out)) * math.sqrt(gain / fan_in))
        biases.append(np.zeros(fan_out))
    if embedding_layer is None:
        embedding_layer = len(weights) // 2 - 1
    return AutoencoderParams(weights, biases, list(activations), mask_mode, embedding_layer)


def _act(name: str, z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) if name == "relu" else z


def _forward(params: AutoencoderParams, X: np.ndarray):
    if X.shape[-1] != params.n:
        raise ValueError(f"input width {X.shape[-1]} does not match model width {params.n}")
    outs = [X]
    pre = []
    h = X
    for W, b, act in zip(params.weights, params.biases, params.activations):
        z = h @ W + b
        pre.append(z)
        h = _act(act, z)
        outs.append(h)
    return pre, outs


def ae_forward(params: AutoencoderParams, x: np.ndarray):
    """Return ``(embedding, reconstruction)`` for one row or a batch of rows."""
    x = np.asarray(x, dtype=float)
    _, outs = _forward(params, np.atleast_2d(x))
    emb, rec = outs[params.embedding_layer + 1], outs[-1]
    if x.ndim == 1:
        return emb[0], rec[0]
    return emb, rec


def _model_input(X: np.ndarray, A: Optional[np.ndarray]) -> np.ndarray:
    return X if A is None else X * A


def traditional_ae_loss(params: AutoencoderParams, X: np.ndarray) -> float:
    """Sum of squared reconstruction errors over every entry of every row."""
    _, outs = _forward(params, X)
    return float(np.sum((outs[-1] - X) ** 2))


def teammate_ae_loss(params: AutoencoderParams, X: np.ndarray, A: np.ndarray) -> float:
    """Squared reconstruction error restricted to entries where ``A == 1``.

    The model is fed ``X * A``, so entries outside the mask affect neither
    the reconstruction nor the loss.
    """
    Xm = X * A
    _, outs = _forward(params, Xm)
    return float(np.sum(((outs[-1] - Xm) * A) ** 2))


def ae_loss_grad(params: AutoencoderParams, X: np.ndarray, A: Optional[np.ndarray] = None):
    """Loss and gradients ``[(dW, db), ...]`` by backpropagation.

    ``A=None`` gives the traditional loss; otherwise the masked loss.
    """
    Xin = _model_input(X, A)
    pre, outs = _forward(params, Xin)
    resid = outs[-1] - Xin
    if A is not None:
        resid = resid * A
    loss = float(np.sum(resid ** 2))
    delta = 2.0 * resid
    if A is not None:
        delta = delta * A
    grads = [None] * len(params.weights)
    for k in range(len(params.weights) - 1, -1, -1):
        if params.activations[k] == "relu":
            delta = delta * (pre[k] > 0)
        grads[k] = (outs[k].T @ delta, delta.sum(axis=0))
        if k:
            delta = delta @ params.weights[k].T
    return loss, grads


def ae_loss(params: AutoencoderParams, X: np.ndarray, A: Optional[np.ndarray] = None) -> float:
    if A is None:
        return traditional_ae_loss(params, X)
    return teammate_ae_loss(params, X, A)


def ae_train(X: np.ndarray, A: Optional[np.ndarray], d: int,
             cfg: TrainConfig = TrainConfig(),
             plan: Optional[tuple[Sequence[int], Sequence[str]]] = None) -> AutoencoderParams:
    """Train an autoencoder on adjacency rows by minibatch momentum descent.

    Args:
        X: ``n x n`` training adjacency (hidden links already zeroed).
        A: 0/1 mask of training links for the teammate variant, or ``None``
            for the traditional variant that penalizes every entry.
        d: embedding width.
        cfg: optimizer settings; the step uses the row-averaged gradient.
            ``weight_decay`` shrinks weight matrices (not biases) after every
            step. With ``validation_fraction > 0`` that share of the observed
            links (nonzero entries for the traditional variant) is removed
            from the input and the loss and drives early stopping.
        plan: optional ``(sizes, activations)``; defaults to :func:`layer_plan`.

    Raises:
        TrainingDivergence: non-finite loss or gradient.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    sizes, acts = plan if plan is not None else layer_plan(n, d)
    rng = np.random.default_rng(cfg.seed)
    mode = ALL_ENTRIES if A is None else OBSERVED_ONLY
    params = init_autoencoder(sizes, acts, rng, mode)

    observed = (A > 0) if A is not None else (X != 0)
    rows, cols = np.nonzero(observed)
    held = _holdout(rng, len(rows), cfg.validation_fraction)
    Xfit = X.copy()
    Xfit[rows[held], cols[held]] = 0.0
    if A is not None:
        Afit = A.copy()
        Afit[rows[held], cols[held]] = 0.0
    else:
        Afit = np.ones_like(X)
        Afit[rows[held], cols[held]] = 0.0
        if not held.any():
            Afit = None
    vr, vc, vw = rows[held], cols[held], X[rows[held], cols[held]]

    def monitored() -> float:
        if len(vw):
            _, rec = ae_forward(params, _model_input(Xfit, Afit if A is not None else None))
            return float(np.sum((rec[vr, vc] - vw) ** 2))
        return ae_loss(params, Xfit, Afit)

    stepper = _Stepper(params.weights + params.biases, cfg)
    sched = _Plateau(cfg)
    best = params.copy()
    last = monitored()
    shrink = 1.0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        if cfg.weight_decay:
            shrink = 1.0 - sched.lr * cfg.weight_decay
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            mask = None if Afit is None else Afit[batch]
            Xb = Xfit[batch]
            if A is None and mask is not None:
                # traditional input keeps every entry; held-out links are zeros
                _, grads = _masked_target_grad(params, Xb, mask)
            else:
                _, grads = ae_loss_grad(params, Xb, mask)
            norm = math.sqrt(sum(float(np.sum(gW * gW) + np.sum(gb * gb)) for gW, gb in grads))
            if not math.isfinite(norm):
                raise _diverged("autoencoder gradient", epoch, sched.lr, last)
            scale = 1.0 / len(batch)
            if cfg.clip_norm is not None and norm * scale > cfg.clip_norm:
                scale = cfg.clip_norm / norm
            flat = [scale * gW for gW, _ in grads] + [scale * gb for _, gb in grads]
            stepper.step(params.weights + params.biases, flat, sched.lr)
            if cfg.weight_decay:
                for W in params.weights:
                    W *= shrink
        loss = monitored()
        if not math.isfinite(loss):
            raise _diverged("autoencoder", epoch, sched.lr, last)
        last = loss
        params.history.append(loss)
        improved, stop = sched.update(loss)
        if improved:
            best = params.copy()
        if stop:
            break
    best.history = params.history
    return best


def _masked_target_grad(params: AutoencoderParams, X: np.ndarray, M: np.ndarray):
    """Full-row input, loss restricted to ``M``: traditional training with held-out entries."""
    pre, outs = _forward(params, X)
    resid = (outs[-1] - X) * M
    delta = 2.0 * resid
    grads = [None] * len(params.weights)
    for k in range(len(params.weights) - 1, -1, -1):
        if params.activations[k] == "relu":
            delta = delta * (pre[k] > 0)
        grads[k] = (outs[k].T @ delta, delta.sum(axis=0))
        if k:
            delta = delta @ params.weights[k].T
    return float(np.sum(resid ** 2)), grads


@dataclass
class AutoencoderModel:
    """Trained autoencoder bound to the rows it reconstructs at prediction time."""

    params: AutoencoderParams
    inputs: np.ndarray
    mask: Optional[np.ndarray] = None
    _recon: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.params.n

    def reconstruction(self) -> np.ndarray:
        if self._recon is None:
            _, self._recon = ae_forward(self.params, _model_input(self.inputs, self.mask))
        return self._recon

    def embeddings(self) -> np.ndarray:
        emb, _ = ae_forward(self.params, _model_input(self.inputs, self.mask))
        return emb

    def predict(self, src, dst) -> np.ndarray:
        return self.reconstruction()[np.asarray(src), np.asarray(dst)]


def predict_weight(model, i: int, j: int) -> float:
    """Predicted weight of the directed link ``i -> j``."""
    n = getattr(model, "n", None)
    if n is not None:
        _check_pair(n, i, j)
    elif i == j:
        raise ValueError("self-links are not predicted")
    return float(model.predict(np.array([i]), np.array([j]))[0])


# -- model construction from an edge list ---------------------------------------

MODEL_NAMES = ("baseline", "gf", "traditional_ae", "teammate_ae")


def dense_rows(n: int, src, dst, w) -> tuple[np.ndarray, np.ndarray]:
    """Adjacency rows and the 0/1 observed-link mask."""
    X = np.zeros((n, n))
    A = np.zeros((n, n))
    X[src, dst] = w
    A[src, dst] = 1.0
    return X, A


def fit_model(name: str, n: int, src, dst, w, d: int,
              cfg: Optional[TrainConfig] = None, lam: float = 1e-4):
    """Train one of :data:`MODEL_NAMES` on the observed links ``(src, dst, w)``."""
    if name == "baseline":
        return baseline_average(w, n)
    if name == "gf":
        return gf_train(n, src, dst, w, d, lam,
                        cfg or TrainConfig(learning_rate=0.01, batch_size=16))
    if name in ("traditional_ae", "teammate_ae"):
        X, A = dense_rows(n, src, dst, w)
        mask = A if name == "teammate_ae" else None
        params = ae_train(X, mask, d, cfg or TrainConfig())
        return AutoencoderModel(params, X, mask)
    raise KeyError(f"unknown model {name!r}; valid models: {', '.join(MODEL_NAMES)}")


# -- persistence -----------------------------------------------------------------

def _matrix(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": [float(x) for x in a.ravel(order="C")]}


def _unmatrix(obj: dict) -> np.ndarray:
    return np.array(obj["data"], dtype=float).reshape(obj["shape"])


def save_checkpoint(model, path, name: str, seed: Optional[int] = None,
                    config: Optional[dict] = None) -> None:
    """JSON container with the layer plan, row-major matrices, seed and config."""
    doc: dict = {"model": name, "seed": seed, "config": config or {}}
    if isinstance(model, AverageBaseline):
        doc["mean"] = model.mean
        doc["n"] = model.n
    elif isinstance(model, FactorizationParams):
        doc.update(U=_matrix(model.U), V=_matrix(model.V), lam=model.lam,
                   history=[float(x) for x in model.history])
    elif isinstance(model, AutoencoderModel):
        p = model.params
        doc.update(
            layer_plan=p.sizes, activations=p.activations, mask_mode=p.mask_mode,
            embedding_layer=p.embedding_layer,
            weights=[_matrix(W) for W in p.weights],
            biases=[_matrix(b) for b in p.biases],
            inputs=_matrix(model.inputs),
            mask=None if model.mask is None else _matrix(model.mask),
            history=[float(x) for x in p.history],
        )
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, sort_keys=True)


def load_checkpoint(path):
    with open(path, encoding="utf-8") as handle:
        doc = json.load(handle)
    if "mean" in doc:
        return AverageBaseline(doc["mean"], doc.get("n"))
    if "U" in doc:
        return FactorizationParams(_unmatrix(doc["U"]), _unmatrix(doc["V"]), doc["lam"],
                                   doc.get("history", []))
    if "weights" in doc:
        params = AutoencoderParams(
            [_unmatrix(W) for W in doc["weights"]],
            [_unmatrix(b) for b in doc["biases"]],
            doc["activations"], doc["mask_mode"], doc["embedding_layer"],
            doc.get("history", []))
        mask = None if doc.get("mask") is None else _unmatrix(doc["mask"])
        return AutoencoderModel(params, _unmatrix(doc["inputs"]), mask)
    raise ValueError(f"{path}: unrecognized checkpoint")


def export_embeddings(Y: np.ndarray, node_ids: Sequence[str], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["node_id"] + [f"y_{k + 1}" for k in range(Y.shape[1])])
        for node, row in zip(node_ids, Y):
            writer.writerow([node] + [repr(float(x)) for x in row])


def config_dict(cfg: TrainConfig) -> dict:
    out = asdict(cfg)
    out["dims"] = list(out["dims"])
    return out
